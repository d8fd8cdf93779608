//! Weak-inequality route to decay envelopes.
//!
//! The pipeline turns a tradeoff curve beta (how much oscillation-normalized
//! energy can resist dissipating when we pay a given exchange scale s) into an
//! explicit decay curve. Steps: build `BetaFn`, take the convex conjugate
//! `K*` of `u -> u beta(1/u)`, then integrate `dw / K*(w)` downward from the
//! oscillation cap `a`. The result is a decreasing time-to-level function `F`
//! whose inverse bounds the windowed energy at time t.
//!
//! Numerical stance: every sup is searched from below (log grid plus golden
//! refinement where the integrand is cheap), so tabulated `K*` values are
//! never above the true conjugate and the certified envelope errs on the slow
//! side. Tail tables extend past their last knot with the boundary log-log
//! tangent, which is exact for polynomial tails and an overestimate for the
//! stretched-exponential ones, again the safe direction.

use crate::constants::ConstantsBundle;
use crate::model::{Model, ModelError, VelocityInequality};
use crate::num::{bisect, golden_max, golden_min, MonotoneCubic};

const LN10: f64 = core::f64::consts::LN_10;
/// Tail values below exp(LN_STOP) are tabulated as zero.
const LN_STOP: f64 = -700.0;
/// Hard cap on tail-table arguments; past this the table extrapolates.
const S_CAP: f64 = 1e290;
/// Conjugate values below this end the K* tabulation.
const KSTAR_FLOOR: f64 = 1e-300;
/// Smallest w the K* tabulation descends to.
const W_FLOOR: f64 = 1e-300;
/// The decay-time integral stops once it exceeds this.
const F_CAP: f64 = 1e200;
/// Legendre search grid in u spans [1e-280, 1e280].
const LN_U_LO: f64 = -644.677;
const LN_U_HI: f64 = 644.677;
const U_PER_DECADE: usize = 8;

/// Tabulated nonincreasing tail curve: full mass up to `s_full`, then a
/// monotone log-log interpolant, zero once the table bottomed out at the
/// representable floor.
#[derive(Debug, Clone)]
pub struct TailTable {
    s_full: f64,
    curve: MonotoneCubic,
    ln_s_hi: f64,
    floored: bool,
}

impl TailTable {
    /// Curve value; 1 on [0, s_full], interpolated or extrapolated beyond.
    pub fn eval(&self, s: f64) -> f64 {
        if !(s > self.s_full) {
            return 1.0;
        }
        let x = s.ln();
        if x > self.ln_s_hi && self.floored {
            return 0.0;
        }
        let y = self.curve.eval(x);
        if y < LN_STOP {
            0.0
        } else {
            y.exp()
        }
    }

    /// Largest argument still carrying full measure.
    pub fn s_full(&self) -> f64 {
        self.s_full
    }

    /// Builds the curve s -> P(level(s) <= X) for a scalar statistic X with
    /// increasing level map level(s) = sqrt((s - offset) / scale). The caller
    /// supplies the radius where the statistic reaches a level (None when it
    /// never does) and the log tail mass past a radius.
    fn build(
        offset: f64,
        scale: f64,
        radius_for: impl Fn(f64) -> Option<f64>,
        ln_tail: impl Fn(f64) -> f64,
    ) -> Result<TailTable, ModelError> {
        if !(offset >= 0.0 && offset.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
            return Err(ModelError::InvalidParameter(
                "tail table needs a finite nonnegative offset and a positive scale".into(),
            ));
        }
        let s_full = offset + scale;
        let ln_beta_at = |s: f64| -> f64 {
            let level = ((s - offset) / scale).max(0.0).sqrt();
            if level <= 1.0 {
                return 0.0;
            }
            match radius_for(level) {
                Some(r) if r.is_finite() => ln_tail(r),
                _ => f64::NEG_INFINITY,
            }
        };
        // Probe by decades to find where the curve bottoms out.
        let mut ln_hi = s_full.ln();
        let mut floored = false;
        loop {
            let next = ln_hi + LN10;
            if next.exp() > S_CAP {
                break;
            }
            let y = ln_beta_at(next.exp());
            ln_hi = next;
            if y < LN_STOP || y == f64::NEG_INFINITY {
                floored = true;
                break;
            }
        }
        // Final grid: at least 200 knots, at least 4 per decade.
        let ln_lo = s_full.ln();
        let range = (ln_hi - ln_lo).max(1e-6);
        let n = 200usize.max((range / (LN10 / 4.0)).ceil() as usize) + 1;
        let step = range / (n - 1) as f64;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        xs.push(ln_lo);
        ys.push(0.0);
        for k in 1..n {
            let x = ln_lo + step * k as f64;
            let mut y = ln_beta_at(x.exp());
            if y == f64::NEG_INFINITY || y < LN_STOP {
                y = LN_STOP - 50.0;
                xs.push(x);
                ys.push(y);
                floored = true;
                break;
            }
            xs.push(x);
            ys.push(y.min(0.0));
        }
        if xs.len() < 2 {
            xs.push(ln_lo + 1e-6);
            ys.push(0.0);
        }
        let ln_s_hi = *xs.last().unwrap();
        Ok(TailTable {
            s_full,
            curve: MonotoneCubic::new(xs, ys),
            ln_s_hi,
            floored,
        })
    }
}

/// Nonincreasing tradeoff curve on (0, infinity). Values above 1 and +inf are
/// allowed near zero; only the region below the oscillation cap influences
/// the conjugate.
#[derive(Debug, Clone)]
pub enum BetaFn {
    /// eta0 * s^(-eta1); unbounded as s -> 0.
    Poly { eta0: f64, eta1: f64 },
    /// eta0 * exp(-eta1 * s^eta2).
    StretchedExp { eta0: f64, eta1: f64, eta2: f64 },
    /// Tabulated measure tail.
    Tail(TailTable),
    /// inner(s - c), frozen at its s -> 0 value below the shift.
    Shifted { inner: Box<BetaFn>, c: f64 },
    /// inf over s1 * s2 = s of s1 * beta_v(s2 - c) + beta_x(s1), with the
    /// velocity factor frozen at its origin value for negative arguments.
    Chained {
        beta_x: Box<BetaFn>,
        beta_v: Box<BetaFn>,
        c: f64,
    },
    /// prefactor * inner(rate * s).
    Scaled {
        inner: Box<BetaFn>,
        rate: f64,
        prefactor: f64,
    },
}

impl BetaFn {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            BetaFn::Poly { eta0, eta1 } => {
                if s <= 0.0 {
                    f64::INFINITY
                } else {
                    eta0 * s.powf(-eta1)
                }
            }
            BetaFn::StretchedExp { eta0, eta1, eta2 } => {
                if s <= 0.0 {
                    *eta0
                } else {
                    eta0 * (-eta1 * s.powf(*eta2)).exp()
                }
            }
            BetaFn::Tail(t) => t.eval(s),
            BetaFn::Shifted { inner, c } => inner.eval((s - c).max(0.0)),
            BetaFn::Chained { beta_x, beta_v, c } => chained_inf(s, beta_x, beta_v, *c, false).1,
            BetaFn::Scaled {
                inner,
                rate,
                prefactor,
            } => prefactor * inner.eval(rate * s),
        }
    }

    /// Cheap evaluators get golden refinement inside the conjugate sweep;
    /// the chained infimum only gets the memoized grid (a small, documented
    /// underestimate, which keeps the certificate on the conservative side).
    fn is_cheap(&self) -> bool {
        match self {
            BetaFn::Poly { .. } | BetaFn::StretchedExp { .. } | BetaFn::Tail(_) => true,
            BetaFn::Shifted { inner, .. } | BetaFn::Scaled { inner, .. } => inner.is_cheap(),
            BetaFn::Chained { .. } => false,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidParameter(msg.into()));
        match self {
            BetaFn::Poly { eta0, eta1 } => {
                if !(eta0.is_finite() && *eta0 > 0.0 && eta1.is_finite() && *eta1 > 0.0) {
                    return bad("polynomial rate curve needs positive finite coefficients");
                }
            }
            BetaFn::StretchedExp { eta0, eta1, eta2 } => {
                if !(*eta0 > 0.0 && *eta1 > 0.0 && *eta2 > 0.0)
                    || !(eta0.is_finite() && eta1.is_finite() && eta2.is_finite())
                {
                    return bad("stretched-exponential rate curve needs positive finite parameters");
                }
            }
            BetaFn::Tail(_) => {}
            BetaFn::Shifted { inner, c } => {
                if !(*c >= 0.0 && c.is_finite()) {
                    return bad("shift must be finite and nonnegative");
                }
                inner.validate()?;
            }
            BetaFn::Chained { beta_x, beta_v, c } => {
                if !(*c >= 0.0 && c.is_finite()) {
                    return bad("chaining shift must be finite and nonnegative");
                }
                beta_x.validate()?;
                beta_v.validate()?;
            }
            BetaFn::Scaled {
                inner,
                rate,
                prefactor,
            } => {
                if !(*rate > 0.0 && rate.is_finite() && *prefactor > 0.0 && prefactor.is_finite()) {
                    return bad("scaling needs a positive finite rate and prefactor");
                }
                inner.validate()?;
            }
        }
        Ok(())
    }
}

/// Splits s multiplicatively and minimizes s1 * bv(s/s1 - c) + bx(s1).
/// `constrained` restricts to s1 > 1 and s/s1 > c (the form the dissipation
/// argument proves directly); the unconstrained version freezes bv at its
/// origin value for negative arguments. Returns (argmin, value); an empty
/// constrained domain yields (NaN, +inf).
fn chained_inf(s: f64, bx: &BetaFn, bv: &BetaFn, c: f64, constrained: bool) -> (f64, f64) {
    if !(s > 0.0) {
        return (f64::NAN, f64::INFINITY);
    }
    let obj = |y: f64| -> f64 {
        if !(y > 0.0) || !y.is_finite() {
            return f64::INFINITY;
        }
        let s2 = s / y - c;
        if constrained && (y <= 1.0 || s2 <= 0.0) {
            return f64::INFINITY;
        }
        let t = bv.eval(s2.max(0.0));
        if !t.is_finite() {
            return f64::INFINITY;
        }
        let b = bx.eval(y);
        if !b.is_finite() {
            return f64::INFINITY;
        }
        y * t + b
    };
    let (ln_lo, ln_hi) = if constrained {
        if s <= c || !(s / c > 1.0) && c > 0.0 {
            return (f64::NAN, f64::INFINITY);
        }
        let hi = if c > 0.0 { (s / c).min(S_CAP) } else { S_CAP.min(s.max(10.0) * 1e6) };
        if hi <= 1.0 {
            return (f64::NAN, f64::INFINITY);
        }
        ((1.0f64 + 1e-12).ln(), hi.ln() - 1e-12)
    } else {
        let hi = S_CAP.min(s.max(10.0) * 1e6);
        ((1e-6f64).ln(), hi.ln())
    };
    if !(ln_hi > ln_lo) {
        let y = ln_lo.exp();
        return (y, obj(y));
    }
    let steps = (((ln_hi - ln_lo) / (LN10 / 4.0)).ceil() as usize).clamp(16, 2400);
    let dx = (ln_hi - ln_lo) / steps as f64;
    let mut best = (ln_lo, f64::INFINITY);
    for k in 0..=steps {
        let x = ln_lo + dx * k as f64;
        let v = obj(x.exp());
        if v < best.1 {
            best = (x, v);
        }
    }
    if !best.1.is_finite() {
        return (f64::NAN, f64::INFINITY);
    }
    let (xr, vr) = golden_min(
        (best.0 - dx).max(ln_lo),
        (best.0 + dx).min(ln_hi),
        1e-10,
        |x| obj(x.exp()),
    );
    if vr < best.1 {
        (xr.exp(), vr)
    } else {
        (best.0.exp(), best.1)
    }
}

/// Chained tradeoff of a spatial and a velocity curve with shift c >= 0.
pub fn chain(beta_x: BetaFn, beta_v: BetaFn, c: f64) -> Result<BetaFn, ModelError> {
    let b = BetaFn::Chained {
        beta_x: Box::new(beta_x),
        beta_v: Box::new(beta_v),
        c,
    };
    b.validate()?;
    Ok(b)
}

/// beta(s - c) for s >= c, frozen at the origin value below.
pub fn shift(inner: BetaFn, c: f64) -> Result<BetaFn, ModelError> {
    let b = BetaFn::Shifted {
        inner: Box::new(inner),
        c,
    };
    b.validate()?;
    Ok(b)
}

/// prefactor * inner(rate * s).
pub fn scale(inner: BetaFn, rate: f64, prefactor: f64) -> Result<BetaFn, ModelError> {
    let b = BetaFn::Scaled {
        inner: Box::new(inner),
        rate,
        prefactor,
    };
    b.validate()?;
    Ok(b)
}

/// Spatial tradeoff curve: the equilibrium mass where s1 <= 2 Z_W C0^2 W^2 + 1
/// still holds, as a tail table over the weight level.
pub fn beta_tail_x(model: &Model, z_w: f64, c0_tau: f64) -> Result<BetaFn, ModelError> {
    if !(z_w > 0.0 && z_w.is_finite() && c0_tau > 0.0 && c0_tau.is_finite()) {
        return Err(ModelError::InvalidParameter(
            "spatial tail curve needs positive finite Z_W and C0_tau".into(),
        ));
    }
    let k = 2.0 * z_w * c0_tau * c0_tau;
    TailTable::build(
        1.0,
        k,
        |lvl| model.weight.radius_for(lvl),
        |r| model.log_tail_mu(r),
    )
    .map(BetaFn::Tail)
}

/// Velocity tradeoff curve from the origin-pinned weighted inequality:
/// the equilibrium mass where the gradient weight G exceeds sqrt(s / P_pin).
pub fn beta_tail_v(model: &Model) -> Result<BetaFn, ModelError> {
    let p_pin = match model.kinetic.ineq {
        VelocityInequality::WeakPi { p_v_pinned } => p_v_pinned,
        _ => {
            return Err(ModelError::Unsupported(
                "the velocity tail curve comes from the origin-pinned weighted inequality; \
                 this kinetic energy certifies through a different route"
                    .into(),
            ))
        }
    };
    if !(p_pin > 0.0 && p_pin.is_finite()) {
        return Err(ModelError::InvalidParameter(
            "origin-pinned velocity constant must be positive and finite".into(),
        ));
    }
    TailTable::build(
        0.0,
        p_pin,
        |lvl| Some(model.kinetic.g_radius_for(lvl)),
        |r| model.log_tail_nu(r),
    )
    .map(BetaFn::Tail)
}

/// Convex conjugate of u -> u beta(1/u), tabulated on a descending log-w grid
/// from the cap `a` down to where it vanishes numerically.
#[derive(Debug, Clone)]
pub struct KStar {
    a: f64,
    ln_w: Vec<f64>,
    ln_k: Vec<f64>,
    curve: MonotoneCubic,
    /// Exact (coefficient, exponent) when the source curve was polynomial.
    pub power_law: Option<(f64, f64)>,
}

impl KStar {
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Smallest tabulated w; below it the conjugate is reported as zero.
    pub fn w_min(&self) -> f64 {
        self.ln_w[0].exp()
    }

    /// Natural-log knots (ln w, ln K*), ascending in w.
    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.ln_w, &self.ln_k)
    }

    pub fn eval(&self, w: f64) -> f64 {
        if !(w > 0.0) {
            return 0.0;
        }
        let x = w.ln();
        if x < self.ln_w[0] {
            return 0.0;
        }
        self.curve.eval(x).exp()
    }
}

/// Computes K*(w) = sup_u u (w - beta(1/u)) on a log grid of w below the cap.
///
/// The u search runs over a fixed 8-per-decade grid spanning [1e-280, 1e280]
/// with the curve values memoized once, plus golden refinement when the curve
/// is cheap to evaluate.
pub fn legendre_kstar(beta: &BetaFn, a: f64) -> Result<KStar, ModelError> {
    beta.validate()?;
    if !(a > 0.0 && a <= 0.25) {
        return Err(ModelError::InvalidParameter(
            "oscillation cap must lie in (0, 1/4]".into(),
        ));
    }
    let n_u = (((LN_U_HI - LN_U_LO) / LN10) * U_PER_DECADE as f64).ceil() as usize + 1;
    let du = (LN_U_HI - LN_U_LO) / (n_u - 1) as f64;
    let ln_u: Vec<f64> = (0..n_u).map(|i| LN_U_LO + du * i as f64).collect();
    let uvals: Vec<f64> = ln_u.iter().map(|&t| t.exp()).collect();
    let bvals: Vec<f64> = ln_u.iter().map(|&t| beta.eval((-t).exp())).collect();
    let cheap = beta.is_cheap();

    let h = LN10 / 32.0;
    let max_knots = 12_000usize;
    let mut ln_w = a.ln();
    let mut ws: Vec<f64> = Vec::new();
    let mut ks: Vec<f64> = Vec::new();
    for _ in 0..max_knots {
        let w = ln_w.exp();
        // Full scan of the fixed affine family u (w - beta(1/u)): its grid sup
        // is exactly convex in w, which downstream tabulation checks rely on.
        let mut bi = 0usize;
        let mut bv = 0.0f64;
        for i in 0..n_u {
            let v = uvals[i] * (w - bvals[i]);
            if v > bv {
                bv = v;
                bi = i;
            }
        }
        let mut kv = bv;
        if kv > 0.0 && cheap {
            let lo = ln_u[bi.saturating_sub(1)];
            let hi = ln_u[(bi + 1).min(n_u - 1)];
            let (_, v) = golden_max(lo, hi, 1e-10, |t| t.exp() * (w - beta.eval((-t).exp())));
            kv = kv.max(v);
        }
        if !(kv > KSTAR_FLOOR) {
            break;
        }
        ws.push(ln_w);
        ks.push(kv.ln());
        if w <= W_FLOOR {
            break;
        }
        ln_w -= h;
    }
    if ws.is_empty() {
        return Err(ModelError::InvalidParameter(
            "the dissipation conjugate vanishes at the oscillation cap; the tradeoff curve \
             never drops below the cap on the searched scale range"
                .into(),
        ));
    }
    ws.reverse();
    ks.reverse();
    let power_law = match beta {
        BetaFn::Poly { eta0, eta1 } => {
            let p = 1.0 + 1.0 / eta1;
            Some((eta0 * eta1 / (eta0 * (1.0 + eta1)).powf(p), p))
        }
        _ => None,
    };
    let curve = MonotoneCubic::new(ws.clone(), ks.clone());
    Ok(KStar {
        a,
        ln_w: ws,
        ln_k: ks,
        curve,
        power_law,
    })
}

/// Decay-time integral F(z) = int_z^a dw / K*(w) with its inverse.
///
/// Stored as ln(F + kappa) with kappa = a / K*(a): linear in F near the cap
/// (where F << kappa) and logarithmic across the astronomical range the
/// certified constants produce, so one monotone interpolant covers both ends.
#[derive(Debug, Clone)]
pub struct RateFunction {
    a: f64,
    ln_z: Vec<f64>,
    ln_f_plus: Vec<f64>,
    ln_kappa: f64,
    curve: MonotoneCubic,
    t_max: f64,
}

impl RateFunction {
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Deepest tabulated level; the inverse saturates here.
    pub fn z_min(&self) -> f64 {
        self.ln_z[0].exp()
    }

    /// Largest tabulated time; queries beyond clamp to `z_min`, keeping the
    /// envelope valid (it just stops decreasing).
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Time needed to certify level z.
    pub fn f(&self, z: f64) -> f64 {
        if z >= self.a {
            return 0.0;
        }
        if z <= self.z_min() {
            return self.t_max;
        }
        // F = kappa (exp(y - ln kappa) - 1), stable down to F << kappa.
        self.ln_kappa.exp() * (self.curve.eval(z.ln()) - self.ln_kappa).exp_m1()
    }

    /// Level certified by time t.
    pub fn f_inv(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return self.a;
        }
        if t >= self.t_max {
            return self.z_min();
        }
        let target = self.ln_kappa + (t / self.ln_kappa.exp()).ln_1p();
        let lo = self.ln_z[0];
        let hi = *self.ln_z.last().unwrap();
        let x = bisect(lo, hi, 1e-13, |x| target - self.curve.eval(x));
        x.exp()
    }
}

/// Integrates dw / K*(w) down from the cap by composite Simpson on the
/// conjugate's own log grid (knot values are exact, the grid is uniform in
/// ln w), stopping at the conjugate floor or the time cap of 1e200.
pub fn rate_function(kstar: &KStar, a: f64) -> Result<RateFunction, ModelError> {
    if !(a > 0.0 && a <= 0.25) {
        return Err(ModelError::InvalidParameter(
            "oscillation cap must lie in (0, 1/4]".into(),
        ));
    }
    if (a - kstar.a()).abs() > 1e-12 * kstar.a() {
        return Err(ModelError::InvalidParameter(
            "the decay-time integral must start at the conjugate's own cap; rebuild the \
             conjugate at the requested cap"
                .into(),
        ));
    }
    let (ln_w, ln_k) = kstar.knots();
    let n = ln_w.len();
    if n < 3 {
        return Err(ModelError::InvalidParameter(
            "conjugate tabulation too short to integrate".into(),
        ));
    }
    // Integrand in ln-space: dw / K* = (w / K*(w)) d(ln w).
    let g = |j: usize| (ln_w[j] - ln_k[j]).exp();
    let top = n - 1;
    // Interpolate y = ln(F + kappa) with kappa = a / K*(a): for a power-law
    // conjugate c w^p this makes y exactly affine in ln z up to the (p - 1)
    // mismatch in the offset, so the near-cap segment where F crosses kappa is
    // resolved to cubic accuracy instead of fighting the asinh knee.
    let ln_kappa = ln_w[top] - ln_k[top];
    let kappa = ln_kappa.exp();
    let mut ln_z = vec![ln_w[top]];
    let mut yv = vec![ln_kappa];
    let mut f_acc = 0.0f64;
    let mut t_max = 0.0f64;
    let mut j = top;
    while j >= 2 {
        let width = ln_w[j] - ln_w[j - 2];
        f_acc += width / 6.0 * (g(j) + 4.0 * g(j - 1) + g(j - 2));
        if !f_acc.is_finite() || f_acc > F_CAP {
            break;
        }
        ln_z.push(ln_w[j - 2]);
        yv.push(ln_kappa + (f_acc / kappa).ln_1p());
        t_max = f_acc;
        j -= 2;
    }
    if ln_z.len() < 2 {
        return Err(ModelError::InvalidParameter(
            "decay-time integral exceeded its cap on the first step; the conjugate is \
             degenerate at the cap"
                .into(),
        ));
    }
    ln_z.reverse();
    yv.reverse();
    let curve = MonotoneCubic::new(ln_z.clone(), yv.clone());
    Ok(RateFunction {
        a,
        ln_z,
        ln_f_plus: yv,
        ln_kappa,
        curve,
        t_max,
    })
}

impl RateFunction {
    /// Tabulated (ln z, ln(F + a/K*(a))) knots, ascending in z.
    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.ln_z, &self.ln_f_plus)
    }
}

/// Certified factor c_tilde with K_shifted*(v) >= c_tilde K*(v) on (0, 1/8):
/// c_tilde = 1 / (1 + c w_bar) with w_bar = sup{u : beta(1/u) <= 1/8}.
pub fn kstar_shift_bound(beta: &BetaFn, c: f64) -> Result<f64, ModelError> {
    beta.validate()?;
    if !(c >= 0.0 && c.is_finite()) {
        return Err(ModelError::InvalidParameter(
            "shift must be finite and nonnegative".into(),
        ));
    }
    // w_bar = 1 / s8 where s8 is the first scale with beta <= 1/8.
    let step = LN10 / 8.0;
    let mut prev = LN_STOP;
    if beta.eval(prev.exp()) <= 0.125 {
        return Err(ModelError::InvalidParameter(
            "the tradeoff curve starts at or below 1/8, so the shift certificate is vacuous"
                .into(),
        ));
    }
    let mut found = None;
    let mut x = prev + step;
    while x <= -LN_STOP {
        if beta.eval(x.exp()) <= 0.125 {
            found = Some((prev, x));
            break;
        }
        prev = x;
        x += step;
    }
    let (lo, hi) = found.ok_or_else(|| {
        ModelError::Unsupported(
            "the tradeoff curve never falls below 1/8 on the searched range; no shift \
             certificate"
                .into(),
        )
    })?;
    let s8 = bisect(lo, hi, 1e-13, |x| 0.125 - beta.eval(x.exp())).exp();
    let w_bar = 1.0 / s8;
    Ok(1.0 / (1.0 + c * w_bar))
}

/// Which weak dissipation route produced a kinetic tradeoff curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakRoute {
    /// Velocity spectral gap; the curve is a spatial weight tail with an
    /// additive velocity offset.
    GapTail,
    /// Both marginals weak; spatial and velocity tails chained.
    ChainedTails,
    /// Strong spatial confinement with a weak velocity marginal.
    StrongSpatial,
}

/// Diagnostics of the chained construction, kept for reporting.
#[derive(Debug, Clone)]
pub struct ChainDiagnostics {
    pub beta_x: BetaFn,
    pub beta_v: BetaFn,
    /// Additive shift gamma^2 C1^2 / C0^2 inside the velocity factor.
    pub c: f64,
    /// Prefactor relating the provable constrained split to the clean
    /// unconstrained one.
    pub c_bar: f64,
    /// Scale past which the unconstrained split is feasible as proved.
    pub m_threshold: f64,
}

/// Kinetic tradeoff curve ready for the conjugate pipeline.
#[derive(Debug, Clone)]
pub struct KineticBeta {
    pub beta: BetaFn,
    pub route: WeakRoute,
    pub chain: Option<ChainDiagnostics>,
}

/// Builds the kinetic tradeoff curve for a scenario.
///
/// Velocity spectral gap: a weight tail with offset 1/(2 gamma C_P) and scale
/// Z_W (C0^2 / (gamma C_P) + C1^2 gamma). Weak velocity inequality: the
/// chained spatial and velocity tails, scaled by (2 gamma, C_bar). Strong
/// spatial confinement: the velocity tail shifted by gamma/2 and scaled by
/// the spatial Poincare-Lions constant `c_pl`.
pub fn beta_kin(
    model: &Model,
    bundle: Option<&ConstantsBundle>,
    gamma: f64,
    c_pl: Option<f64>,
) -> Result<KineticBeta, ModelError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(ModelError::InvalidParameter(
            "friction must be positive and finite".into(),
        ));
    }
    if !model.potential.is_weak() {
        let c_pl = c_pl.ok_or_else(|| {
            ModelError::InvalidParameter(
                "strong spatial confinement needs the spatial Poincare-Lions constant".into(),
            )
        })?;
        if !(c_pl > 0.0 && c_pl.is_finite()) {
            return Err(ModelError::InvalidParameter(
                "spatial Poincare-Lions constant must be positive and finite".into(),
            ));
        }
        if model.kinetic.has_spectral_gap() {
            return Err(ModelError::Unsupported(
                "spectral gaps on both marginals certify exponential decay directly; \
                 the weak route adds nothing there"
                    .into(),
            ));
        }
        let b_v = beta_tail_v(model)?;
        let beta = scale(shift(b_v, 0.5 * gamma)?, 1.0 / c_pl, c_pl)?;
        return Ok(KineticBeta {
            beta,
            route: WeakRoute::StrongSpatial,
            chain: None,
        });
    }
    let bundle = bundle.ok_or_else(|| {
        ModelError::InvalidParameter(
            "weakly confined scenarios need the assembled constants bundle".into(),
        )
    })?;
    let z_w = bundle.spatial.z_w;
    let c0 = bundle.averaging.c0_tau;
    let c1 = bundle.averaging.c1_tau;
    match model.kinetic.ineq {
        VelocityInequality::Poincare { c_p } => {
            let c_tilde = z_w * (c0 * c0 / (gamma * c_p) + c1 * c1 * gamma);
            let offset = 1.0 / (2.0 * gamma * c_p);
            let table = TailTable::build(
                offset,
                c_tilde,
                |lvl| model.weight.radius_for(lvl),
                |r| model.log_tail_mu(r),
            )?;
            Ok(KineticBeta {
                beta: BetaFn::Tail(table),
                route: WeakRoute::GapTail,
                chain: None,
            })
        }
        VelocityInequality::WeakPi { .. } => {
            let b_x = beta_tail_x(model, z_w, c0)?;
            let b_v = beta_tail_v(model)?;
            let c = gamma * gamma * c1 * c1 / (c0 * c0);
            let (c_bar, m) = chained_prefactor(&b_x, &b_v, c, gamma)?;
            let chained = chain(b_x.clone(), b_v.clone(), c)?;
            let beta = scale(chained, 2.0 * gamma, c_bar)?;
            Ok(KineticBeta {
                beta,
                route: WeakRoute::ChainedTails,
                chain: Some(ChainDiagnostics {
                    beta_x: b_x,
                    beta_v: b_v,
                    c,
                    c_bar,
                    m_threshold: m,
                }),
            })
        }
        VelocityInequality::WeightedG { .. } => Err(ModelError::Unsupported(
            "a mean-centered weighted velocity inequality certifies through the algebraic \
             envelope; the weak route needs the origin-pinned tail inequality"
                .into(),
        )),
    }
}

/// Grid construction of the prefactor C_bar and the feasibility threshold M.
///
/// The provable curve is the constrained split (s1 > 1, s2 > c on the 2
/// gamma s budget); the clean curve is the unconstrained one. M is the
/// smallest grid scale past which the unconstrained minimizer is feasible
/// everywhere on the grid, and C_bar covers the ratio below M. A final sweep
/// checks domination (or that the clean curve stays above the largest cap
/// 1/4 where the constrained domain is empty), so an invalid certificate
/// cannot be constructed silently.
fn chained_prefactor(
    b_x: &BetaFn,
    b_v: &BetaFn,
    c: f64,
    gamma: f64,
) -> Result<(f64, f64), ModelError> {
    let s_fx = match b_x {
        BetaFn::Tail(t) => t.s_full(),
        _ => 1.0,
    };
    let s_fv = match b_v {
        BetaFn::Tail(t) => t.s_full(),
        _ => 1.0,
    };
    let s0 = ((1.0 + s_fx) * (c + s_fv) / (2.0 * gamma)).max(1e-30);
    let per_decade = 10usize;
    let lo = s0 * 1e-4;
    let mut hi = s0 * 1e10;
    for _extend in 0..3 {
        let n = (((hi / lo).ln() / LN10) * per_decade as f64).ceil() as usize + 1;
        let dx = (hi.ln() - lo.ln()) / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|k| (lo.ln() + dx * k as f64).exp()).collect();
        let mut feas = vec![false; n];
        let mut bar = vec![f64::NAN; n];
        for (k, &s) in grid.iter().enumerate() {
            let (y, v) = chained_inf(2.0 * gamma * s, b_x, b_v, c, false);
            bar[k] = v;
            if y.is_finite() && v.is_finite() {
                let s2 = 2.0 * gamma * s / y;
                feas[k] = y >= 1.0 && s2 >= c;
            }
        }
        // Smallest index from which feasibility holds through the grid end.
        let mut m_idx = None;
        for k in (0..n).rev() {
            if feas[k] {
                m_idx = Some(k);
            } else {
                break;
            }
        }
        let Some(mi) = m_idx else {
            hi *= 1e5;
            continue;
        };
        let m = grid[mi];
        let mut c_bar = 1.0f64;
        for (k, &s) in grid.iter().enumerate().take(mi + 1) {
            if 2.0 * gamma * s <= c {
                continue;
            }
            let (_, tl) = chained_inf(2.0 * gamma * s, b_x, b_v, c, true);
            if tl.is_finite() && bar[k].is_finite() && bar[k] > 0.0 {
                c_bar = c_bar.max(tl / bar[k]);
            }
        }
        // Validity sweep at the constructed prefactor.
        for (k, &s) in grid.iter().enumerate() {
            let dominated = if 2.0 * gamma * s <= c {
                c_bar * bar[k] >= 0.25
            } else {
                let (_, tl) = chained_inf(2.0 * gamma * s, b_x, b_v, c, true);
                !tl.is_finite() || c_bar * bar[k] >= tl * (1.0 - 1e-9)
            };
            if !dominated {
                return Err(ModelError::Unsupported(
                    "the scaled clean tradeoff curve fails to dominate the provable \
                     constrained one on the audit grid"
                        .into(),
                ));
            }
        }
        return Ok((c_bar, m));
    }
    Err(ModelError::Unsupported(
        "no scale past which the unconstrained split stays feasible on the searched grid".into(),
    ))
}
