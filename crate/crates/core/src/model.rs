//! Confinement model: spatial potential, kinetic potential, spatial weight,
//! and the quadrature plumbing for their equilibrium measures.
//!
//! Everything here is radially symmetric, so d-dimensional integrals reduce
//! to one radial quadrature against `r^{d-1} e^{-phi(r)}`. Tail masses are
//! computed in log space (the rate calculus queries them far below f64
//! underflow of the raw density product).

use crate::num::{golden_max, sphere_area};
use crate::quad::{self, QuadError};

#[derive(Debug, Clone, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Quadrature policy: `tol` is the relative/absolute target for reported
/// integrals, `tail` the equilibrium mass allowed beyond the truncation
/// radius used to size the core interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadCfg {
    pub tol: f64,
    pub tail: f64,
}

impl Default for QuadCfg {
    fn default() -> Self {
        Self { tol: 1e-10, tail: 1e-8 }
    }
}

impl QuadCfg {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return Err(ModelError::InvalidParameter(format!(
                "quadrature tol must lie in (0, 1e-2], got {}",
                self.tol
            )));
        }
        if !(self.tail > 0.0 && self.tail <= 1e-4) {
            return Err(ModelError::InvalidParameter(format!(
                "quadrature tail target must lie in (0, 1e-4], got {}",
                self.tail
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    /// phi(x) = <x>^alpha. Weak confinement for alpha in (0,1); alpha >= 1 is
    /// the strongly confined regime (no spatial weight machinery).
    SubExp { alpha: f64 },
    /// phi(x) = (p + d) log<x>, polynomially decaying equilibrium.
    Log { p: f64 },
}

#[derive(Debug, Clone)]
pub struct Potential {
    pub kind: PotentialKind,
    pub d: usize,
    /// sup |grad phi|; None when the gradient is unbounded (alpha > 1).
    pub lip_grad: Option<f64>,
    /// two-sided Hessian eigenvalue bound; None when unbounded.
    pub hess_bound: Option<f64>,
}

#[inline]
fn bracket(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}

impl Potential {
    pub fn phi(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::SubExp { alpha } => bracket(r).powf(alpha),
            PotentialKind::Log { p } => (p + self.d as f64) * 0.5 * (1.0 + r * r).ln(),
        }
    }

    /// d phi / d r.
    pub fn dphi(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::SubExp { alpha } => alpha * r * bracket(r).powf(alpha - 2.0),
            PotentialKind::Log { p } => (p + self.d as f64) * r / (1.0 + r * r),
        }
    }

    /// Radial Hessian eigenvalue phi''(r).
    pub fn hess_radial(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::SubExp { alpha } => {
                alpha * bracket(r).powf(alpha - 4.0) * (1.0 + (alpha - 1.0) * r * r)
            }
            PotentialKind::Log { p } => {
                (p + self.d as f64) * (1.0 - r * r) / ((1.0 + r * r) * (1.0 + r * r))
            }
        }
    }

    /// Tangential Hessian eigenvalue phi'(r)/r (multiplicity d-1).
    pub fn hess_tangential(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::SubExp { alpha } => alpha * bracket(r).powf(alpha - 2.0),
            PotentialKind::Log { p } => (p + self.d as f64) / (1.0 + r * r),
        }
    }

    /// Weak confinement means the weighted-Poincare route applies.
    pub fn is_weak(&self) -> bool {
        match self.kind {
            PotentialKind::SubExp { alpha } => alpha < 1.0,
            PotentialKind::Log { .. } => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KineticKind {
    /// psi(v) = |v|^2 / 2.
    Gaussian,
    /// psi(v) = <v>^delta.
    SubExp { delta: f64 },
    /// psi(v) = (q + d) log<v>.
    Log { q: f64 },
}

/// The velocity functional inequality designated for the certificate route.
///
/// Three conventions, matching the three certification paths:
/// - `Poincare`: spectral gap, Var_nu(f) <= (1/c_p) nu(|grad f|^2);
/// - `WeightedG`: nu-mean-centered weighted inequality
///   int G^{-2} (f - nu(f))^2 d nu <= p_v ||grad f||^2, the constant the
///   polynomial-rate certificate consumes;
/// - `WeakPi`: origin-pinned weighted inequality with constant p_v_pinned,
///   from which the tail rate function
///   beta_v(s) = nu(G >= sqrt(s / p_v_pinned)) is built.
///
/// The centered and pinned constants genuinely differ: for heavy velocity
/// tails (Log with q <= d + 1) no finite centered constant exists, while the
/// pinned one always does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityInequality {
    Poincare { c_p: f64 },
    WeightedG { delta_w: f64, p_v: f64 },
    WeakPi { p_v_pinned: f64 },
}

#[derive(Debug, Clone)]
pub struct Kinetic {
    pub kind: KineticKind,
    pub d: usize,
    pub ineq: VelocityInequality,
    /// exponent of the velocity weight G = <v>^e (0 when unused).
    pub g_exponent: f64,
}

impl Kinetic {
    pub fn psi(&self, r: f64) -> f64 {
        match self.kind {
            KineticKind::Gaussian => 0.5 * r * r,
            KineticKind::SubExp { delta } => bracket(r).powf(delta),
            KineticKind::Log { q } => (q + self.d as f64) * 0.5 * (1.0 + r * r).ln(),
        }
    }

    pub fn dpsi(&self, r: f64) -> f64 {
        match self.kind {
            KineticKind::Gaussian => r,
            KineticKind::SubExp { delta } => delta * r * bracket(r).powf(delta - 2.0),
            KineticKind::Log { q } => (q + self.d as f64) * r / (1.0 + r * r),
        }
    }

    pub fn hess_radial(&self, r: f64) -> f64 {
        match self.kind {
            KineticKind::Gaussian => 1.0,
            KineticKind::SubExp { delta } => {
                delta * bracket(r).powf(delta - 4.0) * (1.0 + (delta - 1.0) * r * r)
            }
            KineticKind::Log { q } => {
                (q + self.d as f64) * (1.0 - r * r) / ((1.0 + r * r) * (1.0 + r * r))
            }
        }
    }

    pub fn hess_tangential(&self, r: f64) -> f64 {
        match self.kind {
            KineticKind::Gaussian => 1.0,
            KineticKind::SubExp { delta } => delta * bracket(r).powf(delta - 2.0),
            KineticKind::Log { q } => (q + self.d as f64) / (1.0 + r * r),
        }
    }

    /// G(v) = <v>^{g_exponent}.
    pub fn g_weight(&self, r: f64) -> f64 {
        bracket(r).powf(self.g_exponent)
    }

    /// Radius where G first reaches u (G is increasing); 0 for u <= 1.
    pub fn g_radius_for(&self, u: f64) -> f64 {
        if u <= 1.0 || self.g_exponent <= 0.0 {
            return 0.0;
        }
        let b = u.powf(2.0 / self.g_exponent);
        (b - 1.0).max(0.0).sqrt()
    }

    pub fn has_spectral_gap(&self) -> bool {
        matches!(self.ineq, VelocityInequality::Poincare { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    /// W = 1 (strongly confined potentials; weighted route unavailable).
    One,
    /// W = <x>^e with e in (0, 1].
    Bracket { e: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    MuckenhouptNumeric,
    UserSupplied,
}

#[derive(Debug, Clone)]
pub struct Weight {
    pub kind: WeightKind,
    /// moment exponent: int W^sigma d mu must be finite.
    pub sigma: f64,
    /// sup |grad W| / W.
    pub theta_w: f64,
    /// weighted spatial Poincare constant; None when the weighted route is
    /// unavailable (W = 1).
    pub p_w: Option<f64>,
    pub p_w_provenance: Provenance,
    /// Normalizer of W^-2 d mu, cached when the builder already evaluated it
    /// so that downstream constants reuse the identical value; in the
    /// logarithmic family P_W is defined through this number, and reporting
    /// a second quadrature of the same integral would break the algebraic
    /// tie between the two published constants.
    pub z_w: Option<f64>,
}

impl Weight {
    pub fn eval(&self, r: f64) -> f64 {
        match self.kind {
            WeightKind::One => 1.0,
            WeightKind::Bracket { e } => bracket(r).powf(e),
        }
    }

    /// Radius where W first reaches u; 0 for u <= 1, None if W never
    /// reaches u (W = 1).
    pub fn radius_for(&self, u: f64) -> Option<f64> {
        match self.kind {
            WeightKind::One => (u <= 1.0).then_some(0.0),
            WeightKind::Bracket { e } => {
                if u <= 1.0 {
                    Some(0.0)
                } else {
                    Some((u.powf(2.0 / e) - 1.0).max(0.0).sqrt())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Lebesgue,
    Mu,
    Nu,
    MuW,
}

/// Assembled model: everything the constants and rate layers consume.
#[derive(Debug, Clone)]
pub struct Model {
    pub potential: Potential,
    pub kinetic: Kinetic,
    pub weight: Weight,
    pub d: usize,
    pub quad: QuadCfg,
    /// full-space normalizer of e^{-phi} (includes the angular factor).
    pub z_x: f64,
    /// full-space normalizer of e^{-psi}.
    pub z_v: f64,
}

/// Overrides for constants that otherwise come from closed forms or the
/// numeric Muckenhoupt bound, plus the velocity-route preference.
#[derive(Debug, Clone, Copy, Default)]
pub struct BenchmarkOpts {
    pub sigma: Option<f64>,
    pub delta_w: Option<f64>,
    pub theta_w: Option<f64>,
    pub p_w: Option<f64>,
    pub p_v: Option<f64>,
    pub c_p_nu: Option<f64>,
    /// designate the nu-mean-centered weighted inequality (polynomial
    /// certificate) instead of the default weak-inequality tail route.
    pub prefer_centered_weighted: bool,
}

impl Model {
    /// Radial integral of `f` against the chosen measure. `f` sees the
    /// radius; for Lebesgue the angular factor is included, for probability
    /// measures the result is normalized.
    pub fn integrate_radial(
        &self,
        m: Measure,
        f: impl Fn(f64) -> f64,
    ) -> Result<f64, ModelError> {
        let area = sphere_area(self.d);
        let dm1 = (self.d - 1) as f64;
        let tol = self.quad.tol;
        let g: Box<dyn Fn(f64) -> f64> = match m {
            Measure::Lebesgue => Box::new(move |r: f64| f(r) * r.powf(dm1)),
            Measure::Mu => {
                let pot = self.potential.clone();
                Box::new(move |r: f64| f(r) * r.powf(dm1) * (-pot.phi(r)).exp())
            }
            Measure::Nu => {
                let kin = self.kinetic.clone();
                Box::new(move |r: f64| f(r) * r.powf(dm1) * (-kin.psi(r)).exp())
            }
            Measure::MuW => {
                let pot = self.potential.clone();
                let w = self.weight.clone();
                Box::new(move |r: f64| {
                    let wv = w.eval(r);
                    f(r) * r.powf(dm1) * (-pot.phi(r)).exp() / (wv * wv)
                })
            }
        };
        let core = self.truncation_radius(m)?;
        let mut acc = quad::integrate(&*g, 0.0, core, tol * 0.1, tol * 0.1)?;
        acc += settle_tail(&*g, core, tol, acc)?;
        let norm = match m {
            Measure::Lebesgue => 1.0,
            Measure::Mu | Measure::MuW => self.z_x / area,
            Measure::Nu => self.z_v / area,
        };
        Ok(acc / norm)
    }

    /// Truncation radius: the equilibrium mass beyond it is below the tail
    /// target, located by bisection on the log tail mass. For Lebesgue a
    /// fixed core is returned; the expanding panels beyond do the real work.
    pub fn truncation_radius(&self, m: Measure) -> Result<f64, ModelError> {
        if m == Measure::Lebesgue {
            return Ok(16.0);
        }
        let target = self.quad.tail.ln();
        let tail = |r: f64| -> f64 {
            match m {
                Measure::Lebesgue => unreachable!(),
                Measure::Mu | Measure::MuW => self.log_tail_mu(r),
                Measure::Nu => self.log_tail_nu(r),
            }
        };
        let mut hi = 1.0;
        let mut n = 0;
        while tail(hi) > target {
            hi *= 2.0;
            n += 1;
            if n > 300 {
                return Err(ModelError::Unsupported(
                    "tail mass target unreachable (measure mass not settling)".into(),
                ));
            }
        }
        let lo = if n == 0 { 1e-6 } else { hi / 2.0 };
        Ok(crate::num::bisect(lo, hi, 1e-6, |r| tail(r) - target).max(1.0))
    }

    /// ln mu({|x| >= r}); exact down to extreme tails via the exp-shift
    /// representation, never just underflowing to -inf while the mass is
    /// representable in log space.
    pub fn log_tail_mu(&self, r: f64) -> f64 {
        let pot = self.potential.clone();
        let d = self.d;
        let m = move |s: f64| pot.phi(s) - ((d - 1) as f64) * s.max(1e-300).ln();
        log_tail_radial(&m, r, sphere_area(self.d), self.z_x)
    }

    /// ln nu({|v| >= r}).
    pub fn log_tail_nu(&self, r: f64) -> f64 {
        let kin = self.kinetic.clone();
        let d = self.d;
        let m = move |s: f64| kin.psi(s) - ((d - 1) as f64) * s.max(1e-300).ln();
        log_tail_radial(&m, r, sphere_area(self.d), self.z_v)
    }

    /// One-dimensional equilibrium densities for the solver (d = 1 only).
    pub fn rho_mu_1d(&self, x: f64) -> f64 {
        debug_assert_eq!(self.d, 1);
        (-self.potential.phi(x.abs())).exp() / self.z_x
    }

    pub fn rho_nu_1d(&self, v: f64) -> f64 {
        debug_assert_eq!(self.d, 1);
        (-self.kinetic.psi(v.abs())).exp() / self.z_v
    }
}

/// Expanding-panel settling of `g` beyond `core`, relative to `acc`.
fn settle_tail(
    g: &dyn Fn(f64) -> f64,
    core: f64,
    tol: f64,
    acc: f64,
) -> Result<f64, ModelError> {
    let mut lo = core;
    let mut width = core.max(1.0);
    let mut extra = 0.0;
    let mut prev: Option<f64> = None;
    for _ in 0..900 {
        let hi = lo + width;
        if !hi.is_finite() {
            break;
        }
        let v = quad::integrate(g, lo, hi, tol * 0.05, tol * 0.05)?;
        extra += v;
        let scale = (acc + extra).abs().max(1e-300);
        if let Some(pv) = prev {
            let ratio = if pv.abs() > 0.0 { (v / pv).abs() } else { 0.0 };
            if ratio < 0.95 {
                let remainder = v.abs() * ratio / (1.0 - ratio);
                if remainder <= tol * scale * 0.5 {
                    return Ok(extra);
                }
            }
        } else if v.abs() <= tol * scale * 1e-3 {
            return Ok(extra);
        }
        prev = Some(v);
        lo = hi;
        width *= 2.0;
    }
    Err(ModelError::Quad(QuadError::TailNotSettled {
        panel_lo: lo,
        panel_hi: lo + width,
        contribution: prev.unwrap_or(f64::NAN),
        accumulated: acc + extra,
    }))
}

/// ln of `area / z * int_r^inf e^{-m(s)} ds` where `m` is increasing for
/// large s. The integral is shifted by m(r) so the quadrature runs on an
/// O(1) integrand regardless of how deep the tail is.
fn log_tail_radial(m: &dyn Fn(f64) -> f64, r: f64, area: f64, z: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let m_r = m(r);
    let shifted = move |s: f64| (-(m(r + s) - m_r)).exp();
    // local decay scale of the integrand
    let h = 1e-4 * (1.0 + r);
    let slope = ((m(r + h) - m_r) / h).max(1e-12);
    let fw = (3.0 / slope).clamp(1e-3 * (1.0 + r), 10.0 * (1.0 + r));
    let integral = expanding_panels_coarse(&shifted, fw);
    (-m_r) + integral.ln() + area.ln() - z.ln()
}

/// Non-failing expanding-panel integral for the shifted tail integrand; used
/// only inside log-tail evaluation where the integrand is <= 1 and decays.
fn expanding_panels_coarse(g: &dyn Fn(f64) -> f64, first_width: f64) -> f64 {
    let mut lo = 0.0;
    let mut width = first_width;
    let mut acc = 0.0;
    let mut prev: Option<f64> = None;
    for _ in 0..200 {
        let hi = lo + width;
        let v = quad::integrate(g, lo, hi, 1e-13, 1e-11).unwrap_or_else(|_| {
            // fall back to a fixed refinement; the integrand is bounded
            let n = 2000;
            let dh = (hi - lo) / n as f64;
            (0..n).map(|i| g(lo + (i as f64 + 0.5) * dh) * dh).sum()
        });
        acc += v;
        if let Some(pv) = prev {
            let ratio = if pv.abs() > 0.0 { (v / pv).abs() } else { 0.0 };
            if ratio < 0.95 && v.abs() * ratio / (1.0 - ratio) < 1e-12 * acc.abs().max(1e-300) {
                break;
            }
        }
        prev = Some(v);
        lo = hi;
        width *= 2.0;
    }
    acc.max(f64::MIN_POSITIVE)
}

/// Assemble a benchmark model. Closed-form constants are used where the
/// confinement family provides them; otherwise the 1-D Muckenhoupt bound
/// fills in, and explicit overrides win over both.
pub fn make_benchmark(
    pot_kind: PotentialKind,
    kin_kind: KineticKind,
    d: usize,
    quad_cfg: QuadCfg,
    opts: BenchmarkOpts,
) -> Result<Model, ModelError> {
    quad_cfg.validate()?;
    if d == 0 {
        return Err(ModelError::InvalidParameter("dimension must be >= 1".into()));
    }
    match pot_kind {
        PotentialKind::SubExp { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
            return Err(ModelError::InvalidParameter(format!(
                "subexp potential needs alpha > 0, got {alpha}"
            )))
        }
        PotentialKind::Log { p } if !(p > 0.0 && p.is_finite()) => {
            return Err(ModelError::InvalidParameter(format!(
                "log potential needs p > 0, got {p}"
            )))
        }
        _ => {}
    }
    match kin_kind {
        KineticKind::SubExp { delta } if !(delta > 0.0 && delta.is_finite()) => {
            return Err(ModelError::InvalidParameter(format!(
                "subexp kinetic needs delta > 0, got {delta}"
            )))
        }
        KineticKind::Log { q } if !(q > 0.0 && q.is_finite()) => {
            return Err(ModelError::InvalidParameter(format!(
                "log kinetic needs q > 0, got {q}"
            )))
        }
        _ => {}
    }

    let potential = build_potential(pot_kind, d);
    let z_x = normalizer(d, &|r| potential.phi(r))?;
    let mut kinetic = build_kinetic(kin_kind, d);
    let z_v = normalizer(d, &|r| kinetic.psi(r))?;

    let weight = build_weight(&potential, d, z_x, quad_cfg, &opts)?;

    let mut model = Model {
        potential,
        kinetic: kinetic.clone(),
        weight,
        d,
        quad: quad_cfg,
        z_x,
        z_v,
    };
    kinetic.ineq = velocity_inequality(&model, &opts)?;
    model.kinetic = kinetic;
    Ok(model)
}

fn build_potential(kind: PotentialKind, d: usize) -> Potential {
    let (lip, hess) = match kind {
        PotentialKind::Log { p } => {
            // sup (p+d) r / (1+r^2) = (p+d)/2 at r = 1; |Hessian| peaks at 0.
            (Some((p + d as f64) / 2.0), Some(p + d as f64))
        }
        PotentialKind::SubExp { alpha } => {
            if alpha > 1.0 {
                (None, None)
            } else if alpha == 1.0 {
                (Some(1.0), Some(1.0))
            } else {
                // sup alpha r <r>^{alpha-2} at r^2 = 1/(1-alpha)
                let r2 = 1.0 / (1.0 - alpha);
                let l = alpha * r2.sqrt() * (1.0 + r2).powf((alpha - 2.0) / 2.0);
                // radial eigenvalue alpha <r>^{alpha-4} (1 + (alpha-1) r^2):
                // scan its absolute value; the tangential branch is <= alpha.
                let g = |r: f64| {
                    (alpha
                        * (1.0 + r * r).powf((alpha - 4.0) / 2.0)
                        * (1.0 + (alpha - 1.0) * r * r))
                        .abs()
                };
                let (_, sup1) = golden_max(0.0, 4.0, 1e-12, g);
                let (_, sup2) = golden_max(4.0, 400.0, 1e-12, g);
                let m = alpha.max(sup1).max(sup2) * (1.0 + 1e-9);
                (Some(l), Some(m))
            }
        }
    };
    Potential { kind, d, lip_grad: lip, hess_bound: hess }
}

fn build_kinetic(kind: KineticKind, d: usize) -> Kinetic {
    let g_exponent = match kind {
        KineticKind::Gaussian => 0.0,
        KineticKind::SubExp { delta } => {
            if delta >= 1.0 {
                0.0
            } else {
                1.0 - delta
            }
        }
        KineticKind::Log { .. } => 1.0,
    };
    Kinetic {
        kind,
        d,
        // placeholder; finalized once the normalizers exist
        ineq: VelocityInequality::Poincare { c_p: 1.0 },
        g_exponent,
    }
}

fn normalizer(d: usize, phi: &dyn Fn(f64) -> f64) -> Result<f64, ModelError> {
    let dm1 = (d - 1) as f64;
    let g = move |r: f64| r.powf(dm1) * (-phi(r)).exp();
    let v = quad::integrate_to_inf(g, 0.0, 1.0, 1e-13, 1e-12)?;
    Ok(v * sphere_area(d))
}

fn build_weight(
    potential: &Potential,
    d: usize,
    z_x: f64,
    quad_cfg: QuadCfg,
    opts: &BenchmarkOpts,
) -> Result<Weight, ModelError> {
    if !potential.is_weak() {
        return Ok(Weight {
            kind: WeightKind::One,
            sigma: opts.sigma.unwrap_or(1.0),
            theta_w: opts.theta_w.unwrap_or(0.0),
            p_w: None,
            p_w_provenance: Provenance::ClosedForm,
            z_w: None,
        });
    }
    match potential.kind {
        PotentialKind::Log { p } => {
            let sigma = opts.sigma.unwrap_or(p / 2.0);
            if !(sigma > 0.0 && sigma < p) {
                return Err(ModelError::InvalidParameter(format!(
                    "log potential requires sigma in (0, p): sigma = {sigma}, p = {p}"
                )));
            }
            let kind = WeightKind::Bracket { e: 1.0 };
            let probe = Weight {
                kind,
                sigma,
                theta_w: 1.0,
                p_w: None,
                p_w_provenance: Provenance::ClosedForm,
                z_w: None,
            };
            let z_w = z_w_of(potential, &probe, d, z_x, quad_cfg)?;
            let (p_w, prov) = match opts.p_w {
                Some(v) => (v, Provenance::UserSupplied),
                // known sharp-order constant for this family: 2 / (p Z_W)
                None => (2.0 / (p * z_w), Provenance::ClosedForm),
            };
            Ok(Weight {
                kind,
                sigma,
                theta_w: opts.theta_w.unwrap_or(1.0),
                p_w: Some(p_w),
                p_w_provenance: prov,
                z_w: Some(z_w),
            })
        }
        PotentialKind::SubExp { alpha } => {
            let sigma = opts.sigma.unwrap_or(4.0);
            if sigma <= 0.0 {
                return Err(ModelError::InvalidParameter("sigma must be > 0".into()));
            }
            let kind = WeightKind::Bracket { e: 1.0 - alpha };
            let (p_w, prov) = match opts.p_w {
                Some(v) => (v, Provenance::UserSupplied),
                None => {
                    if d != 1 {
                        return Err(ModelError::Unsupported(
                            "numeric P_W bound is 1-D only; supply p_w for d > 1".into(),
                        ));
                    }
                    let w = Weight {
                        kind,
                        sigma,
                        theta_w: 1.0,
                        p_w: None,
                        p_w_provenance: Provenance::MuckenhouptNumeric,
                        z_w: None,
                    };
                    (muckenhoupt_p_w(potential, &w, z_x)?, Provenance::MuckenhouptNumeric)
                }
            };
            Ok(Weight {
                kind,
                sigma,
                theta_w: opts.theta_w.unwrap_or(1.0),
                p_w: Some(p_w),
                p_w_provenance: prov,
                z_w: None,
            })
        }
    }
}

fn z_w_of(
    potential: &Potential,
    weight: &Weight,
    d: usize,
    z_x: f64,
    quad_cfg: QuadCfg,
) -> Result<f64, ModelError> {
    let dm1 = (d - 1) as f64;
    let g = move |r: f64| {
        let w = weight.eval(r);
        r.powf(dm1) * (-potential.phi(r)).exp() / (w * w)
    };
    let v = quad::integrate_to_inf(g, 0.0, 1.0, quad_cfg.tol * 1e-2, quad_cfg.tol * 1e-2)?;
    Ok(v * sphere_area(d) / z_x)
}

/// 1-D Muckenhoupt-type upper bound for the weighted spatial Poincare
/// constant: with B = sup_r mu_W([r,inf)) * int_0^r 1/rho_mu, the
/// median-pinned inequality gives P_W <= 4 B (median at the origin by
/// symmetry; the mean-centered variant never exceeds the pinned one).
fn muckenhoupt_p_w(potential: &Potential, weight: &Weight, z_x: f64) -> Result<f64, ModelError> {
    // unnormalized half-line mass of W^{-2} e^{-phi}; mu_W tails divide by 2x this
    let half_mass = quad::integrate_to_inf(
        |r| {
            let w = weight.eval(r);
            (-potential.phi(r)).exp() / (w * w)
        },
        0.0,
        1.0,
        1e-13,
        1e-12,
    )?;
    let b_at = |r: f64| -> Result<f64, ModelError> {
        let tail = quad::integrate_to_inf(
            |s| {
                let w = weight.eval(s);
                (-potential.phi(s)).exp() / (w * w)
            },
            r,
            (1.0 + r) * 0.5,
            1e-14,
            1e-11,
        )? / (2.0 * half_mass);
        // 1/rho_mu = z_x e^{phi} for the two-sided density
        let inner = quad::integrate(|s| potential.phi(s).exp(), 0.0, r, 1e-13, 1e-11)? * z_x;
        Ok(tail * inner)
    };
    let b = sup_scan(&b_at, 0.05, 5e3, 1.15, |r| potential.phi(r))?;
    Ok(4.0 * b)
}

/// Scan log-spaced radii for the supremum of `f`, polish with a golden
/// search around the best sample. `phi_guard` caps the scan where e^{phi}
/// would overflow.
fn sup_scan(
    f: &dyn Fn(f64) -> Result<f64, ModelError>,
    r0: f64,
    r1: f64,
    step: f64,
    phi_guard: impl Fn(f64) -> f64,
) -> Result<f64, ModelError> {
    let mut best = (r0, 0.0f64);
    let mut r = r0;
    while r < r1 {
        if phi_guard(r) > 600.0 {
            break;
        }
        let v = f(r)?;
        if v > best.1 {
            best = (r, v);
        }
        r *= step;
    }
    let lo = best.0 / step;
    let hi = (best.0 * step).min(r1);
    let (_, polished) = golden_max(lo, hi, 1e-10, |r| f(r).unwrap_or(0.0));
    Ok(polished.max(best.1))
}

/// Pick and compute the designated velocity inequality.
fn velocity_inequality(
    model: &Model,
    opts: &BenchmarkOpts,
) -> Result<VelocityInequality, ModelError> {
    match model.kinetic.kind {
        KineticKind::Gaussian => Ok(VelocityInequality::Poincare {
            c_p: opts.c_p_nu.unwrap_or(1.0),
        }),
        KineticKind::SubExp { delta } if delta >= 1.0 => {
            let c_p = match opts.c_p_nu {
                Some(v) => v,
                None => {
                    if model.d != 1 {
                        return Err(ModelError::Unsupported(
                            "numeric C_P(nu) bound is 1-D only; supply c_p_nu for d > 1".into(),
                        ));
                    }
                    muckenhoupt_gap(&model.kinetic, model.z_v)?
                }
            };
            Ok(VelocityInequality::Poincare { c_p })
        }
        KineticKind::SubExp { .. } | KineticKind::Log { .. } => {
            if let Some(c_p) = opts.c_p_nu {
                return Ok(VelocityInequality::Poincare { c_p });
            }
            let delta_w = match (opts.delta_w, model.kinetic.kind) {
                (Some(v), _) => v,
                (None, KineticKind::Log { q }) => q / 2.0,
                (None, _) => 4.0,
            };
            if let KineticKind::Log { q } = model.kinetic.kind {
                // int G^{delta_w} d nu < infinity requires delta_w < q
                if !(delta_w > 0.0 && delta_w < q) {
                    return Err(ModelError::InvalidParameter(format!(
                        "log kinetic requires delta_w in (0, q): delta_w = {delta_w}, q = {q}"
                    )));
                }
            }
            if opts.prefer_centered_weighted {
                let p_v = match opts.p_v {
                    Some(v) => v,
                    None => {
                        if model.d != 1 {
                            return Err(ModelError::Unsupported(
                                "numeric P_v bound is 1-D only; supply p_v for d > 1".into(),
                            ));
                        }
                        centered_weighted_constant(model)?
                    }
                };
                Ok(VelocityInequality::WeightedG { delta_w, p_v })
            } else {
                let p_v_pinned = match opts.p_v {
                    Some(v) => v,
                    None => {
                        if model.d != 1 {
                            return Err(ModelError::Unsupported(
                                "numeric pinned P_v bound is 1-D only; supply p_v for d > 1"
                                    .into(),
                            ));
                        }
                        pinned_weighted_constant(model)?
                    }
                };
                Ok(VelocityInequality::WeakPi { p_v_pinned })
            }
        }
    }
}

/// 1-D Muckenhoupt lower bound on the spectral gap of nu:
/// Var_nu(f) <= 4 B ||f'||^2, so gap >= 1/(4B).
fn muckenhoupt_gap(kinetic: &Kinetic, z_v: f64) -> Result<f64, ModelError> {
    let b_at = |r: f64| -> Result<f64, ModelError> {
        let tail = quad::integrate_to_inf(
            |s| (-kinetic.psi(s)).exp(),
            r,
            (1.0 + r) * 0.5,
            1e-14,
            1e-11,
        )? / z_v;
        let inner = quad::integrate(|s| kinetic.psi(s).exp(), 0.0, r, 1e-13, 1e-11)? * z_v;
        Ok(tail * inner)
    };
    let b = sup_scan(&b_at, 0.05, 200.0, 1.12, |r| kinetic.psi(r))?;
    Ok(1.0 / (4.0 * b))
}

/// Origin-pinned weighted velocity constant (d = 1):
/// int G^{-2} (f - f(0))^2 d nu <= p ||f'||^2_{L2(nu)} with p = 4 B,
/// B = sup_r [int_r^inf G^{-2} d nu] [int_0^r 1/rho_nu].
/// Valid for every tail weight; feeds the weak-inequality tail rate.
fn pinned_weighted_constant(model: &Model) -> Result<f64, ModelError> {
    let kin = model.kinetic.clone();
    let z_v = model.z_v;
    let b_at = move |r: f64| -> Result<f64, ModelError> {
        let tail = quad::integrate_to_inf(
            |s| {
                let g = kin.g_weight(s);
                (-kin.psi(s)).exp() / (g * g)
            },
            r,
            (1.0 + r) * 0.5,
            1e-14,
            1e-11,
        )? / z_v;
        let inner = quad::integrate(|s| kin.psi(s).exp(), 0.0, r, 1e-13, 1e-11)? * z_v;
        Ok(tail * inner)
    };
    let kin2 = model.kinetic.clone();
    let b = sup_scan(&b_at, 0.05, 5e3, 1.15, move |r| kin2.psi(r))?;
    Ok(4.0 * b)
}

/// nu-mean-centered weighted velocity constant (d = 1):
/// int G^{-2} (f - nu(f))^2 d nu <= p_v ||f'||^2 with
/// p_v = 8 B + 2 Z_G kappa^2, where kappa^2 = 2 int_0^inf tail_nu(s)^2 /
/// rho_nu(s) ds controls the re-centering (nu(f) - f(0))^2.
///
/// kappa diverges exactly when no centered constant exists (Log kinetic with
/// q <= d + 1); that case is reported as unsupported rather than patched.
fn centered_weighted_constant(model: &Model) -> Result<f64, ModelError> {
    if let KineticKind::Log { q } = model.kinetic.kind {
        if q <= (model.d + 1) as f64 {
            return Err(ModelError::Unsupported(format!(
                "no nu-mean-centered weighted constant exists for log kinetic with \
                 q <= d + 1 (q = {q}); use the weak-inequality route instead"
            )));
        }
    }
    let pinned = pinned_weighted_constant(model)?;
    let z_g = model.integrate_radial(Measure::Nu, |r| {
        let g = model.kinetic.g_weight(r);
        1.0 / (g * g)
    })?;
    let z_v = model.z_v;
    let kin = model.kinetic.clone();
    let model2 = model.clone();
    // kappa^2 = 2 int (half tail)^2 / rho = (z_v / 2) int tail(s)^2 e^{psi(s)} ds
    let integrand = move |s: f64| {
        let log_t = model2.log_tail_nu(s);
        (2.0 * log_t + kin.psi(s)).exp()
    };
    let kappa_sq = quad::integrate_to_inf(integrand, 0.0, 1.0, 1e-12, 1e-8)? * z_v / 2.0;
    Ok(2.0 * pinned + 2.0 * z_g * kappa_sq)
}

/// One validated assumption line: what was checked, whether it holds, the
/// numeric value, and the grid point witnessing the worst ratio.
#[derive(Debug, Clone)]
pub struct AssumptionItem {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub worst_point: f64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub items: Vec<AssumptionItem>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }
}

/// Spot-check the standing assumptions on a radial grid plus quadrature for
/// the moment integrals. Failures do not panic; the report carries them.
pub fn validate_assumptions(model: &Model) -> Result<AssumptionReport, ModelError> {
    let mut items = Vec::new();
    let grid = check_grid(model)?;

    if model.potential.is_weak() {
        let w = &model.weight;
        let mut worst = (0.0f64, f64::INFINITY);
        for &r in &grid {
            let val = w.eval(r);
            if val < worst.1 {
                worst = (r, val);
            }
        }
        items.push(AssumptionItem {
            name: "weight lower bound W >= 1".into(),
            pass: worst.1 >= 1.0 - 1e-12,
            value: worst.1,
            worst_point: worst.0,
            detail: "min over check grid".into(),
        });

        let log_deriv = |r: f64| -> f64 {
            let e = match w.kind {
                WeightKind::One => 0.0,
                WeightKind::Bracket { e } => e,
            };
            e * r / (1.0 + r * r)
        };
        let mut worst = (0.0f64, 0.0f64);
        for &r in &grid {
            let v = log_deriv(r).abs();
            if v > worst.1 {
                worst = (r, v);
            }
        }
        let (rr, vv) = golden_max(0.0, worst.0 * 2.0 + 1.0, 1e-10, |r| log_deriv(r).abs());
        let sup = vv.max(worst.1);
        items.push(AssumptionItem {
            name: "weight log-derivative |grad W|/W <= theta_W".into(),
            pass: sup <= w.theta_w + 1e-12,
            value: sup,
            worst_point: if vv >= worst.1 { rr } else { worst.0 },
            detail: format!("theta_W = {}", w.theta_w),
        });

        let sigma = w.sigma;
        match model.integrate_radial(Measure::Mu, |r| w.eval(r).powf(sigma)) {
            Ok(v) => items.push(AssumptionItem {
                name: "moment int W^sigma d mu finite".into(),
                pass: v.is_finite() && v > 0.0,
                value: v,
                worst_point: f64::NAN,
                detail: format!("sigma = {sigma}"),
            }),
            Err(e) => items.push(AssumptionItem {
                name: "moment int W^sigma d mu finite".into(),
                pass: false,
                value: f64::INFINITY,
                worst_point: f64::NAN,
                detail: format!("quadrature: {e}"),
            }),
        }

        let z_w = model.integrate_radial(Measure::Mu, |r| {
            let wv = w.eval(r);
            1.0 / (wv * wv)
        })?;
        items.push(AssumptionItem {
            name: "normalizer Z_W in (0, 1]".into(),
            pass: z_w > 0.0 && z_w <= 1.0 + 1e-12,
            value: z_w,
            worst_point: f64::NAN,
            detail: String::new(),
        });
    }

    if let (Some(l), Some(m)) = (model.potential.lip_grad, model.potential.hess_bound) {
        let mut worst = (0.0f64, 0.0f64);
        for &r in &grid {
            let v = model.potential.dphi(r).abs();
            if v > worst.1 {
                worst = (r, v);
            }
        }
        items.push(AssumptionItem {
            name: "gradient bound |grad phi| <= L".into(),
            pass: worst.1 <= l * (1.0 + 1e-10),
            value: worst.1,
            worst_point: worst.0,
            detail: format!("L = {l}"),
        });
        let mut worst = (0.0f64, 0.0f64);
        for &r in &grid {
            let v = model.potential.hess_radial(r).abs().max(if model.d > 1 {
                model.potential.hess_tangential(r).abs()
            } else {
                0.0
            });
            if v > worst.1 {
                worst = (r, v);
            }
        }
        items.push(AssumptionItem {
            name: "Hessian eigenvalue bound |eig| <= M".into(),
            pass: worst.1 <= m * (1.0 + 1e-10),
            value: worst.1,
            worst_point: worst.0,
            detail: format!("M = {m}"),
        });
    } else {
        items.push(AssumptionItem {
            name: "gradient bound |grad phi| <= L".into(),
            pass: false,
            value: f64::INFINITY,
            worst_point: f64::NAN,
            detail: "unbounded gradient (alpha > 1): averaging constants unavailable".into(),
        });
    }

    match model.integrate_radial(Measure::Nu, |r| model.kinetic.dpsi(r).powi(4)) {
        Ok(v) => items.push(AssumptionItem {
            name: "moment int |grad psi|^4 d nu finite".into(),
            pass: v.is_finite(),
            value: v,
            worst_point: f64::NAN,
            detail: String::new(),
        }),
        Err(e) => items.push(AssumptionItem {
            name: "moment int |grad psi|^4 d nu finite".into(),
            pass: false,
            value: f64::INFINITY,
            worst_point: f64::NAN,
            detail: format!("quadrature: {e}"),
        }),
    }
    let dd = model.d as f64;
    match model.integrate_radial(Measure::Nu, |r| {
        let hr = model.kinetic.hess_radial(r);
        let ht = model.kinetic.hess_tangential(r);
        hr * hr + (dd - 1.0) * ht * ht
    }) {
        Ok(v) => items.push(AssumptionItem {
            name: "moment int |Hess psi|_F^2 d nu finite".into(),
            pass: v.is_finite(),
            value: v,
            worst_point: f64::NAN,
            detail: String::new(),
        }),
        Err(e) => items.push(AssumptionItem {
            name: "moment int |Hess psi|_F^2 d nu finite".into(),
            pass: false,
            value: f64::INFINITY,
            worst_point: f64::NAN,
            detail: format!("quadrature: {e}"),
        }),
    }
    let n2 = model.integrate_radial(Measure::Nu, |r| model.kinetic.dpsi(r).powi(2))?;
    items.push(AssumptionItem {
        name: "velocity covariance scrM positive definite".into(),
        pass: n2 > 0.0,
        value: n2 / dd,
        worst_point: f64::NAN,
        detail: "isotropic: scrM = (n2 / d) Id".into(),
    });

    Ok(AssumptionReport { items })
}

fn check_grid(model: &Model) -> Result<Vec<f64>, ModelError> {
    let r_mu = model.truncation_radius(Measure::Mu)?;
    let r_nu = model.truncation_radius(Measure::Nu)?;
    let r_max = r_mu.max(r_nu);
    let mut grid: Vec<f64> = Vec::with_capacity(600);
    for i in 0..=300 {
        grid.push(i as f64 / 300.0 * 4.0);
    }
    let mut r = 4.0f64;
    while r < r_max {
        grid.push(r);
        r *= 1.05;
    }
    grid.push(r_max);
    Ok(grid)
}
