//! Shared certification pipeline: build the model, pick the routes a
//! scenario supports, and assemble the rate certificates the commands
//! consume.

use anyhow::{bail, Context, Result};
use kinrate::constants::{compute_constants, ConstantsBundle};
use kinrate::model::{Measure, Model};
use kinrate::rates::{
    benchmark_exponent, certify_algebraic, certify_weak_tail, ExponentClass, RateCertificate,
    Regime,
};
use kinrate::solver::PhaseGrid;
use kinrate::weakpi::{beta_kin, KineticBeta};

use crate::scenario::{H0Kind, RegimeSel, Scenario};

/// Norms of the initial observable that feed certificate normalizers.
#[derive(Debug, Clone, Copy)]
pub struct H0Norms {
    pub sup: f64,
    pub sq: f64,
    pub osc_sq: f64,
    /// "quadrature" for continuum values, "grid" when measured on a mesh.
    pub source: &'static str,
}

/// Continuum norms of the scenario's initial observable.
pub fn h0_norms_quadrature(model: &Model, h0: H0Kind) -> Result<H0Norms> {
    let sq_x = || model.integrate_radial(Measure::Mu, |r| r.tanh().powi(2));
    let sq_v = || model.integrate_radial(Measure::Nu, |r| r.tanh().powi(2));
    let sq = match h0 {
        H0Kind::TanhX => sq_x()?,
        H0Kind::TanhV => sq_v()?,
        H0Kind::TanhXv => sq_x()? * sq_v()?,
    };
    Ok(H0Norms { sup: 1.0, sq, osc_sq: 4.0, source: "quadrature" })
}

/// Norms measured on the actual mesh datum, for self-consistent domination
/// checks against the grid run.
pub fn h0_norms_grid(grid: &PhaseGrid, h0: &[f64]) -> H0Norms {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in h0 {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    H0Norms {
        sup: lo.abs().max(hi.abs()),
        sq: grid.norm_sq(h0),
        osc_sq: (hi - lo) * (hi - lo),
        source: "grid",
    }
}

/// Everything the commands need from the certification stage.
pub struct Prepared {
    pub model: Model,
    /// Symbolic decay class of the benchmark pair.
    pub class: ExponentClass,
    pub bundle: Option<ConstantsBundle>,
    pub certs: Vec<RateCertificate>,
    /// Tradeoff curve behind the tail certificates; drives the
    /// weak-dissipation audit.
    pub beta: Option<KineticBeta>,
    /// Reason no certificate applies (scenario is still simulable).
    pub skip: Option<String>,
    /// Routes that were tried and declined under automatic selection.
    pub route_notes: Vec<String>,
    pub norms: H0Norms,
    pub tau: f64,
}

pub fn prepare(sc: &Scenario, tau_override: Option<f64>, norms: Option<H0Norms>) -> Result<Prepared> {
    let model = sc.model.build()?;
    let tau = tau_override.unwrap_or(sc.tau);
    if !(tau > 0.0 && tau.is_finite()) {
        bail!("averaging window tau must be positive and finite, got {tau}");
    }
    let class = benchmark_exponent(&sc.model.potential_kind(), &sc.model.kinetic_kind())?;
    let norms = match norms {
        Some(n) => n,
        None => h0_norms_quadrature(&model, sc.h0)?,
    };

    let id = sc.id.as_str();
    let mut certs = Vec::new();
    let mut notes = Vec::new();
    let mut bundle = None;
    let mut skip = None;

    let weak_pot = model.potential.is_weak();
    match sc.regime {
        RegimeSel::Auto => {
            if weak_pot {
                let b = compute_constants(&model, tau)
                    .with_context(|| format!("computing averaging constants for {id}"))?;
                match certify_algebraic(id, &model, &b, sc.gamma, tau, norms.sup, norms.sq) {
                    Ok(c) => certs.push(c),
                    Err(e) => notes.push(format!("algebraic route unavailable: {e}")),
                }
                match certify_weak_tail(
                    id, &model, Some(&b), sc.gamma, tau, sc.a_level, norms.osc_sq, sc.c_pl,
                ) {
                    Ok(c) => certs.push(c),
                    Err(e) => notes.push(format!("tail route unavailable: {e}")),
                }
                bundle = Some(b);
                if certs.is_empty() {
                    bail!("no certification route applies to {id}: {}", notes.join("; "));
                }
            } else if model.kinetic.has_spectral_gap() {
                skip = Some(
                    "strong confinement with a velocity spectral gap relaxes exponentially; \
                     outside the weighted-envelope scope"
                        .to_string(),
                );
            } else if let Some(c_pl) = sc.c_pl {
                certs.push(certify_weak_tail(
                    id, &model, None, sc.gamma, tau, sc.a_level, norms.osc_sq, Some(c_pl),
                )?);
            } else {
                skip = Some(
                    "the strong-spatial tail route needs a spatial Poincare constant \
                     (set c_pl in the scenario)"
                        .to_string(),
                );
            }
        }
        RegimeSel::Algebraic => {
            let b = compute_constants(&model, tau)?;
            certs.push(certify_algebraic(id, &model, &b, sc.gamma, tau, norms.sup, norms.sq)?);
            bundle = Some(b);
        }
        RegimeSel::WeakTail => {
            let b = if weak_pot { Some(compute_constants(&model, tau)?) } else { None };
            certs.push(certify_weak_tail(
                id, &model, b.as_ref(), sc.gamma, tau, sc.a_level, norms.osc_sq, sc.c_pl,
            )?);
            bundle = b;
        }
        RegimeSel::StrongSpatial => {
            let c_pl = sc
                .c_pl
                .context("regime strong-spatial requires c_pl in the scenario")?;
            certs.push(certify_weak_tail(
                id, &model, None, sc.gamma, tau, sc.a_level, norms.osc_sq, Some(c_pl),
            )?);
        }
    }

    let has_tail = certs.iter().any(|c| {
        matches!(
            c.regime,
            Regime::WeakTailGap
                | Regime::WeakTailChained
                | Regime::WeakTailDirect
                | Regime::StrongSpatial
        )
    });
    let beta = if has_tail {
        Some(beta_kin(&model, bundle.as_ref(), sc.gamma, sc.c_pl)?)
    } else {
        None
    };

    Ok(Prepared { model, class, bundle, certs, beta, skip, route_notes: notes, norms, tau })
}

/// Fitted exponent of the certificate that best matches the symbolic class.
pub fn headline_exponent(p: &Prepared) -> Option<f64> {
    let target = p.class.fit_target();
    let mut best: Option<f64> = None;
    for cert in &p.certs {
        let Some(f) = cert.fitted_exponent() else { continue };
        best = Some(match (best, target) {
            (None, _) => f,
            (Some(b), Some(t)) => {
                if (f - t).abs() < (b - t).abs() {
                    f
                } else {
                    b
                }
            }
            (Some(b), None) => b,
        });
    }
    best
}

/// Abort-level sanity: envelopes must be positive, finite, and nonincreasing.
pub fn validate_envelope(cert: &RateCertificate) -> Result<()> {
    let lo = (cert.tau * 0.5).max(1e-6);
    let hi = cert.t_end().min(1e180).max(lo * 10.0);
    let (ts, vs) = cert.sample(lo, hi, 65);
    let mut prev = f64::INFINITY;
    for (t, v) in ts.iter().zip(&vs) {
        if !(v.is_finite() && *v > 0.0) {
            bail!(
                "certificate {} envelope is not positive finite at t = {t}: {v}",
                cert.scenario
            );
        }
        if *v > prev * (1.0 + 1e-9) {
            bail!("certificate {} envelope increases at t = {t}", cert.scenario);
        }
        prev = *v;
    }
    Ok(())
}
