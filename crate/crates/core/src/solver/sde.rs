//! Particle ensemble for the same kinetic dynamics, used to cross-check the
//! deterministic solver: dX = psi'(V) dt, dV = -phi'(X) dt - gamma psi'(V) dt
//! + sqrt(2 gamma) dB. Trajectories start from the equilibrium product law,
//! so the empirical autocovariance of an observable estimates the stationary
//! cross-correlation <h0, h(t)> computed by the grid solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::model::{KineticKind, Measure, Model};
use crate::num::MonotoneCubic;

use super::SolverError;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SdeCfg {
    pub n_particles: usize,
    pub dt: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for SdeCfg {
    fn default() -> Self {
        SdeCfg {
            n_particles: 100_000,
            dt: 0.01,
            gamma: 1.0,
            seed: 0x5eed,
        }
    }
}

/// Inverse-CDF sampler for a symmetric density on the line, tabulated on a
/// grid that is uniform through the core and geometric in the tail so that
/// heavy-tailed equilibria stay resolved.
struct InverseCdf {
    curve: MonotoneCubic,
}

impl InverseCdf {
    fn build(density: &dyn Fn(f64) -> f64, r_max: f64) -> Result<InverseCdf, SolverError> {
        let mut edges = vec![0.0];
        let core = 8.0f64.min(r_max);
        let n_core = 2048;
        for k in 1..=n_core {
            edges.push(core * k as f64 / n_core as f64);
        }
        let mut r = core;
        while r < r_max {
            r = (r * 1.02).min(r_max);
            edges.push(r);
        }
        let mut cs = vec![0.0];
        let mut rs = vec![0.0];
        let mut acc = 0.0;
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let off = 0.5 * (b - a) / 3f64.sqrt();
            let inc = 0.5 * (b - a) * (density(mid - off) + density(mid + off));
            if inc > 0.0 && inc.is_finite() {
                acc += inc;
                if acc > *cs.last().unwrap() {
                    cs.push(acc);
                    rs.push(b);
                }
            }
        }
        if cs.len() < 8 {
            return Err(SolverError::BadConfig(
                "equilibrium density too degenerate to tabulate".into(),
            ));
        }
        let total = *cs.last().unwrap();
        for c in cs.iter_mut() {
            *c /= total;
        }
        *cs.last_mut().unwrap() = 1.0;
        Ok(InverseCdf {
            curve: MonotoneCubic::new(cs, rs),
        })
    }

    /// Radius for uniform u in [0, 1).
    fn radius(&self, u: f64) -> f64 {
        self.curve.eval(u).max(0.0)
    }
}

pub struct SdeEnsemble {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    x0: Vec<f64>,
    v0: Vec<f64>,
    rng: ChaCha8Rng,
    gaussian_v: bool,
}

fn signed(r: f64, f: impl Fn(f64) -> f64) -> f64 {
    if r >= 0.0 {
        f(r)
    } else {
        -f(-r)
    }
}

impl SdeEnsemble {
    /// Seed-deterministic ensemble drawn from the equilibrium product law.
    pub fn new(model: &Model, cfg: &SdeCfg) -> Result<SdeEnsemble, SolverError> {
        if model.d != 1 {
            return Err(SolverError::BadConfig(
                "the particle solver is one-dimensional".into(),
            ));
        }
        if cfg.n_particles < 100 {
            return Err(SolverError::BadConfig(
                "need at least 100 particles for block error bars".into(),
            ));
        }
        if !(cfg.dt > 0.0 && cfg.dt.is_finite() && cfg.gamma >= 0.0) {
            return Err(SolverError::BadConfig("dt must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let gaussian_v = matches!(model.kinetic.kind, KineticKind::Gaussian);

        let rx = model.truncation_radius(Measure::Mu)?;
        let mu = InverseCdf::build(&|r| model.rho_mu_1d(r), rx)?;
        let nu = if gaussian_v {
            None
        } else {
            let rv = model.truncation_radius(Measure::Nu)?;
            Some(InverseCdf::build(&|r| model.rho_nu_1d(r), rv)?)
        };

        let n = cfg.n_particles;
        let mut x = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            let r = mu.radius(rng.gen::<f64>());
            x.push(if rng.gen::<bool>() { r } else { -r });
            match &nu {
                None => v.push(rng.sample::<f64, _>(StandardNormal)),
                Some(tab) => {
                    let r = tab.radius(rng.gen::<f64>());
                    v.push(if rng.gen::<bool>() { r } else { -r });
                }
            }
        }
        Ok(SdeEnsemble {
            t: 0.0,
            x0: x.clone(),
            v0: v.clone(),
            x,
            v,
            rng,
            gaussian_v,
        })
    }

    /// One step of the kick / drift / friction-noise / drift / kick
    /// splitting. The friction-noise stage is solved exactly for Gaussian
    /// velocity fields and by Euler-Maruyama otherwise.
    pub fn step_sde(&mut self, model: &Model, dt: f64, gamma: f64) {
        let half = 0.5 * dt;
        let pot = &model.potential;
        let kin = &model.kinetic;
        for (x, v) in self.x.iter_mut().zip(self.v.iter_mut()) {
            *v -= half * signed(*x, |r| pot.dphi(r));
            *x += half * signed(*v, |r| kin.dpsi(r));
        }
        if gamma > 0.0 {
            if self.gaussian_v {
                let a = (-gamma * dt).exp();
                let b = (1.0 - a * a).sqrt();
                for v in self.v.iter_mut() {
                    let xi: f64 = self.rng.sample(StandardNormal);
                    *v = a * *v + b * xi;
                }
            } else {
                let s = (2.0 * gamma * dt).sqrt();
                for v in self.v.iter_mut() {
                    let xi: f64 = self.rng.sample(StandardNormal);
                    *v += -gamma * dt * signed(*v, |r| kin.dpsi(r)) + s * xi;
                }
            }
        }
        for (x, v) in self.x.iter_mut().zip(self.v.iter_mut()) {
            *x += half * signed(*v, |r| kin.dpsi(r));
            *v -= half * signed(*x, |r| pot.dphi(r));
        }
        self.t += dt;
    }

    /// Empirical autocovariance of the observable between time 0 and now,
    /// with a jackknife standard error over 50 blocks and a concentration
    /// diagnostic (effective number of terms carrying the sum).
    pub fn autocov(&self, h0: &dyn Fn(f64, f64) -> f64) -> (f64, f64, f64) {
        let n = self.x.len();
        let prods: Vec<f64> = (0..n)
            .map(|i| h0(self.x0[i], self.v0[i]) * h0(self.x[i], self.v[i]))
            .collect();
        let mean = prods.iter().sum::<f64>() / n as f64;

        let blocks = 50.min(n / 2);
        let bsize = n / blocks;
        let used = blocks * bsize;
        let total: f64 = prods[..used].iter().sum();
        let mut var_acc = 0.0;
        for b in 0..blocks {
            let bs: f64 = prods[b * bsize..(b + 1) * bsize].iter().sum();
            let leave_out = (total - bs) / (used - bsize) as f64;
            let full = total / used as f64;
            var_acc += (leave_out - full) * (leave_out - full);
        }
        let se = (var_acc * (blocks - 1) as f64 / blocks as f64).sqrt();

        let l1: f64 = prods.iter().map(|p| p.abs()).sum();
        let l2: f64 = prods.iter().map(|p| p * p).sum();
        let ess = if l2 > 0.0 { l1 * l1 / l2 } else { 0.0 };
        (mean, se, ess)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayEstimate {
    pub t: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub se: Vec<f64>,
    pub ess: Vec<f64>,
    pub warnings: Vec<String>,
}

/// March the ensemble through the requested times (rounded to whole steps)
/// and record the observable autocovariance at each.
pub fn estimate_observable_decay(
    model: &Model,
    cfg: &SdeCfg,
    h0: &dyn Fn(f64, f64) -> f64,
    times: &[f64],
) -> Result<DecayEstimate, SolverError> {
    if times.is_empty() {
        return Err(SolverError::BadConfig("no observation times".into()));
    }
    let mut steps: Vec<usize> = times
        .iter()
        .map(|&t| {
            if t < 0.0 || !t.is_finite() {
                Err(SolverError::BadConfig(format!("bad observation time {t}")))
            } else {
                Ok((t / cfg.dt).round() as usize)
            }
        })
        .collect::<Result<_, _>>()?;
    steps.sort_unstable();
    steps.dedup();

    let mut ens = SdeEnsemble::new(model, cfg)?;
    let mut out = DecayEstimate {
        t: Vec::new(),
        c_hat: Vec::new(),
        se: Vec::new(),
        ess: Vec::new(),
        warnings: Vec::new(),
    };
    let mut done = 0usize;
    for &target in &steps {
        while done < target {
            ens.step_sde(model, cfg.dt, cfg.gamma);
            done += 1;
        }
        let (c, se, ess) = ens.autocov(h0);
        let t = target as f64 * cfg.dt;
        if ess < (cfg.n_particles as f64 / 100.0).max(100.0) {
            out.warnings.push(format!(
                "t = {t}: effective sample size {ess:.0} of {}; estimate dominated by few particles",
                cfg.n_particles
            ));
        }
        out.t.push(t);
        out.c_hat.push(c);
        out.se.push(se);
        out.ess.push(ess);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_benchmark, BenchmarkOpts, PotentialKind, QuadCfg};
    use crate::solver::grid::{GridCfg, PhaseGrid};
    use crate::solver::pde::{run_decay, PdeCfg};

    fn model(p: PotentialKind, k: KineticKind) -> Model {
        make_benchmark(p, k, 1, QuadCfg::default(), BenchmarkOpts::default()).unwrap()
    }

    #[test]
    fn seeded_runs_reproduce_exactly() {
        let m = model(PotentialKind::Log { p: 2.0 }, KineticKind::Gaussian);
        let cfg = SdeCfg {
            n_particles: 500,
            dt: 0.02,
            gamma: 1.0,
            seed: 42,
        };
        let mut a = SdeEnsemble::new(&m, &cfg).unwrap();
        let mut b = SdeEnsemble::new(&m, &cfg).unwrap();
        for _ in 0..25 {
            a.step_sde(&m, cfg.dt, cfg.gamma);
            b.step_sde(&m, cfg.dt, cfg.gamma);
        }
        assert_eq!(a.x, b.x);
        assert_eq!(a.v, b.v);

        let c = SdeEnsemble::new(&m, &SdeCfg { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.x0, c.x0);
    }

    #[test]
    fn equilibrium_moments_are_preserved() {
        let m = model(
            PotentialKind::SubExp { alpha: 0.5 },
            KineticKind::Gaussian,
        );
        let x2_eq = m.integrate_radial(Measure::Mu, |r| r * r).unwrap();
        let cfg = SdeCfg {
            n_particles: 20_000,
            dt: 0.01,
            gamma: 1.0,
            seed: 7,
        };
        let mut ens = SdeEnsemble::new(&m, &cfg).unwrap();
        let moments = |e: &SdeEnsemble| {
            let n = e.x.len() as f64;
            (
                e.x.iter().map(|x| x * x).sum::<f64>() / n,
                e.v.iter().map(|v| v * v).sum::<f64>() / n,
            )
        };
        let (x2_init, _) = moments(&ens);
        assert!(
            (x2_init - x2_eq).abs() < 4.0 * (x2_eq / (cfg.n_particles as f64).sqrt()) + 0.02,
            "initial x variance {x2_init} vs {x2_eq}"
        );
        for _ in 0..200 {
            ens.step_sde(&m, cfg.dt, cfg.gamma);
        }
        let (x2, v2) = moments(&ens);
        assert!(
            (x2 - x2_eq).abs() < 0.08 * x2_eq + 0.05,
            "x variance drifted: {x2} vs {x2_eq}"
        );
        assert!((v2 - 1.0).abs() < 0.05, "v variance drifted: {v2}");
    }

    #[test]
    fn euler_maruyama_branch_holds_velocity_equilibrium() {
        let m = model(
            PotentialKind::SubExp { alpha: 0.5 },
            KineticKind::SubExp { delta: 1.5 },
        );
        let v2_eq = m.integrate_radial(Measure::Nu, |r| r * r).unwrap();
        let cfg = SdeCfg {
            n_particles: 20_000,
            dt: 0.005,
            gamma: 1.0,
            seed: 11,
        };
        let mut ens = SdeEnsemble::new(&m, &cfg).unwrap();
        for _ in 0..400 {
            ens.step_sde(&m, cfg.dt, cfg.gamma);
        }
        let v2 = ens.v.iter().map(|v| v * v).sum::<f64>() / ens.v.len() as f64;
        assert!(
            (v2 - v2_eq).abs() < 0.08 * v2_eq + 0.05,
            "v variance {v2} vs equilibrium {v2_eq}"
        );
    }

    #[test]
    fn autocovariance_at_lag_zero_matches_quadrature() {
        let m = model(PotentialKind::Log { p: 2.0 }, KineticKind::Gaussian);
        let oracle = m
            .integrate_radial(Measure::Mu, |r| {
                let t = r.tanh();
                t * t
            })
            .unwrap();
        let cfg = SdeCfg {
            n_particles: 40_000,
            dt: 0.01,
            gamma: 1.0,
            seed: 3,
        };
        let ens = SdeEnsemble::new(&m, &cfg).unwrap();
        let (c0, se, ess) = ens.autocov(&|x, _| x.tanh());
        assert!(
            (c0 - oracle).abs() < 4.0 * se + 1e-3,
            "c(0) {c0} vs E[h0^2] {oracle} (se {se})"
        );
        assert!(ess > cfg.n_particles as f64 / 10.0);
    }

    #[test]
    fn particle_autocovariance_tracks_grid_cross_correlation() {
        let m = model(PotentialKind::Log { p: 2.0 }, KineticKind::Gaussian);
        let g = PhaseGrid::new(
            &m,
            GridCfg {
                n_x: 64,
                n_v: 64,
                x_max: 400.0,
                x_stretch: 7.0,
                v_max: 6.5,
                v_stretch: 0.0,
            },
        )
        .unwrap();
        let nv = g.n_v();
        let mut h0 = vec![0.0; g.n_x() * nv];
        for i in 0..g.n_x() {
            let t = g.x.centers[i].tanh();
            for j in 0..nv {
                h0[i * nv + j] = t;
            }
        }
        let mean = g.integrate(&h0);
        for y in h0.iter_mut() {
            *y -= mean;
        }
        let pde_cfg = PdeCfg::auto(&g, 1.0);
        let series = run_decay(&g, &h0, &pde_cfg, 2.0, 1).unwrap();
        let cross_at = |t: f64| -> f64 {
            series
                .samples
                .iter()
                .min_by(|a, b| {
                    (a.t - t).abs().partial_cmp(&(b.t - t).abs()).unwrap()
                })
                .unwrap()
                .cross
        };

        let est = estimate_observable_decay(
            &m,
            &SdeCfg {
                n_particles: 30_000,
                dt: 0.01,
                gamma: 1.0,
                seed: 19,
            },
            &|x, _| x.tanh() - mean,
            &[1.0, 2.0],
        )
        .unwrap();
        for (k, &t) in est.t.iter().enumerate() {
            let pde = cross_at(t);
            let tol = 4.0 * est.se[k] + 0.015;
            assert!(
                (est.c_hat[k] - pde).abs() < tol,
                "t {t}: particles {} vs grid {pde} (tol {tol})",
                est.c_hat[k]
            );
        }
    }
}
