//! The simulate command: run the grid solver on a scenario, bound the time
//! discretization error by step halving, and emit the sampled decay series
//! next to the certified envelope.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use kinrate::rates::best_bound;
use kinrate::solver::{
    estimate_observable_decay, initial_observable, run_decay, DecaySeries, PdeCfg, PhaseGrid,
    SdeCfg, WindowedSeries,
};

use crate::pipeline::{self, Prepared};
use crate::scenario::{H0Kind, Scenario, SCHEMA_VERSION};

pub struct RunOpts {
    pub seed: Option<u64>,
    /// Step-halving levels behind the discretization budget; 0 skips the
    /// refinement runs and publishes a zero budget.
    pub refine: usize,
    pub mc: bool,
    pub tau: Option<f64>,
}

impl Default for RunOpts {
    fn default() -> Self {
        RunOpts { seed: None, refine: 1, mc: false, tau: None }
    }
}

pub struct McOutcome {
    pub times: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub se: Vec<f64>,
    pub ess: Vec<f64>,
    pub pde_cross: Vec<f64>,
    pub warnings: Vec<String>,
    pub csv_path: PathBuf,
}

pub struct SimOutcome {
    pub prepared: Prepared,
    pub series: DecaySeries,
    pub win: Option<WindowedSeries>,
    pub window_skip: Option<String>,
    pub budget: f64,
    pub refine_ratios: Vec<f64>,
    /// None when no certificate applies to the scenario.
    pub dominated: Option<bool>,
    pub mc: Option<McOutcome>,
    pub csv_path: PathBuf,
    pub summary: Value,
    pub summary_path: PathBuf,
    pub dt: f64,
    pub runtime_s: f64,
}

/// Initial observable as a pointwise function, for the particle estimator.
pub fn h0_fn(kind: H0Kind) -> Box<dyn Fn(f64, f64) -> f64 + Sync> {
    match kind {
        H0Kind::TanhX => Box::new(|x, _| x.tanh()),
        H0Kind::TanhV => Box::new(|_, v| v.tanh()),
        H0Kind::TanhXv => Box::new(|x, v| x.tanh() * v.tanh()),
    }
}

use crate::fmt_float as fmt;

/// Largest pointwise gap between two runs of the same scenario, over both
/// the squared norm and the cross correlation.
fn pair_gap(a: &DecaySeries, b: &DecaySeries) -> f64 {
    let n = a.samples.len().min(b.samples.len());
    let mut worst = 0.0f64;
    for i in 0..n {
        worst = worst.max((a.samples[i].l2_sq - b.samples[i].l2_sq).abs());
        worst = worst.max((a.samples[i].cross - b.samples[i].cross).abs());
    }
    worst
}

fn interp_cross(series: &DecaySeries, t: f64) -> f64 {
    let s = &series.samples;
    if t <= s[0].t {
        return s[0].cross;
    }
    for w in s.windows(2) {
        if t <= w[1].t {
            let f = (t - w[0].t) / (w[1].t - w[0].t);
            return w[0].cross + f * (w[1].cross - w[0].cross);
        }
    }
    s[s.len() - 1].cross
}

pub fn run(sc: &Scenario, out: &Path, opts: &RunOpts) -> Result<SimOutcome> {
    let started = Instant::now();
    let model = sc.model.build()?;
    let grid = PhaseGrid::new(&model, sc.grid.to_cfg()).context("building the phase grid")?;
    let h0 = initial_observable(&grid, sc.h0.to_init());
    let norms = pipeline::h0_norms_grid(&grid, &h0);
    let prepared = pipeline::prepare(sc, opts.tau, Some(norms))?;
    for cert in &prepared.certs {
        pipeline::validate_envelope(cert)?;
    }

    let auto = PdeCfg::auto(&grid, sc.gamma);
    let dt = sc.pde.dt.unwrap_or(auto.dt);
    let base = PdeCfg {
        dt,
        gamma: sc.gamma,
        cfl: sc.pde.cfl,
        transport_substeps: sc.pde.substeps,
    };

    // The published series runs at the scenario step; halved-step companions
    // bound the time discretization error. First-order convergence makes
    // 3x the first gap a bound on the full remaining tail.
    let mut runs = Vec::with_capacity(opts.refine + 1);
    for j in 0..=opts.refine {
        let cfg = PdeCfg {
            dt: dt / (1u64 << j) as f64,
            gamma: sc.gamma,
            cfl: sc.pde.cfl,
            transport_substeps: sc.pde.substeps.map(|s| s << j),
        };
        let sample_every = sc.pde.sample_every << j;
        runs.push(run_decay(&grid, &h0, &cfg, sc.pde.t_end, sample_every)?);
        if j == 0 {
            // keep the base cfg around for reporting
            debug_assert_eq!(runs[0].dt, base.dt);
        }
    }
    let mut refine_ratios = Vec::new();
    let budget = if opts.refine >= 1 {
        let gaps: Vec<f64> = runs.windows(2).map(|w| pair_gap(&w[0], &w[1])).collect();
        for w in gaps.windows(2) {
            if w[1] > 0.0 {
                refine_ratios.push(w[0] / w[1]);
            }
        }
        3.0 * gaps[0]
    } else {
        0.0
    };
    let series = runs.swap_remove(0);

    let (win, window_skip) = match series.window(prepared.tau) {
        Ok(w) => (Some(w), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let cert_refs: Vec<&kinrate::rates::RateCertificate> = prepared.certs.iter().collect();
    let dominated = if cert_refs.is_empty() {
        None
    } else {
        Some(
            series
                .samples
                .iter()
                .all(|s| s.l2_sq <= best_bound(&cert_refs, s.t) + budget),
        )
    };

    let mut csv = String::from("t,l2_sq,linf,osc,H_tau,D_tau,energy_residual,envelope,dominated\n");
    for (k, s) in series.samples.iter().enumerate() {
        let h_tau = win.as_ref().and_then(|w| w.h_tau.get(k));
        let d_tau = win.as_ref().and_then(|w| w.d_tau.get(k));
        let resid = win.as_ref().and_then(|w| w.residual.get(k));
        let opt = |v: Option<&f64>| v.map(|x| fmt(*x)).unwrap_or_default();
        let (env, dom) = if cert_refs.is_empty() {
            (String::new(), String::new())
        } else {
            let b = best_bound(&cert_refs, s.t);
            (fmt(b), if s.l2_sq <= b + budget { "1".into() } else { "0".into() })
        };
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            fmt(s.t),
            fmt(s.l2_sq),
            fmt(s.linf),
            fmt(s.h_max - s.h_min),
            opt(h_tau),
            opt(d_tau),
            opt(resid),
            env,
            dom
        )
        .expect("string write");
    }

    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let csv_path = out.join(format!("{}.series.csv", sc.id));
    fs::write(&csv_path, &csv)?;

    let mc = if opts.mc {
        let sde = sc
            .sde
            .as_ref()
            .context("--mc requested but the scenario has no sde block")?;
        if let Some(&t_hi) = sde.times.iter().max_by(|a, b| a.total_cmp(b)) {
            if t_hi > sc.pde.t_end + 1e-12 {
                bail!("sde.times reach {t_hi} but the grid series ends at {}", sc.pde.t_end);
            }
        }
        let cfg = SdeCfg {
            n_particles: sde.n_particles,
            dt: sde.dt,
            gamma: sc.gamma,
            seed: opts.seed.unwrap_or(sde.seed),
        };
        let f = h0_fn(sc.h0);
        let est = estimate_observable_decay(&model, &cfg, &*f, &sde.times)?;
        let pde_cross: Vec<f64> = est.t.iter().map(|&t| interp_cross(&series, t)).collect();
        let mut text = String::from("t,c_hat,se,ess,pde_cross\n");
        for i in 0..est.t.len() {
            writeln!(
                text,
                "{},{},{},{},{}",
                fmt(est.t[i]),
                fmt(est.c_hat[i]),
                fmt(est.se[i]),
                fmt(est.ess[i]),
                fmt(pde_cross[i])
            )
            .expect("string write");
        }
        let mc_path = out.join(format!("{}.mc.csv", sc.id));
        fs::write(&mc_path, &text)?;
        Some(McOutcome {
            times: est.t,
            c_hat: est.c_hat,
            se: est.se,
            ess: est.ess,
            pde_cross,
            warnings: est.warnings,
            csv_path: mc_path,
        })
    } else {
        None
    };

    let dominated_verdict = match dominated {
        Some(true) => "pass".to_string(),
        Some(false) => "fail".to_string(),
        None => format!(
            "skipped: {}",
            prepared.skip.as_deref().unwrap_or("no certificate applies")
        ),
    };
    let n_win = win.as_ref().map(|w| w.t.len()).unwrap_or(0);
    let summary = json!({
        "spec": SCHEMA_VERSION,
        "id": sc.id,
        "gamma": sc.gamma,
        "tau": prepared.tau,
        "grid": sc.grid,
        "dt": dt,
        "substeps": sc.pde.substeps,
        "sample_every": sc.pde.sample_every,
        "t_end": sc.pde.t_end,
        "samples": series.samples.len(),
        "h0": {
            "kind": sc.h0,
            "sup": prepared.norms.sup,
            "sq": prepared.norms.sq,
            "osc_sq": prepared.norms.osc_sq,
            "source": prepared.norms.source,
        },
        "refine": opts.refine,
        "budget": budget,
        "refine_ratios": refine_ratios,
        "window": {
            "count": n_win,
            "dropped_tail_samples": series.samples.len().saturating_sub(n_win),
            "skip": window_skip,
        },
        "dominated": dominated_verdict,
        "skipped": prepared.skip,
        "route_notes": prepared.route_notes,
        "mc": mc.as_ref().map(|m| {
            json!({
                "times": m.times.len(),
                "max_se": m.se.iter().copied().fold(0.0f64, f64::max),
                "warnings": m.warnings,
            })
        }),
    });
    let summary_path = out.join(format!("{}.sim.json", sc.id));
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(&summary_path, &text)?;

    Ok(SimOutcome {
        prepared,
        series,
        win,
        window_skip,
        budget,
        refine_ratios,
        dominated,
        mc,
        csv_path,
        summary,
        summary_path,
        dt,
        runtime_s: started.elapsed().as_secs_f64(),
    })
}
