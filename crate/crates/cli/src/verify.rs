//! The verify command: certify, simulate, and judge the run against the
//! certificate. One row out per scenario.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use kinrate::rates::{fit_algebraic_exponent, fit_stretched_exponent, ExponentClass};
use kinrate::solver::{weak_dissipation_check, DecaySeries};

use crate::pipeline;
use crate::scenario::{Scenario, SCHEMA_VERSION};
use crate::simulate::{self, RunOpts, SimOutcome};

#[derive(Debug, Clone, Serialize)]
pub struct Runtime {
    pub certify: f64,
    pub simulate: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub spec: u32,
    pub id: String,
    pub symbolic_exponent: String,
    pub certified_exponent: Option<f64>,
    pub simulated_exponent: Option<f64>,
    /// pass / fail / "skipped: <reason>".
    pub domination: String,
    pub dissipation: String,
    pub worst_dissipation_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<String>,
    pub runtime_s: Runtime,
}

impl ReportRow {
    pub fn has_fail(&self) -> bool {
        self.domination == "fail"
            || self.dissipation == "fail"
            || self.mc.as_deref().is_some_and(|m| m.starts_with("fail"))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("row serializes");
        s.push('\n');
        s
    }
}

/// Fit the measured decay with the functional form the symbolic class
/// predicts. Algebraic classes are fitted over the trailing two thirds of
/// the run; stretched-exponential ones over [5, 50] where that regime is
/// active at benchmark grid sizes.
pub fn fit_simulated(class: &ExponentClass, series: &DecaySeries) -> Option<f64> {
    let samples = &series.samples;
    if samples.len() < 6 {
        return None;
    }
    let t_last = samples.last().unwrap().t;
    let (lo, hi, stretched) = match class {
        ExponentClass::Exponential { .. } => return None,
        ExponentClass::Algebraic { .. } | ExponentClass::AlgebraicMinus { .. } => {
            (t_last / 3.0, t_last, false)
        }
        ExponentClass::StretchedExp { .. } => ((t_last / 10.0).min(5.0), t_last.min(50.0), true),
    };
    let norm = samples[0].l2_sq;
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for s in samples {
        if s.t >= lo && s.t <= hi && s.l2_sq > 0.0 {
            ts.push(s.t);
            vs.push(if stretched { s.l2_sq / norm } else { s.l2_sq });
        }
    }
    if ts.len() < 4 {
        return None;
    }
    let fit = if stretched {
        fit_stretched_exponent(&ts, &vs)
    } else {
        fit_algebraic_exponent(&ts, &vs)
    };
    fit.is_finite().then_some(fit)
}

fn round_ms(s: f64) -> f64 {
    (s * 1e3).round() / 1e3
}

pub fn run(sc: &Scenario, out: &Path, opts: &RunOpts) -> Result<(ReportRow, Option<SimOutcome>, PathBuf)> {
    let started = Instant::now();
    let probe = pipeline::prepare(sc, opts.tau, None)?;
    let certify_s = started.elapsed().as_secs_f64();

    if probe.certs.is_empty() {
        let reason = probe
            .skip
            .clone()
            .unwrap_or_else(|| "no certificate applies".to_string());
        let row = ReportRow {
            spec: SCHEMA_VERSION,
            id: sc.id.clone(),
            symbolic_exponent: probe.class.symbol(),
            certified_exponent: None,
            simulated_exponent: None,
            domination: format!("skipped: {reason}"),
            dissipation: format!("skipped: {reason}"),
            worst_dissipation_margin: None,
            mc: None,
            runtime_s: Runtime {
                certify: round_ms(certify_s),
                simulate: 0.0,
                total: round_ms(started.elapsed().as_secs_f64()),
            },
        };
        write_row(&row, out, &sc.id)?;
        return Ok((row, None, out.join(format!("{}.report.json", sc.id))));
    }

    {
        let sim = simulate::run(sc, out, opts)?;
        let prepared = &sim.prepared;

        let domination = match sim.dominated {
            Some(true) => "pass".to_string(),
            Some(false) => "fail".to_string(),
            None => "skipped: no certificate applies".to_string(),
        };

        let (dissipation, margin) = match (&sim.win, &prepared.beta) {
            (Some(win), Some(kb)) => {
                let audit = weak_dissipation_check(
                    win,
                    &|s| kb.beta.eval(s),
                    prepared.norms.osc_sq,
                    sim.budget,
                );
                if audit.checked == 0 {
                    (
                        "skipped: every window sits inside the discretization budget".to_string(),
                        None,
                    )
                } else if audit.ok {
                    ("pass".to_string(), Some(audit.worst_margin))
                } else {
                    ("fail".to_string(), Some(audit.worst_margin))
                }
            }
            (None, _) => (
                format!(
                    "skipped: {}",
                    sim.window_skip.as_deref().unwrap_or("no windowed series")
                ),
                None,
            ),
            (_, None) => ("skipped: no tail certificate to audit against".to_string(), None),
        };

        let mc = sim.mc.as_ref().map(|m| {
            let mut worst = 0.0f64;
            let mut ok = true;
            for i in 0..m.times.len() {
                let diff = (m.c_hat[i] - m.pde_cross[i]).abs();
                let tol = 3.0 * m.se[i] + sim.budget;
                if diff > tol {
                    ok = false;
                }
                if tol > 0.0 {
                    worst = worst.max(diff / tol);
                }
            }
            if ok {
                format!("pass (worst ratio {worst:.3})")
            } else {
                format!("fail (worst ratio {worst:.3})")
            }
        });

        let row = ReportRow {
            spec: SCHEMA_VERSION,
            id: sc.id.clone(),
            symbolic_exponent: prepared.class.symbol(),
            certified_exponent: pipeline::headline_exponent(prepared),
            simulated_exponent: fit_simulated(&prepared.class, &sim.series),
            domination,
            dissipation,
            worst_dissipation_margin: margin,
            mc,
            runtime_s: Runtime {
                certify: round_ms(certify_s),
                simulate: round_ms(sim.runtime_s),
                total: round_ms(started.elapsed().as_secs_f64()),
            },
        };
        write_row(&row, out, &sc.id)?;
        Ok((row, Some(sim), out.join(format!("{}.report.json", sc.id))))
    }
}

fn write_row(row: &ReportRow, out: &Path, id: &str) -> Result<()> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let path = out.join(format!("{id}.report.json"));
    fs::write(&path, row.to_json())?;
    Ok(())
}
