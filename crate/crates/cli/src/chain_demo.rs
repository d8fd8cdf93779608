//! The chain-demo command: for a doubly weak benchmark pair, dump the
//! spatial and velocity tradeoff curves with their chained combination, the
//! convex conjugate driving the envelope, and the resulting decay envelope.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use kinrate::constants::compute_constants;
use kinrate::model::{make_benchmark, BenchmarkOpts, KineticKind, PotentialKind, QuadCfg};
use kinrate::weakpi::{beta_kin, legendre_kstar, rate_function};

use crate::fmt_float as fmt;

const A_LEVEL: f64 = 0.25;

fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade as f64).ceil() as usize + 1;
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (step * i as f64).exp()).collect()
}

pub struct ChainOutput {
    pub beta_path: PathBuf,
    pub kstar_path: PathBuf,
    pub finv_path: PathBuf,
}

pub fn run(out: &Path, p: f64, q: f64) -> Result<ChainOutput> {
    let model = make_benchmark(
        PotentialKind::Log { p },
        KineticKind::Log { q },
        1,
        QuadCfg::default(),
        BenchmarkOpts::default(),
    )
    .context("building the doubly weak benchmark")?;
    let bundle = compute_constants(&model, 1.0)?;
    let kb = beta_kin(&model, Some(&bundle), 1.0, None)?;
    let Some(diag) = kb.chain.as_ref() else {
        bail!("expected the chained route for a doubly weak pair");
    };

    // The chained curve sits flat below its feasible-split scale, which the
    // certified constants push far out; walk until it has clearly decayed so
    // the dump always shows the whole transition.
    let step = 10f64.powf(1.0 / 8.0);
    let mut beta_csv = String::from("s,beta_x,beta_v,beta_chained\n");
    let mut s = 1e-4;
    while s <= 1e120 {
        let chained = kb.beta.eval(s);
        writeln!(
            beta_csv,
            "{},{},{},{}",
            fmt(s),
            fmt(diag.beta_x.eval(s)),
            fmt(diag.beta_v.eval(s)),
            fmt(chained)
        )
        .expect("string write");
        if chained < 1e-40 {
            break;
        }
        s *= step;
    }

    let kstar = legendre_kstar(&kb.beta, A_LEVEL)?;
    let (ln_w, ln_k) = kstar.knots();
    let stride = (ln_w.len() / 1200).max(1);
    let mut kstar_csv = String::from("w,kstar\n");
    for i in (0..ln_w.len()).step_by(stride) {
        // knots are stored in logs; deep tails fall outside f64 range when
        // exponentiated, so emit the representable part of the curve
        let w = ln_w[i].exp();
        let k = ln_k[i].exp();
        if w > 0.0 && w.is_finite() && k > 0.0 && k.is_finite() {
            writeln!(kstar_csv, "{},{}", fmt(w), fmt(k)).expect("string write");
        }
    }

    let rf = rate_function(&kstar, A_LEVEL)?;
    let mut finv_csv = String::from("t,f_inv\n");
    for t in log_grid(1e-2, rf.t_max(), 12) {
        writeln!(finv_csv, "{},{}", fmt(t), fmt(rf.f_inv(t))).expect("string write");
    }

    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let beta_path = out.join("chain_beta.csv");
    let kstar_path = out.join("chain_kstar.csv");
    let finv_path = out.join("chain_finv.csv");
    fs::write(&beta_path, &beta_csv)?;
    fs::write(&kstar_path, &kstar_csv)?;
    fs::write(&finv_path, &finv_csv)?;
    Ok(ChainOutput { beta_path, kstar_path, finv_path })
}
