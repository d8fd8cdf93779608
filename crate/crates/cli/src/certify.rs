//! The certify command: assemble the explicit constants and decay
//! certificates for a scenario and write them as one JSON report.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

use kinrate::rates::{NormalizerKind, RateCertificate};

use crate::pipeline::{self, Prepared};
use crate::scenario::{Scenario, SCHEMA_VERSION};

pub fn norm_kind_str(k: NormalizerKind) -> &'static str {
    match k {
        NormalizerKind::InitialEnergy => "initial-energy",
        NormalizerKind::Oscillation => "oscillation",
    }
}

/// One flat map with the published constant names, or null when the
/// scenario has no weighted route.
fn flatten_constants(p: &Prepared) -> Value {
    let Some(b) = &p.bundle else { return Value::Null };
    let mut flat = Map::new();
    for part in [
        serde_json::to_value(&b.spatial),
        serde_json::to_value(&b.moments),
        serde_json::to_value(&b.averaging),
    ] {
        if let Value::Object(m) = part.expect("constants serialize") {
            flat.extend(m);
        }
    }
    // the raw covariance matrix is bulk, not a published constant
    flat.remove("scr_m");
    Value::Object(flat)
}

pub fn certificate_json(cert: &RateCertificate) -> Value {
    let lo = (cert.tau * 0.5).max(1e-6);
    let hi = cert.t_end().min(1e180).max(lo * 10.0);
    let (ts, vs) = cert.sample(lo, hi, 65);
    let (w_lo, w_hi) = cert.fit_window();
    json!({
        "regime": cert.regime.as_str(),
        "tau": cert.tau,
        "normalizer": {
            "kind": norm_kind_str(cert.normalizer.kind),
            "value": cert.normalizer.value,
        },
        "class": cert.class.map(|c| c.symbol()),
        "fitted_exponent": cert.fitted_exponent().filter(|f| f.is_finite()),
        "fit_window": [w_lo, w_hi],
        "envelope": {"t": ts, "value": vs},
    })
}

pub struct CertifyOutput {
    pub json: Value,
    pub path: PathBuf,
    pub prepared: Prepared,
}

pub fn run(sc: &Scenario, out: &Path, tau_override: Option<f64>) -> Result<CertifyOutput> {
    let prepared = pipeline::prepare(sc, tau_override, None)?;
    for cert in &prepared.certs {
        pipeline::validate_envelope(cert)?;
    }
    let json = json!({
        "spec": SCHEMA_VERSION,
        "id": sc.id,
        "gamma": sc.gamma,
        "tau": prepared.tau,
        "model": sc.model,
        "h0": {
            "kind": sc.h0,
            "sup": prepared.norms.sup,
            "sq": prepared.norms.sq,
            "osc_sq": prepared.norms.osc_sq,
            "source": prepared.norms.source,
        },
        "symbolic": {
            "class": prepared.class.symbol(),
            "fit_target": prepared.class.fit_target(),
        },
        "constants": flatten_constants(&prepared),
        "certificates": prepared.certs.iter().map(certificate_json).collect::<Vec<_>>(),
        "certified_exponent": pipeline::headline_exponent(&prepared),
        "skipped": prepared.skip,
        "route_notes": prepared.route_notes,
    });
    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let path = out.join(format!("{}.certify.json", sc.id));
    let mut text = serde_json::to_string_pretty(&json)?;
    text.push('\n');
    fs::write(&path, &text)?;
    Ok(CertifyOutput { json, path, prepared })
}
