//! The tabulate command: the nine benchmark cells, each with its symbolic
//! decay class and the exponent fitted from the certified envelope.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use kinrate::rates::{benchmark_exponent, ExponentClass};

use crate::pipeline;
use crate::scenario::{
    H0Kind, KineticSpec, ModelSpec, PdeSpec, PotentialSpec, RegimeSel, Scenario, SCHEMA_VERSION,
};

const POTENTIALS: [(&str, PotentialSpec); 3] = [
    ("subexp(1.5)", PotentialSpec::SubExp { alpha: 1.5 }),
    ("subexp(0.5)", PotentialSpec::SubExp { alpha: 0.5 }),
    ("log(2)", PotentialSpec::Log { p: 2.0 }),
];

const KINETICS: [(&str, KineticSpec); 3] = [
    ("gaussian", KineticSpec::Gaussian),
    ("subexp(0.5)", KineticSpec::SubExp { delta: 0.5 }),
    ("log(2)", KineticSpec::Log { q: 2.0 }),
];

fn cell_scenario(pot: PotentialSpec, kin: KineticSpec) -> Scenario {
    let strong = matches!(pot, PotentialSpec::SubExp { alpha } if alpha >= 1.0);
    Scenario {
        spec: SCHEMA_VERSION,
        id: "cell".into(),
        model: ModelSpec {
            potential: pot,
            kinetic: kin,
            d: 1,
            sigma: None,
            delta_w: None,
            theta_w: None,
            p_w: None,
            p_v: None,
            c_p_nu: None,
            prefer_centered_weighted: false,
        },
        gamma: 1.0,
        tau: 1.0,
        h0: H0Kind::TanhX,
        regime: RegimeSel::Auto,
        // the strong rows certify through the spatial tail route; a unit
        // Poincare constant is the conventional normalization there
        c_pl: strong.then_some(1.0),
        a_level: 0.25,
        grid: Default::default(),
        pde: PdeSpec { dt: None, cfl: 0.45, substeps: None, t_end: 1.0, sample_every: 1 },
        sde: None,
    }
}

pub struct TableOutput {
    pub csv: String,
    pub path: PathBuf,
}

pub fn run(out: &Path) -> Result<TableOutput> {
    let mut csv = String::from("potential,kinetic,symbolic,fitted\n");
    for (pname, pot) in POTENTIALS {
        for (kname, kin) in KINETICS {
            let sc = cell_scenario(pot, kin);
            let class = benchmark_exponent(&sc.model.potential_kind(), &sc.model.kinetic_kind())?;
            let fitted = match class {
                ExponentClass::Exponential { .. } => String::new(),
                _ => {
                    let p = pipeline::prepare(&sc, None, None)
                        .with_context(|| format!("certifying cell {pname} x {kname}"))?;
                    match pipeline::headline_exponent(&p) {
                        Some(f) => format!("{f:.4}"),
                        None => String::new(),
                    }
                }
            };
            writeln!(csv, "{pname},{kname},{},{fitted}", class.symbol()).expect("string write");
        }
    }
    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let path = out.join("table.csv");
    fs::write(&path, &csv)?;
    Ok(TableOutput { csv, path })
}
