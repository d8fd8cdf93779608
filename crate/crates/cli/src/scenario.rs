//! Scenario files: a versioned JSON description of one certification and
//! verification run. Parsing is strict (unknown keys are rejected) and
//! emission is canonical, so emit -> parse -> emit is byte-identical.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use kinrate::model::{
    make_benchmark, BenchmarkOpts, KineticKind, Model, PotentialKind, QuadCfg,
};
use kinrate::solver::{GridCfg, InitKind};
use serde::{Deserialize, Serialize};

/// Output schema version stamped into every artifact.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub spec: u32,
    pub id: String,
    pub model: ModelSpec,
    pub gamma: f64,
    pub tau: f64,
    pub h0: H0Kind,
    #[serde(default)]
    pub regime: RegimeSel,
    /// Spatial Poincare constant for the strong-confinement tail route.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_pl: Option<f64>,
    /// Level at which the tail envelope is anchored; must lie in (0, 1/4].
    #[serde(default = "default_a_level")]
    pub a_level: f64,
    #[serde(default)]
    pub grid: GridSpec,
    pub pde: PdeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sde: Option<SdeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub potential: PotentialSpec,
    pub kinetic: KineticSpec,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_p_nu: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub prefer_centered_weighted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    SubExp { alpha: f64 },
    Log { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KineticSpec {
    Gaussian,
    SubExp { delta: f64 },
    Log { q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum H0Kind {
    TanhX,
    TanhV,
    TanhXv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeSel {
    #[default]
    Auto,
    Algebraic,
    WeakTail,
    StrongSpatial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_n_x")]
    pub n_x: usize,
    #[serde(default = "default_n_v")]
    pub n_v: usize,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_x_stretch")]
    pub x_stretch: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    #[serde(default = "default_v_stretch")]
    pub v_stretch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSpec {
    /// Full splitting step; defaults to the grid's own stable choice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
    pub t_end: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSpec {
    #[serde(default = "default_particles")]
    pub n_particles: usize,
    #[serde(default = "default_sde_dt")]
    pub dt: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub times: Vec<f64>,
}

fn default_a_level() -> f64 {
    0.25
}
fn default_d() -> usize {
    1
}
fn default_n_x() -> usize {
    128
}
fn default_n_v() -> usize {
    128
}
fn default_x_max() -> f64 {
    1500.0
}
fn default_x_stretch() -> f64 {
    8.0
}
fn default_v_max() -> f64 {
    7.0
}
fn default_v_stretch() -> f64 {
    0.0
}
fn default_cfl() -> f64 {
    0.45
}
fn default_sample_every() -> usize {
    1
}
fn default_particles() -> usize {
    100_000
}
fn default_sde_dt() -> f64 {
    0.01
}
fn default_seed() -> u64 {
    0x5eed
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_x: default_n_x(),
            n_v: default_n_v(),
            x_max: default_x_max(),
            x_stretch: default_x_stretch(),
            v_max: default_v_max(),
            v_stretch: default_v_stretch(),
        }
    }
}

impl GridSpec {
    pub fn to_cfg(self) -> GridCfg {
        GridCfg {
            n_x: self.n_x,
            n_v: self.n_v,
            x_max: self.x_max,
            x_stretch: self.x_stretch,
            v_max: self.v_max,
            v_stretch: self.v_stretch,
        }
    }
}

impl ModelSpec {
    pub fn potential_kind(&self) -> PotentialKind {
        match self.potential {
            PotentialSpec::SubExp { alpha } => PotentialKind::SubExp { alpha },
            PotentialSpec::Log { p } => PotentialKind::Log { p },
        }
    }

    pub fn kinetic_kind(&self) -> KineticKind {
        match self.kinetic {
            KineticSpec::Gaussian => KineticKind::Gaussian,
            KineticSpec::SubExp { delta } => KineticKind::SubExp { delta },
            KineticSpec::Log { q } => KineticKind::Log { q },
        }
    }

    pub fn build(&self) -> Result<Model> {
        let opts = BenchmarkOpts {
            sigma: self.sigma,
            delta_w: self.delta_w,
            theta_w: self.theta_w,
            p_w: self.p_w,
            p_v: self.p_v,
            c_p_nu: self.c_p_nu,
            prefer_centered_weighted: self.prefer_centered_weighted,
        };
        make_benchmark(
            self.potential_kind(),
            self.kinetic_kind(),
            self.d,
            QuadCfg::default(),
            opts,
        )
        .context("building the benchmark model")
    }
}

impl H0Kind {
    pub fn to_init(self) -> InitKind {
        match self {
            H0Kind::TanhX => InitKind::TanhX,
            H0Kind::TanhV => InitKind::TanhV,
            H0Kind::TanhXv => InitKind::TanhXV,
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading scenario {}", path.display()))?;
        let sc: Scenario = serde_json::from_str(&text)
            .with_context(|| format!("parsing scenario {}", path.display()))?;
        sc.validate()
            .with_context(|| format!("validating scenario {}", path.display()))?;
        Ok(sc)
    }

    /// Canonical form: pretty JSON, declaration-ordered keys, trailing newline.
    pub fn canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.spec != SCHEMA_VERSION {
            bail!(
                "unsupported scenario version {} (this build reads {})",
                self.spec,
                SCHEMA_VERSION
            );
        }
        if self.id.is_empty()
            || !self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        {
            bail!("scenario id must be a nonempty [A-Za-z0-9._-] name, got {:?}", self.id);
        }
        for (name, v) in [("gamma", self.gamma), ("tau", self.tau)] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive and finite, got {v}");
            }
        }
        if !(self.a_level > 0.0 && self.a_level <= 0.25) {
            bail!("a_level must lie in (0, 1/4], got {}", self.a_level);
        }
        if let Some(c) = self.c_pl {
            if !(c > 0.0 && c.is_finite()) {
                bail!("c_pl must be positive and finite, got {c}");
            }
        }
        if !(self.pde.t_end > 0.0 && self.pde.t_end.is_finite()) {
            bail!("pde.t_end must be positive and finite, got {}", self.pde.t_end);
        }
        if self.pde.sample_every == 0 {
            bail!("pde.sample_every must be at least 1");
        }
        if let Some(dt) = self.pde.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                bail!("pde.dt must be positive and finite, got {dt}");
            }
        }
        if !(self.pde.cfl > 0.0 && self.pde.cfl < 1.0) {
            bail!("pde.cfl must lie in (0, 1), got {}", self.pde.cfl);
        }
        if self.pde.substeps == Some(0) {
            bail!("pde.substeps must be at least 1 when given");
        }
        if let Some(sde) = &self.sde {
            if sde.n_particles < 100 {
                bail!("sde.n_particles must be at least 100");
            }
            if !(sde.dt > 0.0 && sde.dt.is_finite()) {
                bail!("sde.dt must be positive and finite, got {}", sde.dt);
            }
            if sde.times.is_empty() || sde.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                bail!("sde.times must be a nonempty list of finite nonnegative times");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "spec": 1,
            "id": "demo",
            "model": {
                "potential": {"kind": "log", "p": 2.0},
                "kinetic": {"kind": "gaussian"}
            },
            "gamma": 1.0,
            "tau": 1.0,
            "h0": "tanh-x",
            "pde": {"t_end": 2.0}
        }"#
    }

    #[test]
    fn defaults_fill_in_and_round_trip_is_idempotent() {
        let sc: Scenario = serde_json::from_str(minimal()).unwrap();
        sc.validate().unwrap();
        assert_eq!(sc.regime, RegimeSel::Auto);
        assert_eq!(sc.grid, GridSpec::default());
        assert_eq!(sc.a_level, 0.25);
        assert_eq!(sc.pde.sample_every, 1);
        let once = sc.canonical_json();
        let again: Scenario = serde_json::from_str(&once).unwrap();
        assert_eq!(once, again.canonical_json());
        assert_eq!(sc, again);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal().replace("\"gamma\": 1.0", "\"gamma\": 1.0, \"gama\": 2.0");
        assert!(serde_json::from_str::<Scenario>(&text).is_err());
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut sc: Scenario = serde_json::from_str(minimal()).unwrap();
        sc.tau = 0.0;
        assert!(sc.validate().is_err());
        let mut sc: Scenario = serde_json::from_str(minimal()).unwrap();
        sc.a_level = 0.3;
        assert!(sc.validate().is_err());
        let mut sc: Scenario = serde_json::from_str(minimal()).unwrap();
        sc.id = "bad id".into();
        assert!(sc.validate().is_err());
    }
}
