//! JSON run configuration: parsing, defaults, validation and the resolved echo.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::N1_DEFAULT;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    pub box_length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 1024, box_length: 256.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DyadicConfig {
    pub gap_constant: i32,
    /// `None` picks the grid-dependent default.
    pub j_max: Option<i32>,
    pub k_max: Option<i32>,
}

impl Default for DyadicConfig {
    fn default() -> Self {
        DyadicConfig { gap_constant: crate::dyadic::DEFAULT_GAP, j_max: None, k_max: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormsConfig {
    pub alpha: f64,
    #[serde(rename = "N")]
    pub sobolev_order: f64,
    #[serde(rename = "N1")]
    pub n1: f64,
}

impl Default for NormsConfig {
    fn default() -> Self {
        NormsConfig { alpha: 0.5, sobolev_order: 8.0, n1: N1_DEFAULT }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    #[serde(rename = "F")]
    pub nonlinearity: String,
    pub epsilon: f64,
    pub dt: f64,
    pub horizon: f64,
    /// `None` uses `10·max(1, ‖(Λu, ∂_t u)(0)‖_∞/ε)`.
    pub blowup_threshold: Option<f64>,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig { nonlinearity: "u_squared".into(), epsilon: 0.05, dt: 0.02, horizon: 100.0, blowup_threshold: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub tag: String,
    pub eps_list: Vec<f64>,
    pub fit_window: [f64; 2],
    pub seed: u64,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            tag: "simulate".into(),
            eps_list: vec![0.8, 0.7, 0.6, 0.5, 0.45, 0.4],
            fit_window: [5.0, 100.0],
            seed: 0,
            output_dir: "runs".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub grid: GridConfig,
    pub dyadic: DyadicConfig,
    pub norms: NormsConfig,
    pub evolution: EvolutionConfig,
    pub experiment: ExperimentConfig,
}

pub const TAGS: [&str; 7] = ["simulate", "dispersion", "lifespan", "znorm", "phase-audit", "multiplier-audit", "lp-check"];

impl ConfigFile {
    /// Defaults for one experiment tag; sections absent from a file fall back
    /// to these.
    pub fn defaults_for(tag: &str) -> Result<Self> {
        if !TAGS.contains(&tag) {
            return Err(Error::config("experiment.tag", format!("unknown tag `{tag}`")));
        }
        let mut c = ConfigFile::default();
        c.experiment.tag = tag.into();
        match tag {
            "dispersion" => {
                c.grid = GridConfig { n: 4096, box_length: 256.0 * std::f64::consts::PI };
                c.evolution.horizon = 150.0;
                c.experiment.fit_window = [5.0, 50.0];
            }
            "znorm" => {
                c.grid = GridConfig { n: 2048, box_length: 256.0 };
                c.evolution.dt = 0.05;
                c.experiment.eps_list = vec![0.1, 0.05, 0.025];
            }
            "lifespan" => {
                c.grid = GridConfig { n: 16384, box_length: 32.0 };
                c.evolution.nonlinearity = "dtu_sq_dxu".into();
                c.evolution.dt = 0.01;
                c.evolution.horizon = 50.0;
                c.experiment.fit_window = [0.0, 50.0];
            }
            _ => {}
        }
        Ok(c)
    }

    /// Parse a document, filling absent keys from the defaults of its tag.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::config("json", e.to_string()))?;
        let tag = doc.pointer("/experiment/tag").and_then(|t| t.as_str()).unwrap_or("simulate");
        Self::from_value(doc.clone(), Self::defaults_for(tag)?)
    }

    /// Overlay `doc` on `base` and validate the result.
    pub fn from_value(doc: serde_json::Value, base: ConfigFile) -> Result<Self> {
        if !doc.is_object() {
            return Err(Error::config("json", "top level must be an object"));
        }
        let mut merged = serde_json::to_value(base)?;
        overlay(&mut merged, doc);
        let cfg: ConfigFile = serde_json::from_value(merged).map_err(|e| Error::config("json", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The fully resolved configuration, as written next to the outputs.
    pub fn echo(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.n < 8 || !g.n.is_power_of_two() {
            return Err(Error::config("grid.n", format!("{} is not a power of two >= 8", g.n)));
        }
        if !(g.box_length > 0.0 && g.box_length.is_finite()) {
            return Err(Error::config("grid.box_length", "must be positive"));
        }
        let d = &self.dyadic;
        if d.gap_constant < 1 {
            return Err(Error::config("dyadic.gap_constant", "must be at least 1"));
        }
        for (name, v) in [("dyadic.j_max", d.j_max), ("dyadic.k_max", d.k_max)] {
            if v.is_some_and(|v| v < -1) {
                return Err(Error::config(name, "must be at least -1"));
            }
        }
        let a = self.norms.alpha;
        if !(a > 0.0 && a <= 0.5) {
            return Err(Error::config("norms.alpha", format!("{a} is outside (0, 1/2]")));
        }
        if !(self.norms.sobolev_order >= 0.0) {
            return Err(Error::config("norms.N", "must be non-negative"));
        }
        if !(self.norms.n1 > 0.0) {
            return Err(Error::config("norms.N1", "must be positive"));
        }
        let e = &self.evolution;
        if !matches!(e.nonlinearity.as_str(), "u_squared" | "dtu_sq_dxu" | "zero") {
            return Err(Error::config("evolution.F", format!("unknown nonlinearity `{}`", e.nonlinearity)));
        }
        if !(e.epsilon >= 0.0 && e.epsilon.is_finite()) {
            return Err(Error::config("evolution.epsilon", "must be non-negative"));
        }
        if !(e.dt > 0.0 && e.dt.is_finite()) {
            return Err(Error::config("evolution.dt", "must be positive"));
        }
        if !(e.horizon > 0.0 && e.horizon.is_finite()) {
            return Err(Error::config("evolution.horizon", "must be positive"));
        }
        if e.blowup_threshold.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::config("evolution.blowup_threshold", "must be positive"));
        }
        let x = &self.experiment;
        if !TAGS.contains(&x.tag.as_str()) {
            return Err(Error::config("experiment.tag", format!("unknown tag `{}`", x.tag)));
        }
        if x.eps_list.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config("experiment.eps_list", "values must be positive"));
        }
        if x.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("experiment.eps_list", "must be strictly decreasing"));
        }
        let [lo, hi] = x.fit_window;
        if !(lo >= 0.0 && lo < hi && hi <= e.horizon) {
            return Err(Error::config("experiment.fit_window", format!("[{lo}, {hi}] is not inside [0, {}]", e.horizon)));
        }
        Ok(())
    }

    /// Human-readable warnings for settings that depart from the paper.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.norms.n1 != N1_DEFAULT {
            w.push(format!(
                "WARNING: norms.N1 = {} differs from the value 12 fixed in the definition of the Z norm; results are not comparable",
                self.norms.n1
            ));
        }
        w
    }
}

fn overlay(base: &mut serde_json::Value, doc: serde_json::Value) {
    match (base, doc) {
        (serde_json::Value::Object(b), serde_json::Value::Object(d)) => {
            for (k, v) in d {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, d) => *b = d,
    }
}
