//! Run configuration: one JSON document, optionally patched by `--set key=value`.

use std::path::{Path, PathBuf};

use euler_poisson::equilibria::ShearFlowSpec;
use euler_poisson::structures::Structure;
use euler_poisson::verify::{Fault, DEFAULT_RANK_TOL};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub identity: f64,
    pub block: f64,
    pub rank: f64,
    /// Divergence tolerance relative to the largest mode amplitude.
    pub divergence: f64,
    /// Equilibrium residual accepted by the `shear` and `rank` commands.
    pub equilibrium: f64,
    /// Kernel membership tolerance `‖Kv‖ ≤ tol ‖K‖ ‖v‖`.
    pub kernel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { identity: 1e-12, block: 1e-13, rank: DEFAULT_RANK_TOL, divergence: 1e-10, equilibrium: 1e-14, kernel: 1e-13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    /// Random divergence-free state from `seed` and `amplitude`.
    #[default]
    Random,
    Zero,
    /// The state described by the `shear` key.
    Shear,
    Snapshot {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: PathBuf,
    pub diagnostics: String,
    /// Report file name; the report always goes to stdout as well.
    pub report: Option<String>,
    /// Snapshot interval in steps; 0 writes only the final snapshot.
    pub snapshot_every: usize,
    pub tensor: String,
}

impl Default for Output {
    fn default() -> Self {
        Output {
            dir: PathBuf::from("."),
            diagnostics: "diagnostics.csv".into(),
            report: None,
            snapshot_every: 0,
            tensor: "tensor.bin".into(),
        }
    }
}

impl Output {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    #[serde(rename = "N")]
    pub n: u32,
    pub aniso: [f64; 3],
    pub n_vector: [f64; 3],
    pub structure: Structure,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    pub amplitude: f64,
    /// Samples per identity family in `verify`.
    pub cases: usize,
    pub tolerances: Tolerances,
    pub initial: Initial,
    pub shear: Option<ShearFlowSpec>,
    pub baseline_seeds: Vec<u64>,
    /// Diagnostics interval in steps.
    pub record_every: usize,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub fault: Option<Fault>,
    pub output: Output,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            n: 1,
            aniso: [1.0, 1.0, 1.0],
            n_vector: [1.0, 0.0, 0.0],
            structure: Structure::Projected,
            dt: 1e-3,
            steps: 1000,
            seed: 0,
            amplitude: 1.0,
            cases: 1000,
            tolerances: Tolerances::default(),
            initial: Initial::Random,
            shear: None,
            baseline_seeds: vec![0, 1, 2, 3, 4],
            record_every: 100,
            workers: 0,
            fault: None,
            output: Output::default(),
        }
    }
}

/// Parses the right-hand side of `--set`: JSON when it parses, a string otherwise.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `key=value` to a JSON object; dotted keys address nested objects.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), String> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| format!("override '{assignment}' is not key=value"))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("invalid override key '{key}'"));
    }
    let mut cur = doc;
    for p in &parts[..parts.len() - 1] {
        let obj = cur.as_object_mut().ok_or_else(|| format!("'{key}' does not address an object"))?;
        cur = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
    }
    let obj = cur.as_object_mut().ok_or_else(|| format!("'{key}' does not address an object"))?;
    obj.insert(parts[parts.len() - 1].to_string(), parse_value(raw));
    Ok(())
}

impl Config {
    /// Reads `path` (or starts from `{}`), applies overrides, and deserialises.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config, String> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
                serde_json::from_str::<Value>(&text).map_err(|e| format!("{}: {e}", p.display()))?
            }
            None => Value::Object(Default::default()),
        };
        if !doc.is_object() {
            return Err("the configuration must be a JSON object".into());
        }
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Config = serde_json::from_value(doc).map_err(|e| format!("invalid configuration: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive and finite, got {v}"))
            }
        };
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return Err(format!("dt must be finite and nonzero, got {}", self.dt));
        }
        if self.steps == 0 {
            return Err("steps must be at least 1".into());
        }
        if self.cases == 0 {
            return Err("cases must be at least 1".into());
        }
        if self.baseline_seeds.is_empty() {
            return Err("baseline_seeds must not be empty".into());
        }
        positive("amplitude", self.amplitude)?;
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.identity", t.identity),
            ("tolerances.block", t.block),
            ("tolerances.rank", t.rank),
            ("tolerances.divergence", t.divergence),
            ("tolerances.kernel", t.kernel),
        ] {
            positive(name, v)?;
        }
        if !(t.equilibrium >= 0.0 && t.equilibrium.is_finite()) {
            return Err(format!("tolerances.equilibrium must be non-negative, got {}", t.equilibrium));
        }
        Ok(())
    }
}
