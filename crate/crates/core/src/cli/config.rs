use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ensemble::{DetuningModel, EnsembleParams, SeedSpec, TimeGrid};
use crate::lindblad::{StateKind, SteadyStateOptions, WignerWindow};
use crate::meanfield::SyncOptions;

/// Prefix of the header line that echoes the effective configuration.
pub const CONFIG_ECHO_PREFIX: &str = "# config: ";

/// A list of values, either explicit or evenly spaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    Linear(LinearRange),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        let v = match self {
            GridSpec::Values(v) => v.clone(),
            GridSpec::Linear(r) => {
                if r.count == 0 {
                    return Err("grid count must be at least 1".into());
                }
                if r.count == 1 {
                    vec![r.start]
                } else {
                    let step = (r.stop - r.start) / (r.count - 1) as f64;
                    (0..r.count)
                        .map(|i| if i + 1 == r.count { r.stop } else { r.start + step * i as f64 })
                        .collect()
                }
            }
        };
        if v.is_empty() {
            return Err("grid must contain at least one value".into());
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err("grid values must be finite".into());
        }
        Ok(v)
    }
}

/// Which master-equation backend to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Collective when every detuning vanishes, full product space otherwise.
    #[default]
    Auto,
    Full,
    Collective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreeDephasingSection {
    /// Number of per-realization columns written; all when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realization_columns: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LindbladSection {
    pub backend: Backend,
    pub atol: f64,
    pub rtol: f64,
    /// Check positivity on every this-many snapshots (0 disables).
    pub eigen_stride: usize,
}

impl Default for LindbladSection {
    fn default() -> Self {
        LindbladSection {
            backend: Backend::Auto,
            atol: 1e-11,
            rtol: 1e-9,
            eigen_stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpSweepSection {
    pub eta: GridSpec,
    #[serde(default)]
    pub steady: SteadyStateOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerSection {
    #[serde(default)]
    pub steady: SteadyStateOptions,
    /// Explicit window; defaults to a square of half-width `√(2η/Γ₂) + 3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WignerWindow>,
    #[serde(default = "default_wigner_points")]
    pub points: usize,
}

fn default_wigner_points() -> usize {
    81
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanFieldModel {
    Full,
    Symmetric,
    TwoEnsemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedInitial {
    pub amplitude: f64,
    pub phase: f64,
    pub inversion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldSection {
    pub model: MeanFieldModel,
    /// Reduced initial state; defaults to the synchronized closed form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<ReducedInitial>,
    #[serde(default = "default_mf_atol")]
    pub atol: f64,
    #[serde(default = "default_mf_rtol")]
    pub rtol: f64,
}

fn default_mf_atol() -> f64 {
    1e-10
}

fn default_mf_rtol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncSection {
    /// Values of η/Γ₂.
    pub eta_tilde: GridSpec,
    /// Values of N²δ/Γ₂.
    pub delta_tilde: GridSpec,
    #[serde(default)]
    pub options: SyncOptions,
    /// Append bisection points that refine each column's boundary.
    #[serde(default = "default_true")]
    pub refine: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Phase-diagram CSV written by `sync-sweep`.
    pub input: PathBuf,
}

fn default_detuning() -> DetuningModel {
    DetuningModel::Identical { delta0: 0.0 }
}

fn default_seeds() -> SeedSpec {
    SeedSpec {
        master_seed: 0,
        realization_count: 1,
    }
}

/// Complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; must match the subcommand on the command line when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    pub params: EnsembleParams,
    #[serde(default = "default_detuning")]
    pub detuning: DetuningModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<TimeGrid>,
    #[serde(default = "default_seeds")]
    pub seeds: SeedSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_dephasing: Option<FreeDephasingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lindblad: Option<LindbladSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hp_sweep: Option<HpSweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner: Option<WignerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_field: Option<MeanFieldSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sync: Option<SyncSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
}

impl RunConfig {
    /// One-line JSON of everything that determines the output data, i.e.
    /// without the output path and worker count.
    pub fn echo(&self) -> String {
        let mut echoed = self.clone();
        echoed.output_path = None;
        echoed.worker_count = None;
        serde_json::to_string(&echoed).expect("config serializes")
    }
}

/// Read a JSON config, or the echoed config line of a previous output file.
pub fn read_config_text(path: &Path) -> Result<String, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    if text.trim_start().starts_with('#') {
        return text
            .lines()
            .find_map(|line| line.strip_prefix(CONFIG_ECHO_PREFIX))
            .map(str::to_owned)
            .ok_or_else(|| format!("{} has no `{}` line", path.display(), CONFIG_ECHO_PREFIX.trim()));
    }
    Ok(text)
}

fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str::<Value>(raw)
        .ok()
        .filter(|v| !v.is_object() && !v.is_array())
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}

/// Set `path` (dot separated) to a scalar, creating intermediate objects.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<(), String> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(format!("malformed override path `{path}`"));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let Value::Object(map) = node else {
            return Err(format!("override `{path}`: `{key}` is inside a non-object field"));
        };
        node = map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let Value::Object(map) = node else {
        return Err(format!("override `{path}` does not address an object field"));
    };
    let last = keys[keys.len() - 1];
    if matches!(map.get(last), Some(Value::Object(_)) | Some(Value::Array(_))) {
        return Err(format!("override `{path}` must address a scalar field"));
    }
    map.insert(last.to_owned(), parse_scalar(raw));
    Ok(())
}

/// Parse the config text, apply `FIELD=VALUE` overrides and deserialize.
pub fn load_config(text: &str, overrides: &[(String, String)]) -> Result<RunConfig, String> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?;
    if !value.is_object() {
        return Err("config must be a JSON object".into());
    }
    for (path, raw) in overrides {
        apply_override(&mut value, path, raw)?;
    }
    serde_path_to_error::deserialize(value).map_err(|e| match e.path().to_string().as_str() {
        "." => format!("invalid config: {}", e.inner()),
        path => format!("invalid config at `{path}`: {}", e.inner()),
    })
}
