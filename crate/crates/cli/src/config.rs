use std::path::{Path, PathBuf};

use plap_core::{ProblemSpec, RadialGrid, SourceTerm};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Solve,
    Verify,
    Converge,
    Sweep,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Verify => "verify",
            Mode::Converge => "converge",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// Nodes clustered toward both radii.
    #[default]
    Chebyshev,
    Uniform,
}

fn default_grid_size() -> usize {
    1025
}

fn default_reference_epsilon() -> f64 {
    1e-4
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

fn default_probes() -> usize {
    50
}

fn default_variation_samples() -> usize {
    100
}

/// A run: one JSON document, every top-level field overridable from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub spec: ProblemSpec<f64>,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default)]
    pub grid_kind: GridKind,
    /// Converge mode: strictly decreasing regularization sequence. Sweep mode: optional ε axis for `p < 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default = "default_reference_epsilon")]
    pub reference_epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_list: Option<Vec<SourceTerm<f64>>>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "yes")]
    pub emit_csv: bool,
    #[serde(default = "yes")]
    pub emit_json: bool,
    /// First seed of the probe and test-function sequences.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_variation_samples")]
    pub variation_samples: usize,
    /// Verify mode: cross-check against the Newton minimizer.
    #[serde(default = "yes")]
    pub oracle: bool,
    /// Verify mode: check this nodal profile instead of the analytic one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_csv: Option<PathBuf>,
}

/// Command-line overrides applied on top of the config document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub out_dir: Option<PathBuf>,
    pub grid_size: Option<usize>,
    pub seed: Option<u64>,
    /// `key=json` pairs for arbitrary top-level fields.
    pub set: Vec<String>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let doc: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_value(doc, overrides)
    }

    pub fn from_value(doc: Value, overrides: &Overrides) -> CliResult<Self> {
        let Value::Object(mut map) = doc else {
            return Err(CliError::Config("config must be a JSON object".into()));
        };
        apply_overrides(&mut map, overrides)?;
        let config: RunConfig =
            serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    /// Mode-specific requirements.
    pub fn check(&self) -> CliResult<()> {
        if self.grid_size < 3 {
            return Err(CliError::Config(format!("grid_size must be at least 3, got {}", self.grid_size)));
        }
        match self.mode {
            Mode::Converge => {
                let eps = self.epsilons.as_deref().unwrap_or_default();
                if eps.len() < 2 {
                    return Err(CliError::Config("converge mode needs at least two epsilons".into()));
                }
                if eps.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(CliError::Config("epsilons must be strictly decreasing".into()));
                }
                let smallest = eps[eps.len() - 1];
                if !(self.reference_epsilon > 0.0 && self.reference_epsilon < smallest) {
                    return Err(CliError::Config(format!(
                        "reference_epsilon {} must lie in (0, {smallest})",
                        self.reference_epsilon
                    )));
                }
            }
            Mode::Sweep => {
                if self.p_list.as_ref().is_some_and(Vec::is_empty) {
                    return Err(CliError::Config("p_list is empty".into()));
                }
                if self.f_list.as_ref().is_some_and(Vec::is_empty) {
                    return Err(CliError::Config("f_list is empty".into()));
                }
                if self.epsilons.as_ref().is_some_and(Vec::is_empty) {
                    return Err(CliError::Config("epsilons is empty".into()));
                }
            }
            Mode::Solve | Mode::Verify => {}
        }
        Ok(())
    }

    pub fn grid(&self) -> CliResult<RadialGrid<f64>> {
        let (a, b) = (self.spec.r_inner, self.spec.r_outer);
        let grid = match self.grid_kind {
            GridKind::Chebyshev => RadialGrid::chebyshev(a, b, self.grid_size),
            GridKind::Uniform => RadialGrid::uniform(a, b, self.grid_size),
        };
        grid.map_err(CliError::Solver)
    }

    /// The fields that determine the numbers in a report; output locations and emit flags are left out.
    pub fn identity(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut v {
            for key in ["out_dir", "emit_csv", "emit_json"] {
                map.remove(key);
            }
        }
        v
    }
}

fn apply_overrides(map: &mut Map<String, Value>, o: &Overrides) -> CliResult<()> {
    for item in &o.set {
        let (key, raw) =
            item.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects key=json, got `{item}`")))?;
        // bare words are taken as strings so that `--set out_dir=runs` works
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        map.insert(key.trim().to_string(), value);
    }
    if let Some(mode) = o.mode {
        map.insert("mode".into(), Value::String(mode.as_str().into()));
    }
    if let Some(dir) = &o.out_dir {
        map.insert("out_dir".into(), Value::String(dir.display().to_string()));
    }
    if let Some(n) = o.grid_size {
        map.insert("grid_size".into(), n.into());
    }
    if let Some(seed) = o.seed {
        map.insert("seed".into(), seed.into());
    }
    Ok(())
}
