//! Experiment configuration files and their validation.

use std::fmt;
use std::path::{Path, PathBuf};

use oqs_core::model::{ModelFile, SystemSpec};
use oqs_core::spin_boson::{SpinBosonParams, CUTOFF_PROBE};
use oqs_core::stochastic::chain::MIN_TRAJECTORY;
use oqs_core::tolerance::MAX_DIM_ENV;
use oqs_core::{InitialState, ToleranceConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Divisibility,
    Spinboson,
    MarkovTest,
    Diagnostics,
    NzProjection,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Divisibility => "divisibility",
            Command::Spinboson => "spinboson",
            Command::MarkovTest => "markov-test",
            Command::Diagnostics => "diagnostics",
            Command::NzProjection => "nz-projection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomModel {
    pub d_s: usize,
    pub d_e: usize,
    pub coupling: f64,
    #[serde(default)]
    pub commuting: bool,
}

/// Where the Hamiltonians come from. Random models are redrawn per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Random(RandomModel),
    Inline(ModelFile),
    File(PathBuf),
    SpinBoson(SpinBosonParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// `steps` equally spaced points from `t0` to `t1` inclusive.
    pub fn points(&self) -> Vec<f64> {
        let n = self.steps.max(2);
        let h = (self.t1 - self.t0) / (n - 1) as f64;
        (0..n).map(|k| if k == n - 1 { self.t1 } else { self.t0 + k as f64 * h }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkovFamily {
    /// Classical chain sampled directly.
    Chain,
    /// The same chain realised as a repeated quantum instrument.
    EmbeddedChain,
    /// Qubit devices without an environment.
    Memoryless,
    /// Qubit devices with a persistent environment qubit.
    Dilated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinBosonStart {
    EqualSuperposition,
    MaximallyMixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainOptions {
    pub transition: Vec<Vec<f64>>,
    #[serde(default)]
    pub second_order: Option<Vec<Vec<f64>>>,
}

/// Command-specific knobs; each command reads only its own fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// divisibility: flags swept per seed (default `[false, true]`).
    pub commuting_flags: Option<Vec<bool>>,
    /// spinboson: also run the common-period composition check.
    pub periodicity_check: bool,
    pub periodicity_tolerance: Option<f64>,
    pub initial: Option<SpinBosonStart>,
    /// markov-test
    pub family: Option<MarkovFamily>,
    pub chain: Option<ChainOptions>,
    pub length: Option<usize>,
    pub alpha: Option<f64>,
    pub controls: Option<usize>,
    pub process_steps: Option<usize>,
    pub break_index: Option<usize>,
    pub env_coupling: Option<f64>,
    pub dt: Option<f64>,
    pub threshold: Option<f64>,
    /// diagnostics
    pub sie_constant: Option<f64>,
    pub widths: Option<Vec<f64>>,
    /// nz-projection: number of environment levels kept by `P`.
    pub p_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub model: Option<ModelSource>,
    pub time_grid: TimeGrid,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub tolerances: Option<ToleranceConfig>,
    pub output: String,
    #[serde(default)]
    pub options: Options,
}

/// One validation finding, tied to a config field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Parses a config, reporting JSON errors with their line and column.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig, String> {
    serde_json::from_str(text).map_err(|e| format!("{origin}: line {} column {}: {e}", e.line(), e.column()))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text, &path.display().to_string())
}

impl ExperimentConfig {
    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![0])
    }

    /// Configured tolerances with the dimension cap taken from the environment when set.
    pub fn tolerances(&self) -> Result<ToleranceConfig, Diagnostic> {
        let mut tol = self.tolerances.clone().unwrap_or_default();
        if let Ok(raw) = std::env::var(MAX_DIM_ENV) {
            match raw.trim().parse::<usize>() {
                Ok(v) if v > 0 => tol.max_dim = v,
                _ => return Err(Diagnostic::new(MAX_DIM_ENV, format!("expected a positive integer, got {raw:?}"))),
            }
        }
        Ok(tol)
    }

    /// Every problem that would stop the run; empty when runnable.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let tol = match self.tolerances() {
            Ok(t) => t,
            Err(d) => {
                out.push(d);
                ToleranceConfig::default()
            }
        };
        self.validate_tolerances(&tol, &mut out);
        let g = &self.time_grid;
        if g.steps < 2 {
            out.push(Diagnostic::new("time_grid.steps", format!("must be at least 2, got {}", g.steps)));
        }
        if !(g.t0.is_finite() && g.t1.is_finite()) || g.t1 <= g.t0 {
            out.push(Diagnostic::new("time_grid", format!("need finite t1 > t0, got t0 = {}, t1 = {}", g.t0, g.t1)));
        }
        if matches!(&self.seeds, Some(s) if s.is_empty()) {
            out.push(Diagnostic::new("seeds", "list is empty"));
        }
        self.validate_output(&mut out);
        self.validate_model(&tol, &mut out);
        self.validate_options(&tol, &mut out);
        out
    }

    fn validate_tolerances(&self, tol: &ToleranceConfig, out: &mut Vec<Diagnostic>) {
        let fields = [
            ("hermitian", tol.hermitian),
            ("normalization", tol.normalization),
            ("psd", tol.psd),
            ("trace", tol.trace),
            ("divisibility_threshold", tol.divisibility_threshold),
            ("commutator", tol.commutator),
            ("cutoff_drift", tol.cutoff_drift),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                out.push(Diagnostic::new(format!("tolerances.{name}"), format!("must be positive and finite, got {v}")));
            }
        }
        if tol.max_dim == 0 {
            out.push(Diagnostic::new("tolerances.max_dim", "must be positive"));
        }
    }

    fn validate_output(&self, out: &mut Vec<Diagnostic>) {
        if self.output.trim().is_empty() {
            out.push(Diagnostic::new("output", "prefix is empty"));
            return;
        }
        let prefix = Path::new(&self.output);
        let parent = match prefix.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        match std::fs::metadata(&parent) {
            Ok(m) if m.is_dir() && !m.permissions().readonly() => {}
            Ok(_) => out.push(Diagnostic::new("output", format!("{} is not a writable directory", parent.display()))),
            Err(e) => out.push(Diagnostic::new("output", format!("{}: {e}", parent.display()))),
        }
    }

    fn size_check(&self, dim: usize, tol: &ToleranceConfig, out: &mut Vec<Diagnostic>) {
        if dim > tol.max_dim {
            out.push(Diagnostic::new("model", format!("SizeLimit: dimension {dim} exceeds the maximum of {}", tol.max_dim)));
        }
    }

    fn validate_model(&self, tol: &ToleranceConfig, out: &mut Vec<Diagnostic>) {
        let needs = match self.command {
            Command::MarkovTest => return,
            Command::Spinboson => "spin_boson",
            Command::Divisibility => "random",
            _ => "random, inline or file",
        };
        let Some(model) = &self.model else {
            out.push(Diagnostic::new("model", format!("missing; {} needs a {needs} model", self.command.name())));
            return;
        };
        let kind_ok = match (self.command, model) {
            (Command::Spinboson, ModelSource::SpinBoson(_)) => true,
            (Command::Spinboson, _) | (_, ModelSource::SpinBoson(_)) => false,
            (Command::Divisibility, m) => matches!(m, ModelSource::Random(_)),
            _ => true,
        };
        if !kind_ok {
            out.push(Diagnostic::new("model", format!("{} needs a {needs} model", self.command.name())));
            return;
        }
        match model {
            ModelSource::Random(r) => {
                if r.d_s == 0 || r.d_e == 0 {
                    out.push(Diagnostic::new("model.random", "d_s and d_e must be positive"));
                }
                if !(r.coupling >= 0.0 && r.coupling.is_finite()) {
                    out.push(Diagnostic::new("model.random.coupling", format!("must be finite and >= 0, got {}", r.coupling)));
                }
                self.size_check(r.d_s.saturating_mul(r.d_e), tol, out);
            }
            ModelSource::Inline(file) => {
                self.size_check(file.d_s.saturating_mul(file.d_e), tol, out);
                if let Err(e) = SystemSpec::from_model_file(file, tol) {
                    out.push(Diagnostic::new("model.inline", e.to_string()));
                }
            }
            ModelSource::File(path) => match read_model_file(path) {
                Ok(file) => {
                    self.size_check(file.d_s.saturating_mul(file.d_e), tol, out);
                    if let Err(e) = SystemSpec::from_model_file(&file, tol) {
                        out.push(Diagnostic::new("model.file", format!("{}: {e}", path.display())));
                    }
                }
                Err(e) => out.push(Diagnostic::new("model.file", e)),
            },
            ModelSource::SpinBoson(p) => {
                let probe = p.with_cutoff(p.n_max + CUTOFF_PROBE);
                match probe.validate(tol) {
                    Ok(()) => {}
                    Err(oqs_core::Error::SizeLimit { requested, max }) => out.push(Diagnostic::new(
                        "model.spin_boson",
                        format!("SizeLimit: dimension {requested} (including the cutoff probe) exceeds the maximum of {max}"),
                    )),
                    Err(e) => out.push(Diagnostic::new("model.spin_boson", e.to_string())),
                }
            }
        }
    }

    fn validate_options(&self, tol: &ToleranceConfig, out: &mut Vec<Diagnostic>) {
        let o = &self.options;
        let positive = |v: Option<f64>, name: &str, out: &mut Vec<Diagnostic>| {
            if let Some(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    out.push(Diagnostic::new(format!("options.{name}"), format!("must be positive, got {x}")));
                }
            }
        };
        match self.command {
            Command::Divisibility => {
                if matches!(&o.commuting_flags, Some(f) if f.is_empty()) {
                    out.push(Diagnostic::new("options.commuting_flags", "list is empty"));
                }
            }
            Command::Spinboson => positive(o.periodicity_tolerance, "periodicity_tolerance", out),
            Command::MarkovTest => {
                if let Some(a) = o.alpha {
                    if !(a > 0.0 && a < 1.0) {
                        out.push(Diagnostic::new("options.alpha", format!("must lie in (0, 1), got {a}")));
                    }
                }
                positive(o.dt, "dt", out);
                positive(o.threshold, "threshold", out);
                if let Some(c) = o.env_coupling {
                    if !(c >= 0.0 && c.is_finite()) {
                        out.push(Diagnostic::new("options.env_coupling", format!("must be finite and >= 0, got {c}")));
                    }
                }
                match o.family.unwrap_or(MarkovFamily::Chain) {
                    MarkovFamily::Chain | MarkovFamily::EmbeddedChain => {
                        match &o.chain {
                            None => out.push(Diagnostic::new("options.chain", "required for chain families")),
                            Some(c) => {
                                let spec = oqs_core::stochastic::ChainSpec {
                                    states: c.transition.len(),
                                    transition: c.transition.clone(),
                                    second_order: c.second_order.clone(),
                                    seed: 0,
                                };
                                if let Err(e) = spec.validate() {
                                    out.push(Diagnostic::new("options.chain", e.to_string()));
                                }
                                let dim = if c.second_order.is_some() { spec.states * spec.states } else { spec.states };
                                if o.family == Some(MarkovFamily::EmbeddedChain) {
                                    self.size_check(dim, tol, out);
                                }
                            }
                        }
                        let length = o.length.unwrap_or(100_000);
                        if length < MIN_TRAJECTORY {
                            out.push(Diagnostic::new("options.length", format!("must be at least {MIN_TRAJECTORY}, got {length}")));
                        }
                    }
                    MarkovFamily::Memoryless | MarkovFamily::Dilated => {
                        let controls = o.controls.unwrap_or(3);
                        let steps = o.process_steps.unwrap_or(6);
                        let k = o.break_index.unwrap_or(2);
                        if controls < 2 {
                            out.push(Diagnostic::new("options.controls", "at least two control histories are required"));
                        }
                        if k >= steps {
                            out.push(Diagnostic::new("options.break_index", format!("must be below process_steps = {steps}")));
                        }
                    }
                }
            }
            Command::Diagnostics => {
                positive(o.sie_constant, "sie_constant", out);
                if let Some(ws) = &o.widths {
                    if ws.is_empty() || ws.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                        out.push(Diagnostic::new("options.widths", "must be a non-empty list of positive numbers"));
                    }
                    if !matches!(self.model, Some(ModelSource::Random(_))) {
                        out.push(Diagnostic::new("options.widths", "the bandwidth sweep needs a random model"));
                    }
                }
            }
            Command::NzProjection => {
                if let (Some(p), Some(d_e)) = (o.p_dim, self.env_dim()) {
                    if p > d_e {
                        out.push(Diagnostic::new("options.p_dim", format!("must not exceed d_E = {d_e}")));
                    }
                }
            }
            Command::Simulate => {}
        }
    }

    fn env_dim(&self) -> Option<usize> {
        match self.model.as_ref()? {
            ModelSource::Random(r) => Some(r.d_e),
            ModelSource::Inline(f) => Some(f.d_e),
            ModelSource::File(p) => read_model_file(p).ok().map(|f| f.d_e),
            ModelSource::SpinBoson(_) => None,
        }
    }
}

pub fn read_model_file(path: &Path) -> Result<ModelFile, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
}

/// Loads a file or inline model together with its optional initial state.
pub fn fixed_model(source: &ModelSource, tol: &ToleranceConfig) -> Result<(SystemSpec, Option<InitialState>), String> {
    match source {
        ModelSource::Inline(file) => SystemSpec::from_model_file(file, tol).map_err(|e| e.to_string()),
        ModelSource::File(path) => {
            let file = read_model_file(path)?;
            SystemSpec::from_model_file(&file, tol).map_err(|e| format!("{}: {e}", path.display()))
        }
        _ => Err("not a fixed model".into()),
    }
}
