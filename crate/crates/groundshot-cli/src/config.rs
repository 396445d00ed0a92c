//! Experiment configuration: the structured text format, its validation,
//! and its resolution into a compiled chain plus runnable controls.

use std::fs;
use std::path::Path;

use groundshot::{
    bracket_alpha_star, classify, BaseModel, BlockKind, BlockSpec, ChainError,
    IntegrationControls, ModelError, PiecewiseNonlinearity, ShootError, ShotControls, Tag,
    TuningControls, TuningError, UpperLimit,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("could not read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("could not parse the configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("could not emit the configuration: {0}")]
    Emit(#[from] toml::ser::Error),
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("block {index}: breakpoint keyword {keyword:?} is not understood (only \"auto\")")]
    UnknownKeyword { index: usize, keyword: String },
    #[error("block {index}: no {want:?} point within {cap} auto-breakpoint grid steps")]
    AutoBreakpointNotFound { index: usize, want: Tag, cap: usize },
    #[error("the command needs a [sweep] section in the configuration")]
    MissingSweep,
    #[error("sweep epsilon {eps} exceeds the bound (gamma - alpha*)/4 = {bound}")]
    SweepEpsilonTooLarge { eps: f64, bound: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("shooting failed while resolving the chain: {0}")]
    Shoot(#[from] ShootError),
    #[error("locating alpha* failed: {0}")]
    Boundary(#[from] TuningError),
}

/// Top-level experiment description, parsed from structured text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub nonlinearity: NonlinearitySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub tuning: TuningSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

/// Base exponent and dimension plus the ordered upper blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySection {
    pub p: f64,
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, rename = "block")]
    pub blocks: Vec<BlockEntry>,
}

/// One upper block as written in the configuration. The breakpoint comes
/// last so the emitted form stays valid when it is a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    #[serde(flatten)]
    pub shape: ShapeEntry,
    pub amplitude_sq: f64,
    pub bridge_width: f64,
    pub breakpoint: BreakpointEntry,
}

/// Block shape selected by the `kind` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeEntry {
    Power { q: f64 },
    Constant { value: f64 },
    Sine { offset: f64, amplitude: f64, frequency: f64 },
    Sampled { nodes: Vec<[f64; 2]> },
}

impl ShapeEntry {
    pub fn to_kind(&self) -> BlockKind {
        match self {
            ShapeEntry::Power { q } => BlockKind::Power { q: *q },
            ShapeEntry::Constant { value } => BlockKind::constant(*value),
            ShapeEntry::Sine { offset, amplitude, frequency } => BlockKind::Sine {
                offset: *offset,
                amplitude: *amplitude,
                frequency: *frequency,
            },
            ShapeEntry::Sampled { nodes } => {
                BlockKind::Sampled { nodes: nodes.iter().map(|xy| (xy[0], xy[1])).collect() }
            }
        }
    }
}

/// Where a block hands over: a fixed value, an offset above the located
/// boundary value, or `"auto"` (grid-scan until the classification flips).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BreakpointEntry {
    Keyword(String),
    Absolute { absolute: f64 },
    Offset { offset_from_alpha_star: f64 },
}

impl BreakpointEntry {
    fn is_auto(&self) -> bool {
        matches!(self, BreakpointEntry::Keyword(word) if word == "auto")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            r_max: default_r_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSection {
    /// Upper end of the initial-value scan; defaults to twice the located
    /// boundary value when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<f64>,
    /// Grid step of the scan, and of auto-breakpoint resolution.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_bracket_tol")]
    pub bracket_tol: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection { alpha_max: None, step: default_step(), bracket_tol: default_bracket_tol() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningSection {
    #[serde(default = "default_k")]
    pub k: usize,
    /// Window parameter of the tail-growth check.
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_cap")]
    pub doubling_cap: usize,
    #[serde(default = "default_cap")]
    pub halving_cap: usize,
    #[serde(default = "default_bracket_tol")]
    pub bracket_tol: f64,
}

impl Default for TuningSection {
    fn default() -> Self {
        TuningSection {
            k: default_k(),
            theta: default_theta(),
            doubling_cap: default_cap(),
            halving_cap: default_cap(),
            bracket_tol: default_bracket_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl OutputSection {
    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: default_directory(), formats: default_formats() }
    }
}

/// Grid over amplitude and bridge offset for the phase-map command. The
/// chain is rebuilt per point as base + one block at alpha* + eps with the
/// given amplitude, and a probe at alpha* + (1 + probe_offset) eps is
/// classified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    #[serde(default = "default_a_min")]
    pub a_min: f64,
    #[serde(default = "default_a_max")]
    pub a_max: f64,
    #[serde(default = "default_a_count")]
    pub a_count: usize,
    #[serde(default = "default_eps_list")]
    pub eps: Vec<f64>,
    /// Probe sits `probe_offset` bridge widths above the first breakpoint.
    #[serde(default = "default_probe_offset")]
    pub probe_offset: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            a_min: default_a_min(),
            a_max: default_a_max(),
            a_count: default_a_count(),
            eps: default_eps_list(),
            probe_offset: default_probe_offset(),
        }
    }
}

fn default_rel_tol() -> f64 {
    1e-10
}
fn default_abs_tol() -> f64 {
    1e-12
}
fn default_r_max() -> f64 {
    1e3
}
fn default_step() -> f64 {
    0.05
}
fn default_bracket_tol() -> f64 {
    1e-8
}
fn default_k() -> usize {
    2
}
fn default_theta() -> f64 {
    0.5
}
fn default_cap() -> usize {
    60
}
fn default_directory() -> String {
    "out".to_string()
}
fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg]
}
fn default_a_min() -> f64 {
    1.0
}
fn default_a_max() -> f64 {
    20.0
}
fn default_a_count() -> usize {
    20
}
fn default_eps_list() -> Vec<f64> {
    vec![0.1]
}
fn default_probe_offset() -> f64 {
    2.0
}

/// Built-in configurations, embedded so reproduction never depends on
/// repository files.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");
pub const EXAMPLE2_CONFIG: &str = include_str!("../configs/example2.toml");
pub const EXAMPLE3_CONFIG: &str = include_str!("../configs/example3.toml");
pub const EXAMPLE4_CONFIG: &str = include_str!("../configs/example4.toml");

pub fn builtin_configs() -> [(&'static str, &'static str); 4] {
    [
        ("default.toml", DEFAULT_CONFIG),
        ("example2.toml", EXAMPLE2_CONFIG),
        ("example3.toml", EXAMPLE3_CONFIG),
        ("example4.toml", EXAMPLE4_CONFIG),
    ]
}

/// A configuration resolved into runnable pieces.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub base: BaseModel,
    pub chain: PiecewiseNonlinearity,
    pub controls: ShotControls,
    /// Boundary value of the bare base family, located only when some
    /// breakpoint referred to it.
    pub alpha_star: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn base(&self) -> Result<BaseModel, ConfigError> {
        Ok(BaseModel::new(self.nonlinearity.p, self.nonlinearity.n)?)
    }

    pub fn shot_controls(&self) -> ShotControls {
        ShotControls {
            integration: IntegrationControls {
                rel_tol: self.solver.rel_tol,
                abs_tol: self.solver.abs_tol,
                r_max: self.solver.r_max,
            },
            ..Default::default()
        }
    }

    pub fn tuning_controls(&self) -> TuningControls {
        TuningControls {
            shot: self.shot_controls(),
            bracket_tol: self.tuning.bracket_tol,
            doubling_cap: self.tuning.doubling_cap,
            halving_cap: self.tuning.halving_cap,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field: &'static str, reason: String| ConfigError::Invalid { field, reason };
        let positive = |field: &'static str, value: f64| -> Result<(), ConfigError> {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("must be finite and positive, got {value}")))
            }
        };

        if !self.nonlinearity.p.is_finite() {
            return Err(invalid("nonlinearity.p", "must be finite".to_string()));
        }
        if let Some(gamma) = self.nonlinearity.gamma {
            positive("nonlinearity.gamma", gamma)?;
        }
        for (index, entry) in self.nonlinearity.blocks.iter().enumerate() {
            positive("block.amplitude_sq", entry.amplitude_sq)?;
            positive("block.bridge_width", entry.bridge_width)?;
            match &entry.shape {
                ShapeEntry::Power { q } => positive("block.q", *q)?,
                ShapeEntry::Constant { value } => positive("block.value", *value)?,
                ShapeEntry::Sine { offset, amplitude, frequency } => {
                    for (name, v) in [
                        ("block.offset", offset),
                        ("block.amplitude", amplitude),
                        ("block.frequency", frequency),
                    ] {
                        if !v.is_finite() {
                            return Err(invalid(name, format!("must be finite, got {v}")));
                        }
                    }
                }
                ShapeEntry::Sampled { nodes } => {
                    if nodes.len() < 2 {
                        return Err(invalid(
                            "block.nodes",
                            format!("needs at least two nodes, got {}", nodes.len()),
                        ));
                    }
                    for pair in nodes.windows(2) {
                        if !(pair[1][0] > pair[0][0]) {
                            return Err(invalid(
                                "block.nodes",
                                "abscissas must increase strictly".to_string(),
                            ));
                        }
                    }
                    if nodes.iter().flatten().any(|v| !v.is_finite()) {
                        return Err(invalid("block.nodes", "must be finite".to_string()));
                    }
                }
            }
            match &entry.breakpoint {
                BreakpointEntry::Keyword(word) if word != "auto" => {
                    return Err(ConfigError::UnknownKeyword { index, keyword: word.clone() });
                }
                BreakpointEntry::Absolute { absolute } => positive("block.breakpoint", *absolute)?,
                BreakpointEntry::Offset { offset_from_alpha_star } => {
                    if !offset_from_alpha_star.is_finite() {
                        return Err(invalid(
                            "block.breakpoint.offset_from_alpha_star",
                            "must be finite".to_string(),
                        ));
                    }
                }
                _ => {}
            }
        }

        positive("solver.rel_tol", self.solver.rel_tol)?;
        positive("solver.abs_tol", self.solver.abs_tol)?;
        positive("solver.r_max", self.solver.r_max)?;
        positive("scan.step", self.scan.step)?;
        positive("scan.bracket_tol", self.scan.bracket_tol)?;
        if let Some(alpha_max) = self.scan.alpha_max {
            positive("scan.alpha_max", alpha_max)?;
        }
        if self.tuning.k < 2 {
            return Err(invalid("tuning.k", format!("must be at least 2, got {}", self.tuning.k)));
        }
        if !(self.tuning.theta > 0.0 && self.tuning.theta < 1.0) {
            return Err(invalid(
                "tuning.theta",
                format!("must lie strictly between 0 and 1, got {}", self.tuning.theta),
            ));
        }
        if self.tuning.doubling_cap == 0 || self.tuning.halving_cap == 0 {
            return Err(invalid("tuning caps", "must be at least 1".to_string()));
        }
        positive("tuning.bracket_tol", self.tuning.bracket_tol)?;
        if self.output.directory.is_empty() {
            return Err(invalid("output.directory", "must not be empty".to_string()));
        }
        if let Some(sweep) = &self.sweep {
            positive("sweep.a_min", sweep.a_min)?;
            positive("sweep.a_max", sweep.a_max)?;
            if sweep.a_min > sweep.a_max {
                return Err(invalid(
                    "sweep.a_min",
                    format!("must not exceed a_max, got {} > {}", sweep.a_min, sweep.a_max),
                ));
            }
            if sweep.a_count == 0 {
                return Err(invalid("sweep.a_count", "must be at least 1".to_string()));
            }
            if sweep.eps.is_empty() {
                return Err(invalid("sweep.eps", "must not be empty".to_string()));
            }
            for &eps in &sweep.eps {
                positive("sweep.eps", eps)?;
            }
            positive("sweep.probe_offset", sweep.probe_offset)?;
        }
        Ok(())
    }

    /// Locates the base family's boundary value at the solver tolerances.
    pub fn locate_alpha_star(&self) -> Result<f64, ConfigError> {
        let base = self.base()?;
        Ok(bracket_alpha_star(&base, 1e-10, &self.shot_controls())?.midpoint())
    }

    /// Compiles the chain, resolving offset and auto breakpoints in order.
    pub fn resolve(&self) -> Result<ResolvedExperiment, ConfigError> {
        let base = self.base()?;
        let controls = self.shot_controls();
        let needs_star = self
            .nonlinearity
            .blocks
            .iter()
            .any(|entry| !matches!(entry.breakpoint, BreakpointEntry::Absolute { .. }));
        let alpha_star = if needs_star {
            Some(bracket_alpha_star(&base, 1e-10, &controls)?.midpoint())
        } else {
            None
        };
        let gamma = match self.nonlinearity.gamma {
            Some(g) => UpperLimit::Finite(g),
            None => UpperLimit::Unbounded,
        };

        let mut specs: Vec<BlockSpec> = Vec::with_capacity(self.nonlinearity.blocks.len());
        for (index, entry) in self.nonlinearity.blocks.iter().enumerate() {
            let breakpoint = match &entry.breakpoint {
                BreakpointEntry::Absolute { absolute } => *absolute,
                BreakpointEntry::Offset { offset_from_alpha_star } => {
                    alpha_star.expect("offset breakpoints force location") + offset_from_alpha_star
                }
                BreakpointEntry::Keyword(_) if entry.breakpoint.is_auto() => {
                    let star = alpha_star.expect("auto breakpoints force location");
                    if index == 0 {
                        star + entry.bridge_width
                    } else {
                        let partial =
                            PiecewiseNonlinearity::compile(base.clone(), specs.clone(), gamma)?;
                        let previous = &specs[index - 1];
                        let from = previous.breakpoint + previous.bridge_width;
                        let want = if index % 2 == 1 { Tag::P } else { Tag::N };
                        auto_breakpoint(&partial, from, self.scan.step, want, &controls, index)?
                    }
                }
                BreakpointEntry::Keyword(word) => {
                    return Err(ConfigError::UnknownKeyword { index, keyword: word.clone() });
                }
            };
            specs.push(BlockSpec::new(
                entry.shape.to_kind(),
                entry.amplitude_sq,
                breakpoint,
                entry.bridge_width,
            ));
        }

        let chain = PiecewiseNonlinearity::compile(base.clone(), specs, gamma)?;
        Ok(ResolvedExperiment { base, chain, controls, alpha_star })
    }
}

/// First grid point above `from` (stepping by `step`) whose classification
/// on the partial chain matches `want`.
fn auto_breakpoint(
    partial: &PiecewiseNonlinearity,
    from: f64,
    step: f64,
    want: Tag,
    controls: &ShotControls,
    index: usize,
) -> Result<f64, ConfigError> {
    let cap = 1000;
    for m in 1..=cap {
        let alpha = from + step * m as f64;
        let tag = classify(partial, alpha, controls)?.tag;
        if tag == want {
            return Ok(alpha);
        }
    }
    Err(ConfigError::AutoBreakpointNotFound { index, want, cap })
}
