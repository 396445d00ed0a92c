//! Serializable report shapes written next to run outputs. The shapes are
//! owned here so the emitted schema stays stable whatever the library types
//! do internally.

use std::fs;
use std::path::Path;

use groundshot::{
    BlockKind, BlockSpec, ChainTuning, Classification, GroundStateBracket, HypothesisReport,
    StopReason, Tag, Verdict,
};
use serde::Serialize;

pub fn tag_label(tag: Tag) -> &'static str {
    match tag {
        Tag::P => "P",
        Tag::N => "N",
        Tag::Undetermined => "undetermined",
    }
}

pub fn verdict_label(verdict: Verdict) -> &'static str {
    match verdict {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

pub fn reason_label(reason: StopReason) -> &'static str {
    match reason {
        StopReason::ZeroCrossing => "zero-crossing",
        StopReason::Turnaround => "turnaround",
        StopReason::Decay => "decay",
        StopReason::RMaxExhausted => "r-max-exhausted",
        StopReason::StepFailure => "step-failure",
        StopReason::DomainExit => "domain-exit",
    }
}

pub fn kind_label(kind: &BlockKind) -> String {
    match kind {
        BlockKind::Power { q } => format!("power(q = {q})"),
        BlockKind::Sine { offset, amplitude, .. } if *amplitude == 0.0 => {
            format!("constant({offset})")
        }
        BlockKind::Sine { offset, amplitude, frequency } => {
            format!("sine(offset = {offset}, amplitude = {amplitude}, frequency = {frequency})")
        }
        BlockKind::Sampled { nodes } => format!("sampled({} nodes)", nodes.len()),
    }
}

#[derive(Debug, Serialize)]
pub struct CheckJson {
    pub name: &'static str,
    pub verdict: &'static str,
    pub witness_s: f64,
    pub witness_margin: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub samples: usize,
}

#[derive(Debug, Serialize)]
pub struct VerifyJson {
    pub p: f64,
    pub n: u32,
    pub theta: f64,
    pub b: f64,
    pub beta: f64,
    pub verdict: &'static str,
    pub checks: Vec<CheckJson>,
}

impl VerifyJson {
    pub fn new(p: f64, n: u32, theta: f64, report: &HypothesisReport) -> Self {
        let checks = vec![
            check_json("slope-bound", &report.slope_bound),
            check_json("secant-monotone", &report.secant_monotone),
            check_json("subcritical-growth", &report.subcritical_growth),
        ];
        let verdicts = [
            report.slope_bound.verdict,
            report.secant_monotone.verdict,
            report.subcritical_growth.verdict,
        ];
        let overall = if verdicts.contains(&Verdict::Fail) {
            Verdict::Fail
        } else if verdicts.contains(&Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        VerifyJson { p, n, theta, b: report.b, beta: report.beta, verdict: verdict_label(overall), checks }
    }

    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }

    pub fn failed(&self) -> bool {
        self.verdict == "fail"
    }
}

fn check_json(name: &'static str, report: &groundshot::CheckReport) -> CheckJson {
    CheckJson {
        name,
        verdict: verdict_label(report.verdict),
        witness_s: report.witness_s,
        witness_margin: report.witness_margin,
        grid_lo: report.grid_lo,
        grid_hi: report.grid_hi,
        samples: report.samples,
    }
}

#[derive(Debug, Serialize)]
pub struct ClassifyJson {
    pub alpha: f64,
    pub tag: &'static str,
    pub reason: &'static str,
    pub r_stop: f64,
    pub terminal_u: f64,
    pub terminal_v: f64,
}

impl ClassifyJson {
    pub fn new(alpha: f64, shot: &Classification) -> Self {
        ClassifyJson {
            alpha,
            tag: tag_label(shot.tag),
            reason: reason_label(shot.reason),
            r_stop: shot.r_stop,
            terminal_u: shot.terminal.u,
            terminal_v: shot.terminal.v,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BracketJson {
    pub index: usize,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub midpoint: f64,
    pub width: f64,
    pub lo_tag: &'static str,
    pub hi_tag: &'static str,
}

impl BracketJson {
    pub fn new(index: usize, bracket: &GroundStateBracket) -> Self {
        BracketJson {
            index,
            alpha_lo: bracket.alpha_lo,
            alpha_hi: bracket.alpha_hi,
            midpoint: bracket.midpoint(),
            width: bracket.width(),
            lo_tag: tag_label(bracket.lo_shot.tag),
            hi_tag: tag_label(bracket.hi_shot.tag),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct GroundStatesJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_star: Option<f64>,
    pub alpha_max: f64,
    pub step: f64,
    pub bracket_tol: f64,
    pub brackets: Vec<BracketJson>,
}

#[derive(Debug, Serialize)]
pub struct SpecJson {
    pub kind: String,
    pub amplitude_sq: f64,
    pub breakpoint: f64,
    pub bridge_width: f64,
}

impl SpecJson {
    pub fn new(spec: &BlockSpec) -> Self {
        SpecJson {
            kind: kind_label(&spec.kind),
            amplitude_sq: spec.amplitude_sq,
            breakpoint: spec.breakpoint,
            bridge_width: spec.bridge_width,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TuneBlockJson {
    pub index: usize,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_above: Option<f64>,
    pub amplitude_sq: f64,
    pub tag: &'static str,
}

#[derive(Debug, Serialize)]
pub struct TuneJson {
    pub k: usize,
    pub dim: u32,
    pub alpha_star: f64,
    pub alpha0: f64,
    pub eps0: f64,
    pub escape_radius: f64,
    pub ladder_bounds_hold: bool,
    pub blocks: Vec<TuneBlockJson>,
    pub specs: Vec<SpecJson>,
    pub brackets: Vec<BracketJson>,
}

impl TuneJson {
    pub fn new(tuning: &ChainTuning) -> Self {
        TuneJson {
            k: tuning.k,
            dim: tuning.dim,
            alpha_star: tuning.alpha_star,
            alpha0: tuning.alpha0,
            eps0: tuning.eps0,
            escape_radius: tuning.escape.radius,
            ladder_bounds_hold: tuning.ladder_bounds_hold(),
            blocks: tuning
                .blocks
                .iter()
                .map(|b| TuneBlockJson {
                    index: b.index,
                    alpha: b.alpha,
                    eps_above: b.eps_above,
                    amplitude_sq: b.amplitude_sq,
                    tag: tag_label(b.tag),
                })
                .collect(),
            specs: tuning.specs.iter().map(SpecJson::new).collect(),
            brackets: tuning
                .brackets
                .iter()
                .enumerate()
                .map(|(i, b)| BracketJson::new(i, b))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRowJson {
    pub eps: f64,
    pub amplitude: f64,
    pub amplitude_sq: f64,
    pub probe_alpha: f64,
    pub tag: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SweepJson {
    pub alpha_star: f64,
    pub probe_offset: f64,
    pub rows: Vec<SweepRowJson>,
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
