//! Command implementations. Each command is an ordinary function taking a
//! parsed configuration and an output directory and returning a structured
//! outcome with its exit code, so tests can drive commands directly.

use std::fs;
use std::path::{Path, PathBuf};

use groundshot::{
    blowup_coefficient, certify, classify, find_ground_states, integrate, singular_residual,
    tune_chain, BlockKind, Direction, EventKind, EventSpec, GroundStateBracket,
    PiecewiseNonlinearity, RadialState, ShootError, ShotControls, StopReason, Tag, UpperLimit,
};

use crate::config::{builtin_configs, ConfigError, ExperimentConfig, OutputFormat, EXAMPLE2_CONFIG, EXAMPLE3_CONFIG, EXAMPLE4_CONFIG};
use crate::csvout;
use crate::report::{
    self, tag_label, BracketJson, ClassifyJson, GroundStatesJson, SweepJson, SweepRowJson,
    TuneJson, VerifyJson,
};
use crate::svg::{self, Curve};

#[derive(Debug)]
pub struct VerifyOutcome {
    pub json: VerifyJson,
    pub exit: i32,
}

#[derive(Debug)]
pub struct ClassifyOutcome {
    pub json: ClassifyJson,
    pub exit: i32,
}

#[derive(Debug)]
pub struct GroundStatesOutcome {
    pub brackets: Vec<GroundStateBracket>,
    pub alpha_star: Option<f64>,
    pub undetermined: Option<(f64, StopReason)>,
    pub exit: i32,
}

#[derive(Debug)]
pub struct TuneOutcome {
    pub json: TuneJson,
    pub exit: i32,
}

#[derive(Debug, Clone)]
pub struct ReproCheck {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub passed: bool,
}

impl ReproCheck {
    fn new(name: impl Into<String>, expected: impl Into<String>, observed: impl Into<String>, passed: bool) -> Self {
        ReproCheck { name: name.into(), expected: expected.into(), observed: observed.into(), passed }
    }

    fn print(&self) {
        let mark = if self.passed { "ok  " } else { "FAIL" };
        println!("  [{mark}] {}: expected {}, observed {}", self.name, self.expected, self.observed);
    }
}

#[derive(Debug)]
pub struct ReproduceOutcome {
    pub example: u8,
    pub checks: Vec<ReproCheck>,
    pub exit: i32,
}

impl ReproduceOutcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRowJson>,
    pub exit: i32,
}

fn ensure_dir(out_dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out_dir)?;
    Ok(())
}

/// Runs the hypothesis checks on the configured chain and writes
/// `verify.json`. Exit 0 on pass, 2 on fail, 3 on inconclusive.
pub fn cmd_verify(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<VerifyOutcome> {
    ensure_dir(out_dir)?;
    let resolved = config.resolve()?;
    let theta = config.tuning.theta;
    let report = certify(&resolved.chain, theta)?;
    let json = VerifyJson::new(config.nonlinearity.p, config.nonlinearity.n, theta, &report);
    for check in &json.checks {
        println!(
            "verify {}: {} (witness s = {:.6e}, margin = {:.6e})",
            check.name, check.verdict, check.witness_s, check.witness_margin
        );
    }
    println!("verify overall: {}", json.verdict);
    report::write_json(&out_dir.join("verify.json"), &json)?;
    let exit = match json.verdict {
        "pass" => 0,
        "fail" => 2,
        _ => 3,
    };
    Ok(VerifyOutcome { json, exit })
}

/// Classifies a single initial value on the configured chain and writes
/// `classify.json`.
pub fn cmd_classify(
    config: &ExperimentConfig,
    alpha: f64,
    out_dir: &Path,
) -> anyhow::Result<ClassifyOutcome> {
    ensure_dir(out_dir)?;
    let resolved = config.resolve()?;
    let shot = classify(&resolved.chain, alpha, &resolved.controls)?;
    let json = ClassifyJson::new(alpha, &shot);
    println!(
        "alpha = {alpha}: {} ({} at r = {:.6e})",
        json.tag, json.reason, json.r_stop
    );
    report::write_json(&out_dir.join("classify.json"), &json)?;
    let exit = if shot.tag == Tag::Undetermined { 1 } else { 0 };
    Ok(ClassifyOutcome { json, exit })
}

/// Scans the initial-value range, bisects every tag change, and writes
/// brackets (CSV + JSON) plus one solution plot per bracket midpoint. A shot
/// that stays undetermined ends the scan: its location goes to a sidecar
/// file and the exit code is 1.
pub fn cmd_ground_states(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> anyhow::Result<GroundStatesOutcome> {
    ensure_dir(out_dir)?;
    let resolved = config.resolve()?;
    let alpha_star = match resolved.alpha_star {
        Some(star) => Some(star),
        None if config.scan.alpha_max.is_none() => Some(config.locate_alpha_star()?),
        None => None,
    };
    let alpha_max = config
        .scan
        .alpha_max
        .unwrap_or_else(|| 2.0 * alpha_star.expect("located when alpha_max is absent"));

    let result = find_ground_states(
        &resolved.chain,
        alpha_max,
        config.scan.step,
        config.scan.bracket_tol,
        None,
        &resolved.controls,
    );
    let brackets = match result {
        Ok(brackets) => brackets,
        Err(ShootError::UndeterminedShot { alpha, reason }) => {
            let sidecar = out_dir.join("undetermined.txt");
            fs::write(
                &sidecar,
                format!(
                    "alpha = {alpha:.12e} stayed undetermined ({}); widen r_max or tolerances\n",
                    report::reason_label(reason)
                ),
            )?;
            println!(
                "ground-states: alpha = {alpha:.6e} stayed undetermined ({}); see {}",
                report::reason_label(reason),
                sidecar.display()
            );
            return Ok(GroundStatesOutcome {
                brackets: Vec::new(),
                alpha_star,
                undetermined: Some((alpha, reason)),
                exit: 1,
            });
        }
        Err(other) => return Err(other.into()),
    };

    for (index, bracket) in brackets.iter().enumerate() {
        println!(
            "bracket {index}: alpha in [{:.10}, {:.10}], midpoint {:.10}, width {:.3e}",
            bracket.alpha_lo,
            bracket.alpha_hi,
            bracket.midpoint(),
            bracket.width()
        );
    }
    if brackets.is_empty() {
        println!("ground-states: no tag change in (b, {alpha_max}]");
    }

    if config.output.wants(OutputFormat::Csv) {
        csvout::write_brackets_csv(&out_dir.join("brackets.csv"), &brackets)?;
    }
    if config.output.wants(OutputFormat::Json) {
        let json = GroundStatesJson {
            alpha_star,
            alpha_max,
            step: config.scan.step,
            bracket_tol: config.scan.bracket_tol,
            brackets: brackets.iter().enumerate().map(|(i, b)| BracketJson::new(i, b)).collect(),
        };
        report::write_json(&out_dir.join("ground_states.json"), &json)?;
    }
    if config.output.wants(OutputFormat::Svg) {
        for (index, bracket) in brackets.iter().enumerate() {
            let svg = shot_plot(&resolved.chain, bracket.midpoint(), &resolved.controls)?;
            fs::write(out_dir.join(format!("bracket_{index}.svg")), svg)?;
        }
    }
    Ok(GroundStatesOutcome { brackets, alpha_star, undetermined: None, exit: 0 })
}

/// Renders `u(r)` for the shot from `alpha`, sampled on 400 points up to
/// the radius where the classification stopped.
fn shot_plot(
    chain: &PiecewiseNonlinearity,
    alpha: f64,
    controls: &ShotControls,
) -> anyhow::Result<String> {
    let shot = classify(chain, alpha, controls)?;
    let r_end = shot.r_stop.min(controls.integration.r_max);
    let events = [EventSpec::stop(EventKind::UCrossesZero, Direction::Down)];
    let mut integration = controls.integration;
    integration.r_max = r_end.max(1e-6);
    let traj = integrate(
        chain,
        RadialState { r: 0.0, u: alpha, v: 0.0 },
        &events,
        &integration,
    );
    let covered = traj.end().r;
    let mut points = Vec::with_capacity(401);
    for k in 0..=400 {
        let r = covered * k as f64 / 400.0;
        if let Some(state) = traj.state_at(r) {
            points.push((r, state.u));
        }
    }
    let label = format!("u(r), alpha = {alpha:.10}");
    Ok(svg::polyline_plot("ground-state candidate", "r", "u", &[Curve::new(label, points)]))
}

/// Tunes a k-block alternating chain over the configured base and writes
/// `tune.json`. Exit 2 when the tuned chain violates its ladder bounds.
pub fn cmd_tune(
    config: &ExperimentConfig,
    k: Option<usize>,
    out_dir: &Path,
) -> anyhow::Result<TuneOutcome> {
    ensure_dir(out_dir)?;
    let base = config.base()?;
    let k = k.unwrap_or(config.tuning.k);
    let configured: Vec<BlockKind> = config
        .nonlinearity
        .blocks
        .iter()
        .map(|entry| entry.shape.to_kind())
        .collect();
    let pool = if configured.is_empty() {
        vec![BlockKind::Power { q: 2.0 }]
    } else {
        configured
    };
    let kinds: Vec<BlockKind> = pool.iter().cloned().cycle().take(k - 1).collect();
    let controls = config.tuning_controls();
    let tuning = tune_chain(&base, &kinds, k, &controls)?;
    let json = TuneJson::new(&tuning);
    println!(
        "tuned k = {} blocks: alpha* = {:.10}, alpha0 = {:.6}, eps0 = {:.6e}, escape radius = {:.4}",
        json.k, json.alpha_star, json.alpha0, json.eps0, json.escape_radius
    );
    for block in &json.blocks {
        println!(
            "  block {}: alpha = {:.10}, amplitude_sq = {:.6e}, tag = {}",
            block.index, block.alpha, block.amplitude_sq, block.tag
        );
    }
    println!("  scan found {} brackets; ladder bounds hold: {}", json.brackets.len(), json.ladder_bounds_hold);
    report::write_json(&out_dir.join("tune.json"), &json)?;
    let exit = if json.ladder_bounds_hold { 0 } else { 2 };
    Ok(TuneOutcome { json, exit })
}

/// Reruns one of the built-in experiments and diffs the outcome against its
/// frozen results. Any mismatch exits 2.
pub fn cmd_reproduce(example: u8, out_dir: &Path) -> anyhow::Result<ReproduceOutcome> {
    ensure_dir(out_dir)?;
    let checks = match example {
        2 => reproduce_example2()?,
        3 => reproduce_example3()?,
        4 => reproduce_example4()?,
        other => anyhow::bail!("no built-in example {other}; available: 2, 3, 4"),
    };
    println!("reproduce example {example}:");
    for check in &checks {
        check.print();
    }
    let passed = checks.iter().all(|c| c.passed);
    println!(
        "reproduce example {example}: {}",
        if passed { "all checks passed" } else { "MISMATCH" }
    );

    #[derive(serde::Serialize)]
    struct CheckLine<'a> {
        name: &'a str,
        expected: &'a str,
        observed: &'a str,
        passed: bool,
    }
    #[derive(serde::Serialize)]
    struct ReproJson<'a> {
        example: u8,
        passed: bool,
        checks: Vec<CheckLine<'a>>,
    }
    let json = ReproJson {
        example,
        passed,
        checks: checks
            .iter()
            .map(|c| CheckLine {
                name: &c.name,
                expected: &c.expected,
                observed: &c.observed,
                passed: c.passed,
            })
            .collect(),
    };
    report::write_json(&out_dir.join(format!("reproduce_example{example}.json")), &json)?;
    Ok(ReproduceOutcome { example, checks, exit: if passed { 0 } else { 2 } })
}

fn approx_check(name: &str, expected: f64, observed: f64, tol: f64) -> ReproCheck {
    ReproCheck::new(
        name,
        format!("{expected:.9}"),
        format!("{observed:.9}"),
        (observed - expected).abs() <= tol,
    )
}

fn reproduce_example2() -> anyhow::Result<Vec<ReproCheck>> {
    let config = ExperimentConfig::from_toml_str(EXAMPLE2_CONFIG)?;
    let resolved = config.resolve()?;
    let alpha_max = config.scan.alpha_max.expect("the built-in config fixes the scan range");
    let brackets = find_ground_states(
        &resolved.chain,
        alpha_max,
        config.scan.step,
        config.scan.bracket_tol,
        Some(3),
        &resolved.controls,
    )?;

    let mut checks = Vec::new();
    checks.push(ReproCheck::new(
        "bracket count",
        "3",
        brackets.len().to_string(),
        brackets.len() == 3,
    ));
    let frozen = [8.671934300, 8.960301432, 27.139263523];
    for (index, expected) in frozen.iter().enumerate() {
        if let Some(bracket) = brackets.get(index) {
            checks.push(approx_check(
                &format!("boundary {index}"),
                *expected,
                bracket.midpoint(),
                1e-5,
            ));
            checks.push(ReproCheck::new(
                format!("bracket {index} width <= 1e-8"),
                "<= 1.0e-8".to_string(),
                format!("{:.3e}", bracket.width()),
                bracket.width() <= 1e-8,
            ));
        } else {
            checks.push(ReproCheck::new(
                format!("boundary {index}"),
                format!("{expected:.9}"),
                "absent".to_string(),
                false,
            ));
        }
    }
    let inside = brackets.iter().all(|b| b.midpoint() < alpha_max);
    checks.push(ReproCheck::new(
        "midpoints below the scan top",
        format!("< {alpha_max}"),
        if inside { "all below" } else { "outside" }.to_string(),
        inside,
    ));
    Ok(checks)
}

fn reproduce_example3() -> anyhow::Result<Vec<ReproCheck>> {
    let config = ExperimentConfig::from_toml_str(EXAMPLE3_CONFIG)?;
    let resolved = config.resolve()?;
    let alpha_star = resolved.alpha_star.expect("the block is anchored to alpha*");

    let mut checks = Vec::new();
    checks.push(ReproCheck::new(
        "alpha* above 3",
        "> 3".to_string(),
        format!("{alpha_star:.9}"),
        alpha_star > 3.0,
    ));

    let (n, q) = (config.nonlinearity.n, 5.0);
    let coefficient = blowup_coefficient(n, q);
    checks.push(ReproCheck::new(
        "blowup coefficient C(4,5)",
        "0.500000000",
        format!("{coefficient:.9}"),
        (coefficient - 0.5).abs() <= 1e-12,
    ));

    let mut worst = 0.0f64;
    for k in 0..=99 {
        let r = 0.1 + (10.0 - 0.1) * k as f64 / 99.0;
        worst = worst.max(singular_residual(n, q, 1.0, r).abs());
    }
    checks.push(ReproCheck::new(
        "singular residual on [0.1, 10]",
        "< 1.0e-10",
        format!("{worst:.3e}"),
        worst < 1e-10,
    ));

    for &alpha in &[1e2, 1e3, 1e4] {
        let shot = classify(&resolved.chain, alpha, &resolved.controls)?;
        checks.push(ReproCheck::new(
            format!("ladder alpha = {alpha:.0e}"),
            "P",
            tag_label(shot.tag),
            shot.tag == Tag::P,
        ));
    }
    Ok(checks)
}

fn reproduce_example4() -> anyhow::Result<Vec<ReproCheck>> {
    let config = ExperimentConfig::from_toml_str(EXAMPLE4_CONFIG)?;
    let resolved = config.resolve()?;
    let alpha_star = resolved.alpha_star.expect("auto breakpoints anchor to alpha*");
    let blocks = resolved.chain.blocks();

    let mut checks = Vec::new();
    let expected_offsets = [0.1, 0.35, 0.65, 0.8];
    for (index, expected) in expected_offsets.iter().enumerate() {
        checks.push(approx_check(
            &format!("breakpoint {} (alpha* + {expected})", index + 1),
            alpha_star + expected,
            blocks[index].breakpoint,
            1e-9,
        ));
    }

    let mut probes: Vec<f64> = blocks.iter().map(|b| b.breakpoint).collect();
    let last_end = blocks.last().unwrap().breakpoint + blocks.last().unwrap().bridge_width;
    let mut final_probe = None;
    for m in 1..=1000 {
        let alpha = last_end + config.scan.step * m as f64;
        if classify(&resolved.chain, alpha, &resolved.controls)?.tag == Tag::N {
            final_probe = Some(alpha);
            break;
        }
    }
    let final_probe = final_probe
        .ok_or_else(|| anyhow::anyhow!("no zero-crossing probe above the last block"))?;
    checks.push(approx_check("final probe (alpha* + 1.1)", alpha_star + 1.1, final_probe, 1e-9));
    probes.push(final_probe);

    let expected_tags = [Tag::N, Tag::P, Tag::N, Tag::P, Tag::N];
    let mut observed_tags = Vec::with_capacity(probes.len());
    for (&alpha, &want) in probes.iter().zip(expected_tags.iter()) {
        let tag = classify(&resolved.chain, alpha, &resolved.controls)?.tag;
        checks.push(ReproCheck::new(
            format!("tag at alpha = {alpha:.3}"),
            tag_label(want),
            tag_label(tag),
            tag == want,
        ));
        observed_tags.push(tag);
    }

    let alpha_max = config.scan.alpha_max.expect("the built-in config fixes the scan range");
    let brackets = find_ground_states(
        &resolved.chain,
        alpha_max,
        config.scan.step,
        config.scan.bracket_tol,
        Some(4),
        &resolved.controls,
    )?;
    checks.push(ReproCheck::new(
        "bracket count >= 4",
        ">= 4",
        brackets.len().to_string(),
        brackets.len() >= 4,
    ));
    for pair in probes.windows(2) {
        let separated = brackets
            .iter()
            .any(|b| b.midpoint() > pair[0] && b.midpoint() < pair[1]);
        checks.push(ReproCheck::new(
            format!("boundary inside ({:.3}, {:.3})", pair[0], pair[1]),
            "1 bracket",
            if separated { "found" } else { "missing" }.to_string(),
            separated,
        ));
    }
    Ok(checks)
}

/// Classifies one probe per (amplitude, eps) grid point, each on a fresh
/// single-block chain bridged in at alpha* + eps. Per-point failures land in
/// the row; an eps too large for a finite domain rejects the whole run.
pub fn cmd_sweep(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<SweepOutcome> {
    ensure_dir(out_dir)?;
    let sweep = config.sweep.clone().ok_or(ConfigError::MissingSweep)?;
    let base = config.base()?;
    let controls = config.shot_controls();
    let alpha_star = config.locate_alpha_star()?;

    if let Some(gamma) = config.nonlinearity.gamma {
        let bound = (gamma - alpha_star) / 4.0;
        for &eps in &sweep.eps {
            if eps > bound {
                return Err(ConfigError::SweepEpsilonTooLarge { eps, bound }.into());
            }
        }
    }
    let gamma = match config.nonlinearity.gamma {
        Some(g) => UpperLimit::Finite(g),
        None => UpperLimit::Unbounded,
    };
    let shape = config
        .nonlinearity
        .blocks
        .first()
        .map(|entry| entry.shape.to_kind())
        .unwrap_or(BlockKind::Power { q: 2.0 });

    let mut rows = Vec::with_capacity(sweep.eps.len() * sweep.a_count);
    for &eps in &sweep.eps {
        for index in 0..sweep.a_count {
            let amplitude = if sweep.a_count == 1 {
                sweep.a_min
            } else {
                sweep.a_min
                    + (sweep.a_max - sweep.a_min) * index as f64 / (sweep.a_count - 1) as f64
            };
            let amplitude_sq = amplitude * amplitude;
            let breakpoint = alpha_star + eps;
            let probe_alpha = breakpoint + sweep.probe_offset * eps;
            let spec =
                groundshot::BlockSpec::new(shape.clone(), amplitude_sq, breakpoint, eps);
            let outcome = PiecewiseNonlinearity::compile(base.clone(), vec![spec], gamma)
                .map_err(anyhow::Error::from)
                .and_then(|chain| {
                    classify(&chain, probe_alpha, &controls).map_err(anyhow::Error::from)
                });
            let row = match outcome {
                Ok(shot) => SweepRowJson {
                    eps,
                    amplitude,
                    amplitude_sq,
                    probe_alpha,
                    tag: tag_label(shot.tag).to_string(),
                    error: None,
                },
                Err(error) => SweepRowJson {
                    eps,
                    amplitude,
                    amplitude_sq,
                    probe_alpha,
                    tag: String::new(),
                    error: Some(error.to_string()),
                },
            };
            rows.push(row);
        }
    }

    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "sweep: {} points ({} failed inline), alpha* = {:.10}",
        rows.len(),
        failures,
        alpha_star
    );
    if config.output.wants(OutputFormat::Csv) {
        csvout::write_sweep_csv(&out_dir.join("sweep.csv"), &rows)?;
    }
    if config.output.wants(OutputFormat::Json) {
        let json = SweepJson { alpha_star, probe_offset: sweep.probe_offset, rows: rows.clone() };
        report::write_json(&out_dir.join("sweep.json"), &json)?;
    }
    Ok(SweepOutcome { rows, exit: 0 })
}

/// Writes the embedded configurations into the output directory.
pub fn cmd_init_examples(out_dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    for (name, text) in builtin_configs() {
        let path = out_dir.join(name);
        fs::write(&path, text)?;
        println!("wrote {}", path.display());
        written.push(path);
    }
    Ok(written)
}
