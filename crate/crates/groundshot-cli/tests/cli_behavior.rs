//! Behavior of the command layer end to end: configuration round-trips,
//! breakpoint resolution, output determinism, the sweep guard, and the exit
//! codes of the installed binary.

use std::fs;
use std::process::Command;

use groundshot_cli::commands;
use groundshot_cli::config::{
    BlockEntry, BreakpointEntry, ConfigError, ExperimentConfig, NonlinearitySection,
    OutputFormat, OutputSection, ScanSection, ShapeEntry, SolverSection, SweepSection,
    TuningSection, EXAMPLE2_CONFIG, EXAMPLE3_CONFIG, EXAMPLE4_CONFIG,
};
use proptest::prelude::*;

fn shape_entry() -> impl Strategy<Value = ShapeEntry> {
    prop_oneof![
        (0.5f64..4.0).prop_map(|q| ShapeEntry::Power { q }),
        (0.1f64..5.0).prop_map(|value| ShapeEntry::Constant { value }),
        ((0.5f64..4.0), (0.0f64..2.0), (0.1f64..3.0)).prop_map(|(offset, amplitude, frequency)| {
            ShapeEntry::Sine { offset, amplitude, frequency }
        }),
        prop::collection::vec(((0.1f64..3.0), (0.1f64..10.0)), 2..6).prop_map(|raw| {
            let mut x = 1.0;
            let nodes = raw
                .into_iter()
                .map(|(dx, y)| {
                    x += dx;
                    [x, y]
                })
                .collect();
            ShapeEntry::Sampled { nodes }
        }),
    ]
}

fn breakpoint_entry() -> impl Strategy<Value = BreakpointEntry> {
    prop_oneof![
        Just(BreakpointEntry::Keyword("auto".to_string())),
        (2.0f64..20.0).prop_map(|absolute| BreakpointEntry::Absolute { absolute }),
        (0.01f64..2.0).prop_map(|offset_from_alpha_star| BreakpointEntry::Offset {
            offset_from_alpha_star
        }),
    ]
}

fn block_entry() -> impl Strategy<Value = BlockEntry> {
    (shape_entry(), 0.05f64..30.0, 0.01f64..1.0, breakpoint_entry()).prop_map(
        |(shape, amplitude_sq, bridge_width, breakpoint)| BlockEntry {
            shape,
            amplitude_sq,
            bridge_width,
            breakpoint,
        },
    )
}

fn experiment_config() -> impl Strategy<Value = ExperimentConfig> {
    let nonlinearity = (
        1.2f64..4.0,
        3u32..7,
        prop::option::of(30.0f64..200.0),
        prop::collection::vec(block_entry(), 0..4),
    )
        .prop_map(|(p, n, gamma, blocks)| NonlinearitySection { p, n, gamma, blocks });
    let solver = (1e-12f64..1e-6, 1e-14f64..1e-8, 10.0f64..2e3).prop_map(
        |(rel_tol, abs_tol, r_max)| SolverSection { rel_tol, abs_tol, r_max },
    );
    let scan = (prop::option::of(5.0f64..40.0), 0.01f64..0.5, 1e-10f64..1e-6).prop_map(
        |(alpha_max, step, bracket_tol)| ScanSection { alpha_max, step, bracket_tol },
    );
    let tuning = (2usize..6, 0.1f64..0.9, 10usize..100, 10usize..100, 1e-10f64..1e-6).prop_map(
        |(k, theta, doubling_cap, halving_cap, bracket_tol)| TuningSection {
            k,
            theta,
            doubling_cap,
            halving_cap,
            bracket_tol,
        },
    );
    let output = (prop::sample::subsequence(
        vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg],
        0..=3,
    ))
    .prop_map(|formats| OutputSection { directory: "out".to_string(), formats });
    let sweep = prop::option::of(
        (1.0f64..5.0, 5.0f64..20.0, 1usize..30, prop::collection::vec(0.01f64..0.5, 1..4), 0.5f64..4.0)
            .prop_map(|(a_min, a_max, a_count, eps, probe_offset)| SweepSection {
                a_min,
                a_max,
                a_count,
                eps,
                probe_offset,
            }),
    );
    (nonlinearity, solver, scan, tuning, output, sweep).prop_map(
        |(nonlinearity, solver, scan, tuning, output, sweep)| ExperimentConfig {
            nonlinearity,
            solver,
            scan,
            tuning,
            output,
            sweep,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn configs_round_trip_through_their_text_form(config in experiment_config()) {
        let text = config.to_toml_string().unwrap();
        let reparsed: ExperimentConfig = toml::from_str(&text).unwrap();
        prop_assert_eq!(config, reparsed);
    }
}

#[test]
fn example4_auto_breakpoints_land_on_the_scan_grid() {
    let config = ExperimentConfig::from_toml_str(EXAMPLE4_CONFIG).unwrap();
    let resolved = config.resolve().unwrap();
    let alpha_star = resolved.alpha_star.unwrap();
    let offsets: Vec<f64> =
        resolved.chain.blocks().iter().map(|b| b.breakpoint - alpha_star).collect();
    let expected = [0.1, 0.35, 0.65, 0.8];
    for (observed, want) in offsets.iter().zip(expected.iter()) {
        assert!(
            (observed - want).abs() < 1e-9,
            "breakpoint offset {observed} is not the grid value {want}"
        );
    }
    let displays: Vec<String> =
        resolved.chain.blocks().iter().map(|b| format!("{:.3}", b.breakpoint)).collect();
    assert_eq!(displays, ["8.772", "9.022", "9.322", "9.472"]);
}

#[test]
fn ground_state_outputs_are_byte_identical_across_runs() {
    let config = ExperimentConfig::from_toml_str(EXAMPLE2_CONFIG).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let first = commands::cmd_ground_states(&config, dir_a.path()).unwrap();
    let second = commands::cmd_ground_states(&config, dir_b.path()).unwrap();
    assert_eq!(first.exit, 0);
    assert_eq!(second.exit, 0);
    for name in ["brackets.csv", "ground_states.json", "bracket_0.svg"] {
        let a = fs::read(dir_a.path().join(name)).unwrap();
        let b = fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn sweep_rejects_an_epsilon_too_large_for_a_finite_domain() {
    let mut config = ExperimentConfig::from_toml_str(
        "[nonlinearity]\np = 2.0\nn = 4\ngamma = 9.0\n\n[sweep]\neps = [0.1]\n",
    )
    .unwrap();
    config.sweep.as_mut().unwrap().a_count = 2;
    let dir = tempfile::tempdir().unwrap();
    let error = commands::cmd_sweep(&config, dir.path()).unwrap_err();
    match error.downcast_ref::<ConfigError>() {
        Some(ConfigError::SweepEpsilonTooLarge { eps, bound }) => {
            assert_eq!(*eps, 0.1);
            assert!(*bound < 0.1);
        }
        other => panic!("expected the epsilon guard, got {other:?}"),
    }
}

#[test]
fn sweep_reports_tags_across_the_amplitude_grid() {
    let config = ExperimentConfig::from_toml_str(
        "[nonlinearity]\np = 2.0\nn = 4\n\n[sweep]\na_min = 1.0\na_max = 10.0\na_count = 4\neps = [0.05]\n",
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = commands::cmd_sweep(&config, dir.path()).unwrap();
    assert_eq!(outcome.exit, 0);
    assert_eq!(outcome.rows.len(), 4);
    assert!(outcome.rows.iter().all(|row| row.error.is_none()));
    let tags: Vec<&str> = outcome.rows.iter().map(|row| row.tag.as_str()).collect();
    assert!(tags.contains(&"N") && tags.contains(&"P"), "grid shows both phases: {tags:?}");
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn verify_separates_the_subcritical_and_supercritical_examples() {
    let dir = tempfile::tempdir().unwrap();
    let ok = commands::cmd_verify(
        &ExperimentConfig::from_toml_str(EXAMPLE2_CONFIG).unwrap(),
        dir.path(),
    )
    .unwrap();
    assert_eq!(ok.exit, 0, "the quadratic chain fails verification: {:?}", ok.json.verdict);
    let bad = commands::cmd_verify(
        &ExperimentConfig::from_toml_str(EXAMPLE3_CONFIG).unwrap(),
        dir.path(),
    )
    .unwrap();
    assert_eq!(bad.exit, 2, "the quintic chain should fail the growth check");
}

#[test]
fn an_undetermined_scan_point_writes_a_sidecar_and_exits_one() {
    let config = ExperimentConfig::from_toml_str(
        "[nonlinearity]\np = 2.0\nn = 4\n\n[solver]\nr_max = 0.5\n\n[scan]\nalpha_max = 1.2\nstep = 0.05\n",
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = commands::cmd_ground_states(&config, dir.path()).unwrap();
    assert_eq!(outcome.exit, 1);
    let (alpha, _) = outcome.undetermined.expect("the truncated range cannot classify");
    assert!(alpha > 1.0 && alpha <= 1.2);
    let sidecar = fs::read_to_string(dir.path().join("undetermined.txt")).unwrap();
    assert!(sidecar.contains("undetermined"), "sidecar: {sidecar}");
}

#[test]
fn the_binary_maps_outcomes_to_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_groundshot");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let classify = Command::new(bin)
        .args(["classify", "--alpha", "3", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(classify.status.code(), Some(0), "{classify:?}");
    let payload = fs::read_to_string(out.join("classify.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&payload).unwrap();
    assert_eq!(json["tag"], "P");

    let config_path = dir.path().join("example3.toml");
    fs::write(&config_path, EXAMPLE3_CONFIG).unwrap();
    let verify = Command::new(bin)
        .args(["verify", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(verify.status.code(), Some(2), "{verify:?}");

    let reproduce = Command::new(bin)
        .args(["reproduce", "--example", "3", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(reproduce.status.code(), Some(2), "{reproduce:?}");
    let text = String::from_utf8_lossy(&reproduce.stdout);
    assert!(text.contains("blowup coefficient"), "missing the diff line: {text}");
}

#[test]
fn reproduce_two_and_four_pass_their_frozen_checks() {
    let dir = tempfile::tempdir().unwrap();
    let two = commands::cmd_reproduce(2, dir.path()).unwrap();
    assert!(two.all_passed(), "example 2 mismatched: {:?}", two.checks);
    assert_eq!(two.exit, 0);
    let four = commands::cmd_reproduce(4, dir.path()).unwrap();
    assert!(four.all_passed(), "example 4 mismatched: {:?}", four.checks);
    assert_eq!(four.exit, 0);
}
