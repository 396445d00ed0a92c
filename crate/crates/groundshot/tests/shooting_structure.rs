//! Structural facts about shots on the base model: the single P-to-N
//! transition, tag stability, the intersection and comparison propositions
//! behind uniqueness, and the two-sided crossing bounds for general
//! positive blocks.

use groundshot::{
    classify, crossing_moment, erbe_tang_p, find_alpha_star, integrate, w_functional, BaseModel,
    BlockKind, BlockSpec, Direction, EventKind, EventSpec, IntegrationControls, MonotoneBranch,
    PiecewiseNonlinearity, RadialState, ShotControls, Tag, Trajectory, UpperLimit,
};
use proptest::prelude::*;

fn base_chain() -> PiecewiseNonlinearity {
    PiecewiseNonlinearity::base_only(BaseModel::new(2.0, 4).unwrap())
}

fn origin(alpha: f64) -> RadialState {
    RadialState { r: 0.0, u: alpha, v: 0.0 }
}

/// Integrates a P-side shot up to its turnaround.
fn monotone_shot(nl: &PiecewiseNonlinearity, alpha: f64) -> Trajectory {
    let traj = integrate(
        nl,
        origin(alpha),
        &[EventSpec::stop(EventKind::VCrossesZero, Direction::Up)],
        &IntegrationControls { rel_tol: 1e-11, abs_tol: 1e-13, r_max: 1e3 },
    );
    assert!(
        matches!(traj.termination(), groundshot::Termination::Event { .. }),
        "the shot from alpha = {alpha} never turned around"
    );
    traj
}

/// The single radius where two monotone shots cross, found on the common
/// radius range and polished by bisection.
fn intersection_radius(lo_shot: &Trajectory, hi_shot: &Trajectory) -> f64 {
    let r_max = lo_shot.end().r.min(hi_shot.end().r);
    let diff = |r: f64| hi_shot.state_at(r).unwrap().u - lo_shot.state_at(r).unwrap().u;
    let samples = 2000;
    let mut crossings = Vec::new();
    let mut prev_r = r_max * 1e-6;
    let mut prev_d = diff(prev_r);
    for k in 1..=samples {
        let r = r_max * (k as f64) / (samples as f64);
        let d = diff(r);
        if prev_d > 0.0 && d < 0.0 || prev_d < 0.0 && d > 0.0 {
            crossings.push((prev_r, r));
        }
        prev_r = r;
        prev_d = d;
    }
    assert_eq!(crossings.len(), 1, "expected exactly one intersection, got {crossings:?}");
    let (mut lo, mut hi) = crossings[0];
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if diff(lo) * diff(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn a_two_hundred_point_scan_shows_one_transition() {
    let nl = base_chain();
    let controls = ShotControls::default();
    let bracket = find_alpha_star(&nl, (8.0, 9.0), 1e-9, &controls).unwrap();
    assert!(bracket.width() <= 1e-8);
    let alpha_star = bracket.midpoint();

    let lo = 1.0;
    let hi = 2.0 * alpha_star;
    let mut tags = Vec::with_capacity(200);
    for i in 1..=200 {
        let alpha = lo + (hi - lo) * (i as f64) / 200.0;
        tags.push(classify(&nl, alpha, &controls).unwrap().tag);
    }
    assert_eq!(tags[0], Tag::P);
    assert_eq!(tags[199], Tag::N);
    let p_to_n = tags.windows(2).filter(|w| w[0] == Tag::P && w[1] == Tag::N).count();
    let n_to_p = tags.windows(2).filter(|w| w[0] == Tag::N && w[1] == Tag::P).count();
    assert_eq!((p_to_n, n_to_p), (1, 0), "scan must flip exactly once");
}

#[test]
fn tags_are_stable_to_small_alpha_perturbations() {
    let nl = base_chain();
    let controls = ShotControls::default();
    for alpha in [3.0, 5.0, 8.0, 9.0, 12.0, 17.0] {
        let center = classify(&nl, alpha, &controls).unwrap().tag;
        for nudge in [-1e-6, 1e-6] {
            let moved = classify(&nl, alpha + nudge, &controls).unwrap().tag;
            assert_eq!(center, moved, "tag flipped near alpha = {alpha}");
        }
    }
}

#[test]
fn halving_integration_tolerances_barely_moves_alpha_star() {
    let nl = base_chain();
    let coarse = ShotControls::default();
    let fine = ShotControls {
        integration: IntegrationControls { rel_tol: 5e-11, abs_tol: 5e-13, r_max: 1e3 },
        ..Default::default()
    };
    let a = find_alpha_star(&nl, (8.0, 9.0), 1e-10, &coarse).unwrap().midpoint();
    let b = find_alpha_star(&nl, (8.0, 9.0), 1e-10, &fine).unwrap().midpoint();
    assert!((a - b).abs() < 1e-6, "alpha* moved by {:.3e}", (a - b).abs());
}

#[test]
fn shots_below_alpha_star_intersect_exactly_once_above_b() {
    let nl = base_chain();
    let b = nl.base().b();
    let heights = [2.0, 3.0, 4.5, 6.0, 7.5, 8.3, 8.6];
    let shots: Vec<Trajectory> = heights.iter().map(|&a| monotone_shot(&nl, a)).collect();
    for i in 0..heights.len() {
        for j in i + 1..heights.len() {
            let r_i = intersection_radius(&shots[i], &shots[j]);
            let s_i = shots[i].state_at(r_i).unwrap().u;
            assert!(
                s_i > b,
                "shots from {} and {} cross at u = {s_i}, not above b",
                heights[i],
                heights[j]
            );
        }
    }
}

#[test]
fn comparison_functionals_order_across_the_intersection() {
    // For b < alpha_1 < alpha_2 < alpha*: above the intersection value the
    // weighted slope of the higher shot is smaller, below it the higher
    // shot runs inside with the larger momentum, and the Erbe-Tang values
    // at the intersection order the same way.
    let nl = base_chain();
    let beta = nl.base().beta();
    for (alpha_1, alpha_2) in [(3.0, 6.0), (5.0, 8.0), (8.0, 8.5), (4.0, 8.6)] {
        let shot_1 = monotone_shot(&nl, alpha_1);
        let shot_2 = monotone_shot(&nl, alpha_2);
        let r_i = intersection_radius(&shot_1, &shot_2);
        let s_i = shot_1.state_at(r_i).unwrap().u;

        let branch_1 = MonotoneBranch::new(&shot_1, 0.0, 0.995 * shot_1.end().r).unwrap();
        let branch_2 = MonotoneBranch::new(&shot_2, 0.0, 0.995 * shot_2.end().r).unwrap();
        let n = nl.base().dim() as i32;

        let above = alpha_1 - s_i;
        for k in 0..20 {
            let s = s_i + above * (k as f64 + 0.5) / 20.0;
            let st_1 = branch_1.state_of_s(s).unwrap();
            let st_2 = branch_2.state_of_s(s).unwrap();
            assert!(st_2.r > st_1.r, "above the intersection the higher shot runs outside");
            let ws_1 = st_1.r.powi(n - 1) * st_1.v;
            let ws_2 = st_2.r.powi(n - 1) * st_2.v;
            assert!(ws_2 < ws_1, "weighted slopes out of order at s = {s}");
        }

        let (lo_1, _) = branch_1.s_range();
        let (lo_2, _) = branch_2.s_range();
        let floor = lo_1.max(lo_2) + 0.02;
        let below = s_i - floor;
        assert!(below > 0.0, "no room below the intersection at ({alpha_1}, {alpha_2})");
        for k in 0..20 {
            let s = floor + below * (k as f64 + 0.5) / 20.0;
            let st_1 = branch_1.state_of_s(s).unwrap();
            let st_2 = branch_2.state_of_s(s).unwrap();
            assert!(st_2.r < st_1.r, "below the intersection the higher shot runs inside");
            let m_1 = st_1.r * st_1.v.abs();
            let m_2 = st_2.r * st_2.v.abs();
            assert!(m_1 < m_2, "momenta out of order at s = {s}");
        }

        if beta < s_i && beta > floor {
            let w_1 = w_functional(&nl, &branch_1, beta).unwrap();
            let w_2 = w_functional(&nl, &branch_2, beta).unwrap();
            assert!(w_1 < w_2, "W values out of order at beta for ({alpha_1}, {alpha_2})");
        }

        let p_1 = erbe_tang_p(&nl, &branch_1, s_i).unwrap();
        let p_2 = erbe_tang_p(&nl, &branch_2, s_i).unwrap();
        assert!(p_2 < p_1, "Erbe-Tang values out of order at the intersection");
    }
}

#[test]
fn w_evaluation_respects_the_radicand_sign() {
    // u'^2 + 2F(u) decreases along every shot, so on a monotone branch it
    // flips sign at most once: positive from the start down to some value,
    // negative from there to the turnaround. Evaluation must return values
    // on the positive side and the typed error on the negative side, and
    // never a silent NaN.
    let nl = base_chain();
    for alpha in [2.0, 4.0, 6.0, 8.0, 8.5] {
        let traj = monotone_shot(&nl, alpha);
        let branch = MonotoneBranch::new(&traj, 0.0, 0.995 * traj.end().r).unwrap();
        let (lo, hi) = branch.s_range();
        let grid = 400;
        let radicand = |s: f64| {
            let state = branch.state_of_s(s).unwrap();
            state.v * state.v + 2.0 * nl.eval_big_f(s).unwrap()
        };
        let signs: Vec<bool> = (0..grid)
            .map(|k| radicand(lo + (hi - lo) * (k as f64 + 0.5) / grid as f64) >= 0.0)
            .collect();
        let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(flips <= 1, "radicand sign flipped {flips} times on alpha = {alpha}");
        assert!(*signs.last().unwrap(), "radicand must be positive near the start");
        assert!(!signs[0], "the radicand turns negative before the turnaround");
        let flip_at = signs.iter().position(|&positive| positive).unwrap();
        for (k, &positive) in signs.iter().enumerate() {
            if k + 1 == flip_at || k == flip_at {
                continue;
            }
            let s = lo + (hi - lo) * (k as f64 + 0.5) / grid as f64;
            let w = w_functional(&nl, &branch, s);
            if positive {
                let value = w.expect("W must evaluate where the radicand is nonnegative");
                assert!(value.is_finite() && value >= 0.0);
            } else {
                assert!(
                    matches!(w, Err(groundshot::FunctionalError::NegativeRadicand { .. })),
                    "expected the typed radicand error at s = {s}, got {w:?}"
                );
            }
        }
    }
}

#[test]
fn w_approaches_the_bare_momentum_at_a_zero_crossing() {
    // F(0) = 0, so W collapses to r |u'| as the level goes to zero on a
    // crossing shot.
    let nl = base_chain();
    let traj = integrate(
        &nl,
        origin(12.0),
        &[EventSpec::stop(EventKind::UCrosses(1e-4), Direction::Down)],
        &IntegrationControls { rel_tol: 1e-11, abs_tol: 1e-13, r_max: 1e3 },
    );
    let branch = MonotoneBranch::new(&traj, 0.0, traj.end().r).unwrap();
    let (s, _) = branch.s_range();
    assert!((s - 1e-4).abs() < 1e-12);
    let state = branch.state_of_s(s).unwrap();
    let w = w_functional(&nl, &branch, s).unwrap();
    let bare = state.r * state.v.abs();
    assert!(w > 0.0);
    assert!((w - bare).abs() < 1e-6 * bare, "W = {w} vs r|u'| = {bare}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn positive_blocks_obey_the_two_sided_crossing_bounds(
        shape in prop_oneof![
            (1.2..3.0f64).prop_map(|q| BlockKind::Power { q }),
            (0.3..6.0f64).prop_map(BlockKind::constant),
            (0.8..4.0f64, 0.0..0.5f64, 0.3..2.0f64).prop_map(|(offset, frac, frequency)| {
                BlockKind::Sine { offset, amplitude: frac * offset, frequency }
            }),
        ],
        amplitude_sq in 0.2..20.0f64,
        delta in 0.05..1.0f64,
        headroom in 0.1..3.0f64,
    ) {
        // While u stays inside the block band the shot sees a positive
        // source g, so the first crossing of alpha - delta must satisfy
        // sqrt(2 N delta / g_max) <= r <= sqrt(2 N delta / g_min) and
        // 2 delta g_min / g_max <= r |u'| <= 2 delta g_max / g_min.
        let nl = PiecewiseNonlinearity::compile(
            BaseModel::new(2.0, 4).unwrap(),
            vec![BlockSpec::new(shape.clone(), amplitude_sq, 2.0, 0.2)],
            UpperLimit::Unbounded,
        )
        .unwrap();
        let alpha = 2.2 + delta + headroom;
        let level = alpha - delta;

        let controls = ShotControls {
            integration: IntegrationControls { rel_tol: 1e-12, abs_tol: 1e-14, r_max: 100.0 },
            ..Default::default()
        };
        let hit = crossing_moment(&nl, alpha, level, &controls).unwrap();

        let (raw_min, raw_max) = shape.extrema_on(level, alpha);
        let g_min = amplitude_sq * raw_min;
        let g_max = amplitude_sq * raw_max;
        prop_assert!(g_min > 0.0);

        let n = 4.0;
        let r_lo = (2.0 * n * delta / g_max).sqrt();
        let r_hi = (2.0 * n * delta / g_min).sqrt();
        let slack = 1.0 + 1e-8;
        prop_assert!(
            hit.r >= r_lo / slack && hit.r <= r_hi * slack,
            "crossing radius {} escapes [{r_lo}, {r_hi}]",
            hit.r
        );

        let m_lo = 2.0 * delta * g_min / g_max;
        let m_hi = 2.0 * delta * g_max / g_min;
        prop_assert!(
            hit.momentum >= m_lo / slack && hit.momentum <= m_hi * slack,
            "momentum {} escapes [{m_lo}, {m_hi}]",
            hit.momentum
        );
    }
}
