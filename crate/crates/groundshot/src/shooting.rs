//! Classification of initial values into sign-changing (N) and positive (P)
//! shots, the first-stop radius map, level-crossing diagnostics, and
//! bisection for ground-state brackets on the P/N boundary.

use alloc::vec::Vec;

use crate::functionals::pohozaev_energy;
use crate::math;
use crate::nonlinearity::{PiecewiseNonlinearity, UpperLimit};
use crate::ode::{
    integrate, Direction, EventKind, EventSpec, IntegrationControls, RadialState, Termination,
};

/// Outcome class of one shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    /// Crossed zero with negative slope.
    N,
    /// Stopped decreasing while positive, or decayed below the floor.
    P,
    Undetermined,
}

/// What decided the classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ZeroCrossing,
    Turnaround,
    /// Positive, below the decay floor, still decreasing, with negative
    /// Pohozaev energy past the decay radius.
    Decay,
    RMaxExhausted,
    StepFailure,
    DomainExit,
}

/// First down-crossing of a requested level, with the scaled slope
/// `r |u'(r)|` used by the momentum estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelCrossing {
    pub level: f64,
    pub r: f64,
    pub momentum: f64,
}

/// Result of classifying one initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub tag: Tag,
    /// First radius at which the shot stopped being positive-and-decreasing
    /// (or the radius where the decay rule decided, or where the search gave
    /// up for undetermined shots).
    pub r_stop: f64,
    pub reason: StopReason,
    pub terminal: RadialState,
    /// First down-crossing per requested level, in request order; levels the
    /// shot never reached are absent.
    pub crossings: Vec<LevelCrossing>,
}

/// Knobs for classification on top of the raw integration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotControls {
    pub integration: IntegrationControls,
    /// Positive shots below this value become decay candidates.
    pub decay_floor: f64,
    /// Decay candidates are only accepted at or beyond this radius.
    pub r_decay: f64,
    /// A turnaround event is genuine when `|u'| < tie * (1 + |u|)` there.
    pub turn_tie_tol: f64,
}

impl Default for ShotControls {
    fn default() -> Self {
        ShotControls {
            integration: IntegrationControls::default(),
            decay_floor: 1e-8,
            r_decay: 50.0,
            turn_tie_tol: 1e-9,
        }
    }
}

/// Interval straddling the P/N boundary, shrunk to tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateBracket {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub lo_shot: Classification,
    pub hi_shot: Classification,
}

impl GroundStateBracket {
    pub fn width(&self) -> f64 {
        self.alpha_hi - self.alpha_lo
    }

    /// Best ground-state estimate: the bracket midpoint.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.alpha_lo + self.alpha_hi)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ShootError {
    #[error("initial value {alpha} is not above the base zero b = {b}")]
    AlphaNotAboveB { alpha: f64, b: f64 },
    #[error("initial value {alpha} is outside the nonlinearity domain [0, {gamma})")]
    AlphaOutsideDomain { alpha: f64, gamma: f64 },
    #[error("seed values {alpha_a} and {alpha_b} classify alike ({tag:?}); bisection needs opposite tags")]
    SeedsShareTag { alpha_a: f64, alpha_b: f64, tag: Tag },
    #[error("shot at alpha = {alpha} stayed undetermined ({reason:?}); widen r_max or tolerances")]
    UndeterminedShot { alpha: f64, reason: StopReason },
    #[error("the shot from alpha = {alpha} turned around before reaching level {level}")]
    LevelNotReached { alpha: f64, level: f64 },
}

fn check_alpha(nl: &PiecewiseNonlinearity, alpha: f64) -> Result<(), ShootError> {
    let b = nl.base().b();
    if !(alpha > b) {
        return Err(ShootError::AlphaNotAboveB { alpha, b });
    }
    if let UpperLimit::Finite(g) = nl.gamma() {
        if alpha >= g {
            return Err(ShootError::AlphaOutsideDomain { alpha, gamma: g });
        }
    }
    Ok(())
}

/// Classifies the shot from `u(0) = alpha`, `u'(0) = 0`.
pub fn classify(
    nl: &PiecewiseNonlinearity,
    alpha: f64,
    controls: &ShotControls,
) -> Result<Classification, ShootError> {
    classify_with_levels(nl, alpha, &[], controls)
}

/// [`classify`] plus first-crossing diagnostics for the requested levels.
pub fn classify_with_levels(
    nl: &PiecewiseNonlinearity,
    alpha: f64,
    levels: &[f64],
    controls: &ShotControls,
) -> Result<Classification, ShootError> {
    check_alpha(nl, alpha)?;
    classify_from_state(nl, RadialState { r: 0.0, u: alpha, v: 0.0 }, levels, controls)
}

/// Classification resumed from an interior state, for probe searches that
/// start on a sphere `r > 0` with a prescribed inward slope rather than at
/// the origin.
pub fn classify_from(
    nl: &PiecewiseNonlinearity,
    start: RadialState,
    controls: &ShotControls,
) -> Result<Classification, ShootError> {
    classify_from_state(nl, start, &[], controls)
}

fn classify_from_state(
    nl: &PiecewiseNonlinearity,
    start: RadialState,
    levels: &[f64],
    controls: &ShotControls,
) -> Result<Classification, ShootError> {
    let mut events = alloc::vec![
        EventSpec::stop(EventKind::UCrossesZero, Direction::Down),
        EventSpec::stop(EventKind::VCrossesZero, Direction::Up),
        EventSpec::stop(EventKind::UCrosses(controls.decay_floor), Direction::Down),
    ];
    for &level in levels {
        events.push(EventSpec::record(EventKind::UCrosses(level), Direction::Down));
    }

    let traj = integrate(nl, start, &events, &controls.integration);

    let mut crossings: Vec<LevelCrossing> = Vec::new();
    for (slot, &level) in levels.iter().enumerate() {
        let spec_index = 3 + slot;
        if let Some(ev) = traj.events().iter().find(|e| e.spec_index == spec_index) {
            crossings.push(LevelCrossing {
                level,
                r: ev.state.r,
                momentum: ev.state.r * math::abs(ev.state.v),
            });
        }
    }

    let decided = |tag, reason, terminal: RadialState| Classification {
        tag,
        r_stop: terminal.r,
        reason,
        terminal,
        crossings: crossings.clone(),
    };

    match traj.termination() {
        Termination::Event { spec_index: 0 } => {
            Ok(decided(Tag::N, StopReason::ZeroCrossing, traj.end()))
        }
        Termination::Event { spec_index: 1 } => {
            let end = traj.end();
            if end.u > 0.0 && math::abs(end.v) < controls.turn_tie_tol * (1.0 + math::abs(end.u)) {
                Ok(decided(Tag::P, StopReason::Turnaround, end))
            } else {
                Ok(decided(Tag::Undetermined, StopReason::Turnaround, end))
            }
        }
        Termination::Event { spec_index: 2 } => {
            resolve_decay_candidate(nl, controls, traj.end(), crossings)
        }
        Termination::Event { .. } => unreachable!("record events never terminate"),
        Termination::RMax => Ok(decided(Tag::Undetermined, StopReason::RMaxExhausted, traj.end())),
        Termination::StepFailure { .. } => {
            Ok(decided(Tag::Undetermined, StopReason::StepFailure, traj.end()))
        }
        Termination::DomainExit { .. } => {
            Ok(decided(Tag::Undetermined, StopReason::DomainExit, traj.end()))
        }
    }
}

/// Decides a shot that fell below the decay floor while positive. The shot
/// is positive (P) once it is past the decay radius, still decreasing, and
/// its Pohozaev energy is negative: a later sign change would force the
/// energy up to `r^N u'^2 >= 0` while it can only keep falling.
fn resolve_decay_candidate(
    nl: &PiecewiseNonlinearity,
    controls: &ShotControls,
    floor_state: RadialState,
    crossings: Vec<LevelCrossing>,
) -> Result<Classification, ShootError> {
    let decided = |tag, reason, terminal: RadialState, crossings| Classification {
        tag,
        r_stop: terminal.r,
        reason,
        terminal,
        crossings,
    };

    if floor_state.r >= controls.r_decay && pohozaev_energy(nl, &floor_state) < 0.0 {
        return Ok(decided(Tag::P, StopReason::Decay, floor_state, crossings));
    }

    // Not deep enough yet: push on to the decay radius watching only for a
    // real zero crossing or a turnaround.
    let events = [
        EventSpec::stop(EventKind::UCrossesZero, Direction::Down),
        EventSpec::stop(EventKind::VCrossesZero, Direction::Up),
    ];
    let chunk = IntegrationControls {
        r_max: controls.r_decay.max(floor_state.r * (1.0 + 1e-9)) + 1.0,
        ..controls.integration
    };
    let traj = integrate(nl, floor_state, &events, &chunk);
    match traj.termination() {
        Termination::Event { spec_index: 0 } => {
            Ok(decided(Tag::N, StopReason::ZeroCrossing, traj.end(), crossings))
        }
        Termination::Event { spec_index: 1 } => {
            let end = traj.end();
            if end.u > 0.0 {
                Ok(decided(Tag::P, StopReason::Turnaround, end, crossings))
            } else {
                Ok(decided(Tag::Undetermined, StopReason::Turnaround, end, crossings))
            }
        }
        Termination::RMax => {
            let end = traj.end();
            if end.u > 0.0
                && end.u <= controls.decay_floor
                && end.v < 0.0
                && pohozaev_energy(nl, &end) < 0.0
            {
                return Ok(decided(Tag::P, StopReason::Decay, end, crossings));
            }
            // The tail came back above the floor without turning; let the
            // ordinary events decide over the full range.
            let traj = integrate(nl, end, &events, &controls.integration);
            match traj.termination() {
                Termination::Event { spec_index: 0 } => {
                    Ok(decided(Tag::N, StopReason::ZeroCrossing, traj.end(), crossings))
                }
                Termination::Event { spec_index: 1 } if traj.end().u > 0.0 => {
                    Ok(decided(Tag::P, StopReason::Turnaround, traj.end(), crossings))
                }
                Termination::StepFailure { .. } => {
                    Ok(decided(Tag::Undetermined, StopReason::StepFailure, traj.end(), crossings))
                }
                _ => Ok(decided(Tag::Undetermined, StopReason::RMaxExhausted, traj.end(), crossings)),
            }
        }
        Termination::StepFailure { .. } => {
            Ok(decided(Tag::Undetermined, StopReason::StepFailure, traj.end(), crossings))
        }
        _ => Ok(decided(Tag::Undetermined, StopReason::RMaxExhausted, traj.end(), crossings)),
    }
}

fn classify_determined(
    nl: &PiecewiseNonlinearity,
    alpha: f64,
    controls: &ShotControls,
) -> Result<Classification, ShootError> {
    let shot = classify(nl, alpha, controls)?;
    if shot.tag == Tag::Undetermined {
        return Err(ShootError::UndeterminedShot { alpha, reason: shot.reason });
    }
    Ok(shot)
}

fn bisect_between(
    nl: &PiecewiseNonlinearity,
    mut lo: f64,
    mut lo_shot: Classification,
    mut hi: f64,
    mut hi_shot: Classification,
    tol: f64,
    controls: &ShotControls,
) -> Result<GroundStateBracket, ShootError> {
    debug_assert!(lo < hi && lo_shot.tag != hi_shot.tag);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let shot = classify_determined(nl, mid, controls)?;
        if shot.tag == lo_shot.tag {
            lo = mid;
            lo_shot = shot;
        } else {
            hi = mid;
            hi_shot = shot;
        }
    }
    Ok(GroundStateBracket { alpha_lo: lo, alpha_hi: hi, lo_shot, hi_shot })
}

/// Shrinks a bracket around the unique boundary value between two seeds of
/// opposite class, by plain bisection to width `tol`.
pub fn find_alpha_star(
    nl: &PiecewiseNonlinearity,
    seeds: (f64, f64),
    tol: f64,
    controls: &ShotControls,
) -> Result<GroundStateBracket, ShootError> {
    assert!(tol > 0.0, "bracket tolerance must be positive");
    let (a, b) = seeds;
    let shot_a = classify_determined(nl, a, controls)?;
    let shot_b = classify_determined(nl, b, controls)?;
    if shot_a.tag == shot_b.tag {
        return Err(ShootError::SeedsShareTag { alpha_a: a, alpha_b: b, tag: shot_a.tag });
    }
    let ((lo, lo_shot), (hi, hi_shot)) =
        if a < b { ((a, shot_a), (b, shot_b)) } else { ((b, shot_b), (a, shot_a)) };
    bisect_between(nl, lo, lo_shot, hi, hi_shot, tol, controls)
}

/// Scans `(b, alpha_scan_max]`, classifies the grid (with extra probes at
/// every junction), and bisects each adjacent opposite-tag pair. When
/// `expected` is given and the scan finds fewer brackets, one half-step
/// rescan is attempted before returning.
pub fn find_ground_states(
    nl: &PiecewiseNonlinearity,
    alpha_scan_max: f64,
    scan_step: f64,
    tol: f64,
    expected: Option<usize>,
    controls: &ShotControls,
) -> Result<Vec<GroundStateBracket>, ShootError> {
    assert!(scan_step > 0.0 && tol > 0.0);
    let b = nl.base().b();
    assert!(alpha_scan_max > b, "scan range must extend above b");
    if let UpperLimit::Finite(g) = nl.gamma() {
        assert!(alpha_scan_max < g, "scan range must stay inside the domain");
    }

    let grid = build_grid(nl, b, alpha_scan_max, scan_step);
    let brackets = scan_and_bisect(nl, &grid, tol, controls)?;
    if let Some(want) = expected {
        if brackets.len() < want {
            let grid = build_grid(nl, b, alpha_scan_max, 0.5 * scan_step);
            return scan_and_bisect(nl, &grid, tol, controls);
        }
    }
    Ok(brackets)
}

fn build_grid(nl: &PiecewiseNonlinearity, b: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut alpha = b + step;
    while alpha < hi {
        grid.push(alpha);
        alpha += step;
    }
    grid.push(hi);
    // Probe the junctions too: the interesting alternation happens exactly
    // at the breakpoints, and narrow features should not slip between grid
    // nodes.
    for &j in nl.junctions() {
        if j > b + 1e-12 && j < hi {
            grid.push(j);
        }
    }
    grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
    grid.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * (1.0 + x.abs()));
    grid
}

fn scan_and_bisect(
    nl: &PiecewiseNonlinearity,
    grid: &[f64],
    tol: f64,
    controls: &ShotControls,
) -> Result<Vec<GroundStateBracket>, ShootError> {
    let mut tagged: Vec<(f64, Classification)> = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let shot = classify(nl, alpha, controls)?;
        let shot = if shot.tag == Tag::Undetermined {
            // One retry with a tenfold range before giving up on the point.
            let widened = ShotControls {
                integration: IntegrationControls {
                    r_max: 10.0 * controls.integration.r_max,
                    ..controls.integration
                },
                ..*controls
            };
            let retry = classify(nl, alpha, &widened)?;
            if retry.tag == Tag::Undetermined {
                return Err(ShootError::UndeterminedShot { alpha, reason: retry.reason });
            }
            retry
        } else {
            shot
        };
        tagged.push((alpha, shot));
    }

    let mut brackets = Vec::new();
    for k in 1..tagged.len() {
        if tagged[k - 1].1.tag != tagged[k].1.tag {
            let (lo, lo_shot) = tagged[k - 1].clone();
            let (hi, hi_shot) = tagged[k].clone();
            brackets.push(bisect_between(nl, lo, lo_shot, hi, hi_shot, tol, controls)?);
        }
    }
    Ok(brackets)
}

/// First down-crossing radius of `level` and the scaled slope there.
pub fn crossing_moment(
    nl: &PiecewiseNonlinearity,
    alpha: f64,
    level: f64,
    controls: &ShotControls,
) -> Result<LevelCrossing, ShootError> {
    assert!(alpha > level, "the level must lie below the initial value");
    let shot = classify_with_levels(nl, alpha, &[level], controls)?;
    shot.crossings
        .into_iter()
        .find(|c| c.level == level)
        .ok_or(ShootError::LevelNotReached { alpha, level })
}
