//! Adaptive integration of the radial initial value problem
//!
//! ```text
//! u'' + (N-1)/r u' + f(u) = 0,   u(r0) = u0,  u'(r0) = v0,
//! ```
//!
//! with a Dormand-Prince 5(4) pair, its quartic dense interpolant, a series
//! start across the coordinate singularity at r = 0, step endpoints pinned to
//! nonlinearity junctions, and bisection-refined event localization on the
//! dense output.

use alloc::vec::Vec;

use crate::math;
use crate::nonlinearity::{PiecewiseNonlinearity, UpperLimit};

/// Point on a radial trajectory: radius, value, derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialState {
    pub r: f64,
    pub u: f64,
    pub v: f64,
}

/// Crossing direction an event must match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
    Any,
}

/// Quantity an event watches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    UCrossesZero,
    VCrossesZero,
    UCrosses(f64),
}

/// Whether a matched event terminates the integration or is only logged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventAction {
    Stop,
    Record,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventSpec {
    pub kind: EventKind,
    pub direction: Direction,
    pub action: EventAction,
}

impl EventSpec {
    pub fn stop(kind: EventKind, direction: Direction) -> Self {
        EventSpec { kind, direction, action: EventAction::Stop }
    }

    pub fn record(kind: EventKind, direction: Direction) -> Self {
        EventSpec { kind, direction, action: EventAction::Record }
    }
}

/// Tolerances and range for one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub r_max: f64,
}

impl Default for IntegrationControls {
    fn default() -> Self {
        IntegrationControls { rel_tol: 1e-10, abs_tol: 1e-12, r_max: 1e3 }
    }
}

/// Why an integration ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// A stop event fired; the index points into the caller's event list.
    Event { spec_index: usize },
    RMax,
    /// Step size underflow; the trajectory is truncated at `r`.
    StepFailure { r: f64 },
    /// The state reached the upper domain endpoint of the nonlinearity.
    DomainExit { r: f64, u: f64 },
}

/// An event match refined on the dense interpolant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedEvent {
    pub spec_index: usize,
    pub state: RadialState,
}

/// One accepted step's dense interpolant. Both components are stored in the
/// nested-basis form `c1 + t(c2 + (1-t)(c3 + t(c4 + (1-t) c5)))` over the
/// normalized coordinate `t = (r - r_start)/h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseStep {
    r_start: f64,
    h: f64,
    cu: [f64; 5],
    cv: [f64; 5],
}

impl DenseStep {
    fn eval(c: &[f64; 5], t: f64) -> f64 {
        let t1 = 1.0 - t;
        c[0] + t * (c[1] + t1 * (c[2] + t * (c[3] + t1 * c[4])))
    }

    pub fn r_start(&self) -> f64 {
        self.r_start
    }

    pub fn r_end(&self) -> f64 {
        self.r_start + self.h
    }

    pub fn u_at(&self, t: f64) -> f64 {
        Self::eval(&self.cu, t)
    }

    pub fn v_at(&self, t: f64) -> f64 {
        Self::eval(&self.cv, t)
    }

    pub fn state_at(&self, t: f64) -> RadialState {
        RadialState { r: self.r_start + t * self.h, u: self.u_at(t), v: self.v_at(t) }
    }
}

/// Adaptively sampled solution with dense output and resolved events.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<RadialState>,
    dense: Vec<DenseStep>,
    events: Vec<ResolvedEvent>,
    termination: Termination,
}

impl Trajectory {
    /// Step endpoints, strictly increasing in `r`; the first entry is the
    /// initial state, the last the terminal state.
    pub fn samples(&self) -> &[RadialState] {
        &self.samples
    }

    pub fn events(&self) -> &[ResolvedEvent] {
        &self.events
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn start(&self) -> RadialState {
        self.samples[0]
    }

    pub fn end(&self) -> RadialState {
        *self.samples.last().unwrap()
    }

    pub fn dense_steps(&self) -> &[DenseStep] {
        &self.dense
    }

    /// Dense-output state at radius `r`, for `r` within the covered range.
    pub fn state_at(&self, r: f64) -> Option<RadialState> {
        let end = self.end();
        if r < self.start().r || r > end.r {
            return None;
        }
        if self.dense.is_empty() {
            return Some(self.start());
        }
        let idx = self.dense.partition_point(|step| step.r_start <= r);
        let step = &self.dense[idx.saturating_sub(1)];
        let t = if step.h == 0.0 { 0.0 } else { ((r - step.r_start) / step.h).clamp(0.0, 1.0) };
        Some(step.state_at(t))
    }
}

// Dormand-Prince 5(4) coefficients.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
/// Subintervals scanned for event sign changes inside one step.
const EVENT_SCAN: usize = 16;
/// Junctions closer than this (relative) to the step's start value are
/// considered already visited and are not re-clipped.
const JUNCTION_GUARD: f64 = 1e-10;

#[derive(Clone, Copy)]
struct Deriv {
    du: f64,
    dv: f64,
}

fn rhs(nl: &PiecewiseNonlinearity, n_minus_1: f64, r: f64, u: f64, v: f64) -> Deriv {
    Deriv { du: v, dv: -n_minus_1 / r * v - nl.f_ext(u) }
}

/// Integrates from `start` until a stop event, `r_max`, a domain exit, or a
/// step failure. `start.r = 0` requires `start.v = 0` and engages the series
/// start across the coordinate singularity.
pub fn integrate(
    nl: &PiecewiseNonlinearity,
    start: RadialState,
    events: &[EventSpec],
    controls: &IntegrationControls,
) -> Trajectory {
    assert!(controls.rel_tol > 0.0 && controls.abs_tol > 0.0, "tolerances must be positive");
    assert!(start.r >= 0.0 && start.r.is_finite(), "start radius must be finite and nonnegative");
    assert!(controls.r_max > start.r, "r_max must exceed the start radius");
    if start.r == 0.0 {
        assert!(start.v == 0.0, "a start at r = 0 requires u'(0) = 0");
    }

    let mut samples = Vec::new();
    let mut dense: Vec<DenseStep> = Vec::new();
    let mut resolved: Vec<ResolvedEvent> = Vec::new();
    samples.push(start);

    let n_minus_1 = nl.base().dim() as f64 - 1.0;
    let mut r;
    let mut u;
    let mut v;

    if start.r == 0.0 {
        // Series start: u = a - f(a) r^2/(2N) + O(r^4). The radius is capped
        // so the omitted quartic term sits below the absolute tolerance.
        let alpha = start.u;
        let fa = nl.f_ext(alpha);
        let n = nl.base().dim() as f64;
        let r0 = if fa == 0.0 {
            1e-3
        } else {
            math::sqrt(2.0 * n * controls.abs_tol / math::abs(fa)).min(1e-3)
        };
        let k = fa * r0 * r0 / (2.0 * n);
        let step = DenseStep {
            r_start: 0.0,
            h: r0,
            cu: [alpha, -k, k, 0.0, 0.0],
            cv: [0.0, -fa * r0 / n, 0.0, 0.0, 0.0],
        };
        r = r0;
        u = alpha - k;
        v = -fa * r0 / n;
        if let Some(exit) = scan_step(&step, events, &mut resolved, &mut samples, &mut dense) {
            return Trajectory { samples, dense, events: resolved, termination: exit };
        }
        samples.push(RadialState { r, u, v });
    } else {
        r = start.r;
        u = start.u;
        v = start.v;
    }

    let mut k1 = rhs(nl, n_minus_1, r, u, v);
    let mut h = (1e-4_f64).min(0.5 * r).min(controls.r_max - r);
    let mut just_rejected = false;

    loop {
        if controls.r_max - r <= 1e-12 * (1.0 + controls.r_max) {
            return Trajectory { samples, dense, events: resolved, termination: Termination::RMax };
        }
        if let UpperLimit::Finite(g) = nl.gamma() {
            if u >= g {
                return Trajectory {
                    samples,
                    dense,
                    events: resolved,
                    termination: Termination::DomainExit { r, u },
                };
            }
        }
        h = h.min(controls.r_max - r);
        // Relative to the current radius: the series start can hand over at
        // r of order sqrt(abs_tol / f(alpha)), far below any absolute floor,
        // and steps there are legitimately of that scale.
        let h_floor = 1e-13 * r;
        if h < h_floor {
            return Trajectory {
                samples,
                dense,
                events: resolved,
                termination: Termination::StepFailure { r },
            };
        }

        // One Dormand-Prince attempt (FSAL: k1 is the derivative at (r, u, v)).
        let eval = |cs: &[f64], ks: &[Deriv], c: f64| -> (f64, f64, Deriv) {
            let mut du = 0.0;
            let mut dv = 0.0;
            for (a, k) in cs.iter().zip(ks.iter()) {
                du += a * k.du;
                dv += a * k.dv;
            }
            let (su, sv) = (u + h * du, v + h * dv);
            (su, sv, rhs(nl, n_minus_1, r + c * h, su, sv))
        };
        let (_, _, k2) = {
            let ks = [k1];
            eval(&A2, &ks, C[1])
        };
        let (_, _, k3) = {
            let ks = [k1, k2];
            eval(&A3, &ks, C[2])
        };
        let (_, _, k4) = {
            let ks = [k1, k2, k3];
            eval(&A4, &ks, C[3])
        };
        let (_, _, k5) = {
            let ks = [k1, k2, k3, k4];
            eval(&A5, &ks, C[4])
        };
        let (_, _, k6) = {
            let ks = [k1, k2, k3, k4, k5];
            eval(&A6, &ks, C[5])
        };
        let (u_new, v_new, k7) = {
            let ks = [k1, k2, k3, k4, k5, k6];
            eval(&B, &ks, C[6])
        };

        let ks = [k1, k2, k3, k4, k5, k6, k7];
        let mut err_u = 0.0;
        let mut err_v = 0.0;
        for (e, k) in E.iter().zip(ks.iter()) {
            err_u += e * k.du;
            err_v += e * k.dv;
        }
        err_u *= h;
        err_v *= h;
        let sc_u = controls.abs_tol + controls.rel_tol * math::abs(u).max(math::abs(u_new));
        let sc_v = controls.abs_tol + controls.rel_tol * math::abs(v).max(math::abs(v_new));
        let (eu, ev) = (err_u / sc_u, err_v / sc_v);
        let err = math::sqrt(0.5 * (eu * eu + ev * ev));

        if !err.is_finite() {
            h *= FAC_MIN;
            just_rejected = true;
            continue;
        }
        if err > 1.0 {
            let fac = (SAFETY * math::powf(err, -0.2)).max(FAC_MIN);
            h *= fac;
            just_rejected = true;
            continue;
        }

        // Dense interpolant of the accepted candidate.
        let mut c5u = 0.0;
        let mut c5v = 0.0;
        for (d, k) in D.iter().zip(ks.iter()) {
            c5u += d * k.du;
            c5v += d * k.dv;
        }
        let du_total = u_new - u;
        let dv_total = v_new - v;
        let bspl_u = h * k1.du - du_total;
        let bspl_v = h * k1.dv - dv_total;
        let step = DenseStep {
            r_start: r,
            h,
            cu: [u, du_total, bspl_u, du_total - h * k7.du - bspl_u, h * c5u],
            cv: [v, dv_total, bspl_v, dv_total - h * k7.dv - bspl_v, h * c5v],
        };

        // Pin the endpoint to the first nonlinearity junction the step walks
        // across, so no accepted step straddles a reduced-smoothness point.
        if let Some(t_junction) = earliest_junction_crossing(nl.junctions(), &step, u, u_new) {
            if t_junction < 1.0 - 1e-6 && t_junction * h > h_floor {
                h *= t_junction;
                just_rejected = true;
                continue;
            }
        }

        let fac = if just_rejected {
            (SAFETY * math::powf(err.max(1e-10), -0.2)).clamp(FAC_MIN, 1.0)
        } else {
            (SAFETY * math::powf(err.max(1e-10), -0.2)).clamp(FAC_MIN, FAC_MAX)
        };

        if let Some(exit) = scan_step(&step, events, &mut resolved, &mut samples, &mut dense) {
            return Trajectory { samples, dense, events: resolved, termination: exit };
        }

        r += h;
        u = u_new;
        v = v_new;
        k1 = k7;
        samples.push(RadialState { r, u, v });
        h *= fac;
        just_rejected = false;
    }
}

/// First normalized root of `u(t) = junction` inside the step, if any.
fn earliest_junction_crossing(
    junctions: &[f64],
    step: &DenseStep,
    u0: f64,
    u1: f64,
) -> Option<f64> {
    let mut best: Option<f64> = None;
    for &s in junctions {
        if math::abs(u0 - s) <= JUNCTION_GUARD * (1.0 + math::abs(s)) {
            continue;
        }
        if (u0 - s) * (u1 - s) >= 0.0 {
            continue;
        }
        let t = bisect_dense(|t| step.u_at(t) - s, 0.0, 1.0);
        if best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    }
    best
}

/// Bisection for a sign change of `g` on `[lo, hi]` in the normalized step
/// coordinate; the bracket is assumed valid.
fn bisect_dense(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut g_lo = g(lo);
    if g_lo == 0.0 {
        return lo;
    }
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return mid;
        }
        if (g_lo > 0.0) == (g_mid > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn event_g(kind: EventKind, step: &DenseStep, t: f64) -> f64 {
    match kind {
        EventKind::UCrossesZero => step.u_at(t),
        EventKind::VCrossesZero => step.v_at(t),
        EventKind::UCrosses(level) => step.u_at(t) - level,
    }
}

fn direction_matches(direction: Direction, g_before: f64, g_after: f64) -> bool {
    match direction {
        Direction::Down => g_before > 0.0 && g_after <= 0.0,
        Direction::Up => g_before < 0.0 && g_after >= 0.0,
        Direction::Any => (g_before > 0.0 && g_after <= 0.0) || (g_before < 0.0 && g_after >= 0.0),
    }
}

/// Scans one accepted step for events; commits the step and any recorded
/// events. Returns the termination if a stop event truncates the step.
fn scan_step(
    step: &DenseStep,
    events: &[EventSpec],
    resolved: &mut Vec<ResolvedEvent>,
    samples: &mut Vec<RadialState>,
    dense: &mut Vec<DenseStep>,
) -> Option<Termination> {
    let mut found: Vec<(f64, usize)> = Vec::new();
    for (spec_index, spec) in events.iter().enumerate() {
        let mut g_prev = event_g(spec.kind, step, 0.0);
        for k in 1..=EVENT_SCAN {
            let t_hi = k as f64 / EVENT_SCAN as f64;
            let g_here = event_g(spec.kind, step, t_hi);
            if g_prev != 0.0 && direction_matches(spec.direction, g_prev, g_here) {
                let t_lo = (k - 1) as f64 / EVENT_SCAN as f64;
                let t = if g_here == 0.0 {
                    t_hi
                } else {
                    bisect_dense(|t| event_g(spec.kind, step, t), t_lo, t_hi)
                };
                found.push((t, spec_index));
            }
            g_prev = g_here;
        }
    }
    found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut stop: Option<(f64, usize)> = None;
    for &(t, spec_index) in &found {
        match events[spec_index].action {
            EventAction::Stop => {
                stop = Some((t, spec_index));
                break;
            }
            EventAction::Record => {
                resolved.push(ResolvedEvent { spec_index, state: step.state_at(t) });
            }
        }
    }

    dense.push(*step);
    if let Some((t, spec_index)) = stop {
        // The dense record keeps the full step; trajectory lookups clamp to
        // the terminal sample, so nothing past the event is reachable.
        let state = step.state_at(t);
        resolved.push(ResolvedEvent { spec_index, state });
        samples.push(state);
        return Some(Termination::Event { spec_index });
    }
    None
}
