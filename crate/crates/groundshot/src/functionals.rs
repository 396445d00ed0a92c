//! Monitor functionals evaluated along trajectories: the Pohozaev energy,
//! the Erbe-Tang functional in both printed forms, the W comparison
//! functional, and strictly decreasing branches with their inverse map.

use crate::math;
use crate::nonlinearity::PiecewiseNonlinearity;
use crate::ode::{RadialState, Trajectory};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FunctionalError {
    #[error("radius {r} is outside the covered range [{lo}, {hi}]")]
    RadiusOutOfRange { r: f64, lo: f64, hi: f64 },
    #[error("slope is not strictly negative at r = {r} (u' = {v})")]
    NotMonotone { r: f64, v: f64 },
    #[error("value {s} is outside the branch range [{lo}, {hi}]")]
    LevelOutOfRange { s: f64, lo: f64, hi: f64 },
    #[error("F/f is singular too close to s = {s}")]
    NearZeroOfF { s: f64 },
    #[error("negative radicand at s = {s}: u'^2 + 2F = {value}")]
    NegativeRadicand { s: f64, value: f64 },
}

/// E(r) = r^N (u'^2 + 2F(u)) + (N-2) r^(N-1) u u'.
pub fn pohozaev_energy(nl: &PiecewiseNonlinearity, state: &RadialState) -> f64 {
    let n = nl.base().dim() as u32;
    let rn1 = math::powi(state.r, n - 1);
    let rn = rn1 * state.r;
    rn * (state.v * state.v + 2.0 * nl.big_f_ext(state.u))
        + (n as f64 - 2.0) * rn1 * state.u * state.v
}

/// E'(r) = r^(N-1) (2N F(u) - (N-2) u f(u)), the flow derivative of
/// [`pohozaev_energy`].
pub fn pohozaev_energy_derivative(nl: &PiecewiseNonlinearity, state: &RadialState) -> f64 {
    let n = nl.base().dim() as u32;
    math::powi(state.r, n - 1) * nl.q_ext(state.u)
}

/// [`pohozaev_energy`] read off the dense output of a trajectory.
pub fn pohozaev_e(
    nl: &PiecewiseNonlinearity,
    traj: &Trajectory,
    r: f64,
) -> Result<f64, FunctionalError> {
    let state = interpolate(traj, r)?;
    Ok(pohozaev_energy(nl, &state))
}

/// [`pohozaev_energy_derivative`] read off the dense output of a trajectory.
pub fn pohozaev_e_prime(
    nl: &PiecewiseNonlinearity,
    traj: &Trajectory,
    r: f64,
) -> Result<f64, FunctionalError> {
    let state = interpolate(traj, r)?;
    Ok(pohozaev_energy_derivative(nl, &state))
}

fn interpolate(traj: &Trajectory, r: f64) -> Result<RadialState, FunctionalError> {
    traj.state_at(r).ok_or(FunctionalError::RadiusOutOfRange {
        r,
        lo: traj.start().r,
        hi: traj.end().r,
    })
}

/// F(s)/f(s) with the analytic limit s/2 near the origin. Evaluation is
/// refused within 1e-6 of the base zero where the ratio is singular.
pub fn big_f_over_f(nl: &PiecewiseNonlinearity, s: f64) -> Result<f64, FunctionalError> {
    if math::abs(s) < 1e-9 {
        return Ok(0.5 * s);
    }
    if math::abs(s - nl.base().b()) < 1e-6 {
        return Err(FunctionalError::NearZeroOfF { s });
    }
    Ok(nl.big_f_ext(s) / nl.f_ext(s))
}

/// A trajectory restricted to a span where `u` decreases strictly, giving
/// the inverse map from values to radii.
#[derive(Debug, Clone, Copy)]
pub struct MonotoneBranch<'a> {
    traj: &'a Trajectory,
    r_lo: f64,
    r_hi: f64,
    s_hi: f64,
    s_lo: f64,
}

impl<'a> MonotoneBranch<'a> {
    /// Restricts `traj` to `[r_lo, r_hi]`, verifying that the slope stays
    /// below -1e-12 there (the starting point itself may sit at the origin,
    /// where the slope vanishes by symmetry).
    pub fn new(traj: &'a Trajectory, r_lo: f64, r_hi: f64) -> Result<Self, FunctionalError> {
        let lo = interpolate(traj, r_lo)?;
        let hi = interpolate(traj, r_hi)?;
        if !(r_lo < r_hi) {
            return Err(FunctionalError::RadiusOutOfRange { r: r_hi, lo: r_lo, hi: r_lo });
        }
        let checks = 256;
        for k in 0..=checks {
            let r = r_lo + (r_hi - r_lo) * k as f64 / checks as f64;
            let state = interpolate(traj, r)?;
            if state.v >= -1e-12 && !(k == 0 && r_lo == 0.0) {
                return Err(FunctionalError::NotMonotone { r, v: state.v });
            }
        }
        Ok(MonotoneBranch { traj, r_lo, r_hi, s_hi: lo.u, s_lo: hi.u })
    }

    /// The whole trajectory from its start down to the last sample.
    pub fn full(traj: &'a Trajectory) -> Result<Self, FunctionalError> {
        MonotoneBranch::new(traj, traj.start().r, traj.end().r)
    }

    /// Value range `(s_lo, s_hi)` covered by the branch.
    pub fn s_range(&self) -> (f64, f64) {
        (self.s_lo, self.s_hi)
    }

    pub fn r_range(&self) -> (f64, f64) {
        (self.r_lo, self.r_hi)
    }

    /// Radius where the branch passes through the value `s`.
    pub fn r_of_s(&self, s: f64) -> Result<f64, FunctionalError> {
        if !(s >= self.s_lo && s <= self.s_hi) {
            return Err(FunctionalError::LevelOutOfRange { s, lo: self.s_lo, hi: self.s_hi });
        }
        let (mut lo, mut hi) = (self.r_lo, self.r_hi);
        for _ in 0..90 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let u = interpolate(self.traj, mid)?.u;
            if u >= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r_lo_u = interpolate(self.traj, lo)?.u;
        let r_hi_u = interpolate(self.traj, hi)?.u;
        Ok(if math::abs(r_lo_u - s) <= math::abs(r_hi_u - s) { lo } else { hi })
    }

    /// Full interpolated state at the value `s`.
    pub fn state_of_s(&self, s: f64) -> Result<RadialState, FunctionalError> {
        let r = self.r_of_s(s)?;
        interpolate(self.traj, r)
    }
}

/// The comparison functional in its defining form,
/// P(s) = -2N (F/f)(s) r^(N-1) u' - r^N u'^2 - 2 r^N F(s),
/// evaluated at the branch point with value `s`. Vanishes at the origin.
pub fn erbe_tang_p(
    nl: &PiecewiseNonlinearity,
    branch: &MonotoneBranch,
    s: f64,
) -> Result<f64, FunctionalError> {
    let state = branch.state_of_s(s)?;
    if state.r == 0.0 {
        return Ok(0.0);
    }
    let ratio = big_f_over_f(nl, s)?;
    let n = nl.base().dim() as u32;
    let rn1 = math::powi(state.r, n - 1);
    let rn = rn1 * state.r;
    Ok(-2.0 * n as f64 * ratio * rn1 * state.v
        - rn * state.v * state.v
        - 2.0 * rn * nl.big_f_ext(s))
}

/// The same functional factored as 2 r^N (N (F/f)(s) |u'| / r - u'^2 / 2 - F(s)).
pub fn erbe_tang_p_factored(
    nl: &PiecewiseNonlinearity,
    branch: &MonotoneBranch,
    s: f64,
) -> Result<f64, FunctionalError> {
    let state = branch.state_of_s(s)?;
    if state.r == 0.0 {
        return Ok(0.0);
    }
    let ratio = big_f_over_f(nl, s)?;
    let n = nl.base().dim() as f64;
    let rn = math::powi(state.r, nl.base().dim() as u32);
    Ok(2.0
        * rn
        * (n * ratio * math::abs(state.v) / state.r
            - 0.5 * state.v * state.v
            - nl.big_f_ext(s)))
}

/// W(s) = r(s) sqrt(u'(r(s))^2 + 2F(s)); errors when the radicand is
/// negative.
pub fn w_functional(
    nl: &PiecewiseNonlinearity,
    branch: &MonotoneBranch,
    s: f64,
) -> Result<f64, FunctionalError> {
    let state = branch.state_of_s(s)?;
    let radicand = state.v * state.v + 2.0 * nl.big_f_ext(s);
    if radicand < 0.0 {
        return Err(FunctionalError::NegativeRadicand { s, value: radicand });
    }
    Ok(state.r * math::sqrt(radicand))
}

/// The tail-decay monitor r^(2(N-1)) u'^2 + 2F(u), in exactly this mixed
/// weighting; positive and decreasing along decaying tails once u < b and
/// r > 1.
pub fn tail_decay_quantity(nl: &PiecewiseNonlinearity, state: &RadialState) -> f64 {
    let n = nl.base().dim() as u32;
    let w = math::powi(state.r, 2 * (n - 1));
    w * state.v * state.v + 2.0 * nl.big_f_ext(state.u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::BaseModel;
    use crate::ode::{integrate, Direction, EventKind, EventSpec, IntegrationControls};
    use crate::shooting::{find_alpha_star, ShotControls};

    fn base_chain() -> PiecewiseNonlinearity {
        PiecewiseNonlinearity::base_only(BaseModel::new(2.0, 4).unwrap())
    }

    fn shoot_to(nl: &PiecewiseNonlinearity, alpha: f64, r_max: f64) -> Trajectory {
        let controls = IntegrationControls { r_max, ..IntegrationControls::default() };
        integrate(nl, RadialState { r: 0.0, u: alpha, v: 0.0 }, &[], &controls)
    }

    fn shoot_until_turn(nl: &PiecewiseNonlinearity, alpha: f64) -> Trajectory {
        let events = [EventSpec::stop(EventKind::VCrossesZero, Direction::Up)];
        integrate(
            nl,
            RadialState { r: 0.0, u: alpha, v: 0.0 },
            &events,
            &IntegrationControls::default(),
        )
    }

    #[test]
    fn energy_is_zero_at_origin_and_negative_along_a_positive_shot() {
        let nl = base_chain();
        let traj = shoot_to(&nl, 3.0, 6.0);
        assert_eq!(pohozaev_e(&nl, &traj, 0.0).unwrap(), 0.0);
        for k in 1..=60 {
            let r = 0.1 * k as f64;
            let e = pohozaev_e(&nl, &traj, r).unwrap();
            assert!(e < 0.0, "E({r}) = {e} should be negative");
        }
        assert!(matches!(
            pohozaev_e(&nl, &traj, 7.0),
            Err(FunctionalError::RadiusOutOfRange { .. })
        ));
    }

    #[test]
    fn energy_derivative_matches_finite_differences() {
        let nl = base_chain();
        let traj = shoot_to(&nl, 3.0, 6.0);
        let h = 1e-5;
        for k in 1..=11 {
            let r = 0.5 * k as f64;
            let fd = (pohozaev_e(&nl, &traj, r + h).unwrap()
                - pohozaev_e(&nl, &traj, r - h).unwrap())
                / (2.0 * h);
            let analytic = pohozaev_e_prime(&nl, &traj, r).unwrap();
            assert!(
                (fd - analytic).abs() <= 1e-6 * (1.0 + analytic.abs()),
                "r = {r}: fd {fd} vs analytic {analytic}"
            );
        }
    }

    #[test]
    fn f_ratio_limit_and_singularity_guard() {
        let nl = base_chain();
        assert_eq!(big_f_over_f(&nl, 1e-12).unwrap(), 5e-13);
        assert!(matches!(
            big_f_over_f(&nl, 1.0 + 1e-9),
            Err(FunctionalError::NearZeroOfF { .. })
        ));
        // p = 2: F(3)/f(3) = (9 - 4.5) / 6.
        assert!((big_f_over_f(&nl, 3.0).unwrap() - 0.75).abs() < 1e-14);
    }

    #[test]
    fn branch_inverts_the_trajectory() {
        let nl = base_chain();
        let traj = shoot_to(&nl, 4.0, 3.0);
        let branch = MonotoneBranch::full(&traj).unwrap();
        let (s_lo, s_hi) = branch.s_range();
        assert_eq!(s_hi, 4.0);
        for k in 0..=40 {
            let s = s_lo + (s_hi - s_lo) * k as f64 / 40.0;
            let state = branch.state_of_s(s).unwrap();
            assert!((state.u - s).abs() < 1e-10 * (1.0 + s.abs()));
        }
        assert!(matches!(
            branch.r_of_s(5.0),
            Err(FunctionalError::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn branch_rejects_spans_with_a_turnaround() {
        let nl = base_chain();
        let events = [EventSpec::stop(EventKind::VCrossesZero, Direction::Up)];
        let controls = IntegrationControls::default();
        let traj =
            integrate(&nl, RadialState { r: 0.0, u: 3.0, v: 0.0 }, &events, &controls);
        // The trajectory ends exactly at the turnaround, where u' = 0.
        let r_turn = traj.end().r;
        assert!(matches!(
            MonotoneBranch::new(&traj, 0.0, r_turn),
            Err(FunctionalError::NotMonotone { .. })
        ));
        assert!(MonotoneBranch::new(&traj, 0.0, 0.9 * r_turn).is_ok());
    }

    #[test]
    fn comparison_functional_vanishes_at_the_start_and_stays_nonpositive() {
        let nl = base_chain();
        let traj = shoot_until_turn(&nl, 4.0);
        let branch = MonotoneBranch::new(&traj, 0.0, 0.995 * traj.end().r).unwrap();
        assert_eq!(erbe_tang_p(&nl, &branch, 4.0).unwrap(), 0.0);
        let beta = nl.base().beta();
        let mut previous = f64::NEG_INFINITY;
        for k in 1..=100 {
            let s = beta + (4.0 - beta) * k as f64 / 101.0;
            let p = erbe_tang_p(&nl, &branch, s).unwrap();
            assert!(p < 0.0, "P({s}) = {p}");
            assert!(p + 1e-8 >= previous, "P must be nondecreasing in s");
            previous = p;
        }
    }

    #[test]
    fn the_two_printed_forms_agree() {
        let nl = base_chain();
        let traj = shoot_until_turn(&nl, 4.0);
        let branch = MonotoneBranch::new(&traj, 0.0, 0.995 * traj.end().r).unwrap();
        let (s_lo, _) = branch.s_range();
        let lo = s_lo.max(1.0 + 2e-6);
        for k in 0..100 {
            let s = lo + (3.999 - lo) * k as f64 / 99.0;
            let direct = erbe_tang_p(&nl, &branch, s).unwrap();
            let factored = erbe_tang_p_factored(&nl, &branch, s).unwrap();
            assert!(
                (direct - factored).abs() <= 1e-10 * (1.0 + direct.abs()),
                "s = {s}: {direct} vs {factored}"
            );
        }
    }

    #[test]
    fn w_is_positive_at_a_zero_crossing_and_errors_on_negative_radicand() {
        let nl = base_chain();
        // Sign-changing shot: W near the crossing tends to r |u'| > 0.
        let events = [EventSpec::stop(EventKind::UCrossesZero, Direction::Down)];
        let traj = integrate(
            &nl,
            RadialState { r: 0.0, u: 20.0, v: 0.0 },
            &events,
            &IntegrationControls::default(),
        );
        let branch = MonotoneBranch::full(&traj).unwrap();
        let end = traj.end();
        let w = w_functional(&nl, &branch, 1e-9).unwrap();
        assert!((w - end.r * end.v.abs()).abs() < 1e-6 * w);

        // Positive shot near its minimum: u' ~ 0 while F(u) < 0.
        let turn = [EventSpec::stop(EventKind::VCrossesZero, Direction::Up)];
        let traj = integrate(
            &nl,
            RadialState { r: 0.0, u: 3.0, v: 0.0 },
            &turn,
            &IntegrationControls::default(),
        );
        let r_turn = traj.end().r;
        let branch = MonotoneBranch::new(&traj, 0.0, 0.999 * r_turn).unwrap();
        let (s_lo, _) = branch.s_range();
        assert!(matches!(
            w_functional(&nl, &branch, s_lo),
            Err(FunctionalError::NegativeRadicand { .. })
        ));
    }

    #[test]
    fn tail_quantity_decreases_once_below_b() {
        let nl = base_chain();
        let c = ShotControls::default();
        let bracket = find_alpha_star(&nl, (3.0, 20.0), 1e-12, &c).unwrap();
        let traj = shoot_to(&nl, bracket.midpoint(), 12.0);
        // Restrict to the decaying tail: u below b and r past 1, where the
        // decrease is asserted.
        let mut previous = f64::INFINITY;
        let mut checked = 0;
        for k in 0..=200 {
            let r = 12.0 * k as f64 / 200.0;
            let state = traj.state_at(r).unwrap();
            if state.r > 1.0 && state.u < 0.99 && state.u > 0.0 {
                let q = tail_decay_quantity(&nl, &state);
                assert!(q > 0.0, "r = {r}: quantity {q} should be positive");
                assert!(q <= previous + 1e-10, "r = {r}: {q} after {previous}");
                previous = q;
                checked += 1;
            }
        }
        assert!(checked > 50, "the tail span should be well sampled");
    }
}
