//! Numerical certification of the structural hypotheses behind the shooting
//! picture, in the usual (H1)-(H6) numbering: location of the zeros b and
//! beta (H1), the slope bound (F/f)' > (N-2)/(2N) above beta (H2), the
//! monotone secant f/(s-b) above b (H3), and the subcritical growth
//! condition on the tail (H6). Block positivity (H5) is enforced when a
//! chain is compiled, and the existence of the boundary value (H4) is what
//! the shooting searches realize.

use alloc::vec::Vec;

use crate::math;
use crate::nonlinearity::{BaseModel, PiecewiseNonlinearity, UpperLimit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Outcome of one sampled check: the verdict, the worst sample seen, and
/// where the samples lived.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub verdict: Verdict,
    /// Sample point with the smallest margin; the concrete witness for a
    /// fail verdict.
    pub witness_s: f64,
    /// Margin at the witness; negative margins are violations.
    pub witness_margin: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub samples: usize,
}

/// Combined report for a compiled chain.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub b: f64,
    pub beta: f64,
    pub slope_bound: CheckReport,
    pub secant_monotone: CheckReport,
    pub subcritical_growth: CheckReport,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum HypothesisError {
    #[error("sampling grid touches a zero of f near s = {s}")]
    GridTouchesZeroOfF { s: f64 },
    #[error("theta must lie strictly inside (0, 1), got {theta}")]
    BadTheta { theta: f64 },
    #[error("the ladder must be positive and strictly increasing")]
    BadLadder,
    #[error("the ladder leaves the finite domain [0, {gamma})")]
    LadderOutsideDomain { gamma: f64 },
    #[error("f is not positive somewhere in the window [{lo}, {hi}]")]
    FVanishesInWindow { lo: f64, hi: f64 },
}

/// Uniform sampling grid on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl SampleGrid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        assert!(lo < hi && points >= 2);
        SampleGrid { lo, hi, points }
    }

    fn at(&self, k: usize) -> f64 {
        self.lo + (self.hi - self.lo) * k as f64 / (self.points - 1) as f64
    }
}

/// The zero b of f and the zero beta of F, from the closed forms, with the
/// beta value cross-checked by a bracketing root-find on F to 1e-12.
pub fn find_b_and_beta(base: &BaseModel) -> (f64, f64) {
    let b = base.b();
    let beta = base.beta();
    let (mut lo, mut hi) = (b, 10.0 * beta);
    debug_assert!(base.big_f(lo) < 0.0 && base.big_f(hi) > 0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if base.big_f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bracketed = 0.5 * (lo + hi);
    debug_assert!(
        math::abs(bracketed - beta) <= 1e-11 * beta,
        "closed-form beta disagrees with the bracketing root-find"
    );
    (b, beta)
}

/// Checks (F/f)'(s) > (N-2)/(2N) on the grid, which must live above beta
/// with its top at 10 beta or beyond. The derivative is analytic:
/// (F/f)' = (f^2 - F f') / f^2. The verdict is marginal (inconclusive) when
/// every sample passes but the tail limit 1/(p+1) sits exactly on the bound.
pub fn check_h2(base: &BaseModel, grid: &SampleGrid) -> Result<CheckReport, HypothesisError> {
    let beta = base.beta();
    assert!(grid.lo >= beta, "the slope bound applies above beta");
    assert!(grid.hi >= 10.0 * beta, "the grid must reach the tail");
    let bound = (base.dim() as f64 - 2.0) / (2.0 * base.dim() as f64);

    let mut worst = (grid.lo, f64::INFINITY);
    for k in 0..grid.points {
        let s = grid.at(k);
        let f = base.f(s);
        if math::abs(f) < 1e-12 {
            return Err(HypothesisError::GridTouchesZeroOfF { s });
        }
        let ratio_slope = (f * f - base.big_f(s) * base.df(s)) / (f * f);
        let margin = ratio_slope - bound;
        if margin < worst.1 {
            worst = (s, margin);
        }
    }

    let tail_limit = 1.0 / (base.p() + 1.0);
    let verdict = if worst.1 <= 0.0 {
        Verdict::Fail
    } else if math::abs(tail_limit - bound) <= 1e-9 {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(CheckReport {
        verdict,
        witness_s: worst.0,
        witness_margin: worst.1,
        grid_lo: grid.lo,
        grid_hi: grid.hi,
        samples: grid.points,
    })
}

fn secant_monotone_margin(
    g: &dyn Fn(f64) -> f64,
    grid: &SampleGrid,
) -> (f64, f64) {
    let mut worst = (grid.lo, f64::INFINITY);
    let mut prev = g(grid.at(0));
    for k in 1..grid.points {
        let s = grid.at(k);
        let val = g(s);
        let margin = (val - prev) / (1.0 + math::abs(prev));
        if margin < worst.1 {
            worst = (s, margin);
        }
        prev = val;
    }
    worst
}

/// Checks that f(s)/(s - b) is increasing on the grid, which must live
/// strictly above b.
pub fn check_h3(base: &BaseModel, grid: &SampleGrid) -> Result<CheckReport, HypothesisError> {
    let b = base.b();
    assert!(grid.lo > b, "the secant check applies strictly above b");
    let worst = secant_monotone_margin(&|s| base.f(s) / (s - b), grid);
    let verdict = if worst.1 < -1e-10 {
        Verdict::Fail
    } else if worst.1 <= 0.0 {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(CheckReport {
        verdict,
        witness_s: worst.0,
        witness_margin: worst.1,
        grid_lo: grid.lo,
        grid_hi: grid.hi,
        samples: grid.points,
    })
}

const WINDOW_SAMPLES: usize = 256;
const LADDER_TARGET: f64 = 1e6;
const LADDER_CAP: f64 = 1e12;

fn window_infimum(
    nl: &PiecewiseNonlinearity,
    theta: f64,
    s: f64,
) -> Result<f64, HypothesisError> {
    let lo = theta * s;
    let n_half = nl.base().dim() as f64 / 2.0;
    let (mut q_min, mut f_min, mut f_max) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..=WINDOW_SAMPLES {
        let x = lo + (s - lo) * k as f64 / WINDOW_SAMPLES as f64;
        q_min = q_min.min(nl.q_ext(x));
        let f = nl.f_ext(x);
        f_min = f_min.min(f);
        f_max = f_max.max(f);
    }
    if f_min <= 0.0 {
        return Err(HypothesisError::FVanishesInWindow { lo, hi: s });
    }
    // The two factors vary independently over the window; the infimum pairs
    // the smallest Q with whichever f-factor hurts it most.
    let factor = if q_min >= 0.0 { math::powf(s / f_max, n_half) } else { math::powf(s / f_min, n_half) };
    Ok(q_min * factor)
}

/// Evaluates the subcritical growth indicator
/// inf { Q(s2) (s / f(s1))^(N/2) : s1, s2 in [theta s, s] } along the
/// ladder, extending it tenfold (up to 1e12) while the trend is still
/// climbing toward the 1e6 acceptance mark. Pass needs the top of the
/// ladder above 1e6, still increasing, with Q bounded below; a sequence
/// contracting onto a finite value, or Q diving without bound, fails.
pub fn check_h6(
    nl: &PiecewiseNonlinearity,
    theta: f64,
    ladder: &[f64],
) -> Result<CheckReport, HypothesisError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(HypothesisError::BadTheta { theta });
    }
    if ladder.len() < 3 || ladder[0] <= 0.0 || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HypothesisError::BadLadder);
    }
    if let UpperLimit::Finite(g) = nl.gamma() {
        if ladder.last().copied().unwrap_or(0.0) >= g {
            return Err(HypothesisError::LadderOutsideDomain { gamma: g });
        }
    }

    let mut rungs: Vec<f64> = ladder.to_vec();
    let mut values: Vec<f64> = Vec::new();
    for &s in rungs.iter() {
        values.push(window_infimum(nl, theta, s)?);
    }
    // Keep climbing while the sequence looks divergent but has not yet
    // cleared the acceptance mark (only in an unbounded domain).
    while matches!(nl.gamma(), UpperLimit::Unbounded)
        && *values.last().unwrap() <= LADDER_TARGET
        && *rungs.last().unwrap() < LADDER_CAP
        && values[values.len() - 1] > values[values.len() - 2]
    {
        let s = rungs.last().unwrap() * 10.0;
        rungs.push(s);
        values.push(window_infimum(nl, theta, s)?);
    }

    let k = values.len();
    let (v3, v2, v1) = (values[k - 3], values[k - 2], values[k - 1]);
    let increasing_top = v1 > v2 && v2 > v3;
    let contracting = math::abs(v1 - v2) <= 0.5 * math::abs(v2 - v3) && math::abs(v1) < LADDER_TARGET;
    let q_floor_hi = q_floor(nl, *rungs.last().unwrap());
    let q_floor_mid = q_floor(nl, *rungs.last().unwrap() / 10.0);
    let q_unbounded = q_floor_hi < 4.0 * q_floor_mid && q_floor_hi < -1e6;

    let verdict = if increasing_top && v1 > LADDER_TARGET && !q_unbounded {
        Verdict::Pass
    } else if contracting || (v1 < v2 && v1 < 0.0) || q_unbounded {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(CheckReport {
        verdict,
        witness_s: *rungs.last().unwrap(),
        witness_margin: v1,
        grid_lo: rungs[0],
        grid_hi: *rungs.last().unwrap(),
        samples: k,
    })
}

fn q_floor(nl: &PiecewiseNonlinearity, hi: f64) -> f64 {
    // Geometric sampling so both the dip at moderate s and the far tail are
    // seen whatever the magnitude of hi.
    let lo = 1e-2;
    let ratio = math::powf(hi / lo, 1.0 / 2048.0);
    let mut floor = nl.q_ext(0.0);
    let mut s = lo;
    for _ in 0..=2048 {
        floor = floor.min(nl.q_ext(s));
        s *= ratio;
    }
    floor
}

/// Runs every check with default grids: the slope bound and secant checks on
/// the base model out to 10 beta (or three times the last junction if that
/// reaches further), the growth check on a decade ladder from 1e2.
pub fn certify(
    nl: &PiecewiseNonlinearity,
    theta: f64,
) -> Result<HypothesisReport, HypothesisError> {
    let base = nl.base();
    let (b, beta) = find_b_and_beta(base);
    let reach = nl
        .junctions()
        .iter()
        .copied()
        .fold(10.0 * beta, |acc, j| acc.max(3.0 * j));
    let slope_bound = check_h2(base, &SampleGrid::new(beta, reach, 4000))?;
    let secant_monotone = check_h3(base, &SampleGrid::new(b + 1e-6, reach, 4000))?;
    let ladder = match nl.gamma() {
        UpperLimit::Unbounded => alloc::vec![1e2, 1e3, 1e4, 1e5, 1e6],
        UpperLimit::Finite(g) => {
            let hi = 0.9 * g;
            alloc::vec![hi / 100.0, hi / 10.0, hi]
        }
    };
    let subcritical_growth = check_h6(nl, theta, &ladder)?;
    Ok(HypothesisReport { b, beta, slope_bound, secant_monotone, subcritical_growth })
}
