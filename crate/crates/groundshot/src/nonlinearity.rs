//! Piecewise nonlinearities built from a base model `s^p - s` and a chain of
//! amplified positive blocks glued by affine bridges.
//!
//! A compiled chain owns a segment table with cumulative antiderivative
//! values at every junction, so `F(s)` is closed-form wherever the block
//! kinds admit one (power, constant-plus-sine, cubic-interpolated tables)
//! and continuity across junctions holds by construction.

use alloc::vec::Vec;

use crate::math;

/// Base nonlinearity `f1(s) = s^p - s` in dimension `n`, with its cached
/// zero `b = 1` and the unique zero `beta` of the antiderivative.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseModel {
    p: f64,
    n: u32,
    b: f64,
    beta: f64,
    supercritical: bool,
}

/// Construction failures for [`BaseModel`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("spatial dimension must be an integer >= 3, got {0}")]
    DimensionTooSmall(u32),
    #[error("exponent {p} is not subcritical in dimension {n}: need 1 < p < {critical}")]
    NotSubcritical { p: f64, n: u32, critical: f64 },
    #[error("exponent {p} is not supercritical in dimension {n}: need p >= {critical}")]
    NotSupercritical { p: f64, n: u32, critical: f64 },
}

impl BaseModel {
    /// Subcritical base model, `1 < p < (n+2)/(n-2)`.
    pub fn new(p: f64, n: u32) -> Result<Self, ModelError> {
        if n < 3 {
            return Err(ModelError::DimensionTooSmall(n));
        }
        let critical = Self::critical_for(n);
        if !(p > 1.0 && p < critical) {
            return Err(ModelError::NotSubcritical { p, n, critical });
        }
        Ok(Self::unchecked(p, n, false))
    }

    /// Variant at or above the critical exponent, `p >= (n+2)/(n-2)`, used
    /// for pure-power tails and for probing the marginal slope-bound case.
    pub fn supercritical(p: f64, n: u32) -> Result<Self, ModelError> {
        if n < 3 {
            return Err(ModelError::DimensionTooSmall(n));
        }
        let critical = Self::critical_for(n);
        if p < critical {
            return Err(ModelError::NotSupercritical { p, n, critical });
        }
        Ok(Self::unchecked(p, n, true))
    }

    fn unchecked(p: f64, n: u32, supercritical: bool) -> Self {
        let beta = math::powf(0.5 * (p + 1.0), 1.0 / (p - 1.0));
        BaseModel { p, n, b: 1.0, beta, supercritical }
    }

    fn critical_for(n: u32) -> f64 {
        (n as f64 + 2.0) / (n as f64 - 2.0)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> u32 {
        self.n
    }

    /// The positive zero of `f1`; always 1 for this family.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// The unique zero of the antiderivative above `b`: `((p+1)/2)^(1/(p-1))`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_supercritical(&self) -> bool {
        self.supercritical
    }

    /// Critical Sobolev exponent `(n+2)/(n-2)` for this dimension.
    pub fn critical_exponent(&self) -> f64 {
        Self::critical_for(self.n)
    }

    /// `f1(s) = sign(s)|s|^p - s`, odd-extended below zero so trajectories
    /// may poke past a sign change during a step without leaving the model.
    pub fn f(&self, s: f64) -> f64 {
        math::signum(s) * math::pow_abs(s, self.p) - s
    }

    /// Antiderivative `F1(s) = |s|^(p+1)/(p+1) - s^2/2`, even by oddness of `f1`.
    pub fn big_f(&self, s: f64) -> f64 {
        math::pow_abs(s, self.p + 1.0) / (self.p + 1.0) - 0.5 * s * s
    }

    /// `f1'(s) = p|s|^(p-1) - 1`.
    pub fn df(&self, s: f64) -> f64 {
        self.p * math::pow_abs(s, self.p - 1.0) - 1.0
    }
}

/// Shape of one upper block, before amplitude scaling.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind {
    /// `s^q`.
    Power { q: f64 },
    /// `offset + amplitude * sin(frequency * s)`; with `amplitude = 0` this
    /// is the constant block `offset`.
    Sine { offset: f64, amplitude: f64, frequency: f64 },
    /// Monotone-cubic interpolation of `(s, value)` nodes. Experimental:
    /// exceeds what the construction needs, which is bare continuity.
    Sampled { nodes: Vec<(f64, f64)> },
}

impl BlockKind {
    /// Constant block `value`, exact in evaluation and integration.
    pub fn constant(value: f64) -> Self {
        BlockKind::Sine { offset: value, amplitude: 0.0, frequency: 1.0 }
    }

    /// Raw shape value at `s`, before amplitude scaling. Sampled shapes
    /// rebuild their interpolation table on every call, so this stays out
    /// of integration loops; compiled chains are the tool there.
    ///
    /// Panics on a sampled shape whose nodes do not form a valid table;
    /// compiling a chain first surfaces that as a typed error.
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            BlockKind::Power { q } => math::powf(s, *q),
            BlockKind::Sine { offset, amplitude, frequency } => {
                offset + amplitude * math::sin(frequency * s)
            }
            BlockKind::Sampled { nodes } => {
                let table = CubicTable::build(nodes).expect("sampled shape nodes must be valid");
                table.eval(s)
            }
        }
    }

    /// Min and max of the raw shape over `[lo, hi]`. Power shapes are
    /// monotone so the endpoints decide; sine shapes add their interior
    /// critical points and saturate exactly once the window covers a full
    /// period; sampled shapes are scanned densely.
    pub fn extrema_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        assert!(lo <= hi, "extrema window must be ordered");
        match self {
            BlockKind::Power { .. } => {
                let (a, b) = (self.eval(lo), self.eval(hi));
                (a.min(b), a.max(b))
            }
            BlockKind::Sine { offset, amplitude, frequency } => {
                let amp = math::abs(*amplitude);
                if amp == 0.0 {
                    return (*offset, *offset);
                }
                let (t0, t1) = {
                    let (a, b) = (frequency * lo, frequency * hi);
                    (a.min(b), a.max(b))
                };
                if t1 - t0 >= 2.0 * core::f64::consts::PI {
                    return (offset - amp, offset + amp);
                }
                let (mut min, mut max) = {
                    let (a, b) = (self.eval(lo), self.eval(hi));
                    (a.min(b), a.max(b))
                };
                let half = core::f64::consts::FRAC_PI_2;
                let pi = core::f64::consts::PI;
                let mut k = libm::ceil((t0 - half) / pi) as i64;
                loop {
                    let t = half + k as f64 * pi;
                    if t > t1 {
                        break;
                    }
                    if t >= t0 {
                        let v = self.eval(t / frequency);
                        min = min.min(v);
                        max = max.max(v);
                    }
                    k += 1;
                }
                (min, max)
            }
            BlockKind::Sampled { nodes } => {
                let samples = (4 * nodes.len()).max(512);
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for k in 0..samples {
                    let s = lo + (hi - lo) * (k as f64) / ((samples - 1) as f64);
                    let v = self.eval(s);
                    min = min.min(v);
                    max = max.max(v);
                }
                (min, max)
            }
        }
    }

    /// Largest raw shape value over `[lo, hi]`.
    pub fn max_on(&self, lo: f64, hi: f64) -> f64 {
        self.extrema_on(lo, hi).1
    }
}

/// One upper block of the chain: a shape, its squared amplitude, the
/// breakpoint where the previous segment hands over, and the bridge width.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub amplitude_sq: f64,
    pub breakpoint: f64,
    pub bridge_width: f64,
}

impl BlockSpec {
    pub fn new(kind: BlockKind, amplitude_sq: f64, breakpoint: f64, bridge_width: f64) -> Self {
        BlockSpec { kind, amplitude_sq, breakpoint, bridge_width }
    }
}

/// Upper endpoint of the nonlinearity's domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperLimit {
    Unbounded,
    Finite(f64),
}

impl UpperLimit {
    pub fn contains(&self, s: f64) -> bool {
        match *self {
            UpperLimit::Unbounded => true,
            UpperLimit::Finite(g) => s < g,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            UpperLimit::Unbounded => None,
            UpperLimit::Finite(g) => Some(g),
        }
    }
}

/// Compilation and evaluation failures for chains.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChainError {
    #[error("block {index}: amplitude squared must be positive, got {value}")]
    NonPositiveAmplitude { index: usize, value: f64 },
    #[error("block {index}: bridge width must be positive, got {value}")]
    NonPositiveWidth { index: usize, value: f64 },
    #[error("block {index}: breakpoint {breakpoint} does not clear the previous segment end {previous_end}")]
    OverlappingBlocks { index: usize, breakpoint: f64, previous_end: f64 },
    #[error("block {index}: bridge endpoint at s = {s} is not positive ({value})")]
    BridgeNotPositive { index: usize, s: f64, value: f64 },
    #[error("block {index}: value at s = {s} is not positive ({value})")]
    NonPositiveBlock { index: usize, s: f64, value: f64 },
    #[error("block {index}: sine tail needs offset > |amplitude| on an unbounded domain")]
    SineTailDips { index: usize },
    #[error("block {index}: sine frequency must be nonzero when the amplitude is nonzero")]
    ZeroFrequency { index: usize },
    #[error("block {index}: sampled table needs at least two strictly increasing nodes")]
    BadTable { index: usize },
    #[error("block {index}: sampled table [{table_lo}, {table_hi}] does not cover its segment [{seg_lo}, {seg_hi}]")]
    TableCoverage { index: usize, table_lo: f64, table_hi: f64, seg_lo: f64, seg_hi: f64 },
    #[error("upper endpoint {gamma} does not clear the last bridge end {last_end}")]
    GammaInsideChain { gamma: f64, last_end: f64 },
    #[error("evaluation point {s} lies outside the domain [0, {gamma})")]
    OutOfDomain { s: f64, gamma: f64 },
}

/// Monotone cubic (Fritsch-Carlson) table with node slopes and cumulative
/// integrals, clamped flat outside the node range.
#[derive(Debug, Clone, PartialEq)]
struct CubicTable {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    cum: Vec<f64>,
}

impl CubicTable {
    fn build(nodes: &[(f64, f64)]) -> Option<Self> {
        let n = nodes.len();
        if n < 2 {
            return None;
        }
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for &(xi, yi) in nodes {
            if !xi.is_finite() || !yi.is_finite() {
                return None;
            }
            if let Some(&last) = x.last() {
                if xi <= last {
                    return None;
                }
            }
            x.push(xi);
            y.push(yi);
        }
        let mut d = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            d.push((y[i + 1] - y[i]) / (x[i + 1] - x[i]));
        }
        let mut m = Vec::with_capacity(n);
        m.push(d[0]);
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                m.push(0.0);
            } else {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w = 3.0 * (h0 + h1);
                m.push(w / ((2.0 * h1 + h0) / d[i - 1] + (h1 + 2.0 * h0) / d[i]));
            }
        }
        m.push(d[n - 2]);
        let mut table = CubicTable { x, y, m, cum: Vec::new() };
        let mut cum = Vec::with_capacity(n);
        cum.push(0.0);
        for i in 0..n - 1 {
            let h = table.x[i + 1] - table.x[i];
            let piece = table.integral_in_interval(i, h);
            cum.push(cum[i] + piece);
        }
        table.cum = cum;
        Some(table)
    }

    fn coeffs(&self, i: usize) -> (f64, f64, f64, f64) {
        let h = self.x[i + 1] - self.x[i];
        let secant = (self.y[i + 1] - self.y[i]) / h;
        let a = self.y[i];
        let b = self.m[i];
        let c = (3.0 * secant - 2.0 * self.m[i] - self.m[i + 1]) / h;
        let d = (self.m[i] + self.m[i + 1] - 2.0 * secant) / (h * h);
        (a, b, c, d)
    }

    fn interval_of(&self, s: f64) -> usize {
        let n = self.x.len();
        let idx = self.x.partition_point(|&xi| xi <= s);
        idx.clamp(1, n - 1) - 1
    }

    fn eval(&self, s: f64) -> f64 {
        let n = self.x.len();
        if s <= self.x[0] {
            return self.y[0];
        }
        if s >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.interval_of(s);
        let (a, b, c, d) = self.coeffs(i);
        let t = s - self.x[i];
        a + t * (b + t * (c + t * d))
    }

    fn integral_in_interval(&self, i: usize, t: f64) -> f64 {
        let (a, b, c, d) = self.coeffs(i);
        t * (a + t * (b / 2.0 + t * (c / 3.0 + t * d / 4.0)))
    }

    /// Integral of the interpolant from the first node to `s`, with flat
    /// extension outside the node range.
    fn cumulative(&self, s: f64) -> f64 {
        let n = self.x.len();
        if s <= self.x[0] {
            return self.y[0] * (s - self.x[0]);
        }
        if s >= self.x[n - 1] {
            return self.cum[n - 1] + self.y[n - 1] * (s - self.x[n - 1]);
        }
        let i = self.interval_of(s);
        self.cum[i] + self.integral_in_interval(i, s - self.x[i])
    }

    fn span(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }
}

/// A block shape with its interpolation tables resolved.
#[derive(Debug, Clone, PartialEq)]
enum PreparedKind {
    Power { q: f64 },
    Sine { offset: f64, amplitude: f64, frequency: f64 },
    Sampled(CubicTable),
}

impl PreparedKind {
    fn eval(&self, s: f64) -> f64 {
        match self {
            PreparedKind::Power { q } => math::powf(s, *q),
            PreparedKind::Sine { offset, amplitude, frequency } => {
                offset + amplitude * math::sin(frequency * s)
            }
            PreparedKind::Sampled(table) => table.eval(s),
        }
    }

    /// Exact integral of the shape from `s0` to `s1`.
    fn primitive_between(&self, s0: f64, s1: f64) -> f64 {
        match self {
            PreparedKind::Power { q } => {
                if math::abs(q + 1.0) < 1e-14 {
                    // q = -1 never passes positivity on (0, inf) with a log
                    // primitive surprise; handled for completeness.
                    libm::log(s1 / s0)
                } else {
                    (math::powf(s1, q + 1.0) - math::powf(s0, q + 1.0)) / (q + 1.0)
                }
            }
            PreparedKind::Sine { offset, amplitude, frequency } => {
                let linear = offset * (s1 - s0);
                if *amplitude == 0.0 {
                    linear
                } else {
                    linear - amplitude / frequency * (math::cos(frequency * s1) - math::cos(frequency * s0))
                }
            }
            PreparedKind::Sampled(table) => table.cumulative(s1) - table.cumulative(s0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Base,
    /// Affine bridge through `(s0, y0)` and `(s1, y1)`.
    Bridge { s0: f64, s1: f64, y0: f64, y1: f64 },
    Block { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    start: f64,
    piece: Piece,
    /// Antiderivative value accumulated up to `start`.
    f_cum: f64,
}

/// Compiled evaluator for the full chain: immutable, cheap to share.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseNonlinearity {
    base: BaseModel,
    blocks: Vec<BlockSpec>,
    prepared: Vec<PreparedKind>,
    gamma: UpperLimit,
    segments: Vec<Segment>,
    junctions: Vec<f64>,
}

/// Sample count used to screen block positivity at compile time.
const POSITIVITY_SAMPLES: usize = 512;

impl PiecewiseNonlinearity {
    /// Just the base model, no upper blocks.
    pub fn base_only(base: BaseModel) -> Self {
        Self::compile(base, Vec::new(), UpperLimit::Unbounded)
            .expect("an empty chain always compiles")
    }

    /// Validates the chain, resolves bridges from endpoint evaluations, and
    /// accumulates antiderivative values at every junction.
    pub fn compile(
        base: BaseModel,
        blocks: Vec<BlockSpec>,
        gamma: UpperLimit,
    ) -> Result<Self, ChainError> {
        let mut prepared = Vec::with_capacity(blocks.len());
        for (index, block) in blocks.iter().enumerate() {
            if !(block.amplitude_sq > 0.0) {
                return Err(ChainError::NonPositiveAmplitude { index, value: block.amplitude_sq });
            }
            if !(block.bridge_width > 0.0) {
                return Err(ChainError::NonPositiveWidth { index, value: block.bridge_width });
            }
            let kind = match &block.kind {
                BlockKind::Power { q } => PreparedKind::Power { q: *q },
                BlockKind::Sine { offset, amplitude, frequency } => {
                    if *amplitude != 0.0 && *frequency == 0.0 {
                        return Err(ChainError::ZeroFrequency { index });
                    }
                    PreparedKind::Sine {
                        offset: *offset,
                        amplitude: *amplitude,
                        frequency: *frequency,
                    }
                }
                BlockKind::Sampled { nodes } => {
                    let table = CubicTable::build(nodes).ok_or(ChainError::BadTable { index })?;
                    PreparedKind::Sampled(table)
                }
            };
            prepared.push(kind);
        }

        let mut previous_end = 0.0;
        for (index, block) in blocks.iter().enumerate() {
            if block.breakpoint <= previous_end {
                return Err(ChainError::OverlappingBlocks {
                    index,
                    breakpoint: block.breakpoint,
                    previous_end,
                });
            }
            previous_end = block.breakpoint + block.bridge_width;
        }
        if let UpperLimit::Finite(g) = gamma {
            if g <= previous_end {
                return Err(ChainError::GammaInsideChain { gamma: g, last_end: previous_end });
            }
        }

        let mut chain = PiecewiseNonlinearity {
            base,
            blocks,
            prepared,
            gamma,
            segments: Vec::new(),
            junctions: Vec::new(),
        };
        chain.build_segments()?;
        chain.check_positivity()?;
        Ok(chain)
    }

    fn build_segments(&mut self) -> Result<(), ChainError> {
        let mut segments = Vec::with_capacity(1 + 2 * self.blocks.len());
        segments.push(Segment { start: 0.0, piece: Piece::Base, f_cum: 0.0 });

        for index in 0..self.blocks.len() {
            let (bp, width, amp) = {
                let b = &self.blocks[index];
                (b.breakpoint, b.bridge_width, b.amplitude_sq)
            };
            let y0 = self.segment_value(segments.last().unwrap(), bp);
            let y1 = amp * self.prepared[index].eval(bp + width);
            if !(y0 > 0.0) {
                return Err(ChainError::BridgeNotPositive { index, s: bp, value: y0 });
            }
            if !(y1 > 0.0) {
                return Err(ChainError::BridgeNotPositive { index, s: bp + width, value: y1 });
            }
            let f_cum_at_bp = self.segment_big_f(segments.last().unwrap(), bp);
            segments.push(Segment {
                start: bp,
                piece: Piece::Bridge { s0: bp, s1: bp + width, y0, y1 },
                f_cum: f_cum_at_bp,
            });
            let f_cum_at_end = self.segment_big_f(segments.last().unwrap(), bp + width);
            segments.push(Segment {
                start: bp + width,
                piece: Piece::Block { index },
                f_cum: f_cum_at_end,
            });
        }

        let mut junctions = Vec::new();
        junctions.push(self.base.b());
        junctions.push(self.base.beta());
        for segment in segments.iter().skip(1) {
            junctions.push(segment.start);
        }
        junctions.sort_by(|a, b| a.partial_cmp(b).unwrap());
        junctions.dedup();
        if let UpperLimit::Finite(g) = self.gamma {
            junctions.retain(|&s| s < g);
        }

        self.segments = segments;
        self.junctions = junctions;
        Ok(())
    }

    fn check_positivity(&self) -> Result<(), ChainError> {
        for (index, block) in self.blocks.iter().enumerate() {
            let seg_lo = block.breakpoint + block.bridge_width;
            let seg_hi = match self.blocks.get(index + 1) {
                Some(next) => next.breakpoint,
                None => match self.gamma {
                    UpperLimit::Finite(g) => g,
                    UpperLimit::Unbounded => {
                        if let PreparedKind::Sine { offset, amplitude, .. } = &self.prepared[index]
                        {
                            if *amplitude != 0.0 && offset - math::abs(*amplitude) <= 0.0 {
                                return Err(ChainError::SineTailDips { index });
                            }
                        }
                        seg_lo + (10.0 * seg_lo).max(100.0)
                    }
                },
            };
            if let PreparedKind::Sampled(table) = &self.prepared[index] {
                let (table_lo, table_hi) = table.span();
                let covered_hi = match (self.blocks.get(index + 1), self.gamma) {
                    (Some(next), _) => next.breakpoint,
                    (None, UpperLimit::Finite(g)) => g,
                    // An unbounded sampled tail extends flat past its last
                    // node, so coverage beyond the table is the node value.
                    (None, UpperLimit::Unbounded) => table_hi,
                };
                if table_lo > seg_lo || table_hi < covered_hi {
                    return Err(ChainError::TableCoverage {
                        index,
                        table_lo,
                        table_hi,
                        seg_lo,
                        seg_hi: covered_hi,
                    });
                }
            }
            for k in 0..=POSITIVITY_SAMPLES {
                let s = seg_lo + (seg_hi - seg_lo) * (k as f64) / (POSITIVITY_SAMPLES as f64);
                let value = block.amplitude_sq * self.prepared[index].eval(s);
                if !(value > 0.0) {
                    return Err(ChainError::NonPositiveBlock { index, s, value });
                }
            }
        }
        Ok(())
    }

    fn segment_index(&self, s: f64) -> usize {
        let idx = self.segments.partition_point(|seg| seg.start <= s);
        idx.saturating_sub(1)
    }

    fn segment_value(&self, segment: &Segment, s: f64) -> f64 {
        match &segment.piece {
            Piece::Base => self.base.f(s),
            Piece::Bridge { s0, s1, y0, y1 } => {
                // Convex combination: exact at both endpoints even when the
                // bridge spans several orders of magnitude.
                let t = (s - s0) / (s1 - s0);
                (1.0 - t) * y0 + t * y1
            }
            Piece::Block { index } => self.blocks[*index].amplitude_sq * self.prepared[*index].eval(s),
        }
    }

    fn segment_big_f(&self, segment: &Segment, s: f64) -> f64 {
        match &segment.piece {
            Piece::Base => self.base.big_f(s),
            Piece::Bridge { s0, s1, y0, y1 } => {
                let t = (s - s0) / (s1 - s0);
                let y = (1.0 - t) * y0 + t * y1;
                segment.f_cum + (s - s0) * 0.5 * (y0 + y)
            }
            Piece::Block { index } => {
                segment.f_cum
                    + self.blocks[*index].amplitude_sq
                        * self.prepared[*index].primitive_between(segment.start, s)
            }
        }
    }

    pub fn base(&self) -> &BaseModel {
        &self.base
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn gamma(&self) -> UpperLimit {
        self.gamma
    }

    /// Reduced-smoothness points (base zeros and bridge corners), sorted.
    /// The integrator pins step endpoints here.
    pub fn junctions(&self) -> &[f64] {
        &self.junctions
    }

    fn check_domain(&self, s: f64) -> Result<(), ChainError> {
        let ok = s >= 0.0 && s.is_finite() && self.gamma.contains(s);
        if ok {
            Ok(())
        } else {
            let gamma = self.gamma.value().unwrap_or(f64::INFINITY);
            Err(ChainError::OutOfDomain { s, gamma })
        }
    }

    /// `f(s)` on `[0, gamma)`. At a junction the shared endpoint value is
    /// returned (the incoming segment's closing value equals the outgoing
    /// segment's opening value by construction).
    pub fn eval_f(&self, s: f64) -> Result<f64, ChainError> {
        self.check_domain(s)?;
        Ok(self.f_ext(s))
    }

    /// Antiderivative `F(s)` with `F(0) = 0`, on `[0, gamma)`.
    pub fn eval_big_f(&self, s: f64) -> Result<f64, ChainError> {
        self.check_domain(s)?;
        Ok(self.big_f_ext(s))
    }

    /// `Q(s) = 2N F(s) - (N-2) s f(s)`.
    pub fn eval_q(&self, s: f64) -> Result<f64, ChainError> {
        self.check_domain(s)?;
        Ok(self.q_ext(s))
    }

    /// Unchecked evaluation used by the integrator; odd-extends the base
    /// model below zero and continues the last segment formula above the
    /// chain so stage values may leave the domain transiently.
    pub(crate) fn f_ext(&self, s: f64) -> f64 {
        if s < 0.0 {
            return self.base.f(s);
        }
        let segment = &self.segments[self.segment_index(s)];
        self.segment_value(segment, s)
    }

    /// Companion of [`f_ext`](Self::f_ext) for the antiderivative; even
    /// extension below zero.
    pub(crate) fn big_f_ext(&self, s: f64) -> f64 {
        if s < 0.0 {
            return self.base.big_f(s);
        }
        let segment = &self.segments[self.segment_index(s)];
        self.segment_big_f(segment, s)
    }

    pub(crate) fn q_ext(&self, s: f64) -> f64 {
        let n = self.base.dim() as f64;
        2.0 * n * self.big_f_ext(s) - (n - 2.0) * s * self.f_ext(s)
    }

    /// Largest relative disagreement between the incoming and outgoing
    /// segment formulas at any segment boundary. Continuity holds by
    /// construction, so anything beyond rounding indicates a defect.
    pub fn junction_mismatch(&self) -> f64 {
        let mut worst = 0.0_f64;
        for k in 1..self.segments.len() {
            let s = self.segments[k].start;
            let incoming = self.segment_value(&self.segments[k - 1], s);
            let outgoing = self.segment_value(&self.segments[k], s);
            let scale = math::abs(incoming).max(math::abs(outgoing)).max(1.0);
            worst = worst.max(math::abs(incoming - outgoing) / scale);
        }
        worst
    }

    /// Min and max of `f` over `[lo, hi]` by dense sampling with extra
    /// nodes at every junction inside the window.
    pub fn extrema_on(&self, lo: f64, hi: f64, samples: usize) -> (f64, f64) {
        let samples = samples.max(2);
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut look = |s: f64| {
            let v = self.f_ext(s);
            if v < min {
                min = v;
            }
            if v > max {
                max = v;
            }
        };
        for k in 0..samples {
            let s = lo + (hi - lo) * (k as f64) / ((samples - 1) as f64);
            look(s);
        }
        for &j in &self.junctions {
            if j > lo && j < hi {
                look(j);
            }
        }
        (min, max)
    }
}
