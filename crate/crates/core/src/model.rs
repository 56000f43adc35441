//! Core value types shared by every other module.
//!
//! All types validate their invariants on construction and are immutable
//! afterwards, so they can be shared freely across worker threads.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

/// Maximum allowed |B^T B - I| entry for a matrix accepted as orthonormal.
/// Sized for Gram-Schmidt/Householder accumulation at n = 1000.
pub const ORTHONORMALITY_TOL: f64 = 1e-9;

/// Distribution of the nonzero entries of a generated sparse signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueDist {
    /// ±1 with equal probability.
    Unit,
    /// Standard normal.
    Gaussian,
    /// Uniform on [-1, 1] with exact zeros redrawn.
    Uniform,
}

impl fmt::Display for ValueDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueDist::Unit => write!(f, "unit"),
            ValueDist::Gaussian => write!(f, "gaussian"),
            ValueDist::Uniform => write!(f, "uniform"),
        }
    }
}

/// A length-n real vector with an explicit support set.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    values: DVector<f64>,
    support: Vec<usize>,
}

impl SparseSignal {
    /// Wraps a vector, deriving the support as the set of nonzero indices.
    pub fn new(values: DVector<f64>) -> Self {
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        SparseSignal { values, support }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self::new(DVector::from_vec(values))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Indices carrying nonzero values, in increasing order.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// The L0 norm of the signal.
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.norm()
    }

    /// Returns the signal rescaled to unit L2 norm.
    pub fn normalized(&self) -> Result<SparseSignal> {
        let norm = self.l2_norm();
        if norm == 0.0 {
            return Err(Error::domain("cannot normalize the zero signal"));
        }
        Ok(SparseSignal::new(&self.values / norm))
    }
}

/// Generates a signal with exactly `sparsity` nonzero entries on a uniformly
/// random support, deterministic in `seed`.
pub fn make_sparse_signal(
    n: usize,
    sparsity: usize,
    dist: ValueDist,
    seed: u64,
) -> Result<SparseSignal> {
    if sparsity > n {
        return Err(Error::domain(format!(
            "sparsity {sparsity} exceeds signal length {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut support: Vec<usize> = sample(&mut rng, n, sparsity).into_vec();
    support.sort_unstable();

    let mut values = DVector::zeros(n);
    for &idx in &support {
        values[idx] = loop {
            let v = match dist {
                ValueDist::Unit => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
                ValueDist::Gaussian => StandardNormal.sample(&mut rng),
                ValueDist::Uniform => rng.random_range(-1.0..1.0),
            };
            // Zero draws would shrink the support below the requested size.
            if v != 0.0 {
                break v;
            }
        };
    }
    Ok(SparseSignal::new(values))
}

/// Construction tag of an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Identity,
    WalshHadamard,
    DctLike,
    RandomOrthonormal,
    Composed,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisKind::Identity => write!(f, "identity"),
            BasisKind::WalshHadamard => write!(f, "walsh_hadamard"),
            BasisKind::DctLike => write!(f, "dct_like"),
            BasisKind::RandomOrthonormal => write!(f, "random_orthonormal"),
            BasisKind::Composed => write!(f, "composed"),
        }
    }
}

/// An n×n real orthonormal matrix together with its construction tag.
///
/// Composed bases keep their factor list so the product can be re-verified.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    matrix: DMatrix<f64>,
    kind: BasisKind,
    factors: Vec<OrthonormalBasis>,
}

impl OrthonormalBasis {
    /// Validates orthonormality (`|B^T B - I| < 1e-9` entrywise) and wraps.
    pub fn try_new(matrix: DMatrix<f64>, kind: BasisKind) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "orthonormal basis matrix",
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        if matrix.nrows() == 0 {
            return Err(Error::domain("basis dimension must be positive"));
        }
        let deviation = orthonormality_deviation(&matrix);
        if deviation >= ORTHONORMALITY_TOL {
            return Err(Error::NotOrthonormal {
                deviation,
                tolerance: ORTHONORMALITY_TOL,
            });
        }
        Ok(OrthonormalBasis {
            matrix,
            kind,
            factors: Vec::new(),
        })
    }

    pub(crate) fn with_factors(
        matrix: DMatrix<f64>,
        factors: Vec<OrthonormalBasis>,
    ) -> Result<Self> {
        let mut basis = Self::try_new(matrix, BasisKind::Composed)?;
        basis.factors = factors;
        Ok(basis)
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    /// Factor list of a composed basis (empty for elementary kinds),
    /// in application order.
    pub fn factors(&self) -> &[OrthonormalBasis] {
        &self.factors
    }

    pub fn is_identity(&self) -> bool {
        self.kind == BasisKind::Identity
    }

    /// Forward application `B · v`.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                context: "basis application",
                expected: self.dimension(),
                actual: v.len(),
            });
        }
        if self.is_identity() {
            return Ok(v.clone());
        }
        Ok(&self.matrix * v)
    }
}

/// Max |B^T B - I| entry.
pub fn orthonormality_deviation(matrix: &DMatrix<f64>) -> f64 {
    let gram = matrix.tr_mul(matrix);
    let n = gram.nrows();
    let mut max_dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            max_dev = max_dev.max((gram[(i, j)] - target).abs());
        }
    }
    max_dev
}

/// How a mask contributes a sensing row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// The mask's 0/1 bits are used directly.
    Raw01,
    /// Bits are shifted to ±1 (Rademacher view), removing the mean direction.
    Centered,
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskMode::Raw01 => write!(f, "raw01"),
            MaskMode::Centered => write!(f, "centered"),
        }
    }
}

impl std::str::FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw01" => Ok(MaskMode::Raw01),
            "centered" => Ok(MaskMode::Centered),
            other => Err(Error::Parse(format!("unknown mask mode `{other}`"))),
        }
    }
}

/// A length-n vector of fair-coin bits selecting which per-index measurements
/// are kept in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BernoulliMask {
    bits: Vec<u8>,
}

impl BernoulliMask {
    /// Wraps a bit vector; every entry must be 0 or 1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::domain("mask length must be positive"));
        }
        if let Some(bad) = bits.iter().find(|b| **b > 1) {
            return Err(Error::domain(format!("mask entry {bad} is not a bit")));
        }
        Ok(BernoulliMask { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// The mask entry at `i` as a float, under the given mode.
    #[inline]
    pub fn entry(&self, i: usize, mode: MaskMode) -> f64 {
        match mode {
            MaskMode::Raw01 => f64::from(self.bits[i]),
            MaskMode::Centered => 2.0 * (f64::from(self.bits[i]) - 0.5),
        }
    }

    /// The ±1 shifted view `(bit - 1/2) · 2`.
    pub fn centered_view(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.entry(i, MaskMode::Centered))
            .collect()
    }

    /// The mask as a float vector under `mode`.
    pub fn as_vector(&self, mode: MaskMode) -> DVector<f64> {
        DVector::from_iterator(self.len(), (0..self.len()).map(|i| self.entry(i, mode)))
    }
}

/// R Bernoulli masks plus the derived R×n sensing matrix.
///
/// Rows act on length-n column vectors: row m is the (mode-adjusted) mask m
/// composed with the round transform, optionally scaled. Row-subset ensembles
/// reuse the representation with single-index masks.
#[derive(Debug, Clone)]
pub struct MeasurementEnsemble {
    masks: Vec<BernoulliMask>,
    sensing_matrix: DMatrix<f64>,
    mode: MaskMode,
    scaled: bool,
    master_seed: u64,
}

impl MeasurementEnsemble {
    pub(crate) fn from_parts(
        masks: Vec<BernoulliMask>,
        sensing_matrix: DMatrix<f64>,
        mode: MaskMode,
        scaled: bool,
        master_seed: u64,
    ) -> Result<Self> {
        if sensing_matrix.nrows() != masks.len() {
            return Err(Error::DimensionMismatch {
                context: "ensemble row count",
                expected: masks.len(),
                actual: sensing_matrix.nrows(),
            });
        }
        if let Some(mask) = masks.first() {
            if sensing_matrix.ncols() != mask.len() {
                return Err(Error::DimensionMismatch {
                    context: "ensemble column count",
                    expected: mask.len(),
                    actual: sensing_matrix.ncols(),
                });
            }
        }
        Ok(MeasurementEnsemble {
            masks,
            sensing_matrix,
            mode,
            scaled,
            master_seed,
        })
    }

    pub fn rounds(&self) -> usize {
        self.masks.len()
    }

    /// Signal length the ensemble measures.
    pub fn signal_len(&self) -> usize {
        self.sensing_matrix.ncols()
    }

    pub fn masks(&self) -> &[BernoulliMask] {
        &self.masks
    }

    pub fn sensing_matrix(&self) -> &DMatrix<f64> {
        &self.sensing_matrix
    }

    pub fn mode(&self) -> MaskMode {
        self.mode
    }

    pub fn scaled(&self) -> bool {
        self.scaled
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Applies every sensing row to the signal, exploiting its support.
    ///
    /// Row m reproduces `measure_round` for mask m exactly: both walk the
    /// support in increasing index order.
    pub fn measure(&self, signal: &SparseSignal) -> Result<DVector<f64>> {
        if signal.len() != self.signal_len() {
            return Err(Error::DimensionMismatch {
                context: "ensemble measurement",
                expected: self.signal_len(),
                actual: signal.len(),
            });
        }
        let mut outcomes = DVector::zeros(self.rounds());
        for m in 0..self.rounds() {
            let mut acc = 0.0;
            for &i in signal.support() {
                acc += self.sensing_matrix[(m, i)] * signal.values()[i];
            }
            outcomes[m] = acc;
        }
        Ok(outcomes)
    }
}

/// Outcome of one recovery run.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// The basis-pursuit estimate of the sparse representation.
    pub recovered_signal: DVector<f64>,
    /// The output string `z` after the inverse basis transform.
    pub output_string: DVector<f64>,
    /// `|A x - y|_2 / max(|y|_2, 1)`.
    pub residual: f64,
    /// Solver iteration count.
    pub iterations: usize,
    /// Whether the recovered signal matches the reference within
    /// `1e-6 · max(1, |S|_inf)` per coordinate.
    pub exact: bool,
    /// Objective value of the output string.
    pub objective_value: f64,
}

/// One (rounds, empirical, theoretical) sample of a success curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub rounds: usize,
    pub empirical: f64,
    pub ci_halfwidth: f64,
    pub theoretical: f64,
}

/// An empirical success-probability curve for one configuration.
#[derive(Debug, Clone)]
pub struct SuccessCurve {
    config: String,
    points: Vec<CurvePoint>,
}

impl SuccessCurve {
    /// `config` is the rendered configuration record embedded in exports.
    /// Points must be strictly increasing in rounds with probabilities
    /// inside [0, 1].
    pub fn new(config: String, points: Vec<CurvePoint>) -> Result<Self> {
        for pair in points.windows(2) {
            if pair[1].rounds <= pair[0].rounds {
                return Err(Error::domain(
                    "curve points must be strictly increasing in rounds",
                ));
            }
        }
        for p in &points {
            if !(0.0..=1.0).contains(&p.empirical) || !(0.0..=1.0).contains(&p.theoretical) {
                return Err(Error::domain("curve probabilities must lie in [0, 1]"));
            }
        }
        Ok(SuccessCurve { config, points })
    }

    pub fn config(&self) -> &str {
        &self.config
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }
}
