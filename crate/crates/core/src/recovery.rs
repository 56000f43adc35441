//! The post-processing unit: basis pursuit, inverse basis transform,
//! objective maximization, and the end-to-end procedure runner.

mod simplex;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::basis::inverse_transform;
use crate::error::{Error, Result};
use crate::measurement::{assemble_ensemble, identity_ensemble};
use crate::model::{
    make_sparse_signal, MaskMode, MeasurementEnsemble, OrthonormalBasis, RecoveryResult,
    SparseSignal, ValueDist,
};

/// Default basis-pursuit residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Per-coordinate relative tolerance of the exact-recovery flag.
pub const EXACTNESS_TOL: f64 = 1e-6;

/// Default pivot budget for a length-n problem.
pub fn default_max_iter(n: usize) -> usize {
    10 * n
}

/// A basis-pursuit solve outcome.
#[derive(Debug, Clone)]
pub struct BasisPursuitSolution {
    /// The L1 minimizer subject to the measurement constraints.
    pub solution: DVector<f64>,
    /// `|A x - y|_2 / max(|y|_2, 1)` against the original inputs.
    pub residual: f64,
    /// Simplex pivots performed.
    pub iterations: usize,
}

fn relative_residual(a: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    ((a * x) - y).norm() / y.norm().max(1.0)
}

fn solve_impl(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    tol: f64,
    max_iter: usize,
    want_trace: bool,
) -> Result<(BasisPursuitSolution, Option<Vec<f64>>)> {
    if a.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "basis pursuit measurements",
            expected: a.nrows(),
            actual: y.len(),
        });
    }
    if a.ncols() == 0 {
        return Err(Error::domain("basis pursuit needs at least one column"));
    }
    if tol <= 0.0 {
        return Err(Error::domain("tolerance must be positive"));
    }
    if max_iter == 0 {
        return Err(Error::domain("iteration budget must be positive"));
    }
    let n = a.ncols();

    if y.iter().all(|v| *v == 0.0) {
        // Zero is feasible and L1-minimal.
        return Ok((
            BasisPursuitSolution {
                solution: DVector::zeros(n),
                residual: 0.0,
                iterations: 0,
            },
            want_trace.then(|| vec![0.0]),
        ));
    }

    // Drop all-zero rows together with their outcomes (they arise from
    // all-zero masks).
    let kept: Vec<usize> = (0..a.nrows())
        .filter(|&i| (0..n).any(|j| a[(i, j)] != 0.0))
        .collect();
    let r = kept.len();
    let mut cols = vec![0.0; r * n];
    for j in 0..n {
        for (pos, &i) in kept.iter().enumerate() {
            cols[j * r + pos] = a[(i, j)];
        }
    }
    let rhs: Vec<f64> = kept.iter().map(|&i| y[i]).collect();

    let out = simplex::solve_l1(cols, rhs, n, max_iter, want_trace)?;
    let solution = DVector::from_vec(out.x);
    let residual = relative_residual(a, y, &solution);
    if !out.converged || residual > tol {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            residual,
            best: solution.as_slice().to_vec(),
        });
    }
    Ok((
        BasisPursuitSolution {
            solution,
            residual,
            iterations: out.iterations,
        },
        out.trace,
    ))
}

/// Equality-constrained L1 minimization: argmin |x|_1 s.t. Ax = y.
///
/// Non-convergence within `max_iter` pivots is reported as
/// [`Error::NonConvergence`] carrying the best iterate.
pub fn basis_pursuit(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<BasisPursuitSolution> {
    solve_impl(a, y, tol, max_iter, false).map(|(s, _)| s)
}

/// Like [`basis_pursuit`], additionally returning the L1 objective after
/// each phase-2 pivot (first entry: the objective at phase-2 start).
pub fn basis_pursuit_traced(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(BasisPursuitSolution, Vec<f64>)> {
    solve_impl(a, y, tol, max_iter, true).map(|(s, t)| (s, t.unwrap_or_default()))
}

/// The output string z = B^T · (U(θ') · S̃).
pub fn recover_output(
    basis: &OrthonormalBasis,
    transform: &OrthonormalBasis,
    s_tilde: &DVector<f64>,
) -> Result<DVector<f64>> {
    if basis.dimension() != transform.dimension() {
        return Err(Error::DimensionMismatch {
            context: "recover_output bases",
            expected: basis.dimension(),
            actual: transform.dimension(),
        });
    }
    let lambda = transform.apply(s_tilde)?;
    inverse_transform(basis, &lambda)
}

/// Returns `(index, candidate, value)` of the candidate maximizing the
/// objective; ties keep the lowest index.
pub fn objective_maximize<'a, C>(
    candidates: &'a [DVector<f64>],
    objective: C,
) -> Result<(usize, &'a DVector<f64>, f64)>
where
    C: Fn(&DVector<f64>) -> f64,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, z) in candidates.iter().enumerate() {
        let v = objective(z);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((i, v));
        }
    }
    best.map(|(i, v)| (i, &candidates[i], v))
        .ok_or_else(|| Error::domain("objective_maximize needs at least one candidate"))
}

/// Which end-to-end procedure to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureVariant {
    /// Arbitrary transform: masks composed with U(θ'), output through B^{-1}.
    Procedure1,
    /// Computational-basis states: masks only, output is the recovered
    /// representation itself.
    Procedure2,
}

impl std::fmt::Display for ProcedureVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProcedureVariant::Procedure1 => write!(f, "procedure1"),
            ProcedureVariant::Procedure2 => write!(f, "procedure2"),
        }
    }
}

/// Tag for constructing a named basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSpec {
    Identity,
    WalshHadamard,
    DctLike,
    RandomOrthonormal { seed: u64 },
}

impl BasisSpec {
    pub fn build(&self, n: usize) -> Result<OrthonormalBasis> {
        match self {
            BasisSpec::Identity => crate::basis::identity_basis(n),
            BasisSpec::WalshHadamard => crate::basis::walsh_hadamard_basis(n),
            BasisSpec::DctLike => crate::basis::dct_basis(n),
            BasisSpec::RandomOrthonormal { seed } => {
                crate::basis::random_orthonormal_basis(n, *seed)
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, BasisSpec::Identity)
    }
}

impl std::fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisSpec::Identity => write!(f, "identity"),
            BasisSpec::WalshHadamard => write!(f, "walsh"),
            BasisSpec::DctLike => write!(f, "dct"),
            BasisSpec::RandomOrthonormal { seed } => write!(f, "random:{seed}"),
        }
    }
}

/// Where the measurement ensemble comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleSource {
    /// Seeded Bernoulli masks.
    Masks,
    /// The full-rank identity ensemble (test hook; requires R = n).
    ForcedIdentity,
}

/// Full configuration of a procedure run.
#[derive(Debug, Clone, Serialize)]
pub struct ProcedureConfig {
    pub variant: ProcedureVariant,
    pub n: usize,
    pub sparsity: usize,
    pub rounds: usize,
    /// The computational basis U_B.
    pub basis: BasisSpec,
    /// The round transform U(θ'). Must be the identity for procedure 2.
    pub transform: BasisSpec,
    pub mode: MaskMode,
    pub value_dist: ValueDist,
    pub ensemble: EnsembleSource,
}

/// Seeds of one procedure run: the signal instance and the mask ensemble.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProcedureSeeds {
    pub signal: u64,
    pub ensemble: u64,
}

/// A validated configuration with its bases built once, reusable across
/// seeded runs.
pub struct ProcedureContext {
    config: ProcedureConfig,
    basis: OrthonormalBasis,
    transform: OrthonormalBasis,
}

impl ProcedureContext {
    pub fn prepare(config: ProcedureConfig) -> Result<Self> {
        if config.n == 0 {
            return Err(Error::domain("signal length must be positive"));
        }
        if config.sparsity > config.n {
            return Err(Error::domain(format!(
                "sparsity {} exceeds signal length {}",
                config.sparsity, config.n
            )));
        }
        if config.variant == ProcedureVariant::Procedure2 && !config.transform.is_identity() {
            return Err(Error::domain(
                "procedure 2 measures computational-basis states: U(θ') must be the identity",
            ));
        }
        if config.ensemble == EnsembleSource::ForcedIdentity && config.rounds != config.n {
            return Err(Error::domain(format!(
                "the forced identity ensemble needs rounds = n, got {} and {}",
                config.rounds, config.n
            )));
        }
        let basis = config.basis.build(config.n)?;
        let transform = config.transform.build(config.n)?;
        Ok(ProcedureContext {
            config,
            basis,
            transform,
        })
    }

    pub fn config(&self) -> &ProcedureConfig {
        &self.config
    }

    /// Builds the ensemble the run would measure with.
    pub fn build_ensemble(&self, ensemble_seed: u64) -> Result<MeasurementEnsemble> {
        match self.config.ensemble {
            EnsembleSource::Masks => assemble_ensemble(
                self.config.rounds,
                self.config.n,
                &self.transform,
                self.config.mode,
                false,
                ensemble_seed,
            ),
            EnsembleSource::ForcedIdentity => identity_ensemble(self.config.n),
        }
    }

    /// Generates the signal instance of a seeded run.
    pub fn build_signal(&self, signal_seed: u64) -> Result<SparseSignal> {
        make_sparse_signal(
            self.config.n,
            self.config.sparsity,
            self.config.value_dist,
            signal_seed,
        )
    }

    /// Executes one seeded run end to end: generate the signal, measure,
    /// recover by basis pursuit, transform the output and evaluate the
    /// objective.
    pub fn run<C>(&self, seeds: ProcedureSeeds, objective: C) -> Result<RecoveryResult>
    where
        C: Fn(&DVector<f64>) -> f64,
    {
        let signal = self.build_signal(seeds.signal)?;
        let ensemble = self.build_ensemble(seeds.ensemble)?;
        let y = ensemble.measure(&signal)?;
        let bp = basis_pursuit(
            ensemble.sensing_matrix(),
            &y,
            DEFAULT_TOL,
            default_max_iter(self.config.n),
        )?;
        self.finish(&signal, bp, objective)
    }

    /// Turns a solve against this context's configuration into a result
    /// record (shared by `run` and re-solves of exported ensembles).
    pub fn finish<C>(
        &self,
        signal: &SparseSignal,
        bp: BasisPursuitSolution,
        objective: C,
    ) -> Result<RecoveryResult>
    where
        C: Fn(&DVector<f64>) -> f64,
    {
        let s_tilde = bp.solution;
        let z = match self.config.variant {
            ProcedureVariant::Procedure1 => recover_output(&self.basis, &self.transform, &s_tilde)?,
            // For computational-basis states the recovered representation is
            // already the output string.
            ProcedureVariant::Procedure2 => s_tilde.clone(),
        };
        let exact = exact_recovery(&s_tilde, signal.values());
        let objective_value = objective(&z);
        Ok(RecoveryResult {
            recovered_signal: s_tilde,
            output_string: z,
            residual: bp.residual,
            iterations: bp.iterations,
            exact,
            objective_value,
        })
    }
}

/// The binary exact-recovery criterion:
/// `|S̃ - S|_inf <= 1e-6 · max(1, |S|_inf)`.
pub fn exact_recovery(recovered: &DVector<f64>, reference: &DVector<f64>) -> bool {
    if recovered.len() != reference.len() {
        return false;
    }
    let scale = reference.amax().max(1.0);
    (recovered - reference).amax() <= EXACTNESS_TOL * scale
}

/// One-shot convenience wrapper around [`ProcedureContext`].
pub fn run_procedure<C>(
    config: ProcedureConfig,
    seeds: ProcedureSeeds,
    objective: C,
) -> Result<RecoveryResult>
where
    C: Fn(&DVector<f64>) -> f64,
{
    ProcedureContext::prepare(config)?.run(seeds, objective)
}

/// Sum-of-entries objective, the default estimate shipped with the CLI.
pub fn sum_objective(z: &DVector<f64>) -> f64 {
    z.iter().sum()
}
