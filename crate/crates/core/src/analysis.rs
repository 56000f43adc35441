//! Restricted-isometry brute force, concentration and sub-Gaussian tail
//! estimation, and the round-count / success-probability calculators.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MeasurementEnsemble, SparseSignal};

/// Subset-count guard for the exact restricted-isometry computation.
pub const RIP_SUBSET_LIMIT: u128 = 1_000_000;

/// Logarithm base used by every calculator. Base 10 reproduces the
/// figure-caption round counts; the natural log matches the proof-side
/// derivations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    Ten,
    Natural,
}

impl LogBase {
    #[inline]
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Ten => x.log10(),
            LogBase::Natural => x.ln(),
        }
    }
}

impl std::fmt::Display for LogBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LogBase::Ten => write!(f, "10"),
            LogBase::Natural => write!(f, "e"),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "10" => Ok(LogBase::Ten),
            "e" | "natural" => Ok(LogBase::Natural),
            other => Err(Error::Parse(format!(
                "unknown log base `{other}` (expected 10 or e)"
            ))),
        }
    }
}

/// Ceiling with a snap to the nearest integer within 1e-9 relative, so that
/// formula values landing on exact integers are not bumped by float noise.
fn ceil_int(x: f64) -> Result<u64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!("round count {x} is not representable")));
    }
    let nearest = x.round();
    let snapped = if (x - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    Ok(snapped as u64)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Exact K-th restricted isometry constant: the maximum over all size-K
/// column subsets Υ of the spectral norm of `A_Υ^T A_Υ - I`, each evaluated
/// by symmetric eigendecomposition (eigenvalues resolved well below the
/// documented 1e-12 relative tolerance at these sizes).
///
/// Refuses with the computed subset count when C(n, K) exceeds
/// [`RIP_SUBSET_LIMIT`].
pub fn rip_constant(a: &DMatrix<f64>, k: usize) -> Result<f64> {
    let n = a.ncols();
    if k > n {
        return Err(Error::domain(format!(
            "subset size {k} exceeds column count {n}"
        )));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let subsets = binomial(n, k);
    if subsets > RIP_SUBSET_LIMIT {
        return Err(Error::CombinatorialGuard {
            subsets,
            k,
            limit: RIP_SUBSET_LIMIT,
        });
    }

    // Enumerate supports lexicographically into one flat buffer, then reduce
    // in parallel; the max is order-independent, so the result is
    // deterministic.
    let count = subsets as usize;
    let mut supports = Vec::with_capacity(count * k);
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        supports.extend_from_slice(&current);
        // Advance to the lexicographic successor.
        let mut i = k;
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            if current[i] != i + n - k {
                current[i] += 1;
                for j in i + 1..k {
                    current[j] = current[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                current.clear();
                break;
            }
        }
        if current.is_empty() {
            break;
        }
        if supports.len() == count * k {
            break;
        }
    }
    debug_assert_eq!(supports.len(), count * k);

    let delta = supports
        .par_chunks(k)
        .map(|support| subset_gram_deviation(a, support))
        .reduce(|| 0.0, f64::max);
    Ok(delta)
}

/// `‖A_Υ^T A_Υ - I‖_2` for one support.
fn subset_gram_deviation(a: &DMatrix<f64>, support: &[usize]) -> f64 {
    let k = support.len();
    let mut h = DMatrix::zeros(k, k);
    for (p, &jp) in support.iter().enumerate() {
        for (q, &jq) in support.iter().enumerate().skip(p) {
            let g = a.column(jp).dot(&a.column(jq));
            let v = if p == q { g - 1.0 } else { g };
            h[(p, q)] = v;
            h[(q, p)] = v;
        }
    }
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, l| acc.max(l.abs()))
}

/// Strict Eq.-style recovery condition on the 2K-th isometry constant.
pub fn rip_recovery_condition(delta_2k: f64) -> Result<bool> {
    if !delta_2k.is_finite() || delta_2k < 0.0 {
        return Err(Error::domain(format!(
            "isometry constant must be a nonnegative real, got {delta_2k}"
        )));
    }
    Ok(delta_2k < 1.0 / 3.0)
}

/// Empirical concentration of `|‖A ŝ‖² - 1|` over seeded ensembles.
#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub kappa: f64,
    pub trials: usize,
    pub rounds: usize,
    /// Fraction of trials with deviation at least `kappa`.
    pub tail_probability: f64,
    /// `-ln(p/2) / (kappa² R)` when the tail is positive.
    pub fitted_constant: Option<f64>,
}

/// Estimates the tail probability `Pr(|‖A ŝ‖² - 1| ≥ κ)` over `trials`
/// ensembles drawn from the seeded factory. The signal is unit-normalized
/// internally; the factory decides the ensemble scaling.
pub fn concentration_check<F>(
    ensemble_factory: F,
    signal: &SparseSignal,
    kappa: f64,
    trials: usize,
) -> Result<ConcentrationReport>
where
    F: Fn(u64) -> Result<MeasurementEnsemble> + Sync,
{
    if !(0.0..1.0).contains(&kappa) || kappa <= 0.0 {
        return Err(Error::domain(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    if trials < 100 {
        return Err(Error::domain(format!(
            "concentration estimates need at least 100 trials, got {trials}"
        )));
    }
    let unit = signal.normalized()?;
    let rounds = ensemble_factory(0)?.rounds();
    if rounds == 0 {
        return Err(Error::domain("concentration needs at least one round"));
    }

    let exceeded: usize = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let ensemble = ensemble_factory(t)?;
            let outcome = ensemble.measure(&unit)?;
            let deviation = (outcome.norm_squared() - 1.0).abs();
            Ok(usize::from(deviation >= kappa))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;

    let tail = exceeded as f64 / trials as f64;
    let fitted = if tail > 0.0 {
        Some(-(tail / 2.0).ln() / (kappa * kappa * rounds as f64))
    } else {
        None
    };
    Ok(ConcentrationReport {
        kappa,
        trials,
        rounds,
        tail_probability: tail,
        fitted_constant: fitted,
    })
}

/// Empirical sub-Gaussian tail fit at C1 = 2.
#[derive(Debug, Clone, Serialize)]
pub struct SubGaussianFit {
    /// `(κ, empirical tail)` per grid point.
    pub tails: Vec<(f64, f64)>,
    /// Fixed first sub-Gaussian parameter.
    pub c1: f64,
    /// Largest decay rate consistent with every grid point:
    /// `min_κ ln(2 / p̂(κ)) / κ²`; infinite when every tail is zero.
    pub c2_hat: f64,
    /// Whether some pair (C1 = 2, C2 > 0) covers the grid.
    pub satisfied: bool,
}

/// Estimates `Pr(|X| ≥ κ)` on the grid from `trials` samples of the seeded
/// scalar source and fits the sub-Gaussian envelope `2·exp(-C2 κ²)`.
pub fn subgaussian_tail_fit<S>(
    sample_source: S,
    kappa_grid: &[f64],
    trials: usize,
) -> Result<SubGaussianFit>
where
    S: Fn(u64) -> f64 + Sync,
{
    if kappa_grid.is_empty() {
        return Err(Error::domain("kappa grid must be nonempty"));
    }
    if kappa_grid[0] <= 0.0 {
        return Err(Error::domain("kappa grid must be positive"));
    }
    if kappa_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("kappa grid must be strictly increasing"));
    }
    if trials == 0 {
        return Err(Error::domain("need at least one sample"));
    }

    let abs_samples: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| sample_source(t).abs())
        .collect();

    let mut tails = Vec::with_capacity(kappa_grid.len());
    let mut c2_hat = f64::INFINITY;
    for &kappa in kappa_grid {
        let count = abs_samples.iter().filter(|v| **v >= kappa).count();
        let tail = count as f64 / trials as f64;
        if tail > 0.0 {
            c2_hat = c2_hat.min((2.0 / tail).ln() / (kappa * kappa));
        }
        tails.push((kappa, tail));
    }
    Ok(SubGaussianFit {
        tails,
        c1: 2.0,
        c2_hat,
        satisfied: c2_hat > 0.0,
    })
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::domain(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::domain(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn check_sparsity(n: usize, k: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("signal length must be positive"));
    }
    if k == 0 || k > n {
        return Err(Error::domain(format!(
            "sparsity must lie in 1..={n}, got {k}"
        )));
    }
    Ok(())
}

/// Raw isometry-regime round count:
/// `(2/3c) · (1/χ²) · (K(9 + 2 log(n/K)) + 2 log(2/ε))`.
pub fn rounds_theorem1_raw(
    n: usize,
    k: usize,
    chi: f64,
    eps: f64,
    c: f64,
    base: LogBase,
) -> Result<f64> {
    check_sparsity(n, k)?;
    check_unit_interval("chi", chi)?;
    check_unit_interval("eps", eps)?;
    check_positive("c", c)?;
    let (nf, kf) = (n as f64, k as f64);
    Ok((2.0 / (3.0 * c))
        * (1.0 / (chi * chi))
        * (kf * (9.0 + 2.0 * base.log(nf / kf)) + 2.0 * base.log(2.0 / eps)))
}

/// Ceiling of [`rounds_theorem1_raw`].
pub fn rounds_theorem1(
    n: usize,
    k: usize,
    chi: f64,
    eps: f64,
    c: f64,
    base: LogBase,
) -> Result<u64> {
    ceil_int(rounds_theorem1_raw(n, k, chi, eps, c, base)?)
}

/// Raw bounded-orthonormal round count `α Z² K log⁴(n)`.
pub fn rounds_theorem2_raw(n: usize, k: usize, z: f64, alpha: f64, base: LogBase) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("signal length must be positive"));
    }
    if k > n {
        return Err(Error::domain(format!(
            "sparsity {k} exceeds signal length {n}"
        )));
    }
    if z < 1.0 {
        return Err(Error::domain(format!(
            "boundedness constant must be at least 1, got {z}"
        )));
    }
    check_positive("alpha", alpha)?;
    let log_n = base.log(n as f64);
    Ok(alpha * z * z * k as f64 * log_n.powi(4))
}

/// Ceiling of [`rounds_theorem2_raw`]; zero sparsity needs zero rounds.
pub fn rounds_theorem2(n: usize, k: usize, z: f64, alpha: f64, base: LogBase) -> Result<u64> {
    ceil_int(rounds_theorem2_raw(n, k, z, alpha, base)?)
}

/// Parameter form of the computational-basis round count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundsForm {
    /// `c1 K log(10n/K) + c2 log(2/ξ)`.
    Xi { xi: f64, c1: f64, c2: f64 },
    /// `γ K log(10n/K)`.
    Gamma { gamma: f64 },
}

/// Raw computational-basis round count in the selected form.
pub fn rounds_theorem3_raw(n: usize, k: usize, form: RoundsForm, base: LogBase) -> Result<f64> {
    check_sparsity(n, k)?;
    let (nf, kf) = (n as f64, k as f64);
    let lead = kf * base.log(10.0 * nf / kf);
    match form {
        RoundsForm::Xi { xi, c1, c2 } => {
            check_unit_interval("xi", xi)?;
            check_positive("c1", c1)?;
            check_positive("c2", c2)?;
            Ok(c1 * lead + c2 * base.log(2.0 / xi))
        }
        RoundsForm::Gamma { gamma } => {
            check_positive("gamma", gamma)?;
            Ok(gamma * lead)
        }
    }
}

/// Ceiling of [`rounds_theorem3_raw`].
pub fn rounds_theorem3(n: usize, k: usize, form: RoundsForm, base: LogBase) -> Result<u64> {
    ceil_int(rounds_theorem3_raw(n, k, form, base)?)
}

/// Closed-form success probability `1 - n^(-log³ n)` of the
/// bounded-orthonormal regime, clamped to [0, 1].
pub fn success_prob_theorem2(n: usize, base: LogBase) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!(
            "theorem-2 probability needs n >= 2, got {n}"
        )));
    }
    let log_n = base.log(n as f64);
    let p = 1.0 - (n as f64).powf(-log_n.powi(3));
    Ok(p.clamp(0.0, 1.0))
}

/// Closed-form success probability `1 - 2 exp(-R)` of the
/// computational-basis regime, clamped to [0, 1].
pub fn success_prob_theorem3(rounds: usize) -> Result<f64> {
    if rounds == 0 {
        return Err(Error::domain("theorem-3 probability needs at least one round"));
    }
    Ok((1.0 - 2.0 * (-(rounds as f64)).exp()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::identity_basis;
    use crate::measurement::assemble_ensemble;
    use crate::model::{make_sparse_signal, MaskMode, ValueDist};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn rip_of_identity_is_zero() {
        let a = DMatrix::<f64>::identity(6, 6);
        for k in 1..=4 {
            assert_eq!(rip_constant(&a, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn rip_single_scaled_column() {
        let mut a = DMatrix::<f64>::identity(4, 4);
        a[(1, 1)] = 2.0;
        assert_abs_diff_eq!(rip_constant(&a, 1).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn rip_guard_refuses_blowup() {
        let a = DMatrix::<f64>::zeros(4, 64);
        match rip_constant(&a, 20) {
            Err(Error::CombinatorialGuard { subsets, .. }) => {
                assert_eq!(subsets, binomial(64, 20));
            }
            other => panic!("expected guard refusal, got {other:?}"),
        }
    }

    #[test]
    fn rip_is_monotone_in_k() {
        let id = identity_basis(8).unwrap();
        for seed in 0..5u64 {
            let e = assemble_ensemble(6, 8, &id, MaskMode::Centered, true, seed).unwrap();
            let a = e.sensing_matrix();
            let mut prev = 0.0;
            for k in 1..=4 {
                let d = rip_constant(a, k).unwrap();
                assert!(d >= prev - 1e-12, "k={k}: {d} < {prev}");
                prev = d;
            }
        }
    }

    #[test]
    fn rip_scaling_of_isometry() {
        // For A with delta_K = 0, scaling by c gives delta_K = |c² - 1|.
        let a = DMatrix::<f64>::identity(5, 5);
        for c in [0.5, 0.9, 1.5, 2.0] {
            let scaled = &a * c;
            let d = rip_constant(&scaled, 2).unwrap();
            assert_abs_diff_eq!(d, (c * c - 1.0_f64).abs(), epsilon = 1e-12);
        }
    }

    #[test]
    fn concentration_zero_deviation_for_forced_isometry() {
        // A full orthonormal ensemble measures with an exact isometry.
        let signal = make_sparse_signal(16, 3, ValueDist::Gaussian, 4).unwrap();
        let report = concentration_check(
            |_| crate::measurement::identity_ensemble(16),
            &signal,
            0.05,
            200,
        )
        .unwrap();
        assert_eq!(report.tail_probability, 0.0);
        assert!(report.fitted_constant.is_none());
    }

    #[test]
    fn concentration_vanishes_at_large_kappa_and_rounds() {
        let id = identity_basis(64).unwrap();
        let signal = make_sparse_signal(64, 4, ValueDist::Gaussian, 9).unwrap();
        let report = concentration_check(
            |t| assemble_ensemble(200, 64, &id, MaskMode::Centered, true, t),
            &signal,
            0.99,
            1000,
        )
        .unwrap();
        assert_eq!(report.tail_probability, 0.0);
        assert_eq!(report.rounds, 200);
    }

    #[test]
    fn concentration_rejects_thin_sampling() {
        let signal = make_sparse_signal(8, 2, ValueDist::Gaussian, 1).unwrap();
        assert!(concentration_check(
            |_| crate::measurement::identity_ensemble(8),
            &signal,
            0.5,
            99
        )
        .is_err());
    }

    #[test]
    fn subgaussian_rademacher_has_zero_tail_past_one() {
        let fit = subgaussian_tail_fit(
            |t| if t % 2 == 0 { 1.0 } else { -1.0 },
            &[0.5, 1.0, 1.5],
            10_000,
        )
        .unwrap();
        assert!(fit.satisfied);
        assert_eq!(fit.tails[0].1, 1.0);
        assert_eq!(fit.tails[1].1, 1.0);
        assert_eq!(fit.tails[2].1, 0.0);
        // Binding point is κ = 1 with tail 1: C2 = ln 2.
        assert_abs_diff_eq!(fit.c2_hat, 2.0_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn subgaussian_grid_must_increase() {
        assert!(subgaussian_tail_fit(|_| 0.0, &[1.0, 1.0], 10).is_err());
        assert!(subgaussian_tail_fit(|_| 0.0, &[], 10).is_err());
        assert!(subgaussian_tail_fit(|_| 0.0, &[-1.0, 1.0], 10).is_err());
    }

    #[test]
    fn theorem1_reference_value() {
        let r = rounds_theorem1(1000, 10, 1.0 / 3.0, 0.01, 1.0, LogBase::Natural).unwrap();
        assert_eq!(r, 1157);
    }

    #[test]
    fn theorem1_is_finite_at_extremes() {
        let r = rounds_theorem1_raw(16, 16, 0.999, 0.999, 1.0, LogBase::Natural).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn theorem1_epsilon_halving_adds_log_two() {
        let base = LogBase::Natural;
        let (chi, c) = (0.5, 1.0);
        let a = rounds_theorem1_raw(100, 5, chi, 0.02, c, base).unwrap();
        let b = rounds_theorem1_raw(100, 5, chi, 0.01, c, base).unwrap();
        let expected = (2.0 / (3.0 * c)) * (1.0 / (chi * chi)) * 2.0 * 2.0_f64.ln();
        assert_relative_eq!(b - a, expected, epsilon = 1e-9);
    }

    #[test]
    fn theorem2_figure_constants() {
        let z = 1000.0_f64.sqrt();
        let cases = [
            (2, 2.47e-4, 41),
            (5, 1.36e-4, 56),
            (10, 8.46e-5, 69),
            (20, 6.17e-5, 100),
        ];
        for (k, alpha, expected) in cases {
            let r = rounds_theorem2(1000, k, z, alpha, LogBase::Ten).unwrap();
            assert_eq!(r, expected, "K={k}");
        }
    }

    #[test]
    fn theorem2_zero_sparsity_needs_no_rounds() {
        assert_eq!(rounds_theorem2(1000, 0, 31.6, 1e-4, LogBase::Ten).unwrap(), 0);
    }

    #[test]
    fn theorem3_gamma_form_both_bases() {
        let form = RoundsForm::Gamma { gamma: 1.0 };
        assert_eq!(rounds_theorem3(1000, 10, form, LogBase::Ten).unwrap(), 30);
        assert_eq!(rounds_theorem3(1000, 10, form, LogBase::Natural).unwrap(), 70);
    }

    #[test]
    fn theorem3_rejects_bad_xi() {
        let form = RoundsForm::Xi {
            xi: 2.0,
            c1: 1.0,
            c2: 1.0,
        };
        assert!(rounds_theorem3(1000, 10, form, LogBase::Ten).is_err());
    }

    #[test]
    fn success_probabilities_reference_values() {
        assert_relative_eq!(
            success_prob_theorem3(30).unwrap(),
            1.0 - 2.0 * (-30.0_f64).exp(),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            success_prob_theorem3(1).unwrap(),
            1.0 - 2.0 / std::f64::consts::E,
            epsilon = 1e-15
        );
        let p = success_prob_theorem2(1000, LogBase::Ten).unwrap();
        assert_relative_eq!(p, 1.0 - 1e-81, epsilon = 1e-15);
    }

    #[test]
    fn recovery_condition_is_strict() {
        assert!(rip_recovery_condition(0.0).unwrap());
        assert!(!rip_recovery_condition(1.0 / 3.0).unwrap());
        assert!(rip_recovery_condition(0.333).unwrap());
        assert!(rip_recovery_condition(-0.1).is_err());
    }

    #[test]
    fn calculators_are_pure() {
        let a = rounds_theorem1(512, 8, 0.25, 0.05, 0.7, LogBase::Ten).unwrap();
        let b = rounds_theorem1(512, 8, 0.25, 0.05, 0.7, LogBase::Ten).unwrap();
        assert_eq!(a, b);
    }
}
