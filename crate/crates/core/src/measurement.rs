//! Mask generation, measurement rounds and ensemble assembly.
//!
//! A round observes one inner product `⟨row, S⟩` where the row is the
//! mode-adjusted mask composed with the round transform U(θ'). Stacking R
//! rows gives the sensing matrix; the row-subset variant instead samples
//! rows of a full orthonormal matrix.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{BernoulliMask, MaskMode, MeasurementEnsemble, OrthonormalBasis, SparseSignal};
use crate::seed::{mix_seed, SplitMix64};

/// Generates a length-n mask of independent fair-coin bits.
///
/// Bit i is bit `i % 64` of the `(i / 64 + 1)`-th word of the SplitMix64
/// stream seeded with `seed`; see [`crate::seed`] for the stream definition.
pub fn gen_mask(n: usize, seed: u64) -> Result<BernoulliMask> {
    if n == 0 {
        return Err(Error::domain("mask length must be positive"));
    }
    let mut stream = SplitMix64::new(seed);
    let mut bits = Vec::with_capacity(n);
    let mut word = 0u64;
    for i in 0..n {
        if i % 64 == 0 {
            word = stream.next_u64();
        }
        bits.push(((word >> (i % 64)) & 1) as u8);
    }
    BernoulliMask::new(bits)
}

/// Builds the sensing row for `mask` under `mode`, composed with `transform`:
/// `row_j = Σ_i mask_i · U_{i,j}`.
fn sensing_row(mask: &BernoulliMask, transform: &OrthonormalBasis, mode: MaskMode) -> DVector<f64> {
    let n = mask.len();
    if transform.is_identity() {
        return mask.as_vector(mode);
    }
    let u = transform.matrix();
    let mut row = DVector::zeros(n);
    for i in 0..n {
        let m = mask.entry(i, mode);
        if m != 0.0 {
            for j in 0..n {
                row[j] += m * u[(i, j)];
            }
        }
    }
    row
}

/// One round's post-processed outcome `⟨(mode-adjusted mask) · U(θ'), S⟩`.
///
/// With the identity transform and raw 0/1 mode this is the sum of the
/// signal over the mask-selected indices.
pub fn measure_round(
    mask: &BernoulliMask,
    transform: &OrthonormalBasis,
    signal: &SparseSignal,
    mode: MaskMode,
) -> Result<f64> {
    if mask.len() != transform.dimension() {
        return Err(Error::DimensionMismatch {
            context: "measure_round mask/transform",
            expected: transform.dimension(),
            actual: mask.len(),
        });
    }
    if signal.len() != transform.dimension() {
        return Err(Error::DimensionMismatch {
            context: "measure_round signal",
            expected: transform.dimension(),
            actual: signal.len(),
        });
    }
    let row = sensing_row(mask, transform, mode);
    let mut acc = 0.0;
    for &i in signal.support() {
        acc += row[i] * signal.values()[i];
    }
    Ok(acc)
}

/// The per-index outcomes `y_i = mask_i · (U(θ')·S)_i` before aggregation.
///
/// Debug view of the keep-or-discard rule; recovery only consumes the
/// aggregated inner products.
pub fn measure_round_elementwise(
    mask: &BernoulliMask,
    transform: &OrthonormalBasis,
    signal: &SparseSignal,
    mode: MaskMode,
) -> Result<DVector<f64>> {
    if mask.len() != transform.dimension() || signal.len() != transform.dimension() {
        return Err(Error::DimensionMismatch {
            context: "measure_round_elementwise",
            expected: transform.dimension(),
            actual: mask.len().max(signal.len()),
        });
    }
    let transformed = transform.apply(signal.values())?;
    Ok(DVector::from_fn(mask.len(), |i, _| {
        mask.entry(i, mode) * transformed[i]
    }))
}

/// Assembles R masked rounds into an ensemble.
///
/// Mask m is generated with seed `mix_seed(master_seed, m)`; the sensing
/// matrix stacks the per-round rows, multiplied by 1/√R when `scaled`.
/// R = 0 yields an empty ensemble (no information).
pub fn assemble_ensemble(
    rounds: usize,
    n: usize,
    transform: &OrthonormalBasis,
    mode: MaskMode,
    scaled: bool,
    master_seed: u64,
) -> Result<MeasurementEnsemble> {
    if n == 0 {
        return Err(Error::domain("signal length must be positive"));
    }
    if transform.dimension() != n {
        return Err(Error::DimensionMismatch {
            context: "ensemble transform",
            expected: n,
            actual: transform.dimension(),
        });
    }
    let masks: Vec<BernoulliMask> = (0..rounds)
        .map(|m| gen_mask(n, mix_seed(master_seed, m as u64)))
        .collect::<Result<_>>()?;
    ensemble_from_masks(masks, transform, mode, scaled, master_seed)
}

/// Builds an ensemble from explicit masks (test hook for forced masks).
pub fn ensemble_from_masks(
    masks: Vec<BernoulliMask>,
    transform: &OrthonormalBasis,
    mode: MaskMode,
    scaled: bool,
    master_seed: u64,
) -> Result<MeasurementEnsemble> {
    let n = transform.dimension();
    if let Some(bad) = masks.iter().find(|m| m.len() != n) {
        return Err(Error::DimensionMismatch {
            context: "ensemble mask length",
            expected: n,
            actual: bad.len(),
        });
    }
    let rounds = masks.len();
    let scale = if scaled && rounds > 0 {
        1.0 / (rounds as f64).sqrt()
    } else {
        1.0
    };
    let mut matrix = DMatrix::zeros(rounds, n);
    for (m, mask) in masks.iter().enumerate() {
        let row = sensing_row(mask, transform, mode);
        for j in 0..n {
            matrix[(m, j)] = scale * row[j];
        }
    }
    MeasurementEnsemble::from_parts(masks, matrix, mode, scaled, master_seed)
}

/// The full-rank test-hook ensemble: n identity rows (mask m = e_m, raw 0/1
/// mode), so measuring returns the signal itself.
pub fn identity_ensemble(n: usize) -> Result<MeasurementEnsemble> {
    let masks: Vec<BernoulliMask> = (0..n)
        .map(|m| {
            let mut bits = vec![0u8; n];
            bits[m] = 1;
            BernoulliMask::new(bits)
        })
        .collect::<Result<_>>()?;
    let matrix = DMatrix::identity(n, n);
    MeasurementEnsemble::from_parts(masks, matrix, MaskMode::Raw01, false, 0)
}

/// Row-subset sampling of the projector variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetSampling {
    /// R distinct rows, uniform over all size-R subsets.
    WithoutReplacement,
    /// R rows drawn independently and uniformly.
    WithReplacement,
}

/// Ensemble whose rows are R rows of `full.matrix` selected at random,
/// scaled by √(n/R) when `scaled`.
///
/// Each selected row q is represented by the single-index mask e_q in raw
/// 0/1 mode, so the ensemble invariants carry over unchanged.
pub fn subset_projector_ensemble(
    rounds: usize,
    full: &OrthonormalBasis,
    sampling: SubsetSampling,
    scaled: bool,
    seed: u64,
) -> Result<MeasurementEnsemble> {
    let n = full.dimension();
    if rounds == 0 {
        return Err(Error::domain("subset ensembles need at least one row"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = match sampling {
        SubsetSampling::WithoutReplacement => {
            if rounds > n {
                return Err(Error::domain(format!(
                    "cannot sample {rounds} distinct rows from a {n}-dimensional basis"
                )));
            }
            sample(&mut rng, n, rounds).into_vec()
        }
        SubsetSampling::WithReplacement => {
            (0..rounds).map(|_| rng.random_range(0..n)).collect()
        }
    };

    let scale = if scaled {
        (n as f64 / rounds as f64).sqrt()
    } else {
        1.0
    };
    let mut masks = Vec::with_capacity(rounds);
    let mut matrix = DMatrix::zeros(rounds, n);
    for (m, &q) in indices.iter().enumerate() {
        let mut bits = vec![0u8; n];
        bits[q] = 1;
        masks.push(BernoulliMask::new(bits)?);
        for j in 0..n {
            matrix[(m, j)] = scale * full.matrix()[(q, j)];
        }
    }
    MeasurementEnsemble::from_parts(masks, matrix, MaskMode::Raw01, scaled, seed)
}

/// Writes the textual ensemble format: a header line `R n mode scaled seed`
/// followed by one space-separated sensing row per line. Floats use the
/// shortest round-trip representation, so imports are bit-exact.
pub fn export_ensemble(ensemble: &MeasurementEnsemble, out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "{} {} {} {} {}",
        ensemble.rounds(),
        ensemble.signal_len(),
        ensemble.mode(),
        ensemble.scaled(),
        ensemble.master_seed()
    )?;
    let a = ensemble.sensing_matrix();
    let mut line = String::new();
    for m in 0..ensemble.rounds() {
        line.clear();
        for j in 0..ensemble.signal_len() {
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&a[(m, j)].to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// An ensemble read back from the textual format. Masks are not part of the
/// file, so only the sensing matrix and header metadata are available.
#[derive(Debug, Clone)]
pub struct ImportedEnsemble {
    pub rounds: usize,
    pub signal_len: usize,
    pub mode: MaskMode,
    pub scaled: bool,
    pub seed: u64,
    pub sensing_matrix: DMatrix<f64>,
}

/// Parses the textual ensemble format written by [`export_ensemble`].
pub fn import_ensemble(input: &mut dyn BufRead) -> Result<ImportedEnsemble> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(Error::Parse(format!(
            "ensemble header must have 5 fields, got {}",
            fields.len()
        )));
    }
    let rounds: usize = fields[0]
        .parse()
        .map_err(|e| Error::Parse(format!("bad round count: {e}")))?;
    let signal_len: usize = fields[1]
        .parse()
        .map_err(|e| Error::Parse(format!("bad signal length: {e}")))?;
    let mode: MaskMode = fields[2].parse()?;
    let scaled: bool = fields[3]
        .parse()
        .map_err(|e| Error::Parse(format!("bad scaled flag: {e}")))?;
    let seed: u64 = fields[4]
        .parse()
        .map_err(|e| Error::Parse(format!("bad seed: {e}")))?;

    let mut matrix = DMatrix::zeros(rounds, signal_len);
    let mut line = String::new();
    for m in 0..rounds {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::Parse(format!(
                "ensemble file ended after {m} of {rounds} rows"
            )));
        }
        let mut count = 0;
        for (j, tok) in line.split_whitespace().enumerate() {
            if j >= signal_len {
                return Err(Error::Parse(format!("row {m} has more than {signal_len} entries")));
            }
            matrix[(m, j)] = tok
                .parse()
                .map_err(|e| Error::Parse(format!("row {m} entry {j}: {e}")))?;
            count = j + 1;
        }
        if count != signal_len {
            return Err(Error::Parse(format!(
                "row {m} has {count} entries, expected {signal_len}"
            )));
        }
    }
    Ok(ImportedEnsemble {
        rounds,
        signal_len,
        mode,
        scaled,
        seed,
        sensing_matrix: matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{identity_basis, random_orthonormal_basis, walsh_hadamard_basis};
    use crate::model::{make_sparse_signal, SparseSignal, ValueDist};
    use approx::assert_abs_diff_eq;

    #[test]
    fn masks_are_bits_and_deterministic() {
        let a = gen_mask(4, 3).unwrap();
        assert!(a.bits().iter().all(|b| *b <= 1));
        let b = gen_mask(4, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mask_bit_density_is_fair() {
        let mut ones = 0usize;
        let total = 10_000 * 100;
        for seed in 0..10_000u64 {
            let mask = gen_mask(100, seed).unwrap();
            ones += mask.bits().iter().map(|b| *b as usize).sum::<usize>();
        }
        let density = ones as f64 / total as f64;
        assert!((0.49..=0.51).contains(&density), "density {density}");
    }

    #[test]
    fn masked_sum_with_identity() {
        let mask = BernoulliMask::new(vec![1, 0, 1, 0]).unwrap();
        let id = identity_basis(4).unwrap();
        let s = SparseSignal::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let y = measure_round(&mask, &id, &s, MaskMode::Raw01).unwrap();
        assert_eq!(y, 4.0);

        let all = BernoulliMask::new(vec![1, 1, 1, 1]).unwrap();
        let y = measure_round(&all, &id, &s, MaskMode::Raw01).unwrap();
        assert_eq!(y, 10.0);
    }

    #[test]
    fn masked_round_matches_dense_oracle() {
        let mask = BernoulliMask::new(vec![1, 1, 0, 0]).unwrap();
        let h = walsh_hadamard_basis(4).unwrap();
        let s = SparseSignal::from_vec(vec![0.0, 2.0, 0.0, 0.0]);
        let y = measure_round(&mask, &h, &s, MaskMode::Centered).unwrap();
        // Oracle: explicit (±1 vector) · H · S.
        let pm = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]);
        let hs = h.matrix() * s.values();
        let expected = pm.dot(&hs);
        assert_abs_diff_eq!(y, expected, epsilon = 1e-12);
    }

    #[test]
    fn elementwise_view_matches_keep_discard() {
        let mask = BernoulliMask::new(vec![1, 0, 1, 1]).unwrap();
        let id = identity_basis(4).unwrap();
        let s = SparseSignal::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let y = measure_round_elementwise(&mask, &id, &s, MaskMode::Raw01).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 0.0, 3.0, 4.0]);
    }

    #[test]
    fn forced_all_ones_masks_give_all_ones_matrix() {
        let n = 4;
        let masks: Vec<BernoulliMask> = (0..n)
            .map(|_| BernoulliMask::new(vec![1; n]).unwrap())
            .collect();
        let id = identity_basis(n).unwrap();
        let e = ensemble_from_masks(masks, &id, MaskMode::Raw01, false, 0).unwrap();
        assert!(e.sensing_matrix().iter().all(|v| *v == 1.0));
        let s = SparseSignal::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let y = e.measure(&s).unwrap();
        assert!(y.iter().all(|v| *v == 10.0));
    }

    #[test]
    fn raw_identity_rows_equal_mask_bits_exactly() {
        let id = identity_basis(16).unwrap();
        let e = assemble_ensemble(5, 16, &id, MaskMode::Raw01, false, 11).unwrap();
        for (m, mask) in e.masks().iter().enumerate() {
            for j in 0..16 {
                assert_eq!(e.sensing_matrix()[(m, j)], f64::from(mask.bits()[j]));
            }
        }
    }

    #[test]
    fn ensembles_are_deterministic() {
        let id = identity_basis(4).unwrap();
        let a = assemble_ensemble(3, 4, &id, MaskMode::Centered, true, 11).unwrap();
        let b = assemble_ensemble(3, 4, &id, MaskMode::Centered, true, 11).unwrap();
        assert_eq!(a.sensing_matrix(), b.sensing_matrix());
        assert_eq!(a.masks(), b.masks());
    }

    #[test]
    fn scaled_centered_columns_have_unit_norm() {
        // Centered scaled entries are ±1/√R, so every column norm is exactly 1
        // up to rounding; check a band far wider than that.
        let id = identity_basis(64).unwrap();
        for seed in 0..10u64 {
            let e = assemble_ensemble(64, 64, &id, MaskMode::Centered, true, seed).unwrap();
            for j in 0..64 {
                let norm = e.sensing_matrix().column(j).norm();
                assert!((0.6..=1.4).contains(&norm), "column norm {norm}");
            }
        }
    }

    #[test]
    fn round_count_zero_is_empty() {
        let id = identity_basis(4).unwrap();
        let e = assemble_ensemble(0, 4, &id, MaskMode::Raw01, false, 1).unwrap();
        assert_eq!(e.rounds(), 0);
        assert_eq!(e.signal_len(), 4);
    }

    #[test]
    fn subset_full_selection_is_a_row_permutation() {
        let b = random_orthonormal_basis(8, 2).unwrap();
        let e =
            subset_projector_ensemble(8, &b, SubsetSampling::WithoutReplacement, false, 5).unwrap();
        // Every basis row appears exactly once.
        let mut seen = vec![false; 8];
        for m in 0..8 {
            let row = e.sensing_matrix().row(m);
            let q = (0..8)
                .find(|&q| (0..8).all(|j| row[j] == b.matrix()[(q, j)]))
                .expect("row must come from the basis");
            assert!(!seen[q]);
            seen[q] = true;
        }
    }

    #[test]
    fn subset_identity_rows_select_coordinates() {
        let id = identity_basis(6).unwrap();
        let e =
            subset_projector_ensemble(2, &id, SubsetSampling::WithoutReplacement, false, 3).unwrap();
        let s = SparseSignal::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = e.measure(&s).unwrap();
        for m in 0..2 {
            let q = e.masks()[m].bits().iter().position(|b| *b == 1).unwrap();
            assert_eq!(y[m], s.values()[q]);
        }
    }

    #[test]
    fn subset_rows_are_distinct_in_range() {
        let h = walsh_hadamard_basis(16).unwrap();
        let e =
            subset_projector_ensemble(8, &h, SubsetSampling::WithoutReplacement, false, 21)
                .unwrap();
        let mut picked: Vec<usize> = e
            .masks()
            .iter()
            .map(|m| m.bits().iter().position(|b| *b == 1).unwrap())
            .collect();
        picked.sort_unstable();
        let len_before = picked.len();
        picked.dedup();
        assert_eq!(picked.len(), len_before);
        assert!(picked.iter().all(|q| *q < 16));
    }

    #[test]
    fn subset_rejects_oversized_without_replacement() {
        let id = identity_basis(4).unwrap();
        assert!(
            subset_projector_ensemble(5, &id, SubsetSampling::WithoutReplacement, false, 0)
                .is_err()
        );
    }

    #[test]
    fn export_import_round_trip_is_bit_exact() {
        let u = random_orthonormal_basis(6, 4).unwrap();
        let e = assemble_ensemble(4, 6, &u, MaskMode::Centered, true, 9).unwrap();
        let mut buf = Vec::new();
        export_ensemble(&e, &mut buf).unwrap();
        let imported = import_ensemble(&mut buf.as_slice()).unwrap();
        assert_eq!(imported.rounds, 4);
        assert_eq!(imported.signal_len, 6);
        assert_eq!(imported.mode, MaskMode::Centered);
        assert!(imported.scaled);
        assert_eq!(imported.seed, 9);
        assert_eq!(imported.sensing_matrix, *e.sensing_matrix());
    }

    #[test]
    fn equivalence_of_masked_transform_and_transformed_mask() {
        // Measuring U·S with the raw mask equals measuring S with the
        // mask row composed with U.
        let u = random_orthonormal_basis(8, 7).unwrap();
        let id = identity_basis(8).unwrap();
        for seed in 0..20u64 {
            let mask = gen_mask(8, seed).unwrap();
            let s = make_sparse_signal(8, 3, ValueDist::Gaussian, seed + 100).unwrap();
            let g = SparseSignal::new(u.apply(s.values()).unwrap());
            let lhs = measure_round(&mask, &id, &g, MaskMode::Centered).unwrap();
            let rhs = measure_round(&mask, &u, &s, MaskMode::Centered).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn measure_round_is_linear() {
        let u = random_orthonormal_basis(8, 3).unwrap();
        let mask = gen_mask(8, 5).unwrap();
        let s1 = make_sparse_signal(8, 2, ValueDist::Gaussian, 1).unwrap();
        let s2 = make_sparse_signal(8, 3, ValueDist::Gaussian, 2).unwrap();
        let (a, b) = (0.7, -1.3);
        let combined = SparseSignal::new(a * s1.values() + b * s2.values());
        let lhs = measure_round(&mask, &u, &combined, MaskMode::Centered).unwrap();
        let y1 = measure_round(&mask, &u, &s1, MaskMode::Centered).unwrap();
        let y2 = measure_round(&mask, &u, &s2, MaskMode::Centered).unwrap();
        assert_abs_diff_eq!(lhs, a * y1 + b * y2, epsilon = 1e-10);
    }
}
