//! Monte Carlo success-probability sweeps and the standard-measurement
//! baseline.
//!
//! Every estimate is a pure function of the configuration record including
//! the master seed: trial t of any point derives its seeds as
//! `mix_seed(master_seed, t)`, so sweeps are reproducible bit for bit and
//! trials are independent of execution order. Trials share signal instances
//! across round counts, and mask ensembles extend by prefix as R grows.

use std::io::Write;

use rayon::prelude::*;

use crate::analysis::{success_prob_theorem2, success_prob_theorem3, LogBase};
use crate::error::{Error, Result};
use crate::model::{CurvePoint, SuccessCurve};
use crate::recovery::{sum_objective, ProcedureConfig, ProcedureContext, ProcedureSeeds, ProcedureVariant};
use crate::seed::mix_seed;

/// An empirical success estimate with its 95% normal-approximation
/// confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate {
    pub p_hat: f64,
    pub ci_halfwidth: f64,
}

/// Per-trial exact-recovery flags for one configuration.
///
/// Trial t runs with signal seed `mix(mix(master_seed, t), 0)` and ensemble
/// seed `mix(mix(master_seed, t), 1)`. Solver failures count as non-exact
/// rather than aborting the sweep.
pub fn success_flags(
    config: &ProcedureConfig,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<bool>> {
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    let ctx = ProcedureContext::prepare(config.clone())?;
    let flags: Vec<bool> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let trial_seed = mix_seed(master_seed, t);
            let seeds = ProcedureSeeds {
                signal: mix_seed(trial_seed, 0),
                ensemble: mix_seed(trial_seed, 1),
            };
            ctx.run(seeds, sum_objective).map(|r| r.exact).unwrap_or(false)
        })
        .collect();
    Ok(flags)
}

/// Empirical exact-recovery probability over seeded independent trials.
pub fn success_probability(
    config: &ProcedureConfig,
    trials: usize,
    master_seed: u64,
) -> Result<PointEstimate> {
    let flags = success_flags(config, trials, master_seed)?;
    let p_hat = flags.iter().filter(|f| **f).count() as f64 / trials as f64;
    let ci_halfwidth = 1.96 * (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
    Ok(PointEstimate { p_hat, ci_halfwidth })
}

fn theoretical_success(variant: ProcedureVariant, n: usize, rounds: usize, base: LogBase) -> Result<f64> {
    match variant {
        ProcedureVariant::Procedure1 => success_prob_theorem2(n, base),
        ProcedureVariant::Procedure2 => {
            if rounds == 0 {
                Ok(0.0)
            } else {
                success_prob_theorem3(rounds)
            }
        }
    }
}

/// Renders the full effective configuration of a sweep; embedded in every
/// export so runs can be reproduced from the artifact alone.
pub fn render_sweep_config(
    config: &ProcedureConfig,
    trials: usize,
    master_seed: u64,
    base: LogBase,
) -> String {
    format!(
        "variant={} n={} k={} basis={} transform={} mode={} value_dist={} ensemble={} trials={} master_seed={} log_base={}",
        config.variant,
        config.n,
        config.sparsity,
        config.basis,
        config.transform,
        config.mode,
        config.value_dist,
        match config.ensemble {
            crate::recovery::EnsembleSource::Masks => "masks",
            crate::recovery::EnsembleSource::ForcedIdentity => "forced_identity",
        },
        trials,
        master_seed,
        base,
    )
}

/// One success-probability evaluation per entry of `r_list` (strictly
/// increasing), with the theoretical closed form of the matching regime.
pub fn sweep_curve(
    config: &ProcedureConfig,
    r_list: &[usize],
    trials: usize,
    master_seed: u64,
    base: LogBase,
) -> Result<SuccessCurve> {
    if r_list.is_empty() {
        return Err(Error::domain("round list must be nonempty"));
    }
    if r_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("round list must be strictly increasing"));
    }
    let points: Vec<CurvePoint> = r_list
        .iter()
        .map(|&rounds| -> Result<CurvePoint> {
            let mut point_config = config.clone();
            point_config.rounds = rounds;
            let est = success_probability(&point_config, trials, master_seed)?;
            Ok(CurvePoint {
                rounds,
                empirical: est.p_hat,
                ci_halfwidth: est.ci_halfwidth,
                theoretical: theoretical_success(config.variant, config.n, rounds, base)?,
            })
        })
        .collect::<Result<_>>()?;
    SuccessCurve::new(render_sweep_config(config, trials, master_seed, base), points)
}

/// Writes the curve export: a comment block with the full configuration,
/// a `R,empirical,ci,theoretical` header, then one data row per point.
pub fn export_curve(curve: &SuccessCurve, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "# dense measurement success curve")?;
    writeln!(out, "# {}", curve.config())?;
    writeln!(out, "R,empirical,ci,theoretical")?;
    for p in curve.points() {
        writeln!(
            out,
            "{},{},{},{}",
            p.rounds, p.empirical, p.ci_halfwidth, p.theoretical
        )?;
    }
    Ok(())
}

/// The standard-measurement reference: the (R0, p) anchor plus the
/// independent-per-round interpolating curve through it.
///
/// The interpolation is an artifact construction, not a measured curve: the
/// per-round hit probability q solves `1 - (1-q)^R0 = p`.
#[derive(Debug, Clone, Copy)]
pub struct BaselineCurve {
    pub r0: usize,
    pub p: f64,
    pub per_round: f64,
}

impl BaselineCurve {
    /// `1 - (1 - q)^rounds`.
    pub fn success_at(&self, rounds: usize) -> f64 {
        1.0 - (1.0 - self.per_round).powi(rounds as i32)
    }
}

/// Builds the baseline curve through `(r0, p)`.
pub fn baseline_standard(r0: usize, p: f64) -> Result<BaselineCurve> {
    if r0 == 0 {
        return Err(Error::domain("baseline needs at least one round"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "baseline probability must lie in (0, 1), got {p}"
        )));
    }
    let per_round = 1.0 - (1.0 - p).powf(1.0 / r0 as f64);
    Ok(BaselineCurve { r0, p, per_round })
}
