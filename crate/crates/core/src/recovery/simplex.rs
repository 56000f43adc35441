//! Two-phase revised simplex on the positive/negative split of the L1
//! program: min Σ(u + v) s.t. A(u − v) = y, u, v ≥ 0.
//!
//! Phase 1 drives signed artificial slacks to zero (dropping redundant rows
//! afterwards); phase 2 minimizes the L1 objective, which is non-increasing
//! across pivots by construction. The basis inverse is kept explicitly and
//! refactorized periodically.

use crate::error::{Error, Result};
use crate::seed::SplitMix64;

/// Reduced-cost optimality tolerance.
const EPS_OPT: f64 = 1e-9;
/// Smallest acceptable pivot magnitude in the ratio test.
const EPS_PIV: f64 = 1e-10;
/// Pivots between refactorizations of the basis inverse.
const REFACTOR_EVERY: usize = 64;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_TRIGGER: usize = 30;
/// Relative size of the anti-degeneracy perturbation applied at phase-2
/// start. The optimal vertex of the L1 program is massively degenerate
/// whenever the minimizer has fewer nonzeros than measurement rows;
/// perturbing the right-hand side within the image of the current basis
/// keeps the system consistent while making every vertex of the perturbed
/// program simple, so phase 2 cannot stall.
const PERTURBATION: f64 = 1e-9;
/// Fixed stream seed of the perturbation pattern.
const PERTURBATION_SEED: u64 = 0x0dd0_feed_dead_beef;

pub(crate) struct SimplexOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Option<Vec<f64>>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Variable codes: `0..n` is u_j (column +a_j), `n..2n` is v_j (column
/// −a_j), `2n + i` is the artificial of row i (column sign_i · e_i).
struct Tableau {
    rows: usize,
    n: usize,
    /// Column-major rows×n structural base columns.
    cols: Vec<f64>,
    rhs: Vec<f64>,
    /// Row-major rows×rows basis inverse.
    binv: Vec<f64>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    /// Per base index j: whether u_j or v_j is currently basic.
    basic_pair: Vec<bool>,
    art_sign: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
}

impl Tableau {
    fn new(cols: Vec<f64>, rhs: Vec<f64>, n: usize) -> Tableau {
        let rows = rhs.len();
        let mut art_sign = vec![1.0; rows];
        let mut xb = vec![0.0; rows];
        let mut binv = vec![0.0; rows * rows];
        for i in 0..rows {
            if rhs[i] < 0.0 {
                art_sign[i] = -1.0;
            }
            xb[i] = rhs[i].abs();
            binv[i * rows + i] = art_sign[i];
        }
        Tableau {
            rows,
            n,
            cols,
            rhs,
            binv,
            basis: (0..rows).map(|i| 2 * n + i).collect(),
            xb,
            basic_pair: vec![false; n],
            art_sign,
            pivots: 0,
            since_refactor: 0,
        }
    }

    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.rows..(j + 1) * self.rows]
    }

    fn is_artificial(&self, code: usize) -> bool {
        code >= 2 * self.n
    }

    /// Simplex multipliers y = c_B^T B^{-1} under the phase's cost vector.
    fn multipliers(&self, phase1: bool) -> Vec<f64> {
        let r = self.rows;
        let mut yv = vec![0.0; r];
        for p in 0..r {
            let charged = if phase1 {
                self.is_artificial(self.basis[p])
            } else {
                !self.is_artificial(self.basis[p])
            };
            if charged {
                let row = &self.binv[p * r..(p + 1) * r];
                for (acc, v) in yv.iter_mut().zip(row) {
                    *acc += v;
                }
            }
        }
        yv
    }

    /// Picks the entering variable, or `None` at optimality. Dantzig rule by
    /// default; Bland's rule (lowest eligible index) when `bland` is set.
    fn price(&self, yv: &[f64], phase1: bool, bland: bool) -> Option<usize> {
        let c = if phase1 { 0.0 } else { 1.0 };
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n {
            if self.basic_pair[j] {
                continue;
            }
            let t = dot(yv, self.col(j));
            let d_plus = c - t;
            let d_minus = c + t;
            if bland {
                if d_plus < -EPS_OPT {
                    return Some(j);
                }
                if d_minus < -EPS_OPT {
                    return Some(self.n + j);
                }
            } else {
                if d_plus < -EPS_OPT && best.is_none_or(|(_, b)| d_plus < b) {
                    best = Some((j, d_plus));
                }
                if d_minus < -EPS_OPT && best.is_none_or(|(_, b)| d_minus < b) {
                    best = Some((self.n + j, d_minus));
                }
            }
        }
        best.map(|(code, _)| code)
    }

    /// B^{-1} times the entering column.
    fn direction(&self, enter: usize) -> Vec<f64> {
        let r = self.rows;
        let (j, sign) = if enter < self.n {
            (enter, 1.0)
        } else {
            (enter - self.n, -1.0)
        };
        let col = self.col(j);
        let mut w = vec![0.0; r];
        for i in 0..r {
            w[i] = sign * dot(&self.binv[i * r..(i + 1) * r], col);
        }
        w
    }

    /// Leaving row of the ratio test. Ties prefer kicking artificials, then
    /// (Bland) the lowest basic code or (Dantzig) the largest pivot.
    fn ratio_test(&self, w: &[f64], bland: bool) -> Option<usize> {
        let mut theta_min = f64::INFINITY;
        for i in 0..self.rows {
            if w[i] > EPS_PIV {
                theta_min = theta_min.min(self.xb[i].max(0.0) / w[i]);
            }
        }
        if theta_min.is_infinite() {
            return None;
        }
        let slack = theta_min + 1e-12 * (1.0 + theta_min);
        let mut pick: Option<usize> = None;
        for i in 0..self.rows {
            if w[i] > EPS_PIV && self.xb[i].max(0.0) / w[i] <= slack {
                pick = match pick {
                    None => Some(i),
                    Some(p) => {
                        let art_p = self.is_artificial(self.basis[p]);
                        let art_i = self.is_artificial(self.basis[i]);
                        let better = if art_i != art_p {
                            art_i
                        } else if bland {
                            self.basis[i] < self.basis[p]
                        } else {
                            w[i] > w[p]
                        };
                        Some(if better { i } else { p })
                    }
                };
            }
        }
        pick
    }

    /// Executes the pivot and returns the step length θ.
    fn pivot(&mut self, enter: usize, leave_row: usize, w: &[f64]) -> f64 {
        let r = self.rows;
        let w_r = w[leave_row];
        let theta = self.xb[leave_row].max(0.0) / w_r;

        for i in 0..r {
            if i != leave_row {
                self.xb[i] -= theta * w[i];
                if self.xb[i] < 0.0 && self.xb[i] > -1e-9 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[leave_row] = theta;

        let inv = 1.0 / w_r;
        let start = leave_row * r;
        for k in 0..r {
            self.binv[start + k] *= inv;
        }
        let pivot_row: Vec<f64> = self.binv[start..start + r].to_vec();
        for i in 0..r {
            if i != leave_row && w[i] != 0.0 {
                let f = w[i];
                let row = &mut self.binv[i * r..(i + 1) * r];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }

        let leaving = self.basis[leave_row];
        if leaving < self.n {
            self.basic_pair[leaving] = false;
        } else if leaving < 2 * self.n {
            self.basic_pair[leaving - self.n] = false;
        }
        if enter < self.n {
            self.basic_pair[enter] = true;
        } else {
            self.basic_pair[enter - self.n] = true;
        }
        self.basis[leave_row] = enter;
        self.pivots += 1;
        self.since_refactor += 1;
        theta
    }

    /// Rebuilds the basis inverse and basic values from scratch.
    fn refactor(&mut self) -> Result<()> {
        let r = self.rows;
        let mut b = vec![0.0; r * r];
        for (p, &code) in self.basis.iter().enumerate() {
            if code < self.n {
                for i in 0..r {
                    b[i * r + p] = self.col(code)[i];
                }
            } else if code < 2 * self.n {
                for i in 0..r {
                    b[i * r + p] = -self.col(code - self.n)[i];
                }
            } else {
                let i = code - 2 * self.n;
                b[i * r + p] = self.art_sign[i];
            }
        }
        self.binv = invert(b, r)?;
        // Keep the exact basic solution; the ratio test treats small
        // negatives as zero on its own.
        for i in 0..r {
            self.xb[i] = dot(&self.binv[i * r..(i + 1) * r], &self.rhs);
        }
        self.since_refactor = 0;
        Ok(())
    }

    /// Phase-2 objective: the L1 norm of the current iterate.
    fn objective(&self) -> f64 {
        (0..self.rows)
            .filter(|&p| !self.is_artificial(self.basis[p]))
            .map(|p| self.xb[p].max(0.0))
            .sum()
    }

    fn phase1_gap(&self) -> f64 {
        (0..self.rows)
            .filter(|&p| self.is_artificial(self.basis[p]))
            .map(|p| self.xb[p].max(0.0))
            .sum()
    }

    fn extract(&self) -> Vec<f64> {
        // Raw basic values keep B·x_B = y exact; zero-level entries may
        // carry noise of the order of the perturbation.
        let mut x = vec![0.0; self.n];
        for (p, &code) in self.basis.iter().enumerate() {
            let v = self.xb[p];
            if code < self.n {
                x[code] += v;
            } else if code < 2 * self.n {
                x[code - self.n] -= v;
            }
        }
        x
    }

    /// Runs one phase to optimality. Returns false if the pivot budget ran
    /// out first.
    fn run_phase(
        &mut self,
        phase1: bool,
        max_iter: usize,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<bool> {
        let mut bland = false;
        let mut degenerate_streak = 0usize;
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let yv = self.multipliers(phase1);
            let Some(enter) = self.price(&yv, phase1, bland) else {
                return Ok(true);
            };
            if self.pivots >= max_iter {
                return Ok(false);
            }
            let w = self.direction(enter);
            let Some(leave) = self.ratio_test(&w, bland) else {
                return Err(Error::domain(
                    "simplex direction unbounded: numerical breakdown in basis pursuit",
                ));
            };
            let theta = self.pivot(enter, leave, &w);
            if theta <= 1e-12 {
                degenerate_streak += 1;
                if degenerate_streak >= BLAND_TRIGGER {
                    bland = true;
                }
            } else {
                degenerate_streak = 0;
                bland = false;
            }
            if let Some(tr) = trace.as_deref_mut() {
                if !phase1 {
                    tr.push(self.objective());
                }
            }
        }
    }

    /// Pivots zero-level artificials out of the basis; rows whose artificial
    /// cannot be replaced are redundant and get dropped.
    fn eliminate_artificials(&mut self) -> Result<()> {
        let r = self.rows;
        let mut dead = vec![false; r];
        for i in 0..r {
            if self.basis[i] != 2 * self.n + i {
                continue;
            }
            // Zero-level by phase-1 optimality; any residue is noise.
            self.xb[i] = 0.0;
            let binv_row: Vec<f64> = self.binv[i * r..(i + 1) * r].to_vec();
            let mut found = None;
            for j in 0..self.n {
                if self.basic_pair[j] {
                    continue;
                }
                if dot(&binv_row, self.col(j)).abs() > 1e-7 {
                    found = Some(j);
                    break;
                }
            }
            match found {
                Some(j) => {
                    let w = self.direction(j);
                    self.pivot(j, i, &w);
                }
                None => dead[i] = true,
            }
        }
        if dead.iter().any(|d| *d) {
            self.drop_rows(&dead)?;
        } else {
            self.refactor()?;
        }
        Ok(())
    }

    /// Perturbs the right-hand side by `B · d` with strictly positive tiny
    /// `d`, which bumps every basic value by `d` while keeping the system
    /// consistent (the shift lies in the basis image).
    fn perturb_rhs(&mut self, scale: f64) -> Result<Vec<f64>> {
        let original = self.rhs.clone();
        let mut stream = SplitMix64::new(PERTURBATION_SEED);
        let mut shift = vec![0.0; self.rows];
        for p in 0..self.rows {
            let u = (stream.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let d = scale * (1.0 + u);
            let code = self.basis[p];
            if code < self.n {
                let col = self.col(code);
                for i in 0..self.rows {
                    shift[i] += d * col[i];
                }
            } else if code < 2 * self.n {
                let col = self.col(code - self.n);
                for i in 0..self.rows {
                    shift[i] -= d * col[i];
                }
            } else {
                let i = code - 2 * self.n;
                shift[i] += d * self.art_sign[i];
            }
        }
        for (r, s) in self.rhs.iter_mut().zip(&shift) {
            *r += s;
        }
        self.refactor()?;
        Ok(original)
    }

    fn restore_rhs(&mut self, original: Vec<f64>) -> Result<()> {
        self.rhs = original;
        self.refactor()
    }

    fn drop_rows(&mut self, dead: &[bool]) -> Result<()> {
        let keep: Vec<usize> = (0..self.rows).filter(|&i| !dead[i]).collect();
        let r_new = keep.len();
        let mut cols_new = vec![0.0; r_new * self.n];
        for j in 0..self.n {
            let old = self.col(j);
            for (pos, &i) in keep.iter().enumerate() {
                cols_new[j * r_new + pos] = old[i];
            }
        }
        self.rhs = keep.iter().map(|&i| self.rhs[i]).collect();
        self.basis = keep.iter().map(|&i| self.basis[i]).collect();
        debug_assert!(self.basis.iter().all(|&c| c < 2 * self.n));
        self.art_sign = vec![1.0; r_new];
        self.cols = cols_new;
        self.rows = r_new;
        self.xb = vec![0.0; r_new];
        self.binv = vec![0.0; r_new * r_new];
        if r_new > 0 {
            self.refactor()?;
        }
        Ok(())
    }
}

/// Row-major Gauss-Jordan inversion with partial pivoting.
fn invert(mut b: Vec<f64>, r: usize) -> Result<Vec<f64>> {
    let mut inv = vec![0.0; r * r];
    for i in 0..r {
        inv[i * r + i] = 1.0;
    }
    for k in 0..r {
        let mut p = k;
        let mut p_val = b[k * r + k].abs();
        for i in k + 1..r {
            let v = b[i * r + k].abs();
            if v > p_val {
                p = i;
                p_val = v;
            }
        }
        if p_val < 1e-12 {
            return Err(Error::domain(
                "singular simplex basis: numerical breakdown",
            ));
        }
        if p != k {
            for j in 0..r {
                b.swap(k * r + j, p * r + j);
                inv.swap(k * r + j, p * r + j);
            }
        }
        let d = b[k * r + k];
        for j in 0..r {
            b[k * r + j] /= d;
            inv[k * r + j] /= d;
        }
        for i in 0..r {
            if i != k {
                let f = b[i * r + k];
                if f != 0.0 {
                    for j in 0..r {
                        b[i * r + j] -= f * b[k * r + j];
                        inv[i * r + j] -= f * inv[k * r + j];
                    }
                }
            }
        }
    }
    Ok(inv)
}

/// Solves min |x|_1 s.t. Ax = y for the column-major matrix `cols`
/// (zero rows already removed by the caller).
pub(crate) fn solve_l1(
    cols: Vec<f64>,
    rhs: Vec<f64>,
    n: usize,
    max_iter: usize,
    want_trace: bool,
) -> Result<SimplexOutcome> {
    if rhs.is_empty() {
        return Ok(SimplexOutcome {
            x: vec![0.0; n],
            iterations: 0,
            converged: true,
            trace: want_trace.then(Vec::new),
        });
    }
    let scale = 1.0 + rhs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut t = Tableau::new(cols, rhs, n);

    if !t.run_phase(true, max_iter, None)? {
        return Ok(SimplexOutcome {
            x: t.extract(),
            iterations: t.pivots,
            converged: false,
            trace: None,
        });
    }
    let gap = t.phase1_gap();
    if gap > 1e-7 * scale {
        return Err(Error::Infeasible { gap });
    }
    t.eliminate_artificials()?;

    let original_rhs = t.perturb_rhs(PERTURBATION * scale)?;
    let mut trace = want_trace.then(Vec::new);
    if let Some(tr) = &mut trace {
        tr.push(t.objective());
    }
    let converged = t.run_phase(false, max_iter, trace.as_mut())?;
    t.restore_rhs(original_rhs)?;

    // The perturbed-optimal basis is dual feasible for the original program
    // (pricing does not involve the right-hand side); it is primal feasible
    // once the perturbation shift is gone, up to noise. A real violation
    // means the perturbation was too coarse for this instance; fall back to
    // the unperturbed Bland-guarded solve.
    let worst = t.xb.iter().cloned().fold(0.0_f64, f64::min);
    if converged && worst < -1e-5 * scale {
        return solve_l1_unperturbed(t, max_iter, want_trace);
    }

    Ok(SimplexOutcome {
        x: t.extract(),
        iterations: t.pivots,
        converged,
        trace,
    })
}

/// Emergency path: continue on the original right-hand side from a fresh
/// phase 1, without perturbation. Finite by Bland's rule, slow under heavy
/// degeneracy; only reached when the perturbed basis fails restoration.
fn solve_l1_unperturbed(
    seed_tableau: Tableau,
    max_iter: usize,
    want_trace: bool,
) -> Result<SimplexOutcome> {
    let n = seed_tableau.n;
    let rows = seed_tableau.rows;
    let mut cols = Vec::with_capacity(rows * n);
    for j in 0..n {
        cols.extend_from_slice(seed_tableau.col(j));
    }
    let mut t = Tableau::new(cols, seed_tableau.rhs.clone(), n);
    t.pivots = seed_tableau.pivots;
    if !t.run_phase(true, max_iter, None)? {
        return Ok(SimplexOutcome {
            x: t.extract(),
            iterations: t.pivots,
            converged: false,
            trace: None,
        });
    }
    t.eliminate_artificials()?;
    let mut trace = want_trace.then(Vec::new);
    if let Some(tr) = &mut trace {
        tr.push(t.objective());
    }
    let converged = t.run_phase(false, max_iter, trace.as_mut())?;
    Ok(SimplexOutcome {
        x: t.extract(),
        iterations: t.pivots,
        converged,
        trace,
    })
}
