//! Two-phase revised simplex for the small exact linear programs
//! behind basis pursuit and face probing. Bland's rule for both the
//! entering and leaving choice, so no cycling; the basis is refactored
//! from scratch every iteration, which is cheap at these sizes and
//! avoids drifting products of updates.

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix, LuFactor};

/// Entering candidates need a reduced cost below this.
const REDUCED_COST_TOL: f64 = 1e-9;
/// Pivot column entries below this do not participate in ratio tests.
const RATIO_TOL: f64 = 1e-11;
/// Phase-1 objective above this (scaled) means infeasible.
const FEAS_TOL: f64 = 1e-8;

const MAX_ITER: usize = 50_000;

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Solve `min c^T x` subject to `E x = b`, `x >= 0`.
///
/// E must have full row rank; phase 1 reports redundant rows as a
/// numerical error instead of repairing them.
pub fn solve_lp(e: &DenseMatrix, b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let m = e.rows();
    let n = e.cols();
    if b.len() != m || c.len() != n {
        return Err(Error::InvalidInput("LP dimension mismatch".into()));
    }
    // flip rows so the right-hand side is nonnegative; the flipped
    // system is used in both phases so that the basis carries over
    let mut eflip = DenseMatrix::zeros(m, n);
    let mut bflip = vec![0.0; m];
    for i in 0..m {
        let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
        bflip[i] = s * b[i];
        for j in 0..n {
            eflip.set(i, j, s * e.get(i, j));
        }
    }
    // phase 1: identity artificials with unit cost
    let mut ext = DenseMatrix::zeros(m, n + m);
    for i in 0..m {
        for j in 0..n {
            ext.set(i, j, eflip.get(i, j));
        }
        ext.set(i, n + i, 1.0);
    }
    let mut c1 = vec![0.0; n + m];
    for cj in c1.iter_mut().skip(n) {
        *cj = 1.0;
    }
    let start: Vec<usize> = (n..n + m).collect();
    let (mut basis, _, obj1) = simplex_core(&ext, &bflip, &c1, start)?;
    let scale = 1.0 + bflip.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    if obj1 > FEAS_TOL * scale {
        return Err(Error::Numerical(format!(
            "LP infeasible: phase-1 objective {obj1:.3e}"
        )));
    }
    // pivot any artificial still basic (at zero) onto an original
    // column; full row rank guarantees a usable pivot exists
    for pos in 0..m {
        if basis[pos] < n {
            continue;
        }
        let bmat = ext.select_columns(&basis);
        let lut = LuFactor::new(&bmat.transpose())?;
        let mut ek = vec![0.0; m];
        ek[pos] = 1.0;
        let w = lut.solve(&ek);
        let mut replaced = false;
        for j in 0..n {
            if basis.contains(&j) {
                continue;
            }
            if dot(&w, &eflip.col(j)).abs() > 1e-9 {
                basis[pos] = j;
                replaced = true;
                break;
            }
        }
        if !replaced {
            return Err(Error::Numerical("LP has a redundant constraint row".into()));
        }
    }
    // phase 2 on the original objective
    let (_, x, objective) = simplex_core(&eflip, &bflip, c, basis)?;
    Ok(LpSolution { x, objective })
}

/// Simplex iterations from a starting basis; returns (basis, x, c^T x).
fn simplex_core(
    e: &DenseMatrix,
    b: &[f64],
    c: &[f64],
    mut basis: Vec<usize>,
) -> Result<(Vec<usize>, Vec<f64>, f64)> {
    let m = e.rows();
    let n = e.cols();
    for _ in 0..MAX_ITER {
        let bmat = e.select_columns(&basis);
        let lu = LuFactor::new(&bmat)
            .map_err(|_| Error::Numerical("singular simplex basis".into()))?;
        let xb = lu.solve(b);
        let lut = LuFactor::new(&bmat.transpose())
            .map_err(|_| Error::Numerical("singular simplex basis".into()))?;
        let cb: Vec<f64> = basis.iter().map(|&j| c[j]).collect();
        let duals = lut.solve(&cb);
        // Bland entering rule: smallest index with negative reduced cost
        let mut enter = None;
        for j in 0..n {
            if basis.contains(&j) {
                continue;
            }
            if c[j] - dot(&duals, &e.col(j)) < -REDUCED_COST_TOL {
                enter = Some(j);
                break;
            }
        }
        let Some(j) = enter else {
            let mut x = vec![0.0; n];
            for (i, &bi) in basis.iter().enumerate() {
                x[bi] = xb[i].max(0.0);
            }
            let objective = dot(c, &x);
            return Ok((basis, x, objective));
        };
        let u = lu.solve(&e.col(j));
        // ratio test; ties leave the smallest basis index (Bland)
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if u[i] > RATIO_TOL {
                let ratio = xb[i].max(0.0) / u[i];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((li, _)) = leave else {
            return Err(Error::Numerical("LP unbounded".into()));
        };
        basis[li] = j;
    }
    Err(Error::Numerical("simplex iteration limit reached".into()))
}
