//! Scaling-robust conditioning constants. The central object is
//!
//!   chi(B) = sup over positive diagonal D of ||(B D B^T)^{-1} B D||op
//!
//! for a full-row-rank B. Concentrating D on a nonsingular column
//! subset S drives the operator to x -> B_S^{-T} x_S, so every subset
//! contributes ||B_S^{-1}||_2 = 1 / sigma_min(B_S), and the supremum
//! is the maximum of these contributions over all nonsingular square
//! subsets. The enumeration below evaluates that maximum exactly;
//! `chi_sampled` probes the supremum directly with random scalings and
//! stays below the enumerated value while approaching it under
//! strongly separated scales.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm2, nullspace_basis, nullspace_project, svd_summary, DenseMatrix, LuFactor};
use crate::rng::SplitMix64;

/// Sign enumeration is 2^{n-1}; beyond this many columns it is refused.
pub const SIGN_ENUM_MAX_COLS: usize = 20;
/// Cap on the number of column subsets chi enumeration will visit.
pub const CHI_ENUM_MAX_SUBSETS: u64 = 2_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct ChiCertificate {
    pub value: f64,
    /// Column subset whose inverse attains the maximum.
    pub columns: Vec<usize>,
    /// sigma_min of that square submatrix (value = 1 / sigma_min).
    pub sigma_min: f64,
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    acc
}

/// Exact chi(B) with the attaining subset.
pub fn chi_certificate(b: &DenseMatrix) -> Result<ChiCertificate> {
    let m = b.rows();
    let n = b.cols();
    let svd = svd_summary(b, 0.0)?;
    if svd.rank() < m {
        return Err(Error::RankDeficient(format!(
            "chi needs full row rank, got rank {} with {} rows",
            svd.rank(),
            m
        )));
    }
    if binomial(n, m) > CHI_ENUM_MAX_SUBSETS {
        return Err(Error::SizeLimit(format!(
            "chi enumeration over {n} choose {m} subsets exceeds the cap"
        )));
    }
    let singular_floor = crate::linalg::default_rank_tol(m, n, svd.op_norm());
    let mut best: Option<ChiCertificate> = None;
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        let bs = b.select_columns(&subset);
        let s = svd_summary(&bs, 0.0)?;
        let smin = s.sigma_min();
        if smin > singular_floor {
            let value = 1.0 / smin;
            if best.as_ref().map_or(true, |c| value > c.value) {
                best = Some(ChiCertificate { value, columns: subset.clone(), sigma_min: smin });
            }
        }
        if !next_combination(&mut subset, n) {
            break;
        }
    }
    best.ok_or_else(|| Error::Numerical("no nonsingular column subset found".into()))
}

/// Advance to the next k-combination of 0..n in lexicographic order;
/// false when exhausted.
fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub fn chi_constant(b: &DenseMatrix) -> Result<f64> {
    Ok(chi_certificate(b)?.value)
}

/// Monte Carlo lower bound on chi(B): the largest operator norm of
/// (B D B^T)^{-1} B D over random diagonals with log-uniform entries
/// in [1e-8, 1e8]. Always at most the true supremum, up to the
/// conditioning of the sampled systems.
pub fn chi_sampled(b: &DenseMatrix, rng: &mut SplitMix64, samples: usize) -> Result<f64> {
    let m = b.rows();
    let n = b.cols();
    if svd_summary(b, 0.0)?.rank() < m {
        return Err(Error::RankDeficient("chi needs full row rank".into()));
    }
    let mut best = 0.0_f64;
    for _ in 0..samples {
        let d: Vec<f64> = (0..n).map(|_| rng.log_uniform(1e-8, 1e8)).collect();
        // BD and BDB^T
        let mut bd = DenseMatrix::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                bd.set(i, j, b.get(i, j) * d[j]);
            }
        }
        let gram = bd.matmul(&b.transpose());
        let lu = match LuFactor::new(&gram) {
            Ok(lu) => lu,
            Err(_) => continue,
        };
        let mut op = DenseMatrix::zeros(m, n);
        for j in 0..n {
            let col = lu.solve(&bd.col(j));
            for i in 0..m {
                op.set(i, j, col[i]);
            }
        }
        let norm = svd_summary(&op, 0.0)?.op_norm();
        if norm.is_finite() {
            best = best.max(norm);
        }
    }
    Ok(best)
}

/// Conditioning constant of a linear system's solution set:
/// script_k(A) = chi(Btilde^T) + 1 where Btilde is an orthonormal
/// basis of Null(A), and 1 when the nullspace is trivial.
pub fn script_k(a: &DenseMatrix) -> Result<f64> {
    let basis = nullspace_basis(a, 0.0)?;
    if basis.cols() == 0 {
        return Ok(1.0);
    }
    Ok(chi_constant(&basis.transpose())? + 1.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct CaReport {
    pub value: f64,
    /// Sign vector attaining the maximum (empty when the nullspace is
    /// trivial and the constant is 0).
    pub witness_sign: Vec<f64>,
}

/// Instance-level constant
///   C_A = max over s in {-1,+1}^n with P_Null(A) s != 0 of
///         script_k([A; s^T]) / ||P_Null(A) s||_2,
/// and 0 when no sign vector has a nonzero nullspace component.
/// s and -s give the same value, so only half the cube is visited.
pub fn c_a(a: &DenseMatrix) -> Result<CaReport> {
    let n = a.cols();
    if n > SIGN_ENUM_MAX_COLS {
        return Err(Error::SizeLimit(format!(
            "sign enumeration over 2^{} vectors exceeds the cap",
            n - 1
        )));
    }
    let basis = nullspace_basis(a, 0.0)?;
    if basis.cols() == 0 {
        return Ok(CaReport { value: 0.0, witness_sign: Vec::new() });
    }
    let mut best: Option<CaReport> = None;
    // fix s_1 = +1; the complement sign vector gives the same value
    for mask in 0..(1u64 << (n - 1)) {
        let s: Vec<f64> = (0..n)
            .map(|j| {
                if j == 0 {
                    1.0
                } else if mask >> (j - 1) & 1 == 1 {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect();
        let proj = nullspace_project(&basis, &s);
        let pn = norm2(&proj);
        if pn <= 1e-12 * (n as f64).sqrt() {
            continue;
        }
        let aug = a.with_appended_row(&s)?;
        let value = script_k(&aug)? / pn;
        if best.as_ref().map_or(true, |b| value > b.value) {
            best = Some(CaReport { value, witness_sign: s });
        }
    }
    Ok(best.unwrap_or(CaReport { value: 0.0, witness_sign: Vec::new() }))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub nullity: usize,
    pub script_k: f64,
    /// None when the column count exceeds the sign-enumeration cap.
    pub c_a: Option<CaReport>,
}

pub fn condition_report(a: &DenseMatrix) -> Result<ConditionReport> {
    let nullity = nullspace_basis(a, 0.0)?.cols();
    let sk = script_k(a)?;
    let ca = match c_a(a) {
        Ok(r) => Some(r),
        Err(Error::SizeLimit(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ConditionReport { nullity, script_k: sk, c_a: ca })
}
