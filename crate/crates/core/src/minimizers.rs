//! Minimum-l1 solution sets and the potential minimizers selected on
//! them. The pipeline is: basis pursuit gives the optimal value R,
//! face probing describes the whole solution set U(A, y) = {z : Az = y,
//! ||z||_1 = R} (sign pattern, forced zeros, vertices, an interior
//! point), and three selections live on top of it:
//!
//!  * `wp_select`: the entropy maximizer (depth 2) or l_{2/p} quasi-norm
//!    maximizer (depth > 2) over the face, the implicit-bias target;
//!  * `solve_qstar`: the unconstrained-sign mirror potential minimizer
//!    over {Az = y}, the vanishing-step limit of the flow;
//!  * `solve_mstar`: the mirror potential minimizer restricted to the
//!    face.

pub mod simplex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instances::RegressionInstance;
use crate::linalg::{
    dot, norm1, norm2, nullspace_basis, sub, svd_summary, thin_qr, DenseMatrix, LuFactor,
};
use crate::potentials::Hyperparams;
use crate::tol;

/// Vertex enumeration cost is binomial; above this many columns the
/// face description goes without the vertex list.
pub const VERTEX_ENUM_MAX_COLS: usize = 12;

// ── basis pursuit ────────────────────────────────────────────────────

#[derive(Clone, Debug, Serialize)]
pub struct BasisPursuit {
    pub z: Vec<f64>,
    pub l1_norm: f64,
}

/// Minimum-l1 solution of `A z = y` via the positive/negative split
/// z = x+ - x-, solved exactly with the simplex method. The returned
/// point is one vertex of the optimal face.
pub fn solve_bp(inst: &RegressionInstance) -> Result<BasisPursuit> {
    let a = inst.a();
    let (m, n) = (a.rows(), a.cols());
    let mut e = DenseMatrix::zeros(m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            e.set(i, j, a.get(i, j));
            e.set(i, n + j, -a.get(i, j));
        }
    }
    let c = vec![1.0; 2 * n];
    let sol = simplex::solve_lp(&e, inst.y(), &c)?;
    let z: Vec<f64> = (0..n).map(|j| sol.x[j] - sol.x[n + j]).collect();
    Ok(BasisPursuit { l1_norm: sol.objective, z })
}

// ── the optimal face ─────────────────────────────────────────────────

/// Description of the full minimum-l1 solution set.
#[derive(Clone, Debug, Serialize)]
pub struct OptimalFace {
    /// Optimal value R = min ||z||_1.
    pub l1_norm: f64,
    /// Sign template s in {-1, +1}^n: every face point satisfies
    /// s_i z_i >= 0, with +1 on coordinates forced to zero.
    pub sign_pattern: Vec<f64>,
    /// Coordinates identically zero on the face.
    pub forced_zeros: Vec<usize>,
    /// Complement of `forced_zeros`.
    pub support: Vec<usize>,
    /// Per-coordinate [min, max] of z_i over the face.
    pub coordinate_ranges: Vec<(f64, f64)>,
    /// A point in the relative interior (strictly nonzero on the
    /// support), from the max-margin linear program.
    pub interior_point: Vec<f64>,
    /// Extreme points, enumerated when n <= `VERTEX_ENUM_MAX_COLS`.
    pub vertices: Option<Vec<Vec<f64>>>,
    /// Affine dimension of the face.
    pub dimension: usize,
}

/// Face membership tolerance, scaled by the optimal value.
fn face_tol(r: f64) -> f64 {
    tol::FACE_VERTEX * (1.0 + r)
}

/// Equality matrix of the lifted face polytope: variables
/// (x+, x-, t) >= 0 with A(x+ - x-) = y and 1^T x+ + 1^T x- + t = R.
/// Because R is the optimal value, feasible points automatically have
/// t = 0 and complementary splits, so the z-projection is exactly the
/// face; no objective perturbation is needed.
fn face_lp_system(inst: &RegressionInstance, r: f64) -> (DenseMatrix, Vec<f64>) {
    let a = inst.a();
    let (m, n) = (a.rows(), a.cols());
    let mut e = DenseMatrix::zeros(m + 1, 2 * n + 1);
    for i in 0..m {
        for j in 0..n {
            e.set(i, j, a.get(i, j));
            e.set(i, n + j, -a.get(i, j));
        }
    }
    for j in 0..2 * n {
        e.set(m, j, 1.0);
    }
    e.set(m, 2 * n, 1.0);
    let mut b = inst.y().to_vec();
    b.push(r);
    (e, b)
}

/// Full description of the optimal face. Costs 2n + 2 small linear
/// programs (coordinate ranges, basis pursuit, interior margin).
pub fn optimal_face(inst: &RegressionInstance) -> Result<OptimalFace> {
    let bp = solve_bp(inst)?;
    let r = bp.l1_norm;
    let n = inst.n();
    let tol_face = face_tol(r);
    let (e, b) = face_lp_system(inst, r);
    let mut ranges = Vec::with_capacity(n);
    for i in 0..n {
        // max z_i and min z_i over the face
        let mut c = vec![0.0; 2 * n + 1];
        c[i] = -1.0;
        c[n + i] = 1.0;
        let hi = -simplex::solve_lp(&e, &b, &c)?.objective;
        for v in c.iter_mut() {
            *v = -*v;
        }
        let lo = simplex::solve_lp(&e, &b, &c)?.objective;
        ranges.push((lo, hi));
    }
    let mut sign_pattern = vec![0.0; n];
    let mut forced_zeros = Vec::new();
    let mut support = Vec::new();
    for (i, &(lo, hi)) in ranges.iter().enumerate() {
        if hi <= tol_face && lo >= -tol_face {
            sign_pattern[i] = 1.0;
            forced_zeros.push(i);
        } else if hi > tol_face && lo >= -tol_face {
            sign_pattern[i] = 1.0;
            support.push(i);
        } else if lo < -tol_face && hi <= tol_face {
            sign_pattern[i] = -1.0;
            support.push(i);
        } else {
            return Err(Error::Numerical(format!(
                "face straddles zero in coordinate {i}: range [{lo:.3e}, {hi:.3e}]"
            )));
        }
    }
    let interior_point =
        interior_by_margin(inst, r, &support, &sign_pattern).map(|v| {
            let mut z = vec![0.0; n];
            for (j, &i) in support.iter().enumerate() {
                z[i] = sign_pattern[i] * v[j];
            }
            z
        })?;
    let vertices = if n <= VERTEX_ENUM_MAX_COLS {
        Some(enumerate_vertices(inst, r, &support, &sign_pattern)?)
    } else {
        None
    };
    let dimension = face_dimension(inst, &support, &sign_pattern)?;
    Ok(OptimalFace {
        l1_norm: r,
        sign_pattern,
        forced_zeros,
        support,
        coordinate_ranges: ranges,
        interior_point,
        vertices,
        dimension,
    })
}

/// Columns of A restricted to the support, scaled by the sign template
/// so that face points become v >= 0 in these coordinates.
fn signed_support_columns(
    inst: &RegressionInstance,
    support: &[usize],
    sign: &[f64],
) -> DenseMatrix {
    let a = inst.a();
    let mut out = DenseMatrix::zeros(a.rows(), support.len());
    for (jj, &j) in support.iter().enumerate() {
        for i in 0..a.rows() {
            out.set(i, jj, sign[j] * a.get(i, j));
        }
    }
    out
}

/// Max-margin linear program: maximize t such that v = t 1 + u lies on
/// the face (in signed support coordinates). The optimum is strictly
/// positive whenever the support is correct, and v* = t* 1 + u* is a
/// relative interior point with margin t*.
fn interior_by_margin(
    inst: &RegressionInstance,
    r: f64,
    support: &[usize],
    sign: &[f64],
) -> Result<Vec<f64>> {
    let k = support.len();
    if k == 0 {
        return Err(Error::Numerical("optimal face has empty support".into()));
    }
    let asig = signed_support_columns(inst, support, sign);
    let m = asig.rows();
    // variables (u_1..u_k, t)
    let mut e = DenseMatrix::zeros(m + 1, k + 1);
    for i in 0..m {
        let mut rowsum = 0.0;
        for j in 0..k {
            e.set(i, j, asig.get(i, j));
            rowsum += asig.get(i, j);
        }
        e.set(i, k, rowsum);
    }
    for j in 0..k {
        e.set(m, j, 1.0);
    }
    e.set(m, k, k as f64);
    let mut b = inst.y().to_vec();
    b.push(r);
    // the budget row can coincide with a data row (any instance whose
    // signed support row is constant), so reduce to full row rank first
    let (e, b) = reduce_rank_deficient(&e, &b)?;
    let mut c = vec![0.0; k + 1];
    c[k] = -1.0;
    let sol = simplex::solve_lp(&e, &b, &c)?;
    let t = sol.x[k];
    if t <= face_tol(r) {
        return Err(Error::Numerical(format!(
            "interior margin {t:.3e} is not positive; support detection failed"
        )));
    }
    Ok((0..k).map(|j| sol.x[j] + t).collect())
}

/// Extreme points of the face by support enumeration: a vertex is the
/// unique solution of [A_S; s_S^T] z_S = [y; R] for an independent
/// column subset S with the right signs.
fn enumerate_vertices(
    inst: &RegressionInstance,
    r: f64,
    support: &[usize],
    sign: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let a = inst.a();
    let m = a.rows();
    let n = a.cols();
    let tol_face = face_tol(r);
    let mut rhs = inst.y().to_vec();
    rhs.push(r);
    let mut out: Vec<Vec<f64>> = Vec::new();
    let max_size = (m + 1).min(support.len());
    let mut subset = Vec::new();
    enumerate_subsets(support, max_size, &mut subset, &mut |s| {
        if s.is_empty() {
            return Ok(());
        }
        // stacked constraint matrix on the candidate support
        let mut cmat = DenseMatrix::zeros(m + 1, s.len());
        for (jj, &j) in s.iter().enumerate() {
            for i in 0..m {
                cmat.set(i, jj, a.get(i, j));
            }
            cmat.set(m, jj, sign[j]);
        }
        if svd_summary(&cmat, 0.0)?.rank() < s.len() {
            return Ok(());
        }
        let (q, rr) = thin_qr(&cmat)?;
        if rr.rows() < s.len() {
            return Ok(());
        }
        let qt_rhs = q.t_matvec(&rhs);
        let zs = match LuFactor::new(&rr) {
            Ok(lu) => lu.solve(&qt_rhs),
            Err(_) => return Ok(()),
        };
        // must solve the full system and respect the sign template
        let mut z = vec![0.0; n];
        for (jj, &j) in s.iter().enumerate() {
            z[j] = zs[jj];
        }
        let resid = sub(&a.matvec(&z), inst.y());
        if norm2(&resid) > tol_face {
            return Ok(());
        }
        if (norm1(&z) - r).abs() > tol_face {
            return Ok(());
        }
        if z.iter().enumerate().any(|(j, &zj)| sign[j] * zj < -tol_face) {
            return Ok(());
        }
        for zj in z.iter_mut() {
            if zj.abs() <= tol_face {
                *zj = 0.0;
            }
        }
        if !out.iter().any(|v| norm2(&sub(v, &z)) <= 1e-8 * (1.0 + r)) {
            out.push(z);
        }
        Ok(())
    })?;
    if out.is_empty() {
        return Err(Error::Numerical("vertex enumeration found no extreme points".into()));
    }
    Ok(out)
}

fn enumerate_subsets(
    pool: &[usize],
    max_size: usize,
    current: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    visit(current)?;
    if current.len() == max_size {
        return Ok(());
    }
    let start = current
        .last()
        .map(|&last| pool.iter().position(|&p| p == last).unwrap() + 1)
        .unwrap_or(0);
    for idx in start..pool.len() {
        current.push(pool[idx]);
        enumerate_subsets(pool, max_size, current, visit)?;
        current.pop();
    }
    Ok(())
}

/// Affine dimension: support size minus the rank of the active
/// constraints [A_supp; s_supp^T].
fn face_dimension(
    inst: &RegressionInstance,
    support: &[usize],
    sign: &[f64],
) -> Result<usize> {
    let a = inst.a();
    let m = a.rows();
    let k = support.len();
    let mut cmat = DenseMatrix::zeros(m + 1, k);
    for (jj, &j) in support.iter().enumerate() {
        for i in 0..m {
            cmat.set(i, jj, a.get(i, j));
        }
        cmat.set(m, jj, sign[j]);
    }
    Ok(k - svd_summary(&cmat, 0.0)?.rank())
}

// ── shared face geometry for the on-face solvers ─────────────────────

/// Reduced coordinates for optimization over the face: the face in
/// signed support coordinates is {v >= 0 : csys v = d}, with csys of
/// full row rank, `basis` an orthonormal basis of its nullspace, and
/// `v0` a strictly positive feasible start.
struct FaceGeometry {
    basis: DenseMatrix,
    v0: Vec<f64>,
}

fn face_geometry(inst: &RegressionInstance, face: &OptimalFace) -> Result<FaceGeometry> {
    let k = face.support.len();
    let asig = signed_support_columns(inst, &face.support, &face.sign_pattern);
    let m = asig.rows();
    let mut cfull = DenseMatrix::zeros(m + 1, k);
    for i in 0..m {
        for j in 0..k {
            cfull.set(i, j, asig.get(i, j));
        }
    }
    for j in 0..k {
        cfull.set(m, j, 1.0);
    }
    let mut d = inst.y().to_vec();
    d.push(face.l1_norm);
    // the l1 row may be implied by the data rows; reduce to full rank
    let (csys, d) = reduce_rank_deficient(&cfull, &d)?;
    let basis = nullspace_basis(&csys, 0.0)?;
    let mut v0: Vec<f64> = face
        .support
        .iter()
        .map(|&i| face.sign_pattern[i] * face.interior_point[i])
        .collect();
    // re-project the start onto the affine set to clean LP roundoff
    let resid = sub(&csys.matvec(&v0), &d);
    if norm2(&resid) > 0.0 {
        let gram = csys.matmul(&csys.transpose());
        let w = LuFactor::new(&gram)?.solve(&resid);
        let corr = csys.t_matvec(&w);
        for j in 0..k {
            v0[j] -= corr[j];
        }
    }
    if v0.iter().any(|&v| v <= 0.0) {
        return Err(Error::Numerical("face interior point lost positivity".into()));
    }
    Ok(FaceGeometry { basis, v0 })
}

// ── Newton on the face ───────────────────────────────────────────────

/// Damped Newton for a separable convex objective over the affine
/// slice of the positive orthant, in nullspace coordinates. `fgh`
/// returns (value, gradient, Hessian diagonal) at v > 0. Steps are
/// clipped to keep v strictly positive; convergence is by step
/// stagnation, which for an interior minimizer means full Newton steps
/// and machine-precision limits.
fn face_newton<F>(geom: &FaceGeometry, start: &[f64], fgh: F, max_iter: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>, Vec<f64>),
{
    let z = &geom.basis;
    let f_dim = z.cols();
    let mut v = start.to_vec();
    if f_dim == 0 {
        return Ok(v);
    }
    let k = v.len();
    let newton_step = |g: &[f64], h: &[f64]| -> Result<Vec<f64>> {
        let gz = z.t_matvec(g);
        // reduced Hessian Z^T diag(h) Z
        let mut hz = DenseMatrix::zeros(f_dim, f_dim);
        for a in 0..f_dim {
            for b in a..f_dim {
                let mut acc = 0.0;
                for i in 0..k {
                    acc += z.get(i, a) * h[i] * z.get(i, b);
                }
                hz.set(a, b, acc);
                hz.set(b, a, acc);
            }
        }
        let du = match LuFactor::new(&hz) {
            Ok(lu) => lu.solve(&gz.iter().map(|x| -x).collect::<Vec<_>>()),
            Err(_) => return Err(Error::Numerical("singular reduced Hessian on face".into())),
        };
        Ok(z.matvec(&du))
    };
    for _ in 0..max_iter {
        let (fv, g, h) = fgh(&v);
        let dv = newton_step(&g, &h)?;
        let slope = dot(&g, &dv);
        if slope >= 0.0 {
            break;
        }
        // fraction to boundary
        let mut alpha: f64 = 1.0;
        for i in 0..k {
            if dv[i] < 0.0 {
                alpha = alpha.min(-0.995 * v[i] / dv[i]);
            }
        }
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..k).map(|i| v[i] + alpha * dv[i]).collect();
            if trial.iter().all(|&t| t > 0.0) {
                let (ft, _, _) = fgh(&trial);
                if ft <= fv + 1e-4 * alpha * slope {
                    v = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        let step = alpha * norm2(&dv);
        if step <= 1e-15 * (1.0 + norm2(&v)) {
            break;
        }
    }
    // the damped phase stalls once the Armijo comparison sinks under
    // value roundoff, which leaves ~1e-8 in the coordinates; a few
    // undamped steps from there contract quadratically to machine scale
    for _ in 0..8 {
        let (_, g, h) = fgh(&v);
        let dv = newton_step(&g, &h)?;
        if dv.iter().any(|d| !d.is_finite()) {
            break;
        }
        // a polish step that reaches for the boundary is distrusted
        if (0..k).any(|i| dv[i] < 0.0 && v[i] + dv[i] <= 0.005 * v[i]) {
            break;
        }
        for i in 0..k {
            v[i] += dv[i];
        }
        if norm2(&dv) <= 1e-16 * (1.0 + norm2(&v)) {
            break;
        }
    }
    Ok(v)
}

// ── the selected solution w_p ────────────────────────────────────────

/// The face point singled out in the small-initialization limit: the
/// entropy maximizer for depth 2, the l_{2/p} quasi-norm maximizer for
/// depth > 2. The objective's derivative is unbounded at zero, so the
/// maximizer is strictly inside its face and plain Newton reaches it
/// at machine precision.
pub fn wp_select_on_face(
    inst: &RegressionInstance,
    p: f64,
    face: &OptimalFace,
) -> Result<Vec<f64>> {
    if !(p >= 2.0) {
        return Err(Error::InvalidInput(format!("depth p must be >= 2, got {p}")));
    }
    let geom = face_geometry(inst, face)?;
    let fgh = |v: &[f64]| {
        let kdim = v.len();
        let mut val = 0.0;
        let mut g = vec![0.0; kdim];
        let mut h = vec![0.0; kdim];
        if p == 2.0 {
            for i in 0..kdim {
                val += v[i] * v[i].ln();
                g[i] = v[i].ln() + 1.0;
                h[i] = 1.0 / v[i];
            }
        } else {
            let e = 2.0 / p;
            for i in 0..kdim {
                val -= v[i].powf(e);
                g[i] = -e * v[i].powf(e - 1.0);
                h[i] = e * (1.0 - e) * v[i].powf(e - 2.0);
            }
        }
        (val, g, h)
    };
    let v = face_newton(&geom, &geom.v0, fgh, 500)?;
    let mut z = vec![0.0; inst.n()];
    for (j, &i) in face.support.iter().enumerate() {
        z[i] = face.sign_pattern[i] * v[j];
    }
    Ok(z)
}

pub fn wp_select(inst: &RegressionInstance, p: f64) -> Result<Vec<f64>> {
    let face = optimal_face(inst)?;
    wp_select_on_face(inst, p, &face)
}

// ── the mirror potential minimizer over {Az = y} ─────────────────────

#[derive(Clone, Debug, Serialize)]
pub struct MirrorMinimizer {
    pub z: Vec<f64>,
    /// Dual vector lambda with grad Q(z) = A^T lambda.
    pub dual: Vec<f64>,
    pub potential: f64,
}

/// Minimizer of the mirror potential Q over all solutions of Az = y
/// (no sign restriction), which is the t -> infinity limit of the
/// gradient flow. Solved in the dual: find lambda with
/// A zeta(A^T lambda) = y, where zeta_i = alpha^p h_p(v_i); the dual
/// objective sum Theta(v_i) - lambda^T y is smooth and strictly
/// convex, and for p > 2 it blows up as ||A^T lambda||_inf -> 1, so
/// the domain edge acts as its own barrier. The dual stays
/// well-conditioned at initializations far too small for the primal
/// normal equations, which lose the cross-valley curvature to
/// cancellation.
pub fn solve_qstar(inst: &RegressionInstance, hp: &Hyperparams) -> Result<MirrorMinimizer> {
    let a = inst.a();
    let m = a.rows();
    let y = inst.y();
    let p = hp.p();
    let mut lambda = vec![0.0; m];
    let phi = |lam: &[f64]| -> Result<f64> {
        let v = a.t_matvec(lam);
        let mut acc = 0.0;
        for &vi in &v {
            acc += hp.theta_big(vi)?;
        }
        Ok(acc - dot(lam, y))
    };
    let mut phi_cur = phi(&lambda)?;
    for _ in 0..300 {
        let v = a.t_matvec(&lambda);
        let mut zeta = vec![0.0; v.len()];
        let mut dzeta = vec![0.0; v.len()];
        for (i, &vi) in v.iter().enumerate() {
            zeta[i] = hp.zeta(vi)?;
            dzeta[i] = hp.zeta_prime(vi)?;
        }
        let f = sub(&a.matvec(&zeta), y);
        let f_norm = norm2(&f);
        if f_norm <= 0.5 * tol::QSTAR_GRAD * (1.0 + norm2(y)) {
            break;
        }
        // J = A diag(zeta') A^T, symmetric positive definite
        let mut j = DenseMatrix::zeros(m, m);
        for r in 0..m {
            for c in r..m {
                let mut acc = 0.0;
                for i in 0..a.cols() {
                    acc += a.get(r, i) * dzeta[i] * a.get(c, i);
                }
                j.set(r, c, acc);
                j.set(c, r, acc);
            }
        }
        let dl = LuFactor::new(&j)?.solve(&f.iter().map(|x| -x).collect::<Vec<_>>());
        let slope = dot(&f, &dl);
        if slope >= 0.0 {
            break;
        }
        let mut alpha: f64 = 1.0;
        if p > 2.0 {
            // keep ||A^T lambda||_inf strictly inside the unit box
            let dv = a.t_matvec(&dl);
            for i in 0..dv.len() {
                if dv[i] > 0.0 {
                    alpha = alpha.min(0.99 * (1.0 - v[i]) / dv[i]);
                } else if dv[i] < 0.0 {
                    alpha = alpha.min(0.99 * (-1.0 - v[i]) / dv[i]);
                }
            }
        }
        let resid_norm = |lam: &[f64]| -> Result<f64> {
            let v = a.t_matvec(lam);
            let mut zt = vec![0.0; v.len()];
            for (i, &vi) in v.iter().enumerate() {
                zt[i] = hp.zeta(vi)?;
            }
            Ok(norm2(&sub(&a.matvec(&zt), y)))
        };
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..m).map(|i| lambda[i] + alpha * dl[i]).collect();
            if let Ok(pt) = phi(&trial) {
                // phi flattens to rounding noise before the residual
                // does, so near the solution progress is measured on
                // the residual itself
                let armijo = pt <= phi_cur + 1e-4 * alpha * slope;
                let resid_ok = || matches!(resid_norm(&trial),
                    Ok(rn) if rn <= (1.0 - 1e-4 * alpha) * f_norm);
                if armijo || resid_ok() {
                    lambda = trial;
                    phi_cur = pt;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
        if alpha * norm2(&dl) <= 1e-15 * (1.0 + norm2(&lambda)) {
            break;
        }
    }
    let v = a.t_matvec(&lambda);
    let mut z = vec![0.0; v.len()];
    for (i, &vi) in v.iter().enumerate() {
        z[i] = hp.zeta(vi)?;
    }
    let resid = norm2(&sub(&a.matvec(&z), y));
    // for p > 2 the plain dual cannot resolve edge gaps below the
    // cancellation floor of 1 - |A^T lambda|; the shifted frame can,
    // so prefer it whenever it reproduces the data at least as well
    if p > 2.0 {
        if let Ok(refined) = qstar_edge_refine(inst, hp, &lambda) {
            let r_ref = norm2(&sub(&a.matvec(&refined.z), y));
            if r_ref <= resid {
                return Ok(refined);
            }
        }
    }
    if resid > tol::QSTAR_GRAD * (1.0 + norm2(y)) {
        return Err(Error::Numerical(format!(
            "dual Newton stalled with residual {resid:.3e}"
        )));
    }
    Ok(MirrorMinimizer { potential: hp.mirror_potential(&z), z, dual: lambda })
}

/// Small overdetermined least squares via normal equations; `rows` all
/// have length `dim`.
fn lsq_normal(rows: &[Vec<f64>], b: &[f64], dim: usize) -> Result<Vec<f64>> {
    let mut g = DenseMatrix::zeros(dim, dim);
    let mut rhs = vec![0.0; dim];
    for (row, &bi) in rows.iter().zip(b) {
        for r in 0..dim {
            rhs[r] += row[r] * bi;
            for c in 0..dim {
                g.set(r, c, g.get(r, c) + row[r] * row[c]);
            }
        }
    }
    Ok(LuFactor::new(&g)?.solve(&rhs))
}

/// Dual solve rewritten around the limit certificate. At small alpha
/// the support coordinates of v = A^T lambda sit within ~alpha^{p-2}
/// of +-1, and forming the gap 1 - |v_i| from an order-one lambda
/// loses everything past the cancellation floor. With lambda =
/// lambda_inf + dl, where A^T lambda_inf equals the sign template on
/// the support, each gap is a plain linear form in dl and carries full
/// relative precision, so Newton in dl resolves z to machine accuracy
/// however small alpha is.
fn qstar_edge_refine(
    inst: &RegressionInstance,
    hp: &Hyperparams,
    warm: &[f64],
) -> Result<MirrorMinimizer> {
    let p = hp.p();
    if p <= 2.0 {
        return Err(Error::InvalidInput("edge frame needs p > 2".into()));
    }
    let a = inst.a();
    let (m, n) = (a.rows(), a.cols());
    let y = inst.y();
    let edge_pow = p / (p - 2.0);
    let ap = hp.alpha_pow_p();
    let face = optimal_face(inst)?;
    let s = &face.sign_pattern;
    if face.support.len() < m {
        return Err(Error::Numerical("support too small to pin the limit dual".into()));
    }
    let mut on_support = vec![false; n];
    for &i in &face.support {
        on_support[i] = true;
    }
    let cols: Vec<Vec<f64>> = face.support.iter().map(|&i| a.col(i)).collect();
    let signs: Vec<f64> = face.support.iter().map(|&i| s[i]).collect();
    let lam_inf = lsq_normal(&cols, &signs, m)?;
    let v_inf = a.t_matvec(&lam_inf);
    for i in 0..n {
        if !on_support[i] && v_inf[i].abs() >= 1.0 - 1e-9 {
            return Err(Error::Numerical("limit dual degenerate off the support".into()));
        }
    }
    // constant part of each gap; exactly zero whenever the certificate
    // solves the support system exactly
    let gap0: Vec<f64> = face.support.iter().map(|&i| s[i] * (s[i] - v_inf[i])).collect();
    let eval = |dl: &[f64]| -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
        let adl = a.t_matvec(dl);
        let mut zeta = vec![0.0; n];
        let mut dzeta = vec![0.0; n];
        for i in 0..n {
            if !on_support[i] {
                let vi = v_inf[i] + adl[i];
                if vi.abs() >= 1.0 {
                    return None;
                }
                zeta[i] = hp.zeta(vi).ok()?;
                dzeta[i] = hp.zeta_prime(vi).ok()?;
            }
        }
        for (k, &i) in face.support.iter().enumerate() {
            let gap = gap0[k] - s[i] * adl[i];
            if !(gap > 0.0 && gap < 2.0) {
                return None;
            }
            let lo = gap.powf(-edge_pow);
            let hi = (2.0 - gap).powf(-edge_pow);
            zeta[i] = s[i] * ap * (lo - hi);
            dzeta[i] = ap * edge_pow * (lo / gap + hi / (2.0 - gap));
        }
        let r = sub(&a.matvec(&zeta), y);
        let rn = norm2(&r);
        Some((zeta, dzeta, r, rn))
    };
    let mut dl = sub(warm, &lam_inf);
    let mut state = eval(&dl);
    if state.is_none() {
        // leading-order start: gaps matched to the face interior point
        let rhs: Vec<f64> = face
            .support
            .iter()
            .zip(&gap0)
            .map(|(&i, &g0)| {
                let zi = (s[i] * face.interior_point[i]).max(1e-300);
                let gap_t = (zi / ap).powf(-1.0 / edge_pow).clamp(1e-300, 1.0);
                s[i] * (g0 - gap_t)
            })
            .collect();
        dl = lsq_normal(&cols, &rhs, m)?;
        state = eval(&dl);
    }
    let Some((mut zeta, mut dzeta, mut r, mut rn)) = state else {
        return Err(Error::Numerical("no valid start in the edge frame".into()));
    };
    let target = 1e-3 * tol::QSTAR_GRAD * (1.0 + norm2(y));
    for _ in 0..80 {
        if rn <= target {
            break;
        }
        let mut j = DenseMatrix::zeros(m, m);
        for rr in 0..m {
            for cc in rr..m {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += a.get(rr, i) * dzeta[i] * a.get(cc, i);
                }
                j.set(rr, cc, acc);
                j.set(cc, rr, acc);
            }
        }
        let ddl = LuFactor::new(&j)?.solve(&r.iter().map(|x| -x).collect::<Vec<_>>());
        let mut tstep = 1.0_f64;
        let mut improved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..m).map(|i| dl[i] + tstep * ddl[i]).collect();
            if let Some((z2, dz2, r2, rn2)) = eval(&trial) {
                if rn2 <= rn * (1.0 - 1e-4 * tstep) || rn2 <= target {
                    dl = trial;
                    zeta = z2;
                    dzeta = dz2;
                    r = r2;
                    rn = rn2;
                    improved = true;
                    break;
                }
            }
            tstep *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if rn > tol::QSTAR_GRAD * (1.0 + norm2(y)) {
        return Err(Error::Numerical(format!(
            "edge-frame Newton stalled with residual {rn:.3e}"
        )));
    }
    let dual: Vec<f64> = (0..m).map(|i| lam_inf[i] + dl[i]).collect();
    Ok(MirrorMinimizer { potential: hp.mirror_potential(&zeta), z: zeta, dual })
}

/// Primal route for the same minimizer: Newton over z = z0 + B u with
/// B spanning Null(A). Agrees with `solve_qstar` at moderate alpha and
/// serves as a cross-check; at very small alpha the reduced Hessian
/// mixes coordinate scales of order alpha^{-p} and alpha^{p-2} and
/// loses the small ones to rounding, so prefer the dual route there.
pub fn solve_qstar_primal(inst: &RegressionInstance, hp: &Hyperparams) -> Result<Vec<f64>> {
    let a = inst.a();
    let z0 = crate::linalg::min_norm_solution(a, inst.y())?;
    let basis = nullspace_basis(a, 0.0)?;
    let f_dim = basis.cols();
    if f_dim == 0 {
        return Ok(z0);
    }
    let n = a.cols();
    let mut z = z0.clone();
    for _ in 0..300 {
        let g = hp.mirror_potential_grad(&z);
        let h = hp.mirror_potential_hess_diag(&z);
        let gz = basis.t_matvec(&g);
        let mut hz = DenseMatrix::zeros(f_dim, f_dim);
        for r in 0..f_dim {
            for c in r..f_dim {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += basis.get(i, r) * h[i] * basis.get(i, c);
                }
                hz.set(r, c, acc);
                hz.set(c, r, acc);
            }
        }
        let du = LuFactor::new(&hz)?.solve(&gz.iter().map(|x| -x).collect::<Vec<_>>());
        let dz = basis.matvec(&du);
        let mut alpha: f64 = 1.0;
        let fv = hp.mirror_potential(&z);
        let slope = dot(&g, &dz);
        if slope >= 0.0 {
            break;
        }
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..n).map(|i| z[i] + alpha * dz[i]).collect();
            let ft = hp.mirror_potential(&trial);
            if ft <= fv + 1e-4 * alpha * slope {
                z = trial;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
        if alpha * norm2(&dz) <= 1e-15 * (1.0 + norm2(&z)) {
            break;
        }
    }
    Ok(z)
}

// ── the mirror potential minimizer on the face ───────────────────────

/// Minimizer of the mirror potential restricted to the optimal face.
/// Unlike the selection objective, Q is smooth at zero, so the
/// minimizer can sit on the relative boundary; a log barrier with a
/// geometric schedule handles that without an active-set search.
pub fn solve_mstar(inst: &RegressionInstance, hp: &Hyperparams) -> Result<Vec<f64>> {
    let face = optimal_face(inst)?;
    solve_mstar_on_face(inst, hp, &face)
}

pub fn solve_mstar_on_face(
    inst: &RegressionInstance,
    hp: &Hyperparams,
    face: &OptimalFace,
) -> Result<Vec<f64>> {
    let geom = face_geometry(inst, face)?;
    let k = geom.v0.len();
    let ap = hp.alpha_pow_p();
    let p = hp.p();
    let mut v = geom.v0.clone();
    let mut t = 1.0;
    while k as f64 / t > tol::BARRIER_GAP {
        let fgh = |v: &[f64]| {
            let mut val = 0.0;
            let mut g = vec![0.0; k];
            let mut h = vec![0.0; k];
            for i in 0..k {
                let u = v[i] / ap;
                val += t * ap * crate::potentials::q_p(p, u) - v[i].ln();
                g[i] = t * crate::potentials::q_p_prime(p, u) - 1.0 / v[i];
                h[i] = t * crate::potentials::q_p_second(p, u) / ap + 1.0 / (v[i] * v[i]);
            }
            (val, g, h)
        };
        v = face_newton(&geom, &v, fgh, 80)?;
        t *= 10.0;
    }
    let mut z = vec![0.0; inst.n()];
    for (j, &i) in face.support.iter().enumerate() {
        z[i] = face.sign_pattern[i] * v[j];
    }
    Ok(z)
}

// ── KKT verification ─────────────────────────────────────────────────

/// Multiplier-based optimality check for `min f` subject to `C x = d`
/// and, optionally, active bounds x_i >= 0. Finds least-squares
/// multipliers for grad f = C^T lambda + sum_{i active} mu_i e_i and
/// reports the stationarity residual plus the most negative bound
/// multiplier (which must be >= 0 at a true minimizer). Inactive
/// bounds carry zero multipliers by construction, so complementary
/// slackness holds as long as `active` really lists the touching
/// constraints.
#[derive(Clone, Debug, Serialize)]
pub struct KktReport {
    pub stationarity_residual: f64,
    pub min_bound_multiplier: f64,
    pub satisfied: bool,
}

pub fn verify_kkt(
    grad: &[f64],
    equality: &DenseMatrix,
    active_bounds: &[usize],
    tol: f64,
) -> Result<KktReport> {
    let n = grad.len();
    if equality.cols() != n {
        return Err(Error::InvalidInput("KKT equality matrix has wrong width".into()));
    }
    let r = equality.rows();
    let cols = r + active_bounds.len();
    let mut mat = DenseMatrix::zeros(n, cols);
    for i in 0..n {
        for j in 0..r {
            mat.set(i, j, equality.get(j, i));
        }
    }
    for (jj, &i) in active_bounds.iter().enumerate() {
        mat.set(i, r + jj, 1.0);
    }
    let (q, rr) = thin_qr(&mat)?;
    let qt_g = q.t_matvec(grad);
    let proj = q.matvec(&qt_g);
    let stationarity_residual = norm2(&sub(grad, &proj));
    let mut min_bound_multiplier = 0.0_f64;
    if rr.rows() == cols {
        let xi = LuFactor::new(&rr)?.solve(&qt_g);
        for jj in 0..active_bounds.len() {
            min_bound_multiplier = min_bound_multiplier.min(xi[r + jj]);
        }
    }
    let scale = 1.0 + crate::linalg::norm_inf(grad);
    let satisfied =
        stationarity_residual <= tol * scale && min_bound_multiplier >= -tol * scale;
    Ok(KktReport { stationarity_residual, min_bound_multiplier, satisfied })
}

// ── rank reduction ───────────────────────────────────────────────────

/// Rewrite `A z = y` with a full-row-rank matrix: thin QR gives
/// A = Q R with R = Q^T A, and the system is equivalent to
/// R z = Q^T y provided y lies in the range of A (checked). Full-rank
/// inputs come back unchanged; the zero matrix is rejected by the
/// factorization.
pub fn reduce_rank_deficient(a: &DenseMatrix, y: &[f64]) -> Result<(DenseMatrix, Vec<f64>)> {
    if y.len() != a.rows() {
        return Err(Error::InvalidInput("right-hand side length mismatch".into()));
    }
    let (q, r) = thin_qr(a)?;
    if r.rows() == a.rows() {
        return Ok((a.clone(), y.to_vec()));
    }
    let qty = q.t_matvec(y);
    let back = q.matvec(&qty);
    let ny = norm2(y);
    if norm2(&sub(&back, y)) > tol::NULLSPACE_RESIDUAL_REL * (1.0 + ny) {
        return Err(Error::InvalidInput(
            "right-hand side is outside the range of the matrix".into(),
        ));
    }
    Ok((r, qty))
}

// ── combined report ──────────────────────────────────────────────────

/// Everything about the minimizers of one instance at one (p, alpha):
/// the face, the three selected points, their potentials, and the
/// pairwise distances.
#[derive(Clone, Debug, Serialize)]
pub struct MinimizerReport {
    pub l1_norm: f64,
    pub dimension: usize,
    pub forced_zeros: Vec<usize>,
    pub wp: Vec<f64>,
    pub qstar: Vec<f64>,
    pub mstar: Vec<f64>,
    pub qstar_l1: f64,
    pub qstar_potential: f64,
    pub mstar_potential: f64,
    pub dist_qstar_wp: f64,
    pub dist_mstar_wp: f64,
    pub dist_qstar_mstar: f64,
}

pub fn minimizer_set(inst: &RegressionInstance, hp: &Hyperparams) -> Result<MinimizerReport> {
    let face = optimal_face(inst)?;
    let wp = wp_select_on_face(inst, hp.p(), &face)?;
    let qs = solve_qstar(inst, hp)?;
    let ms = solve_mstar_on_face(inst, hp, &face)?;
    Ok(MinimizerReport {
        l1_norm: face.l1_norm,
        dimension: face.dimension,
        forced_zeros: face.forced_zeros.clone(),
        qstar_l1: norm1(&qs.z),
        qstar_potential: qs.potential,
        mstar_potential: hp.mirror_potential(&ms),
        dist_qstar_wp: norm2(&sub(&qs.z, &wp)),
        dist_mstar_wp: norm2(&sub(&ms, &wp)),
        dist_qstar_mstar: norm2(&sub(&qs.z, &ms)),
        wp,
        qstar: qs.z,
        mstar: ms,
    })
}
