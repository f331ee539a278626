//! Regression instances: a full-row-rank sensing matrix paired with a
//! nonzero target. Ships the small worked examples used throughout the
//! tests and experiments, together with their closed-form minimizers
//! where those exist.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd_summary, DenseMatrix};

/// Over-parameterized least-squares problem `A z = y` with A of size
/// m x n, m <= n, rank(A) = m, and y != 0. Construction validates all
/// three and caches the extreme singular values.
#[derive(Clone, Debug)]
pub struct RegressionInstance {
    a: DenseMatrix,
    y: Vec<f64>,
    op_norm: f64,
    sigma_min: f64,
}

/// Plain serializable form for loading instances from JSON files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceData {
    pub a: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl RegressionInstance {
    pub fn new(a: DenseMatrix, y: Vec<f64>) -> Result<Self> {
        if y.len() != a.rows() {
            return Err(Error::InvalidInput(format!(
                "target length {} does not match row count {}",
                y.len(),
                a.rows()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("target entries must be finite".into()));
        }
        if y.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidInput("target must be nonzero".into()));
        }
        if a.rows() > a.cols() {
            return Err(Error::InvalidInput(format!(
                "need at least as many columns as rows, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let svd = svd_summary(&a, 0.0)?;
        if svd.rank() < a.rows() {
            return Err(Error::RankDeficient(format!(
                "matrix has rank {} < {} rows; reduce it to full row rank first",
                svd.rank(),
                a.rows()
            )));
        }
        let op_norm = svd.op_norm();
        let sigma_min = svd.sigma_min();
        Ok(Self { a, y, op_norm, sigma_min })
    }

    pub fn from_parts(data: &InstanceData) -> Result<Self> {
        let a = DenseMatrix::from_rows(&data.a)?;
        Self::new(a, data.y.clone())
    }

    pub fn to_parts(&self) -> InstanceData {
        InstanceData {
            a: (0..self.a.rows()).map(|i| self.a.row(i).to_vec()).collect(),
            y: self.y.clone(),
        }
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Number of observations m.
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    /// Number of unknowns n.
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    /// Largest singular value of A.
    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    /// Smallest singular value of A; positive by the rank check.
    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }
}

// ── builtin instances ────────────────────────────────────────────────

/// 3x5 dense instance with no visible structure; the workhorse for
/// trajectory and sweep experiments.
pub fn instance_a1() -> RegressionInstance {
    let a = DenseMatrix::from_rows(&[
        vec![-0.111, 0.120, -0.370, -0.240, -1.197],
        vec![0.209, -0.972, -0.755, 0.324, -0.109],
        vec![0.210, -0.391, 0.235, 0.665, 0.353],
    ])
    .expect("builtin shape");
    RegressionInstance::new(a, vec![0.973, -0.039, -0.886]).expect("builtin is well posed")
}

/// 2x3 instance whose minimum-l1 solutions form the segment
/// (1-mu, 2-2mu, 3mu), mu in [0, 1], with l1 norm 3 throughout. The
/// selected solution has the closed form `wp_closed_form_a2`.
pub fn instance_a2() -> RegressionInstance {
    let a = DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0], vec![3.0, 0.0, 1.0]])
        .expect("builtin shape");
    RegressionInstance::new(a, vec![3.0, 3.0]).expect("builtin is well posed")
}

/// 2x4 instance extending `instance_a2` by a coordinate forced to
/// zero on the optimal face: solutions are (1-mu, 2-2mu, 3mu, 0).
pub fn instance_a3() -> RegressionInstance {
    let a = DenseMatrix::from_rows(&[vec![2.0, -1.0, 0.0, 1.0], vec![0.0, 3.0, 2.0, 0.0]])
        .expect("builtin shape");
    RegressionInstance::new(a, vec![0.0, 6.0]).expect("builtin is well posed")
}

/// One-row family A = [1, 1-eps], y = 1. For eps in (0, 1) the unique
/// minimum-l1 solution is (1, 0); as eps -> 0 the selection problem
/// degenerates, which is what the shift experiment probes.
pub fn shift_instance(eps: f64) -> Result<RegressionInstance> {
    if !eps.is_finite() {
        return Err(Error::InvalidInput("shift parameter must be finite".into()));
    }
    let a = DenseMatrix::from_rows(&[vec![1.0, 1.0 - eps]])?;
    RegressionInstance::new(a, vec![1.0])
}

/// Random dense instance with standard normal entries. Retries the
/// draw on the (measure-zero) degenerate outcomes so the result always
/// validates.
pub fn random_instance(rng: &mut crate::rng::SplitMix64, m: usize, n: usize) -> Result<RegressionInstance> {
    if m == 0 || n < m {
        return Err(Error::InvalidInput(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
    }
    for _ in 0..16 {
        let data: Vec<f64> = (0..m * n).map(|_| rng.normal()).collect();
        let a = DenseMatrix::new(m, n, data)?;
        let y: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
        if let Ok(inst) = RegressionInstance::new(a, y) {
            return Ok(inst);
        }
    }
    Err(Error::Numerical("random instance generation kept hitting degenerate draws".into()))
}

// ── closed-form selected solutions on the builtin segment ────────────

/// Entropy-maximizing parameter on the segment of `instance_a2` /
/// `instance_a3`: mu = 4^{1/3} / (3 + 4^{1/3}), equivalently
/// (4 - 6 * 2^{1/3} + 9 * 4^{1/3}) / 31.
pub fn mu_2() -> f64 {
    let c = 4.0_f64.cbrt();
    c / (3.0 + c)
}

/// l_{2/p} maximizing parameter on the same segment for p > 2:
/// mu_p = 1 / (1 + (3^{2/p} / (2^{2/p} + 1))^{-p/(p-2)}).
pub fn mu_p(p: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::InvalidInput(format!("mu_p needs p > 2, got {p}")));
    }
    let b = 2.0 / p;
    let ratio = 3.0_f64.powf(b) / (2.0_f64.powf(b) + 1.0);
    Ok(1.0 / (1.0 + ratio.powf(-p / (p - 2.0))))
}

fn mu_for_depth(p: f64) -> Result<f64> {
    if p == 2.0 {
        Ok(mu_2())
    } else {
        mu_p(p)
    }
}

/// Selected solution (1-mu, 2-2mu, 3mu) on `instance_a2`.
pub fn wp_closed_form_a2(p: f64) -> Result<Vec<f64>> {
    let mu = mu_for_depth(p)?;
    Ok(vec![1.0 - mu, 2.0 - 2.0 * mu, 3.0 * mu])
}

/// Selected solution (1-mu, 2-2mu, 3mu, 0) on `instance_a3`.
pub fn wp_closed_form_a3(p: f64) -> Result<Vec<f64>> {
    let mu = mu_for_depth(p)?;
    Ok(vec![1.0 - mu, 2.0 - 2.0 * mu, 3.0 * mu, 0.0])
}
