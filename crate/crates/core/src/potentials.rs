//! Mirror link functions for diagonal networks of depth p and their
//! potentials. The family is
//!
//!   h_2(t) = 2 sinh(t)                        on all of R,
//!   h_p(t) = (1-t)^{-a} - (1+t)^{-a}          on (-1, 1), a = p/(p-2),
//!
//! for p > 2. Each h_p is odd, strictly increasing, and maps its
//! domain onto R, so the inverse is total. Integrating the inverse
//! gives the convex conjugate-style potential q_p; rescaling by the
//! initialization alpha gives the separable potentials the
//! trajectories minimize.

use crate::error::{Error, Result};
use crate::tol;

// ── hyperparameters ──────────────────────────────────────────────────

/// Depth p >= 2 and initialization scale alpha > 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparams {
    p: f64,
    alpha: f64,
}

impl Hyperparams {
    pub fn new(p: f64, alpha: f64) -> Result<Self> {
        if !p.is_finite() || p < 2.0 {
            return Err(Error::InvalidInput(format!("depth p must be finite and >= 2, got {p}")));
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "initialization alpha must be finite and > 0, got {alpha}"
            )));
        }
        Ok(Self { p, alpha })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Depth-2 uses the sinh branch everywhere; only p > 2 has the
    /// bounded domain and the power-law link.
    pub fn is_quadratic(&self) -> bool {
        self.p == 2.0
    }

    pub fn alpha_pow_p(&self) -> f64 {
        self.alpha.powf(self.p)
    }

    /// Separable potential Q(z) = alpha^p sum_i q_p(z_i / alpha^p),
    /// the quantity the limiting flow minimizes subject to the data.
    pub fn mirror_potential(&self, z: &[f64]) -> f64 {
        let ap = self.alpha_pow_p();
        z.iter().map(|&zi| ap * q_p(self.p, zi / ap)).sum()
    }

    /// Gradient of the mirror potential: component i is
    /// h_p^{-1}(z_i / alpha^p).
    pub fn mirror_potential_grad(&self, z: &[f64]) -> Vec<f64> {
        let ap = self.alpha_pow_p();
        z.iter().map(|&zi| h_p_inv(self.p, zi / ap)).collect()
    }

    /// Diagonal of the mirror potential Hessian: component i is
    /// 1 / (alpha^p h_p'(h_p^{-1}(z_i / alpha^p))). Always finite and
    /// positive since h_p' >= h_p'(0) = 2a > 0.
    pub fn mirror_potential_hess_diag(&self, z: &[f64]) -> Vec<f64> {
        let ap = self.alpha_pow_p();
        z.iter()
            .map(|&zi| {
                let t = h_p_inv(self.p, zi / ap);
                1.0 / (ap * h_p_prime(self.p, t).expect("inverse stays interior"))
            })
            .collect()
    }

    /// Low-alpha limit shape G(z) = alpha^p sum_i g_p(z_i / alpha^p).
    /// On a fixed face of the l1 ball its minimizers coincide with the
    /// entropy maximizer (p = 2) or the l_{2/p} quasi-norm maximizer
    /// (p > 2).
    pub fn limit_potential(&self, z: &[f64]) -> f64 {
        let ap = self.alpha_pow_p();
        z.iter().map(|&zi| ap * g_p(self.p, zi / ap)).sum()
    }

    /// Primitive of the link scaled by alpha: Theta(s) = alpha^p
    /// int_0^s h_p. Strictly convex; for p > 2 it blows up as |s| -> 1,
    /// which is what makes it a natural barrier for the dual solve.
    pub fn theta_big(&self, s: f64) -> Result<f64> {
        Ok(self.alpha_pow_p() * theta_primitive(self.p, s)?)
    }

    /// alpha^p h_p(v), the coordinate map from dual to primal.
    pub fn zeta(&self, v: f64) -> Result<f64> {
        Ok(self.alpha_pow_p() * h_p(self.p, v)?)
    }

    /// alpha^p h_p'(v), derivative of `zeta`.
    pub fn zeta_prime(&self, v: f64) -> Result<f64> {
        Ok(self.alpha_pow_p() * h_p_prime(self.p, v)?)
    }
}

// ── link family ──────────────────────────────────────────────────────

fn exponent_a(p: f64) -> f64 {
    p / (p - 2.0)
}

fn check_depth(p: f64) -> Result<()> {
    if !p.is_finite() || p < 2.0 {
        return Err(Error::InvalidInput(format!("depth p must be finite and >= 2, got {p}")));
    }
    Ok(())
}

fn check_domain(p: f64, t: f64) -> Result<()> {
    check_depth(p)?;
    if p > 2.0 && t.abs() >= 1.0 {
        return Err(Error::Domain(format!("h_p with p = {p} is only defined on (-1, 1), got t = {t}")));
    }
    if !t.is_finite() {
        return Err(Error::Domain(format!("link argument must be finite, got {t}")));
    }
    Ok(())
}

/// Link h_p. Odd, strictly increasing, h_p(0) = 0.
pub fn h_p(p: f64, t: f64) -> Result<f64> {
    check_domain(p, t)?;
    if p == 2.0 {
        return Ok(2.0 * t.sinh());
    }
    let a = exponent_a(p);
    Ok((1.0 - t).powf(-a) - (1.0 + t).powf(-a))
}

/// Derivative h_p'. Even, minimized at 0 with h_p'(0) = 2a (taking
/// a = 1 for p = 2).
pub fn h_p_prime(p: f64, t: f64) -> Result<f64> {
    check_domain(p, t)?;
    if p == 2.0 {
        return Ok(2.0 * t.cosh());
    }
    let a = exponent_a(p);
    Ok(a * ((1.0 - t).powf(-a - 1.0) + (1.0 + t).powf(-a - 1.0)))
}

/// Inverse link on all of R. Depth 2 has the closed form
/// asinh(u / 2); deeper networks use bracketed Newton run to step
/// stagnation, which keeps full relative accuracy even when the
/// result is within a few ulps of the domain edge.
pub fn h_p_inv(p: f64, u: f64) -> f64 {
    debug_assert!(p >= 2.0);
    if p == 2.0 {
        return (u / 2.0).asinh();
    }
    if u == 0.0 {
        return 0.0;
    }
    if u < 0.0 {
        return -h_p_inv(p, -u);
    }
    let a = exponent_a(p);
    let h = |t: f64| (1.0 - t).powf(-a) - (1.0 + t).powf(-a);
    let hd = |t: f64| a * ((1.0 - t).powf(-a - 1.0) + (1.0 + t).powf(-a - 1.0));
    // bracket [lo, hi] with h(lo) <= u <= h(hi)
    let mut lo = 0.0_f64;
    let mut hi = 0.5_f64;
    while h(hi) < u {
        lo = hi;
        hi = 1.0 - 0.25 * (1.0 - hi);
    }
    // start from the small-u linearization or the bracket midpoint
    let mut t = (u / (2.0 * a)).min(0.5 * (lo + hi)).max(lo);
    for _ in 0..200 {
        let f = h(t) - u;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let mut step = -f / hd(t);
        let mut next = t + step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
            step = next - t;
        }
        t = next;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
            break;
        }
    }
    t
}

/// Primitive int_0^t h_p. Even, convex, zero at zero. For p > 2 this
/// is ((1-t)^{1-a} + (1+t)^{1-a} - 2) * (p-2)/2; for p = 2 it is
/// 2 (cosh t - 1).
pub fn theta_primitive(p: f64, t: f64) -> Result<f64> {
    check_domain(p, t)?;
    if p == 2.0 {
        // cosh(t) - 1 in a cancellation-free form
        return Ok(4.0 * (0.5 * t).sinh().powi(2));
    }
    let e = -2.0 / (p - 2.0);
    Ok(0.5 * (p - 2.0) * ((1.0 - t).powf(e) + (1.0 + t).powf(e) - 2.0))
}

// ── potential q_p = int_0^u h_p^{-1} ─────────────────────────────────

/// q_p(u) = int_0^u h_p^{-1}(s) ds. Even, strictly convex, q_p(0) = 0.
/// Depth 2 has a closed form; deeper networks integrate the inverse
/// link adaptively.
pub fn q_p(p: f64, u: f64) -> f64 {
    debug_assert!(p >= 2.0);
    let u = u.abs();
    if p == 2.0 {
        if u <= 1e-3 {
            // series around 0 avoids the 2 - sqrt(u^2 + 4) cancellation
            let u2 = u * u;
            return u2 * (1.0 / 4.0 + u2 * (-1.0 / 192.0 + u2 / 2560.0));
        }
        return 2.0 - (u * u + 4.0).sqrt() + u * (u / 2.0).asinh();
    }
    if u == 0.0 {
        return 0.0;
    }
    adaptive_gk(|s| h_p_inv(p, s), 0.0, u, tol::QUAD_ATOL)
}

/// First derivative of q_p, which is just the inverse link.
pub fn q_p_prime(p: f64, u: f64) -> f64 {
    h_p_inv(p, u)
}

/// Second derivative of q_p: 1 / h_p'(h_p^{-1}(u)). Positive and at
/// most 1 / (2a).
pub fn q_p_second(p: f64, u: f64) -> f64 {
    let t = h_p_inv(p, u);
    1.0 / h_p_prime(p, t).expect("inverse link stays interior")
}

// ── low-alpha limit shapes ───────────────────────────────────────────

/// Pointwise limit shape of the rescaled potential:
/// g_2(u) = |u| ln(|u| / e) and g_p(u) = |u| - (p/2) |u|^{2/p} for
/// p > 2. Continuous with g_p(0) = 0.
pub fn g_p(p: f64, u: f64) -> f64 {
    debug_assert!(p >= 2.0);
    let u = u.abs();
    if u == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return u * (u.ln() - 1.0);
    }
    u - 0.5 * p * u.powf(2.0 / p)
}

/// Derivative of g_p away from 0: sign(u) ln|u| for p = 2 and
/// sign(u) (1 - |u|^{2/p - 1}) for p > 2. Unbounded as u -> 0, which
/// is exactly why minimizers of the limit shape stay strictly inside
/// their face; u = 0 itself is outside the domain.
pub fn g_p_prime(p: f64, u: f64) -> Result<f64> {
    check_depth(p)?;
    if u == 0.0 {
        return Err(Error::Domain("g_p has no derivative at 0".into()));
    }
    let s = u.signum();
    let u = u.abs();
    if p == 2.0 {
        return Ok(s * u.ln());
    }
    Ok(s * (1.0 - u.powf(2.0 / p - 1.0)))
}

/// Shannon-style entropy -sum |z_i| ln |z_i| with the 0 ln 0 = 0
/// convention.
pub fn entropy(z: &[f64]) -> f64 {
    z.iter()
        .map(|&zi| {
            let a = zi.abs();
            if a == 0.0 {
                0.0
            } else {
                -a * a.ln()
            }
        })
        .sum()
}

/// l_{2/p} quasi-norm (sum |z_i|^{2/p})^{p/2}; for p = 2 this is the
/// l1 norm.
pub fn norm_two_over_p(p: f64, z: &[f64]) -> f64 {
    let e = 2.0 / p;
    z.iter().map(|&zi| zi.abs().powf(e)).sum::<f64>().powf(1.0 / e)
}

// ── adaptive Gauss-Kronrod quadrature ────────────────────────────────

// G7-K15 nodes and weights on [-1, 1] (QUADPACK dqk15 constants).
// Nodes are the positive half; node 7 is the center.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7-K15 panel on [a, b]: returns (K15 value, |K15 - G7|).
fn gk15_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let fsum = f(c - x) + f(c + x);
        k += WGK[j] * fsum;
        if j % 2 == 1 {
            g += WG[j / 2] * fsum;
        }
    }
    (k * h, (k - g).abs() * h.abs())
}

/// Adaptive bisection on G7-K15 panels. Per-panel tolerance halves at
/// each split so accepted errors sum below `atol` globally, with a
/// small relative floor so very large integrals do not demand
/// sub-ulp panels.
fn adaptive_gk<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, atol: f64) -> f64 {
    let mut total = 0.0;
    let mut stack: Vec<(f64, f64, f64, u32)> = vec![(a, b, atol, 0)];
    while let Some((lo, hi, tol_here, depth)) = stack.pop() {
        let (k, err) = gk15_panel(&f, lo, hi);
        if err <= tol_here + 1e-14 * k.abs() || depth >= 48 {
            total += k;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * tol_here, depth + 1));
            stack.push((mid, hi, 0.5 * tol_here, depth + 1));
        }
    }
    total
}
