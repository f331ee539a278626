//! Link-family oracles that avoid the implementation's own code
//! paths: rational spot values evaluated by hand, Simpson quadrature
//! of the inverse link, and the integration-by-parts identity
//! q(u) = u h^{-1}(u) - Theta(h^{-1}(u)) built from closed forms only.

use dln_core::potentials::{
    entropy, g_p, g_p_prime, h_p, h_p_inv, h_p_prime, norm_two_over_p, q_p, q_p_prime,
    q_p_second, theta_primitive, Hyperparams,
};

fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got:e}, want {want:e} (tol {tol:e})"
    );
}

/// Composite Simpson rule with `n` panels (n even).
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn link_spot_values_are_exact_fractions() {
    // p = 3 has exponent 3: 1/0.5^3 - 1/1.5^3 = 8 - 8/27
    assert_close(h_p(3.0, 0.5).unwrap(), 208.0 / 27.0, 1e-13, "h_3(1/2)");
    // p = 4 has exponent 2: 4 - 4/9
    assert_close(h_p(4.0, 0.5).unwrap(), 32.0 / 9.0, 1e-14, "h_4(1/2)");
    // derivative at p = 4: 2 (8 + 8/27)
    assert_close(h_p_prime(4.0, 0.5).unwrap(), 448.0 / 27.0, 1e-12, "h_4'(1/2)");
    // depth 2 is the doubled hyperbolic sine
    let t = 0.83_f64;
    assert_close(h_p(2.0, t).unwrap(), t.exp() - (-t).exp(), 1e-14, "h_2 vs exponentials");
    assert_close(
        h_p_prime(2.0, t).unwrap(),
        t.exp() + (-t).exp(),
        1e-14,
        "h_2' vs exponentials",
    );
}

#[test]
fn link_is_odd_and_increasing() {
    for &p in &[2.0, 2.5, 3.0, 4.0, 6.5] {
        let grid: Vec<f64> = if p == 2.0 {
            (-10..=10).map(|k| k as f64 * 0.3).collect()
        } else {
            (-9..=9).map(|k| k as f64 * 0.1).collect()
        };
        let mut prev = f64::NEG_INFINITY;
        for &t in &grid {
            let v = h_p(p, t).unwrap();
            let w = h_p(p, -t).unwrap();
            assert_close(v + w, 0.0, 1e-10 * (1.0 + v.abs()), "oddness");
            assert!(v > prev, "h_p must increase, p={p} t={t}");
            prev = v;
        }
    }
}

#[test]
fn link_rejects_points_outside_its_domain() {
    assert!(h_p(3.0, 1.0).is_err());
    assert!(h_p(3.0, -1.2).is_err());
    assert!(h_p_prime(5.0, 1.0).is_err());
    assert!(h_p(1.5, 0.0).is_err());
    assert!(h_p(2.0, f64::INFINITY).is_err());
    // depth 2 has no domain restriction
    assert!(h_p(2.0, 3.0).is_ok());
}

#[test]
fn inverse_link_round_trips_in_t_space() {
    // t -> h(t) -> t is well conditioned everywhere, so demand
    // near-machine agreement even close to the domain edge
    for &p in &[2.0, 2.5, 3.0, 4.0, 5.0, 7.5] {
        let ts: Vec<f64> = if p == 2.0 {
            (-40..=40).map(|k| k as f64 * 0.5).collect()
        } else {
            (1..200).map(|k| k as f64 / 100.0 - 0.995).collect()
        };
        for &t in &ts {
            let u = h_p(p, t).unwrap();
            let back = h_p_inv(p, u);
            assert_close(back, t, 5e-14 * (1.0 + t.abs()), "t round trip");
        }
    }
}

#[test]
fn inverse_link_round_trips_in_u_space() {
    // u -> t -> h(t): near the edge the forward evaluation amplifies
    // one ulp of t by a / (1 - t), so the tolerance carries that factor
    for &p in &[2.0, 2.5, 3.0, 4.0, 5.0, 7.5] {
        for k in 0..=96 {
            let u = 10f64.powf(-12.0 + 24.0 * k as f64 / 96.0);
            for &uu in &[u, -u] {
                let t = h_p_inv(p, uu);
                let cond = if p == 2.0 {
                    1.0
                } else {
                    let a = p / (p - 2.0);
                    (a + 1.0) / (1.0 - t.abs())
                };
                let back = h_p(p, t).unwrap();
                assert_close(
                    back,
                    uu,
                    1e-13 + 64.0 * f64::EPSILON * cond * uu.abs(),
                    "u round trip",
                );
            }
        }
    }
}

#[test]
fn inverse_link_pins_zero_and_signs() {
    for &p in &[2.0, 3.0, 4.0] {
        assert_eq!(h_p_inv(p, 0.0), 0.0);
        assert!(h_p_inv(p, 1.0) > 0.0);
        assert_close(h_p_inv(p, -1.0), -h_p_inv(p, 1.0), 1e-15, "odd inverse");
    }
    // closed form at depth 2
    assert_close(h_p_inv(2.0, 3.0), (1.5_f64).asinh(), 1e-15, "asinh branch");
}

#[test]
fn primitive_matches_simpson_quadrature_of_the_link() {
    for &(p, t) in &[(2.0, 1.3), (3.0, 0.7), (4.5, 0.9), (6.0, -0.85)] {
        let want = simpson(|s| h_p(p, s).unwrap(), 0.0, t, 4000);
        assert_close(
            theta_primitive(p, t).unwrap(),
            want,
            1e-10 * (1.0 + want.abs()),
            "primitive vs quadrature",
        );
    }
    assert_eq!(theta_primitive(3.0, 0.0).unwrap(), 0.0);
}

#[test]
fn primitive_derivative_is_the_link() {
    let h = 1e-6;
    for &(p, t) in &[(2.0, 0.8), (3.0, 0.4), (5.0, -0.6)] {
        let fd =
            (theta_primitive(p, t + h).unwrap() - theta_primitive(p, t - h).unwrap()) / (2.0 * h);
        let want = h_p(p, t).unwrap();
        assert_close(fd, want, 1e-7 * (1.0 + want.abs()), "d Theta = h_p");
    }
}

#[test]
fn depth_two_potential_matches_simpson_quadrature() {
    // the implementation uses a closed form; integrate asinh(s/2)
    // directly as the oracle
    for &u in &[0.3, 1.0, 5.0, 50.0] {
        let want = simpson(|s| (s / 2.0).asinh(), 0.0, u, 20000);
        assert_close(q_p(2.0, u), want, 1e-10 * (1.0 + want), "q_2 vs quadrature");
        assert_close(q_p(2.0, -u), q_p(2.0, u), 1e-15, "evenness");
    }
}

#[test]
fn depth_two_series_branch_agrees_at_the_seam() {
    let below = q_p(2.0, 1e-3 - 1e-12);
    let above = q_p(2.0, 1e-3 + 1e-12);
    assert_close(below, above, 4e-15, "series/closed-form seam");
    // leading term u^2/4 dominates at 1e-8
    assert_close(q_p(2.0, 1e-8), 2.5e-17, 1e-22, "series leading term");
}

#[test]
fn deep_potential_matches_integration_by_parts() {
    // int_0^u h^{-1} = u h^{-1}(u) - Theta(h^{-1}(u)), with both
    // pieces in closed form
    for &p in &[2.5, 3.0, 4.0, 5.0, 7.5] {
        for k in 0..=40 {
            let u = 10f64.powf(-6.0 + 12.0 * k as f64 / 40.0);
            let t = h_p_inv(p, u);
            let want = u * t - theta_primitive(p, t).unwrap();
            assert_close(q_p(p, u), want, 1e-11 * (1.0 + want.abs()), "by-parts identity");
        }
    }
}

#[test]
fn potential_derivatives_are_consistent() {
    let h = 1e-5;
    for &(p, u) in &[(2.0, 0.7), (3.0, 2.0), (4.0, 0.02), (6.0, 30.0)] {
        let fd1 = (q_p(p, u + h) - q_p(p, u - h)) / (2.0 * h);
        assert_close(fd1, q_p_prime(p, u), 2e-8 * (1.0 + fd1.abs()), "first derivative");
        let fd2 = (q_p_prime(p, u + h) - q_p_prime(p, u - h)) / (2.0 * h);
        assert_close(fd2, q_p_second(p, u), 2e-7 * (1.0 + fd2.abs()), "second derivative");
        assert!(q_p_second(p, u) > 0.0, "strict convexity");
    }
}

#[test]
fn limit_shape_spot_values_and_derivative() {
    // g_2(e) = e (ln e - 1) = 0
    assert_close(g_p(2.0, std::f64::consts::E), 0.0, 1e-14, "g_2 at e");
    assert_eq!(g_p(2.0, 0.0), 0.0);
    // g_4(16) = 16 - 2 * 4 = 8
    assert_close(g_p(4.0, 16.0), 8.0, 1e-13, "g_4(16)");
    assert_close(g_p(4.0, -16.0), 8.0, 1e-13, "g is even");
    let h = 1e-6;
    for &(p, u) in &[(2.0, 0.5), (3.0, 2.5), (4.0, 0.3)] {
        let fd = (g_p(p, u + h) - g_p(p, u - h)) / (2.0 * h);
        assert_close(fd, g_p_prime(p, u).unwrap(), 1e-7, "limit shape derivative");
    }
    assert!(g_p_prime(3.0, 0.0).is_err());
}

#[test]
fn inverse_link_is_sandwiched_by_limit_shape_derivatives() {
    for &p in &[2.0, 2.5, 3.0, 4.0, 6.0] {
        for k in 0..=200 {
            let u = 10f64.powf(-8.0 + 16.0 * k as f64 / 200.0);
            let mid = h_p_inv(p, u);
            let lo = g_p_prime(p, u).unwrap();
            let hi = g_p_prime(p, u + 1.0).unwrap();
            assert!(
                lo <= mid + 1e-12 && mid <= hi + 1e-12,
                "sandwich failed: p={p} u={u:e} lo={lo} mid={mid} hi={hi}"
            );
        }
    }
}

#[test]
fn entropy_and_quasinorm_spot_values() {
    let e = std::f64::consts::E;
    assert_close(entropy(&[1.0 / e]), 1.0 / e, 1e-15, "entropy of 1/e");
    assert_eq!(entropy(&[0.0, 0.0]), 0.0);
    assert_close(entropy(&[-1.0 / e, 0.0]), 1.0 / e, 1e-15, "entropy uses |z|");
    // p = 2 reduces to the l1 norm
    assert_close(norm_two_over_p(2.0, &[3.0, -4.0]), 7.0, 1e-13, "l1 at depth 2");
    // p = 4: (sqrt 16 + sqrt 81)^2 = 169
    assert_close(norm_two_over_p(4.0, &[16.0, -81.0]), 169.0, 1e-11, "quasi-norm at depth 4");
}

#[test]
fn scaled_potential_family_is_consistent() {
    let hp = Hyperparams::new(3.0, 0.7).unwrap();
    let ap = 0.7_f64.powi(3);
    let z = [0.3, -1.2, 2.0];
    // value agrees with the separable definition
    let want: f64 = z.iter().map(|&zi| ap * q_p(3.0, zi / ap)).sum();
    assert_close(hp.mirror_potential(&z), want, 1e-13, "separable sum");
    // gradient is the inverse link, confirmed by differencing the value
    let g = hp.mirror_potential_grad(&z);
    let hdiag = hp.mirror_potential_hess_diag(&z);
    let h = 1e-6;
    for i in 0..z.len() {
        let mut zp = z;
        zp[i] += h;
        let mut zm = z;
        zm[i] -= h;
        let fd = (hp.mirror_potential(&zp) - hp.mirror_potential(&zm)) / (2.0 * h);
        assert_close(fd, g[i], 1e-6 * (1.0 + g[i].abs()), "potential gradient");
        let fdh = (hp.mirror_potential_grad(&zp)[i] - hp.mirror_potential_grad(&zm)[i]) / (2.0 * h);
        assert_close(fdh, hdiag[i], 1e-5 * (1.0 + hdiag[i].abs()), "potential curvature");
        assert!(hdiag[i] > 0.0);
    }
    // limit potential at depth 2 with alpha = 1 is sum g_2
    let hp2 = Hyperparams::new(2.0, 1.0).unwrap();
    let want2: f64 = z.iter().map(|&zi| g_p(2.0, zi)).sum();
    assert_close(hp2.limit_potential(&z), want2, 1e-13, "limit shape sum");
    // zeta round trip: zeta(v) / alpha^p = h_p(v)
    let v = 0.4;
    assert_close(hp.zeta(v).unwrap(), ap * h_p(3.0, v).unwrap(), 1e-14, "zeta scaling");
    assert_close(
        hp.zeta_prime(v).unwrap(),
        ap * h_p_prime(3.0, v).unwrap(),
        1e-14,
        "zeta derivative scaling",
    );
}

#[test]
fn hyperparams_validate_inputs() {
    assert!(Hyperparams::new(1.9, 0.1).is_err());
    assert!(Hyperparams::new(f64::NAN, 0.1).is_err());
    assert!(Hyperparams::new(3.0, 0.0).is_err());
    assert!(Hyperparams::new(3.0, -1.0).is_err());
    let hp = Hyperparams::new(2.0, 0.5).unwrap();
    assert!(hp.is_quadratic());
    assert_close(hp.alpha_pow_p(), 0.25, 1e-16, "alpha^p");
    assert!(!Hyperparams::new(4.0, 0.5).unwrap().is_quadratic());
}
