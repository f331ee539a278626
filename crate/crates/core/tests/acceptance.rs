//! End-to-end acceptance checks. Each test covers one contract item,
//! prints a single PASS/FAIL line, and enforces both the numerical
//! claim and its runtime limit.

use std::time::{Duration, Instant};

use dln_core::conditioning::{chi_certificate, chi_sampled, script_k};
use dln_core::dynamics::{
    bounds, flow_invariant_defect, flow_run_instance, gd_matches_flow, grad_loss, log_schedule,
    RunStatus,
};
use dln_core::instances::{
    instance_a1, instance_a2, instance_a3, random_instance, RegressionInstance,
};
use dln_core::linalg::{norm2, nullspace_basis, sub, DenseMatrix, LuFactor};
use dln_core::minimizers::{
    optimal_face, reduce_rank_deficient, solve_bp, solve_qstar, wp_select_on_face,
};
use dln_core::potentials::{g_p, g_p_prime, h_p_inv, Hyperparams};
use dln_core::rng::SplitMix64;
use dln_core::sweep::{shift_example_sweep, sweep_alpha, SweepConfig};

fn report(idx: u32, name: &str, ok: bool, elapsed: Duration, limit_s: f64) {
    let within = elapsed.as_secs_f64() < limit_s;
    let verdict = if ok && within { "PASS" } else { "FAIL" };
    println!(
        "[acceptance {idx:02}] {name}: {verdict} ({:.2}s of {limit_s}s)",
        elapsed.as_secs_f64()
    );
    assert!(ok, "{name}: numerical claim failed");
    assert!(
        within,
        "{name}: runtime {:.2}s exceeded the {limit_s}s limit",
        elapsed.as_secs_f64()
    );
}

/// Face parameter of the builtin segment (1-mu, 2-2mu, 3mu) selected
/// at depth p: the entropy solution at p = 2, the closed-form root of
/// the two-thirds-power trade-off above.
fn selected_mu(p: f64) -> f64 {
    if p == 2.0 {
        (4.0 - 6.0 * 2f64.cbrt() + 9.0 * 4f64.cbrt()) / 31.0
    } else {
        let ratio = 3f64.powf(2.0 / p) / (2f64.powf(2.0 / p) + 1.0);
        1.0 / (1.0 + ratio.powf(-p / (p - 2.0)))
    }
}

#[test]
fn closed_form_minimizer_match() {
    let mut ok = true;
    let mut slowest = Duration::ZERO;
    for (inst, pad) in [(instance_a2(), false), (instance_a3(), true)] {
        let face = {
            let t0 = Instant::now();
            let f = optimal_face(&inst).unwrap();
            slowest = slowest.max(t0.elapsed());
            f
        };
        for p in [2.0, 3.0, 4.0, 5.0] {
            let t0 = Instant::now();
            let wp = wp_select_on_face(&inst, p, &face).unwrap();
            let el = t0.elapsed();
            slowest = slowest.max(el);
            let mu = selected_mu(p);
            let mut target = vec![1.0 - mu, 2.0 - 2.0 * mu, 3.0 * mu];
            if pad {
                target.push(0.0);
            }
            let err = norm2(&sub(&wp, &target));
            if err > 1e-8 {
                eprintln!("depth {p} selection off by {err:.3e}");
                ok = false;
            }
        }
    }
    report(1, "closed-form minimizer match", ok, slowest, 1.0);
}

#[test]
fn alpha_rate_reproduction() {
    let t0 = Instant::now();
    let cfg = SweepConfig {
        p_values: vec![3.0, 4.0, 5.0],
        alpha_start: 1e-1,
        alpha_stop: 10f64.powf(-2.5),
        alpha_count: 7,
        fit_skip: 1,
        flow_check: false,
    };
    let mut ok = true;
    for inst in [instance_a2(), instance_a3()] {
        let out = sweep_alpha(&inst, &cfg).unwrap();
        for s in &out.slopes {
            if (s.slope - s.p).abs() > 0.2 || s.r2 < 0.999 {
                eprintln!("depth {} fit slope {:.4}, r2 {:.6}", s.p, s.slope, s.r2);
                ok = false;
            }
        }
    }
    report(2, "alpha-rate slope reproduction", ok, t0.elapsed(), 30.0);
}

#[test]
fn degenerate_family_blowup() {
    let t0 = Instant::now();
    let rows = shift_example_sweep(&[0.5, 0.1, 0.02], 4.0, 1e-2).unwrap();
    assert_eq!(rows.len(), 3);
    // ascending eps, so the error column must strictly fall
    let d: Vec<f64> = rows.iter().map(|r| r.dist_qstar_wp).collect();
    let ok = d[0] > d[1] && d[1] > d[2] && d[0] >= 2.0 * d[1] && d[1] >= 2.0 * d[2];
    if !ok {
        eprintln!("distances by eps {:?}: {:?}", [0.02, 0.1, 0.5], d);
    }
    report(3, "mismatch blow-up as the family degenerates", ok, t0.elapsed(), 30.0);
}

#[test]
fn residual_decay_bound() {
    let t0 = Instant::now();
    let inst = instance_a1();
    let hp = Hyperparams::new(2.0, 0.1).unwrap();
    let bundle = bounds(&inst, &hp, 0.0, 1.0, None).unwrap();
    let t_final = 5.0 / bundle.k2;
    let trace = flow_run_instance(&inst, &hp, t_final, &log_schedule(t_final, 48)).unwrap();
    let ynorm = norm2(inst.y());
    let mut ok = trace.status == RunStatus::Completed;
    for s in &trace.samples {
        let cap = ynorm * (-bundle.k2 * s.t).exp() * (1.0 + 1e-6);
        if s.residual_norm > cap {
            eprintln!("t = {:.4}: residual {:.3e} above {:.3e}", s.t, s.residual_norm, cap);
            ok = false;
        }
    }
    report(4, "residual decay bound", ok, t0.elapsed(), 10.0);
}

#[test]
fn flow_convergence_to_the_limit_point() {
    let t0 = Instant::now();
    let inst = instance_a1();
    let hp = Hyperparams::new(2.0, 0.1).unwrap();
    let bundle = bounds(&inst, &hp, 0.0, 1.0, None).unwrap();
    let t_final = 5.0 / bundle.k2;
    let trace = flow_run_instance(&inst, &hp, t_final, &log_schedule(t_final, 48)).unwrap();
    let qs = solve_qstar(&inst, &hp).unwrap();
    let mut ok = trace.status == RunStatus::Completed;
    for s in &trace.samples {
        let dist = norm2(&sub(&s.psi, &qs.z));
        let cap = bundle.k1 * (-bundle.k2 * s.t).exp();
        if dist > cap {
            eprintln!("t = {:.4}: distance {:.3e} above {:.3e}", s.t, dist, cap);
            ok = false;
        }
    }
    report(5, "exponential convergence to the limit point", ok, t0.elapsed(), 10.0);
}

#[test]
fn descent_tracks_the_flow_under_the_literal_step_rule() {
    let t0 = Instant::now();
    let a = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
    let inst = RegressionInstance::new(a, vec![1.0]).unwrap();
    let mut ok = true;
    // the admissible step shrinks like e^{-c2 t}, so the horizon is
    // held where the literal step count stays in the millions
    for (p, t) in [(2.0, 1e-2), (3.0, 5e-3)] {
        let hp = Hyperparams::new(p, 0.5).unwrap();
        let m = gd_matches_flow(&inst, &hp, t, 1e-2, 20_000_000).unwrap();
        if m.error_l2 > 1e-2 {
            eprintln!("depth {p}: gap {:.3e} after {} steps", m.error_l2, m.steps);
            ok = false;
        }
    }
    report(6, "descent matches the flow at the prescribed step", ok, t0.elapsed(), 60.0);
}

#[test]
fn sandwich_bounds_on_the_inverse_link() {
    let t0 = Instant::now();
    let mut violations = 0u32;
    for p in [2.0, 2.5, 3.0, 4.0, 5.0] {
        for k in 0..200 {
            let u = 10f64.powf(-8.0 + 12.0 * k as f64 / 199.0);
            let lo = g_p_prime(p, u).unwrap();
            let mid = h_p_inv(p, u);
            let hi = g_p_prime(p, u + 1.0).unwrap();
            if lo > mid + 1e-12 * (1.0 + mid.abs()) || mid > hi + 1e-12 * (1.0 + hi.abs()) {
                violations += 1;
            }
        }
    }
    report(7, "inverse link sandwiched by the limit slopes", violations == 0, t0.elapsed(), 1.0);
}

#[test]
fn conserved_quantities_along_the_flow() {
    let t0 = Instant::now();
    let a1 = instance_a1();
    let bundle = bounds(&a1, &Hyperparams::new(2.0, 0.1).unwrap(), 0.0, 1.0, None).unwrap();
    let runs: Vec<(RegressionInstance, f64, f64, f64)> = vec![
        (a1, 2.0, 0.1, 5.0 / bundle.k2),
        (instance_a2(), 2.0, 0.5, 3.0),
        (instance_a2(), 3.0, 0.3, 2.0),
        (instance_a3(), 4.0, 0.4, 1.0),
    ];
    let mut ok = true;
    for (inst, p, alpha, t_final) in runs {
        let hp = Hyperparams::new(p, alpha).unwrap();
        let trace = flow_run_instance(&inst, &hp, t_final, &log_schedule(t_final, 25)).unwrap();
        ok &= trace.status == RunStatus::Completed;
        for s in &trace.samples {
            let defect = flow_invariant_defect(&s.theta_plus, &s.theta_minus, &hp);
            if defect > 1e-7 {
                eprintln!("depth {p}, t = {:.3}: invariant defect {defect:.3e}", s.t);
                ok = false;
            }
        }
    }
    report(8, "conserved quantities along the flow", ok, t0.elapsed(), 10.0);
}

/// Minimum l1 norm over all solutions by brute-force support scan:
/// every candidate support of size <= m, solved exactly.
fn min_l1_by_support_scan(inst: &RegressionInstance) -> f64 {
    let a = inst.a();
    let y = inst.y();
    let ynorm = norm2(y);
    let mut best = f64::INFINITY;
    if ynorm <= 1e-12 {
        return 0.0;
    }
    let n = a.cols();
    for j in 0..n {
        let col = a.col(j);
        let cc = col.iter().map(|v| v * v).sum::<f64>();
        if cc == 0.0 {
            continue;
        }
        let x = col.iter().zip(y).map(|(c, yi)| c * yi).sum::<f64>() / cc;
        let resid: Vec<f64> = col.iter().zip(y).map(|(c, yi)| c * x - yi).collect();
        if norm2(&resid) <= 1e-9 * (1.0 + ynorm) {
            best = best.min(x.abs());
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let sub_m = a.select_columns(&[i, j]);
            let sq = DenseMatrix::from_rows(&[sub_m.row(0).to_vec(), sub_m.row(1).to_vec()])
                .unwrap();
            let Ok(lu) = LuFactor::new(&sq) else { continue };
            let x = lu.solve(y);
            if x.iter().all(|v| v.is_finite()) {
                best = best.min(x[0].abs() + x[1].abs());
            }
        }
    }
    best
}

#[test]
fn solver_agrees_with_brute_force_oracles() {
    let t0 = Instant::now();
    let mut rng = SplitMix64::new(2024);
    let mut ok = true;
    for trial in 0..20 {
        let inst = random_instance(&mut rng, 2, 4).unwrap();
        let bp = solve_bp(&inst).unwrap();
        let oracle = min_l1_by_support_scan(&inst);
        if (bp.l1_norm - oracle).abs() > 1e-9 * (1.0 + oracle) {
            eprintln!("trial {trial}: lp value {:.12} vs scan {:.12}", bp.l1_norm, oracle);
            ok = false;
        }
        let face = optimal_face(&inst).unwrap();
        let wp = wp_select_on_face(&inst, 3.0, &face).unwrap();
        let obj = |z: &[f64]| z.iter().map(|&zi| g_p(3.0, zi)).sum::<f64>();
        let wp_obj = obj(&wp);
        let verts = face.vertices.as_ref().unwrap();
        for _ in 0..1000 {
            let mut weights: Vec<f64> = (0..verts.len()).map(|_| -rng.next_f64().ln()).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let mut pt = vec![0.0; inst.n()];
            for (w, v) in weights.iter().zip(verts) {
                for (pi, vi) in pt.iter_mut().zip(v) {
                    *pi += w * vi;
                }
            }
            let pobj = obj(&pt);
            if wp_obj > pobj + 1e-9 * (1.0 + pobj.abs()) {
                eprintln!("trial {trial}: selected objective {wp_obj:.12} above sampled {pobj:.12}");
                ok = false;
            }
        }
    }
    report(9, "solver agrees with brute-force oracles", ok, t0.elapsed(), 30.0);
}

#[test]
fn conditioning_constants_are_certified() {
    let t0 = Instant::now();
    let mut rng = SplitMix64::new(777);
    let mut ok = true;
    let mut shapes = vec![(1usize, 3usize); 5];
    shapes.extend(vec![(2usize, 4usize); 5]);
    for (m, n) in shapes {
        let inst = random_instance(&mut rng, m, n).unwrap();
        let b = inst.a().clone();
        let cert = chi_certificate(&b).unwrap();
        let sampled = chi_sampled(&b, &mut rng, 100_000).unwrap();
        if sampled > cert.value * (1.0 + 1e-9) {
            eprintln!("{m}x{n}: sampled {sampled:.9} above certificate {:.9}", cert.value);
            ok = false;
        }
        // nullspace perturbation bound with constructively worst pairs
        let kappa = script_k(&b).unwrap();
        let basis = nullspace_basis(&b, 0.0).unwrap();
        let k = basis.cols();
        for _ in 0..1000 {
            let u: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let d: Vec<f64> = (0..n).map(|_| rng.log_uniform(1e-5, 1e5)).collect();
            let mut g = DenseMatrix::zeros(k, k);
            let mut rhs = vec![0.0; k];
            for r in 0..k {
                for c in 0..k {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += basis.get(i, r) * d[i] * basis.get(i, c);
                    }
                    g.set(r, c, acc);
                }
                rhs[r] = -(0..n).map(|i| basis.get(i, r) * d[i] * u[i]).sum::<f64>();
            }
            let w = LuFactor::new(&g).unwrap().solve(&rhs);
            let shifted: Vec<f64> = (0..n)
                .map(|i| u[i] + (0..k).map(|r| basis.get(i, r) * w[r]).sum::<f64>())
                .collect();
            if norm2(&shifted) > kappa * norm2(&u) * (1.0 + 1e-9) {
                eprintln!(
                    "{m}x{n}: shifted norm {:.9} above {kappa:.9} * {:.9}",
                    norm2(&shifted),
                    norm2(&u)
                );
                ok = false;
            }
        }
    }
    report(10, "conditioning constants are certified", ok, t0.elapsed(), 60.0);
}

#[test]
fn duplicated_rows_reduce_without_changing_the_gradient() {
    let t0 = Instant::now();
    let mut rng = SplitMix64::new(55);
    let mut ok = true;
    let cases = vec![
        (instance_a2(), 2.0),
        (instance_a3(), 3.0),
        (random_instance(&mut rng, 2, 4).unwrap(), 4.0),
    ];
    for (base, p) in cases {
        let a = base.a();
        let mut rows: Vec<Vec<f64>> = (0..a.rows()).map(|i| a.row(i).to_vec()).collect();
        let mut y = base.y().to_vec();
        // consistent duplicates at mixed scales
        rows.push(a.row(0).iter().map(|v| v * 1.0).collect());
        y.push(base.y()[0]);
        rows.push(a.row(1).iter().map(|v| v * -2.0).collect());
        y.push(base.y()[1] * -2.0);
        rows.push(a.row(0).iter().map(|v| v * 0.5).collect());
        y.push(base.y()[0] * 0.5);
        let aug = DenseMatrix::from_rows(&rows).unwrap();
        let (red, yred) = reduce_rank_deficient(&aug, &y).unwrap();
        assert_eq!(red.rows(), 2);
        let n = a.cols();
        for _ in 0..100 {
            let tp: Vec<f64> = (0..n).map(|_| 0.3 + 0.8 * rng.next_f64()).collect();
            let tm: Vec<f64> = (0..n).map(|_| 0.3 + 0.8 * rng.next_f64()).collect();
            let (gp_a, gm_a) = grad_loss(&aug, &y, &tp, &tm, p);
            let (gp_r, gm_r) = grad_loss(&red, &yred, &tp, &tm, p);
            let diff = norm2(&sub(&gp_a, &gp_r)).max(norm2(&sub(&gm_a, &gm_r)));
            if diff > 1e-10 {
                eprintln!("depth {p}: gradient mismatch {diff:.3e} after reduction");
                ok = false;
            }
        }
    }
    report(11, "duplicated rows reduce without changing the gradient", ok, t0.elapsed(), 5.0);
}
