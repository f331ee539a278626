#!/usr/bin/env python3
"""End-to-end check of the dln_py extension module.

Build the extension first:

    cargo build -p dln-py --release

The script copies the fresh cdylib next to itself as dln_py.so,
imports it, and exercises one example of every exported surface:
instances, basis pursuit, the optimal face, the selected minimizer,
the finite-alpha limit point, the flow, descent, the constants, and a
small sweep.
"""

import math
import pathlib
import shutil
import sys

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def load_module():
    mod = HERE / "dln_py.so"
    candidates = [
        ROOT / "target" / profile / "libdln_py.so"
        for profile in ("release", "debug")
    ]
    built = [c for c in candidates if c.exists()]
    if not built:
        sys.exit("no extension found; run: cargo build -p dln-py --release")
    newest = max(built, key=lambda c: c.stat().st_mtime)
    shutil.copyfile(newest, mod)
    sys.path.insert(0, str(HERE))
    import dln_py

    return dln_py


def close(a, b, tol):
    return max(abs(x - y) for x, y in zip(a, b)) <= tol


def main():
    dln = load_module()

    inst = dln.Instance.builtin("a2")
    assert (inst.m, inst.n) == (2, 3)
    assert inst.a == [[1.0, 1.0, 1.0], [3.0, 0.0, 1.0]]

    z, r = dln.solve_bp(inst)
    assert abs(r - 3.0) < 1e-9, r
    print(f"ok basis pursuit: value {r:.12f}")

    face = dln.optimal_face(inst)
    assert abs(face.l1_norm - 3.0) < 1e-9
    assert face.dimension == 1 and face.support == [0, 1, 2]
    assert close(z, dln.solve_bp(inst)[0], 0.0)
    print(f"ok optimal face: {face!r}")

    mu = dln.mu_p(3.0)
    wp = dln.wp_select(inst, 3.0)
    assert close(wp, [1.0 - mu, 2.0 - 2.0 * mu, 3.0 * mu], 1e-8), (wp, mu)
    print(f"ok selected minimizer: mu = {mu:.12f}")

    q, dual, pot = dln.solve_qstar(inst, 3.0, 1e-2)
    assert len(dual) == 2 and pot > 0.0
    assert close(q, wp, 1e-4), (q, wp)
    ms = dln.solve_mstar(inst, 3.0, 1e-2)
    rep = dln.minimizer_set(inst, 3.0, 1e-2)
    assert close(rep["qstar"], q, 1e-12) and close(rep["mstar"], ms, 1e-12)
    assert rep["dist_qstar_wp"] < 1e-4
    print(f"ok limit point: |qstar - wp| = {rep['dist_qstar_wp']:.3e}")

    a1 = dln.Instance.builtin("a1")
    consts = dln.bounds(a1, 2.0, 0.1)
    # step-size thresholds may underflow to exactly 0 (the bound decays
    # exponentially in t); the structural constants must be positive
    assert all(math.isfinite(v) and v >= 0.0 for v in consts.values())
    assert all(consts[k] > 0.0 for k in ("k1", "k2", "m_cap", "c1_grad", "c2_hess", "k_cap"))
    t = 5.0 / consts["k2"]
    trace = dln.flow_run(a1, 2.0, 0.1, t, samples=8)
    y_norm = math.sqrt(sum(v * v for v in a1.y))
    final_resid = trace[-1][2]
    assert final_resid <= y_norm * math.exp(-5.0) * (1.0 + 1e-6), final_resid
    print(f"ok flow: residual {final_resid:.3e} after t = {t:.1f}")

    gd = dln.gd_run(a1, 2.0, 0.1, 1e-2, 2000, record=[0, 2000])
    assert gd[-1][2] < gd[0][2]
    print(f"ok descent: residual {gd[0][2]:.3e} -> {gd[-1][2]:.3e}")

    tiny = dln.Instance([[1.0]], [1.0])
    eta, steps, err, eps = dln.gd_matches_flow(tiny, 2.0, 0.5, 1e-2, 1e-2)
    assert err <= eps, (err, eps)
    print(f"ok step rule: {steps} steps at eta = {eta:.3e}, error {err:.3e}")

    cond = dln.condition_report(a1)
    assert cond["nullity"] == 2 and cond["script_k"] >= 1.0
    print(f"ok conditioning: script_k = {cond['script_k']:.6f}")

    sw = dln.sweep_alpha(inst, [3.0], 1e-1, 1e-2, 5, fit_skip=1)
    (p_fit, slope, _, r2) = sw["slopes"][0]
    assert p_fit == 3.0 and abs(slope - 3.0) < 0.5 and r2 > 0.99, (slope, r2)
    print(f"ok sweep: slope {slope:.3f} (r2 = {r2:.5f})")

    v = [0.3, -0.2, 0.0]
    zv = dln.zeta(3.0, 0.5, v)
    assert zv[2] == 0.0 and zv[0] > 0.0 > zv[1]
    assert dln.mirror_potential(3.0, 0.5, zv) > 0.0
    shifted = dln.Instance.shift(0.1)
    assert shifted.n == 2
    rnd = dln.Instance.random(2, 4, seed=7)
    assert close(rnd.y, dln.Instance.random(2, 4, seed=7).y, 0.0)
    print("ok auxiliary surface: zeta, potential, shift, random")

    print("smoke test passed")


if __name__ == "__main__":
    main()
