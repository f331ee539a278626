//! Initialization sweeps: how fast the flow limit approaches the
//! selected face point as alpha shrinks. Each grid cell solves the
//! dual problem for the limit point at (p, alpha), measures its
//! distance to the selection target, and the per-depth log-log slope
//! of that distance against alpha is fitted over the asymptotic
//! window. Two cells per depth are cross-validated against the
//! integrated flow at a horizon long enough for the residual bound to
//! have contracted far below the comparison scale.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{bounds, flow_run_instance, RunStatus};
use crate::error::{Error, Result};
use crate::instances::{shift_instance, RegressionInstance};
use crate::linalg::{norm2, sub};
use crate::minimizers::{optimal_face, solve_qstar, wp_select_on_face};
use crate::potentials::Hyperparams;

#[derive(Clone, Debug, Serialize)]
pub struct SweepConfig {
    pub p_values: Vec<f64>,
    /// Largest alpha in the grid.
    pub alpha_start: f64,
    /// Smallest alpha in the grid.
    pub alpha_stop: f64,
    pub alpha_count: usize,
    /// Number of the largest alphas excluded from the slope fit; the
    /// preasymptotic shoulder would otherwise bias the slope.
    pub fit_skip: usize,
    /// Integrate the flow at the two extreme alphas per depth and
    /// record its distance to the dual solution.
    pub flow_check: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_values.is_empty() {
            return Err(Error::InvalidInput("sweep needs at least one depth".into()));
        }
        for &p in &self.p_values {
            if !p.is_finite() || p < 2.0 {
                return Err(Error::InvalidInput(format!("depth p must be >= 2, got {p}")));
            }
        }
        if !(self.alpha_stop > 0.0 && self.alpha_start >= self.alpha_stop) {
            return Err(Error::InvalidInput(
                "need alpha_start >= alpha_stop > 0".into(),
            ));
        }
        if self.alpha_count < 2 {
            return Err(Error::InvalidInput("sweep needs at least two alphas".into()));
        }
        if self.fit_skip + 2 > self.alpha_count {
            return Err(Error::InvalidInput(
                "fit_skip leaves fewer than two points for the slope fit".into(),
            ));
        }
        Ok(())
    }

    /// Log-spaced alphas, ascending.
    pub fn alphas(&self) -> Vec<f64> {
        let lo = self.alpha_stop.ln();
        let hi = self.alpha_start.ln();
        (0..self.alpha_count)
            .map(|k| {
                let f = k as f64 / (self.alpha_count - 1) as f64;
                (lo + f * (hi - lo)).exp()
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub p: f64,
    /// ||qstar(alpha) - w_p||_2.
    pub error_l2: f64,
    /// ||A qstar - y||_2, the solver's feasibility residual.
    pub resid: f64,
    /// Whether the row participates in the slope fit.
    pub slope_window: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SlopeReport {
    pub p: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowCheck {
    pub p: f64,
    pub alpha: f64,
    /// Horizon, chosen as 40 / k2 so the residual factor is e^{-40}.
    pub t: f64,
    /// ||psi(t) - qstar||_2.
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub slopes: Vec<SlopeReport>,
    pub flow_checks: Vec<FlowCheck>,
}

/// Run the sweep. Grid cells within one depth run in parallel; the
/// output is sorted by (p, alpha) regardless of scheduling.
pub fn sweep_alpha(inst: &RegressionInstance, config: &SweepConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let alphas = config.alphas();
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut slopes = Vec::new();
    let mut flow_checks = Vec::new();
    let face = optimal_face(inst)?;
    for &p in &config.p_values {
        let wp = wp_select_on_face(inst, p, &face)?;
        let mut depth_rows: Vec<SweepRow> = alphas
            .par_iter()
            .enumerate()
            .map(|(k, &alpha)| -> Result<SweepRow> {
                let hp = Hyperparams::new(p, alpha)?;
                let qs = solve_qstar(inst, &hp)?;
                let resid = norm2(&sub(&inst.a().matvec(&qs.z), inst.y()));
                Ok(SweepRow {
                    alpha,
                    p,
                    error_l2: norm2(&sub(&qs.z, &wp)),
                    resid,
                    slope_window: k + config.fit_skip < config.alpha_count,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let fit_points: Vec<(f64, f64)> = depth_rows
            .iter()
            .filter(|r| r.slope_window && r.error_l2 > 0.0)
            .map(|r| (r.alpha.ln(), r.error_l2.ln()))
            .collect();
        slopes.push(fit_slope(p, &fit_points)?);
        if config.flow_check {
            for &alpha in &[alphas[0], alphas[alphas.len() - 1]] {
                flow_checks.push(flow_limit_check(inst, p, alpha)?);
            }
        }
        rows.append(&mut depth_rows);
    }
    rows.sort_by(|a, b| {
        (a.p, a.alpha)
            .partial_cmp(&(b.p, b.alpha))
            .unwrap()
    });
    Ok(SweepOutcome { rows, slopes, flow_checks })
}

/// Integrate the flow long enough that e^{-k2 t} = e^{-40} and compare
/// psi(t) with the dual solution of the limit problem.
pub fn flow_limit_check(inst: &RegressionInstance, p: f64, alpha: f64) -> Result<FlowCheck> {
    let hp = Hyperparams::new(p, alpha)?;
    let qs = solve_qstar(inst, &hp)?;
    let bundle = bounds(inst, &hp, 0.0, 1.0, None)?;
    let t = 40.0 / bundle.k2;
    let trace = flow_run_instance(inst, &hp, t, &[t])?;
    if trace.status != RunStatus::Completed {
        return Err(Error::Numerical("flow diverged during the limit check".into()));
    }
    let psi = &trace
        .samples
        .last()
        .ok_or_else(|| Error::Numerical("flow recorded no sample".into()))?
        .psi;
    Ok(FlowCheck { p, alpha, t, distance: norm2(&sub(psi, &qs.z)) })
}

fn fit_slope(p: f64, points: &[(f64, f64)]) -> Result<SlopeReport> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Numerical(
            "slope fit needs at least two finite error points".into(),
        ));
    }
    let nf = n as f64;
    let mx = points.iter().map(|&(x, _)| x).sum::<f64>() / nf;
    let my = points.iter().map(|&(_, y)| y).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = points.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = points.iter().map(|&(_, y)| (y - my) * (y - my)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(SlopeReport { p, slope, intercept, r2, points: n })
}

// ── the shift family ─────────────────────────────────────────────────

#[derive(Clone, Debug, Serialize)]
pub struct ShiftRow {
    pub eps: f64,
    pub p: f64,
    pub alpha: f64,
    pub qstar: Vec<f64>,
    pub wp: Vec<f64>,
    pub dist_qstar_wp: f64,
}

/// Sweep the one-row family A = [1, 1-eps], y = 1 at fixed (p, alpha).
/// The selected solution is (1, 0) for every eps > 0 but jumps to the
/// entropy-style center at eps = 0, while the finite-alpha limit point
/// moves continuously; the rows exhibit that mismatch directly.
pub fn shift_example_sweep(eps_values: &[f64], p: f64, alpha: f64) -> Result<Vec<ShiftRow>> {
    let hp = Hyperparams::new(p, alpha)?;
    let mut rows = Vec::with_capacity(eps_values.len());
    for &eps in eps_values {
        let inst = shift_instance(eps)?;
        let face = optimal_face(&inst)?;
        let wp = wp_select_on_face(&inst, p, &face)?;
        let qs = solve_qstar(&inst, &hp)?;
        rows.push(ShiftRow {
            eps,
            p,
            alpha,
            dist_qstar_wp: norm2(&sub(&qs.z, &wp)),
            qstar: qs.z,
            wp,
        });
    }
    rows.sort_by(|a, b| a.eps.partial_cmp(&b.eps).unwrap());
    Ok(rows)
}

// ── CSV rendering ────────────────────────────────────────────────────

/// Fixed sweep schema; floats carry 17 significant digits so rows
/// round-trip bit-exactly.
pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("alpha,p,error_l2,resid,slope_window\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.alpha,
            r.p,
            r.error_l2,
            r.resid,
            u8::from(r.slope_window)
        ));
    }
    out
}

pub fn render_shift_csv(rows: &[ShiftRow]) -> String {
    let mut out = String::from("eps,p,alpha,qstar_0,qstar_1,wp_0,wp_1,dist\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.eps, r.p, r.alpha, r.qstar[0], r.qstar[1], r.wp[0], r.wp[1], r.dist_qstar_wp
        ));
    }
    out
}
