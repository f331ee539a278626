//! `dln`: run the diagonal linear network experiments from the command
//! line. Every subcommand reads an instance, computes with dln-core,
//! and emits CSV or JSON; identical invocations produce byte-identical
//! output. Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use dln_core::conditioning::condition_report;
use dln_core::dynamics::{
    bounds, flow_run, gd_matches_flow, gd_run_instance, log_schedule, FlowTrace, GdTrace,
};
use dln_core::instances::{
    instance_a1, instance_a2, instance_a3, random_instance, shift_instance, InstanceData,
    RegressionInstance,
};
use dln_core::minimizers::{minimizer_set, optimal_face, solve_bp, wp_select_on_face};
use dln_core::potentials::Hyperparams;
use dln_core::rng::SplitMix64;
use dln_core::sweep::{
    render_shift_csv, render_sweep_csv, shift_example_sweep, sweep_alpha, SweepConfig,
};
use dln_core::{tol, Error, Result};

#[derive(Parser)]
#[command(
    name = "dln",
    version,
    about = "Diagonal linear network flows, their limit points, and the constants that certify them"
)]
struct Cli {
    /// JSON config file; any flag given on the command line overrides
    /// the value from the file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sweep alpha per depth and fit the log-log error slope
    Sweep(SweepArgs),
    /// Compare limit points across the one-row shift family
    Shift(ShiftArgs),
    /// Integrate the gradient flow and record the trajectory
    Flow(FlowArgs),
    /// Gradient descent: literal step rule vs the flow, or a raw run
    Gd(GdArgs),
    /// Basis pursuit value, minimizer, and the optimal face
    Bp(BpArgs),
    /// Selected minimizer on the optimal face, optionally with the
    /// finite-alpha points and their distances
    Wp(WpArgs),
    /// Every explicit constant for an instance at (p, alpha, t, eps)
    Constants(ConstantsArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Instance: a1 | a2 | a3 | shift:EPS | rand:MxN | file:PATH
    /// (file holds JSON {"a": [[..]], "y": [..]})
    #[arg(long, value_name = "SPEC")]
    instance: Option<String>,

    /// Output path; stdout when omitted
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format (default: csv for tabular subcommands, json otherwise)
    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Worker threads for grid evaluation; 0 keeps the rayon default
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,

    /// Seed for rand: instances
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,

    /// Depths to sweep, comma separated
    #[arg(long, value_delimiter = ',', num_args = 1.., value_name = "P")]
    p: Option<Vec<f64>>,

    /// Largest alpha of the geometric grid
    #[arg(long, value_name = "A")]
    alpha_start: Option<f64>,

    /// Smallest alpha of the geometric grid
    #[arg(long, value_name = "A")]
    alpha_stop: Option<f64>,

    /// Number of grid points
    #[arg(long, value_name = "N")]
    alpha_count: Option<usize>,

    /// Largest alphas excluded from the slope fit
    #[arg(long, value_name = "N")]
    fit_skip: Option<usize>,

    /// Integrate the flow at the extreme alphas and record its
    /// distance to the dual solution
    #[arg(long)]
    flow_check: bool,
}

#[derive(Args)]
struct ShiftArgs {
    #[command(flatten)]
    common: Common,

    /// Shift parameters eps, comma separated
    #[arg(long, value_delimiter = ',', num_args = 1.., value_name = "E")]
    eps: Option<Vec<f64>>,

    /// Depth
    #[arg(long, value_name = "P")]
    p: Option<f64>,

    /// Initialization scale
    #[arg(long, value_name = "A")]
    alpha: Option<f64>,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    common: Common,

    /// Depth
    #[arg(long, value_name = "P")]
    p: Option<f64>,

    /// Initialization scale
    #[arg(long, value_name = "A")]
    alpha: Option<f64>,

    /// Horizon; defaults to 40 / K2 so the residual bound has
    /// contracted by e^{-40}
    #[arg(long, value_name = "T")]
    t: Option<f64>,

    /// Number of logarithmically spaced samples
    #[arg(long, value_name = "N")]
    samples: Option<usize>,

    /// Relative integrator tolerance
    #[arg(long, value_name = "TOL")]
    rtol: Option<f64>,

    /// Absolute integrator tolerance
    #[arg(long, value_name = "TOL")]
    atol: Option<f64>,
}

#[derive(Args)]
struct GdArgs {
    #[command(flatten)]
    common: Common,

    /// Depth
    #[arg(long, value_name = "P")]
    p: Option<f64>,

    /// Initialization scale
    #[arg(long, value_name = "A")]
    alpha: Option<f64>,

    /// Horizon for the literal step rule comparison
    #[arg(long, value_name = "T")]
    t: Option<f64>,

    /// Target accuracy eps for the literal step rule
    #[arg(long, value_name = "E")]
    eps: Option<f64>,

    /// Step budget; the rule fails (exit 3) when it demands more
    #[arg(long, value_name = "N")]
    budget: Option<u64>,

    /// Raw mode: run plain descent with this step size instead of the
    /// bound-driven comparison
    #[arg(long, value_name = "ETA")]
    eta: Option<f64>,

    /// Raw mode: number of steps
    #[arg(long, value_name = "N")]
    steps: Option<u64>,

    /// Raw mode: number of logarithmically spaced recorded steps
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
}

#[derive(Args)]
struct BpArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct WpArgs {
    #[command(flatten)]
    common: Common,

    /// Depth
    #[arg(long, value_name = "P")]
    p: Option<f64>,

    /// When given, also solve the finite-alpha points and report
    /// their distances to the selection
    #[arg(long, value_name = "A")]
    alpha: Option<f64>,
}

#[derive(Args)]
struct ConstantsArgs {
    #[command(flatten)]
    common: Common,

    /// Depth
    #[arg(long, value_name = "P")]
    p: Option<f64>,

    /// Initialization scale
    #[arg(long, value_name = "A")]
    alpha: Option<f64>,

    /// Horizon the step-size thresholds quantify over
    #[arg(long, value_name = "T")]
    t: Option<f64>,

    /// Accuracy the step-size thresholds quantify over
    #[arg(long, value_name = "E")]
    eps: Option<f64>,

    /// Assumed rate-constant pair (C1, C2) for the initialization
    /// threshold; defaults to (1, 1)
    #[arg(long, value_name = "C")]
    assume_c1: Option<f64>,

    #[arg(long, value_name = "C")]
    assume_c2: Option<f64>,
}

/// Optional values a `--config` file may carry; every command line
/// flag overrides its file counterpart.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    instance: Option<String>,
    out: Option<String>,
    format: Option<String>,
    jobs: Option<usize>,
    seed: Option<u64>,
    p: Option<Vec<f64>>,
    alpha: Option<f64>,
    alpha_start: Option<f64>,
    alpha_stop: Option<f64>,
    alpha_count: Option<usize>,
    fit_skip: Option<usize>,
    flow_check: Option<bool>,
    eps_values: Option<Vec<f64>>,
    t: Option<f64>,
    eps: Option<f64>,
    rtol: Option<f64>,
    atol: Option<f64>,
    samples: Option<usize>,
    eta: Option<f64>,
    steps: Option<u64>,
    budget: Option<u64>,
    assume_c1: Option<f64>,
    assume_c2: Option<f64>,
}

impl FileConfig {
    fn load(path: &Option<PathBuf>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }

    fn format(&self) -> Result<Option<Format>> {
        match self.format.as_deref() {
            None => Ok(None),
            Some("csv") => Ok(Some(Format::Csv)),
            Some("json") => Ok(Some(Format::Json)),
            Some(other) => Err(Error::InvalidInput(format!(
                "config format must be csv or json, got {other}"
            ))),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let fc = FileConfig::load(&cli.config)?;
    match cli.cmd {
        Cmd::Sweep(a) => cmd_sweep(a, fc),
        Cmd::Shift(a) => cmd_shift(a, fc),
        Cmd::Flow(a) => cmd_flow(a, fc),
        Cmd::Gd(a) => cmd_gd(a, fc),
        Cmd::Bp(a) => cmd_bp(a, fc),
        Cmd::Wp(a) => cmd_wp(a, fc),
        Cmd::Constants(a) => cmd_constants(a, fc),
    }
}

/// Resolved common settings after the flag-over-file merge.
struct Settings {
    inst: RegressionInstance,
    out: Option<PathBuf>,
    format: Format,
}

fn resolve(common: &Common, fc: &FileConfig, default_format: Format) -> Result<Settings> {
    let spec = common
        .instance
        .clone()
        .or_else(|| fc.instance.clone())
        .unwrap_or_else(|| "a2".into());
    let seed = common.seed.or(fc.seed).unwrap_or(0);
    let jobs = common.jobs.or(fc.jobs).unwrap_or(0);
    if jobs > 0 {
        // a second resolve in one process keeps the first pool; that
        // only happens in tests, never in a single CLI invocation
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let format = match common.format {
        Some(f) => f,
        None => fc.format()?.unwrap_or(default_format),
    };
    let out = common
        .out
        .clone()
        .or_else(|| fc.out.as_ref().map(PathBuf::from));
    Ok(Settings { inst: parse_instance(&spec, seed)?, out, format })
}

fn parse_instance(spec: &str, seed: u64) -> Result<RegressionInstance> {
    match spec {
        "a1" => Ok(instance_a1()),
        "a2" => Ok(instance_a2()),
        "a3" => Ok(instance_a3()),
        _ => {
            if let Some(eps) = spec.strip_prefix("shift:") {
                let eps: f64 = eps
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad shift eps {eps:?}")))?;
                shift_instance(eps)
            } else if let Some(dims) = spec.strip_prefix("rand:") {
                let (m, n) = dims
                    .split_once('x')
                    .ok_or_else(|| Error::InvalidInput(format!("bad rand spec {dims:?}")))?;
                let m: usize = m
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad row count {m:?}")))?;
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad column count {n:?}")))?;
                random_instance(&mut SplitMix64::new(seed), m, n)
            } else if let Some(path) = spec.strip_prefix("file:") {
                let data: InstanceData = serde_json::from_str(&fs::read_to_string(path)?)?;
                RegressionInstance::from_parts(&data)
            } else {
                Err(Error::InvalidInput(format!(
                    "unknown instance {spec:?}; use a1|a2|a3|shift:EPS|rand:MxN|file:PATH"
                )))
            }
        }
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, &text)
}

// ── subcommands ──────────────────────────────────────────────────────

fn cmd_sweep(a: SweepArgs, fc: FileConfig) -> Result<()> {
    let s = resolve(&a.common, &fc, Format::Csv)?;
    let config = SweepConfig {
        p_values: a.p.or(fc.p).unwrap_or_else(|| vec![3.0, 4.0, 5.0]),
        alpha_start: a.alpha_start.or(fc.alpha_start).unwrap_or(1e-1),
        alpha_stop: a.alpha_stop.or(fc.alpha_stop).unwrap_or(10f64.powf(-2.5)),
        alpha_count: a.alpha_count.or(fc.alpha_count).unwrap_or(7),
        fit_skip: a.fit_skip.or(fc.fit_skip).unwrap_or(1),
        flow_check: a.flow_check || fc.flow_check.unwrap_or(false),
    };
    let outcome = sweep_alpha(&s.inst, &config)?;
    match s.format {
        Format::Json => emit_json(&s.out, &json!({
            "config": config,
            "rows": outcome.rows,
            "slopes": outcome.slopes,
            "flow_checks": outcome.flow_checks,
        })),
        Format::Csv => {
            // the CSV carries the grid rows; fit and check summaries
            // go to stderr so the table stays machine-readable
            for sl in &outcome.slopes {
                eprintln!(
                    "p={} slope={:.6} intercept={:.6} r2={:.8} points={}",
                    sl.p, sl.slope, sl.intercept, sl.r2, sl.points
                );
            }
            for chk in &outcome.flow_checks {
                eprintln!(
                    "flow check: p={} alpha={:.6e} t={:.4} distance={:.6e}",
                    chk.p, chk.alpha, chk.t, chk.distance
                );
            }
            emit(&s.out, &render_sweep_csv(&outcome.rows))
        }
    }
}

fn cmd_shift(a: ShiftArgs, fc: FileConfig) -> Result<()> {
    // the instance flag is ignored here: the family is the instance
    let s = resolve(&a.common, &fc, Format::Csv)?;
    let eps = a
        .eps
        .or(fc.eps_values)
        .unwrap_or_else(|| vec![0.5, 0.25, 0.1, 0.05, 0.02]);
    let p = a.p.or_else(|| fc.p.as_ref().and_then(|v| v.first().copied())).unwrap_or(3.0);
    let alpha = a.alpha.or(fc.alpha).unwrap_or(1e-2);
    let rows = shift_example_sweep(&eps, p, alpha)?;
    match s.format {
        Format::Json => emit_json(&s.out, &rows),
        Format::Csv => emit(&s.out, &render_shift_csv(&rows)),
    }
}

fn cmd_flow(a: FlowArgs, fc: FileConfig) -> Result<()> {
    let s = resolve(&a.common, &fc, Format::Csv)?;
    let p = a.p.or_else(|| fc.p.as_ref().and_then(|v| v.first().copied())).unwrap_or(2.0);
    let alpha = a.alpha.or(fc.alpha).unwrap_or(1e-1);
    let hp = Hyperparams::new(p, alpha)?;
    let t = match a.t.or(fc.t) {
        Some(t) => t,
        None => 40.0 / bounds(&s.inst, &hp, 0.0, 1.0, None)?.k2,
    };
    let samples = a.samples.or(fc.samples).unwrap_or(64);
    let rtol = a.rtol.or(fc.rtol).unwrap_or(tol::FLOW_RTOL);
    let atol = a.atol.or(fc.atol).unwrap_or(tol::FLOW_ATOL);
    let schedule = log_schedule(t, samples);
    let trace = flow_run(s.inst.a(), s.inst.y(), &hp, t, &schedule, rtol, atol)?;
    match s.format {
        Format::Json => emit_json(&s.out, &trace),
        Format::Csv => emit(&s.out, &render_flow_csv(&trace)),
    }
}

fn render_flow_csv(trace: &FlowTrace) -> String {
    let n = trace.samples.first().map_or(0, |s| s.psi.len());
    let mut out = String::from("t,residual_norm,loss");
    for j in 0..n {
        out.push_str(&format!(",psi_{j}"));
    }
    out.push('\n');
    for s in &trace.samples {
        out.push_str(&format!("{:.16e},{:.16e},{:.16e}", s.t, s.residual_norm, s.loss));
        for v in &s.psi {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

fn render_gd_csv(trace: &GdTrace) -> String {
    let n = trace.samples.first().map_or(0, |s| s.psi.len());
    let mut out = String::from("step,t,residual_norm,loss");
    for j in 0..n {
        out.push_str(&format!(",psi_{j}"));
    }
    out.push('\n');
    for s in &trace.samples {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e}",
            s.step, s.t, s.residual_norm, s.loss
        ));
        for v in &s.psi {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

fn cmd_gd(a: GdArgs, fc: FileConfig) -> Result<()> {
    let s = resolve(&a.common, &fc, Format::Json)?;
    let p = a.p.or_else(|| fc.p.as_ref().and_then(|v| v.first().copied())).unwrap_or(2.0);
    let alpha = a.alpha.or(fc.alpha).unwrap_or(1e-1);
    let hp = Hyperparams::new(p, alpha)?;
    match a.eta.or(fc.eta) {
        Some(eta) => {
            let steps = a.steps.or(fc.steps).unwrap_or(100_000);
            let samples = a.samples.or(fc.samples).unwrap_or(64);
            let record = log_step_schedule(steps, samples);
            let trace = gd_run_instance(&s.inst, &hp, eta, steps, &record)?;
            match s.format {
                Format::Json => emit_json(&s.out, &trace),
                Format::Csv => emit(&s.out, &render_gd_csv(&trace)),
            }
        }
        None => {
            let t = a.t.or(fc.t).unwrap_or(1.0);
            let eps = a.eps.or(fc.eps).unwrap_or(1e-2);
            let budget = a.budget.or(fc.budget).unwrap_or(20_000_000);
            let m = gd_matches_flow(&s.inst, &hp, t, eps, budget)?;
            match s.format {
                Format::Json => emit_json(&s.out, &m),
                Format::Csv => {
                    let text = format!(
                        "eta,steps,error_l2,bound_eps\n{:.16e},{},{:.16e},{:.16e}\n",
                        m.eta, m.steps, m.error_l2, m.bound_eps
                    );
                    emit(&s.out, &text)
                }
            }
        }
    }
}

/// Step indices {0} plus `count` geometrically spaced values up to
/// `steps`, deduplicated; mirrors `log_schedule` for discrete time.
fn log_step_schedule(steps: u64, count: usize) -> Vec<u64> {
    let mut out = vec![0u64];
    if steps == 0 || count == 0 {
        return out;
    }
    let hi = (steps as f64).ln();
    for k in 0..count {
        let f = (k + 1) as f64 / count as f64;
        out.push((f * hi).exp().round() as u64);
    }
    out.push(steps);
    out.sort_unstable();
    out.dedup();
    out
}

fn cmd_bp(a: BpArgs, fc: FileConfig) -> Result<()> {
    let s = resolve(&a.common, &fc, Format::Json)?;
    let bp = solve_bp(&s.inst)?;
    let face = optimal_face(&s.inst)?;
    match s.format {
        Format::Json => emit_json(&s.out, &json!({ "bp": bp, "face": face })),
        Format::Csv => {
            let mut text = String::from("i,z,sign,range_lo,range_hi\n");
            for i in 0..bp.z.len() {
                text.push_str(&format!(
                    "{},{:.16e},{},{:.16e},{:.16e}\n",
                    i,
                    bp.z[i],
                    face.sign_pattern[i],
                    face.coordinate_ranges[i].0,
                    face.coordinate_ranges[i].1
                ));
            }
            emit(&s.out, &text)
        }
    }
}

fn cmd_wp(a: WpArgs, fc: FileConfig) -> Result<()> {
    let s = resolve(&a.common, &fc, Format::Json)?;
    let p = a.p.or_else(|| fc.p.as_ref().and_then(|v| v.first().copied())).unwrap_or(3.0);
    match a.alpha.or(fc.alpha) {
        Some(alpha) => {
            let hp = Hyperparams::new(p, alpha)?;
            let report = minimizer_set(&s.inst, &hp)?;
            match s.format {
                Format::Json => emit_json(&s.out, &report),
                Format::Csv => {
                    let mut text = String::from("i,wp,qstar,mstar\n");
                    for i in 0..report.wp.len() {
                        text.push_str(&format!(
                            "{},{:.16e},{:.16e},{:.16e}\n",
                            i, report.wp[i], report.qstar[i], report.mstar[i]
                        ));
                    }
                    emit(&s.out, &text)
                }
            }
        }
        None => {
            let face = optimal_face(&s.inst)?;
            let wp = wp_select_on_face(&s.inst, p, &face)?;
            match s.format {
                Format::Json => emit_json(
                    &s.out,
                    &json!({
                        "p": p,
                        "wp": wp,
                        "l1_norm": face.l1_norm,
                        "face_dimension": face.dimension,
                        "support": face.support,
                    }),
                ),
                Format::Csv => {
                    let mut text = String::from("i,wp\n");
                    for (i, v) in wp.iter().enumerate() {
                        text.push_str(&format!("{i},{v:.16e}\n"));
                    }
                    emit(&s.out, &text)
                }
            }
        }
    }
}

fn cmd_constants(a: ConstantsArgs, fc: FileConfig) -> Result<()> {
    let s = resolve(&a.common, &fc, Format::Json)?;
    let p = a.p.or_else(|| fc.p.as_ref().and_then(|v| v.first().copied())).unwrap_or(3.0);
    let alpha = a.alpha.or(fc.alpha).unwrap_or(1e-1);
    let t = a.t.or(fc.t).unwrap_or(1.0);
    let eps = a.eps.or(fc.eps).unwrap_or(1e-2);
    let hp = Hyperparams::new(p, alpha)?;
    let assumed = match (a.assume_c1.or(fc.assume_c1), a.assume_c2.or(fc.assume_c2)) {
        (None, None) => None,
        (c1, c2) => Some((c1.unwrap_or(1.0), c2.unwrap_or(1.0))),
    };
    let bundle = bounds(&s.inst, &hp, t, eps, assumed)?;
    let cond = condition_report(s.inst.a())?;
    let value = json!({
        "instance": {
            "m": s.inst.m(),
            "n": s.inst.n(),
            "op_norm": s.inst.op_norm(),
            "sigma_min": s.inst.sigma_min(),
        },
        "p": p,
        "alpha": alpha,
        "t": t,
        "eps": eps,
        "bounds": bundle,
        "conditioning": cond,
    });
    match s.format {
        Format::Json => emit_json(&s.out, &value),
        Format::Csv => {
            let mut text = String::from("name,value\n");
            let mut push = |name: &str, v: f64| {
                text.push_str(&format!("{name},{v:.16e}\n"));
            };
            push("op_norm", s.inst.op_norm());
            push("sigma_min", s.inst.sigma_min());
            push("k1", bundle.k1);
            push("k2", bundle.k2);
            push("m_cap", bundle.m_cap);
            push("c1_grad", bundle.c1_grad);
            push("c2_hess", bundle.c2_hess);
            push("k_cap", bundle.k_cap);
            push("eps_hat", bundle.eps_hat);
            push("eta_theta", bundle.eta_theta);
            push("eta_max", bundle.eta_max);
            push("u_alpha", bundle.u_alpha);
            push("l_t", bundle.l_t);
            push("u_eta", bundle.u_eta);
            push("script_k", cond.script_k);
            if let Some(ca) = &cond.c_a {
                push("c_a", ca.value);
            }
            emit(&s.out, &text)
        }
    }
}
