use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use grover_decoherence::{
    direct_fk_quadrature, finite_n_tk, map_finite_n, mc_estimate, noiseless_success,
    pattern_enumeration, phase_curve, phase_curve_parallel, rational_to_f64, run_exact_channel,
    run_trajectory, PerturbationTable, PhaseCurvePoint, PhaseSweep, QuadratureSpec, SimConfig,
    SolverSettings, StepProbabilities, StepSchedule,
};
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::output::{f, Artifact, Manifest};

/// `start:stop:step`, inclusive of `stop` when it lands on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl FromStr for GridRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, h] = parts[..] else {
            return Err(format!("expected start:stop:step, got '{s}'"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
        Ok(GridRange {
            start: num(a)?,
            stop: num(b)?,
            step: num(h)?,
        })
    }
}

const MAX_GRID_POINTS: usize = 10_000_000;

impl GridRange {
    pub fn points(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let GridRange { start, stop, step } = *self;
        if !(start.is_finite() && stop.is_finite() && step > 0.0 && step.is_finite()) {
            return Err(CliError::Range(format!(
                "{name} range needs finite bounds and a positive step"
            )));
        }
        if stop < start {
            return Err(CliError::Range(format!(
                "{name} range is empty: {start} > {stop}"
            )));
        }
        let count = ((stop - start) / step * (1.0 + 1e-12)).floor() as usize + 1;
        if count > MAX_GRID_POINTS {
            return Err(CliError::Range(format!(
                "{name} range has {count} points (limit {MAX_GRID_POINTS})"
            )));
        }
        Ok((0..count).map(|i| start + i as f64 * step).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleArg(pub StepSchedule);

impl FromStr for ScheduleArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "fig2" {
            return Ok(ScheduleArg(StepSchedule::fig2()));
        }
        match s.strip_prefix("uniform:") {
            Some(step) => step
                .parse::<f64>()
                .map(|step| ScheduleArg(StepSchedule::Uniform { step }))
                .map_err(|e| format!("'{step}': {e}")),
            None => Err(format!("expected 'fig2' or 'uniform:STEP', got '{s}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct CoeffsArgs {
    /// Highest coefficient index.
    #[arg(long, default_value_t = grover_decoherence::perturbation::DEFAULT_ORDER)]
    pub order: usize,
    /// Series degree in theta.
    #[arg(long, default_value_t = grover_decoherence::perturbation::DEFAULT_DEGREE)]
    pub degree: usize,
    /// Also emit the exact closed forms of F_k (orders up to 10).
    #[arg(long)]
    pub closed_form: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    /// theta grid as start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: GridRange,
    /// x grid as start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    pub x: GridRange,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PhaseArgs {
    #[arg(long, default_value_t = 1.0)]
    pub pth_start: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub pth_end: f64,
    /// 'fig2' (5e-4 refining to 5e-7) or 'uniform:STEP'.
    #[arg(long, default_value = "fig2")]
    pub schedule: ScheduleArg,
    /// Solve every threshold independently across threads.
    #[arg(long)]
    pub parallel: bool,
    /// Also write the tangent at P_th = 1 and the log bound to this CSV.
    #[arg(long)]
    pub reference_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct McArgs {
    #[arg(long, default_value_t = 9)]
    pub n: u32,
    #[arg(long, default_value_t = 17)]
    pub m: u32,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 50_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExactArgs {
    #[arg(long, default_value_t = 9)]
    pub n: u32,
    #[arg(long, default_value_t = 17)]
    pub m: u32,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub struct Output {
    pub artifact: Artifact,
    pub manifest: Manifest,
    pub extra: Option<(PathBuf, String)>,
}

fn csv(body: String, manifest: Manifest) -> Output {
    Output {
        artifact: Artifact { body, csv: true },
        manifest,
        extra: None,
    }
}

fn check_probability(p: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(CliError::Range(format!(
            "flip probability {p} outside [0, 1]"
        )))
    }
}

pub fn coeffs(args: &CoeffsArgs) -> Result<Output, CliError> {
    if args.order > 200 || args.degree > 400 || args.degree < 2 {
        return Err(CliError::Range(format!(
            "order {} / degree {} outside 0..=200 / 2..=400",
            args.order, args.degree
        )));
    }
    let table = PerturbationTable::build(args.order, args.degree)?;
    let manifest = Manifest::new(
        "coeffs",
        json!({"order": args.order, "degree": args.degree, "closed_form": args.closed_form, "format": args.format}),
    );
    let closed: Vec<_> = if args.closed_form {
        table
            .normalized()
            .iter()
            .filter(|f| f.k <= table.order())
            .filter_map(|f| f.closed.as_ref().map(|c| (f.k, c)))
            .collect()
    } else {
        Vec::new()
    };

    if args.format == Format::Json {
        let coefficients: Vec<_> = table
            .exact()
            .iter()
            .enumerate()
            .map(|(k, c)| {
                json!({
                    "k": k,
                    "exact": c,
                    "scaled": table.cbar()[k],
                })
            })
            .collect();
        let closed: Vec<_> = closed
            .iter()
            .map(|(k, c)| json!({"k": k, "closed_form": c}))
            .collect();
        let report = json!({
            "manifest": manifest,
            "coefficients": coefficients,
            "closed_forms": closed,
        });
        let body = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Internal(e.to_string()))?
            + "\n";
        return Ok(Output {
            artifact: Artifact { body, csv: false },
            manifest,
            extra: None,
        });
    }

    let mut body = String::from("kind,k,power,frequency,exact_re,exact_im,value\n");
    for (k, series) in table.exact().iter().enumerate() {
        for (power, c) in series.coeffs().iter().enumerate() {
            let _ = writeln!(body, "C,{k},{power},0,{c},0,{}", f(rational_to_f64(c)));
        }
    }
    for (k, c) in closed {
        for (freq, power, g) in c.numerator.terms() {
            let _ = writeln!(
                body,
                "F,{k},{power},{},{},{},{}",
                i64::from(freq),
                g.re,
                g.im,
                f(rational_to_f64(&g.re))
            );
        }
    }
    Ok(csv(body, manifest))
}

pub fn pbar_grid(args: &GridArgs) -> Result<Output, CliError> {
    let thetas = args.theta.points("theta")?;
    let xs = args.x.points("x")?;
    if thetas.len().saturating_mul(xs.len()) > MAX_GRID_POINTS {
        return Err(CliError::Range(format!(
            "grid has {} x {} points (limit {MAX_GRID_POINTS})",
            thetas.len(),
            xs.len()
        )));
    }
    let table = PerturbationTable::new()?;
    let mut body = String::from("theta,x,p_bar,in_window\n");
    for &t in &thetas {
        for &x in &xs {
            let e = table.p_bar(t, x);
            let _ = writeln!(body, "{},{},{},{}", f(t), f(x), f(e.value), e.in_window);
        }
    }
    let manifest = Manifest::new(
        "pbar-grid",
        json!({"theta": args.theta, "x": args.x, "order": table.order(), "degree": table.degree()}),
    );
    Ok(csv(body, manifest))
}

pub fn phase(args: &PhaseArgs) -> Result<Output, CliError> {
    let sweep = PhaseSweep {
        p_th_start: args.pth_start,
        p_th_end: args.pth_end,
        schedule: args.schedule.0,
    };
    sweep.validate()?;
    if let StepSchedule::Uniform { step } = sweep.schedule {
        let count = (sweep.p_th_start - sweep.p_th_end) / step;
        if count > MAX_GRID_POINTS as f64 {
            return Err(CliError::Range(format!(
                "uniform step {step} gives {count:.0} thresholds"
            )));
        }
    }
    let table = PerturbationTable::new()?;
    let settings = SolverSettings::default();
    let points: Vec<PhaseCurvePoint> = if args.parallel {
        let mut pts = phase_curve_parallel(&table, &sweep.thresholds(), &settings)?;
        if let Some(i) = pts.iter().position(|q| q.saturated) {
            pts.truncate(i + 1);
        }
        pts
    } else {
        phase_curve(&table, &sweep, &settings)?
    };
    let mut body = String::from("p_th,x_c,theta_at_threshold,saturated\n");
    for q in &points {
        let _ = writeln!(
            body,
            "{},{},{},{}",
            f(q.p_th),
            f(q.x_c),
            f(q.theta_at_threshold),
            q.saturated
        );
    }
    let manifest = Manifest::new(
        "phase",
        json!({
            "pth_start": args.pth_start,
            "pth_end": args.pth_end,
            "schedule": sweep.schedule,
            "parallel": args.parallel,
            "settings": settings,
        }),
    );
    let extra = args.reference_out.as_ref().map(|path| {
        let mut b = String::from("p_th,x_c,tangent,log_bound\n");
        for q in &points {
            let tangent = 1.6 * (1.0 - q.p_th);
            let log_bound = 1.6 * q.p_th.recip().ln();
            let _ = writeln!(
                b,
                "{},{},{},{}",
                f(q.p_th),
                f(q.x_c),
                f(tangent),
                f(log_bound)
            );
        }
        (path.clone(), b)
    });
    Ok(Output {
        extra,
        ..csv(body, manifest)
    })
}

fn steps_csv(n: u32, probs: &StepProbabilities) -> Result<String, CliError> {
    let mut body = String::from("M,theta,probability,stderr\n");
    for (m, v) in probs.values.iter().enumerate() {
        let (theta, _) = map_finite_n(m as u32, n, 0.0)?;
        let se = probs.stderr.as_ref().map(|s| f(s[m])).unwrap_or_default();
        let _ = writeln!(body, "{m},{},{},{se}", f(theta), f(*v));
    }
    Ok(body)
}

pub fn mc(args: &McArgs) -> Result<Output, CliError> {
    check_probability(args.p)?;
    if args.trials < 2 {
        return Err(CliError::Range(format!(
            "trials = {} (need at least 2)",
            args.trials
        )));
    }
    let cfg = SimConfig::new(args.n, args.m, args.p, args.trials, args.seed);
    let probs = mc_estimate(&cfg)?;
    let mut manifest = Manifest::new(
        "mc",
        json!({"n": args.n, "m": args.m, "p": args.p, "trials": args.trials, "seed": args.seed, "caps": cfg.caps}),
    );
    manifest.seeds.push(args.seed);
    Ok(csv(steps_csv(args.n, &probs)?, manifest))
}

pub fn exact(args: &ExactArgs) -> Result<Output, CliError> {
    check_probability(args.p)?;
    let cfg = SimConfig::new(args.n, args.m, args.p, 1, 0);
    let probs = run_exact_channel(&cfg)?;
    let manifest = Manifest::new(
        "exact",
        json!({"n": args.n, "m": args.m, "p": args.p, "caps": cfg.caps}),
    );
    Ok(csv(steps_csv(args.n, &probs)?, manifest))
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    value: f64,
    reference: f64,
    gap: f64,
    tolerance: f64,
    passed: bool,
}

fn check(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Check {
    let gap = (value - reference).abs();
    Check {
        name: name.into(),
        value,
        reference,
        gap,
        tolerance,
        passed: gap <= tolerance,
    }
}

/// Runs every oracle and returns the report and whether all checks passed.
fn run_checks() -> Result<Vec<Check>, CliError> {
    let table = PerturbationTable::new()?;
    let mut checks = Vec::new();

    checks.push(check(
        "F1(pi/4) series",
        table.normalized()[1].series.eval(FRAC_PI_4),
        0.75,
        1e-12,
    ));
    checks.push(check(
        "F2(pi/4) series",
        table.normalized()[2].series.eval(FRAC_PI_4),
        5.0 / 16.0,
        1e-12,
    ));
    checks.push(check(
        "C1(pi/4)",
        table.cbar_at(1, FRAC_PI_4),
        -0.625,
        1e-12,
    ));

    for k in 1..=3 {
        let fk = &table.normalized()[k];
        for &t in &[0.3, FRAC_PI_4, 1.0] {
            let q = direct_fk_quadrature(&QuadratureSpec {
                k,
                theta: t,
                tol: 1e-9,
            })?
            .value;
            checks.push(check(
                format!("F{k}({t}) quadrature vs series"),
                q,
                fk.series.eval(t),
                1e-7,
            ));
            if let Some(c) = &fk.closed {
                checks.push(check(
                    format!("F{k}({t}) quadrature vs closed form"),
                    q,
                    c.eval_naive(t)?,
                    1e-7,
                ));
            }
        }
    }

    let bound = table.c40_bound();
    checks.push(Check {
        name: "next-order remainder bound on [0, pi]".into(),
        value: bound.max,
        reference: 1.24e-50,
        gap: (bound.max - 1.24e-50).max(0.0),
        tolerance: 0.05 * 1.24e-50,
        passed: bound.max <= 1.24e-50 * 1.05,
    });

    for &(n, m) in &[(2u32, 1u32), (5, 4), (9, 17)] {
        let r = run_trajectory(&SimConfig::new(n, m, 0.0, 1, 0), 0)?;
        checks.push(check(
            format!("noiseless n={n} M={m}"),
            *r.values.last().expect("m+1 values"),
            noiseless_success(n, m),
            1e-12,
        ));
    }

    for &p in &[0.1, 0.3] {
        let enumerated = pattern_enumeration(2, 1, p)?;
        let exact = run_exact_channel(&SimConfig::new(2, 1, p, 1, 0))?;
        checks.push(check(
            format!("exact channel vs patterns p={p}"),
            exact.values[1],
            enumerated[1],
            1e-12,
        ));
    }

    let (theta, _) = map_finite_n(17, 9, 0.0)?;
    checks.push(check(
        "finite-n first order n=9 M=17",
        finite_n_tk(9, 17, 1)?,
        table.normalized()[1].series.eval(theta),
        0.05,
    ));
    Ok(checks)
}

pub fn validate(_args: &ValidateArgs) -> Result<(Output, bool), CliError> {
    let checks = run_checks()?;
    let passed = checks.iter().all(|c| c.passed);
    let manifest = Manifest::new("validate", json!({}));
    let report = json!({ "manifest": manifest, "passed": passed, "checks": checks });
    let body = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Internal(e.to_string()))?
        + "\n";
    Ok((
        Output {
            artifact: Artifact { body, csv: false },
            manifest,
            extra: None,
        },
        passed,
    ))
}
