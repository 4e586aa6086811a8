use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nehari_core::analysis::{error_bound, restricted_certificate, SweepOptions};
use nehari_core::json::{fmt_sig, round_json};
use nehari_core::linalg::CMat;
use nehari_core::{
    check_conditions, convergence_sweep, gramians, rate_predictor, solve_full_nehari, solve_restricted,
    CentralSolution, Error, ErrorClass,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::spec::{validate_tolerances, ProblemSpec, SpecError, Tolerances};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_CONDITION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "nehari", version, about = "Optimal and restricted Nehari solutions for rational symbols")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Number of points on the unit-circle grid.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Certificate tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Relative eigenvalue gap deciding the multiplicity of the Hankel norm.
    #[arg(long = "gap-rtol", global = true)]
    pub gap_rtol: Option<f64>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Read the problem from stdin; output defaults to JSON.
    #[arg(long, global = true)]
    pub stdin: bool,
}

#[derive(Debug, Args)]
pub struct SpecArg {
    /// Problem file (JSON).
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hankel norm, maximizing vectors and the uniqueness conditions.
    Check(SpecArg),
    /// Unique optimal solution of the full problem.
    Solve(SpecArg),
    /// Central solution of the problem restricted to M_k.
    Restrict {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Restricted solutions for k = 1..=k_max against the full solution.
    Sweep {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long = "k-max")]
        k_max: Option<usize>,
        /// Noise floor excluded from the rate fit.
        #[arg(long)]
        floor: Option<f64>,
        /// Allowed excess of the fitted slope over the predicted log-rate.
        #[arg(long)]
        margin: Option<f64>,
    },
}

/// What a command produced: the text of the primary output and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub text: String,
    pub code: u8,
}

#[derive(Debug)]
pub enum Failure {
    Spec(SpecError),
    Core(Error),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Spec(_) | Failure::Io(_) => EXIT_INPUT,
            Failure::Core(e) => match e.class() {
                ErrorClass::Input => EXIT_INPUT,
                ErrorClass::Condition => EXIT_CONDITION,
                ErrorClass::Numerical => EXIT_NUMERICAL,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Spec(e) => write!(f, "invalid problem: {e}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Failure::Spec(e)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load_spec(cli: &Cli, arg: &SpecArg) -> Result<ProblemSpec, Failure> {
    let text = match (&arg.spec, cli.stdin) {
        (Some(_), true) => return Err(Failure::Io("give either a problem file or --stdin, not both".into())),
        (None, false) => return Err(Failure::Io("no problem file given (pass a path or --stdin)".into())),
        (None, true) => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure::Io(format!("stdin: {e}")))?;
            s
        }
        (Some(path), false) => std::fs::read_to_string(path).map_err(|e| io_err(path, e))?,
    };
    let mut spec = ProblemSpec::parse(&text)?;
    let t = &mut spec.tolerances;
    if let Some(g) = cli.grid {
        t.grid = g;
    }
    if let Some(v) = cli.tol {
        t.tol = v;
    }
    if let Some(v) = cli.gap_rtol {
        t.gap_rtol = v;
    }
    validate_tolerances(t)?;
    Ok(spec)
}

fn rounded(v: &impl Serialize) -> Value {
    let mut v = serde_json::to_value(v).expect("serializable output");
    round_json(&mut v);
    v
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value");
    s.push('\n');
    s
}

fn table(rows: &[(&str, String)]) -> String {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    rows.iter().fold(String::new(), |mut acc, (k, v)| {
        let _ = writeln!(acc, "{k:<width$}  {v}");
        acc
    })
}

fn key_value_csv(rows: &[(&str, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

fn fmt_matrix(m: &CMat) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let cells: Vec<String> = (0..m.ncols())
                .map(|j| {
                    let z = m[(i, j)];
                    format!("{}{}i", fmt_sig(z.re), Signed(z.im))
                })
                .collect();
            cells.join("  ")
        })
        .collect();
    format!("[{}]", rows.join("; "))
}

/// Imaginary part with an explicit sign.
struct Signed(f64);

impl std::fmt::Display for Signed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = fmt_sig(self.0);
        if s.starts_with('-') {
            write!(f, "{s}")
        } else {
            write!(f, "+{s}")
        }
    }
}

/// CSV rows `t, re λ, im λ, re/im Φ₊[i][j]` on the circle grid.
pub fn grid_csv(sol: &CentralSolution, n_grid: usize) -> Result<String, Failure> {
    let rows = sol.grid(n_grid)?;
    let (q, p) = rows.first().map(|r| r.2.shape()).unwrap_or((0, 0));
    let mut out = String::from("t,re_lambda,im_lambda");
    for i in 0..q {
        for j in 0..p {
            let _ = write!(out, ",re_phi_{}_{},im_phi_{}_{}", i + 1, j + 1, i + 1, j + 1);
        }
    }
    out.push('\n');
    for (t, z, v) in rows {
        let _ = write!(out, "{},{},{}", fmt_sig(t), fmt_sig(z.re), fmt_sig(z.im));
        for i in 0..q {
            for j in 0..p {
                let _ = write!(out, ",{},{}", fmt_sig(v[(i, j)].re), fmt_sig(v[(i, j)].im));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

fn cmd_check(spec: &ProblemSpec, format: Format) -> Result<Outcome, Failure> {
    let r = &spec.realization;
    let gp = gramians(r)?;
    let rep = check_conditions(r, &gp, spec.tolerances.gap_rtol)?;
    let predictor = if spec.q_roots.is_empty() {
        None
    } else {
        Some(rate_predictor(r, &spec.q_roots)?)
    };
    let ok = rep.c1_holds && rep.c2_holds && gp.is_minimal();
    let code = if ok { EXIT_OK } else { EXIT_CONDITION };
    let rows = [
        ("gamma", fmt_sig(rep.gamma)),
        ("multiplicity", rep.multiplicity.to_string()),
        ("inputs", r.inputs().to_string()),
        ("minimal", gp.is_minimal().to_string()),
        ("c1_holds", rep.c1_holds.to_string()),
        ("no_max_vector_in_shift_range", rep.no_max_vector_in_shift_range.to_string()),
        ("dimension_matches_inputs", rep.dimension_matches_inputs.to_string()),
        ("c2_holds", rep.c2_holds.to_string()),
        ("ambiguous_multiplicity", rep.ambiguous_multiplicity.to_string()),
        ("stein_residual_p", fmt_sig(gp.residual_p)),
        ("stein_residual_q", fmt_sig(gp.residual_q)),
    ];
    let text = match format {
        Format::Json => {
            let mut v = json!({
                "report": rep,
                "minimal": gp.is_minimal(),
                "stein_residuals": [gp.residual_p, gp.residual_q],
            });
            if let Some(pr) = &predictor {
                v["rate_predictor"] = serde_json::to_value(pr).expect("serializable");
            }
            pretty(&rounded(&v))
        }
        Format::Table => {
            let mut t = table(&rows);
            if let Some(pr) = &predictor {
                t.push_str(&table(&[
                    ("x0_dim", pr.x0_dim.to_string()),
                    ("z0_radius", fmt_sig(pr.z0_radius)),
                    ("z_radius", fmt_sig(pr.z_radius)),
                ]));
            }
            t
        }
        Format::Csv => key_value_csv(&rows),
    };
    Ok(Outcome { text, code })
}

fn cmd_solve(spec: &ProblemSpec, format: Format) -> Result<Outcome, Failure> {
    let r = &spec.realization;
    let t = spec.tolerances;
    let gp = gramians(r)?;
    let rep = check_conditions(r, &gp, t.gap_rtol)?;
    let sol = solve_full_nehari(r, &gp, &rep)?;
    let eb = error_bound(&sol, t.grid)?;
    let allpass = r.inputs() == 1 && r.outputs() == 1;
    let deviation = if allpass { eb.allpass_deviation() } else { eb.sup_deviation() };
    let passed = deviation <= t.tol;
    if !passed {
        log::warn!("error bound deviates from gamma by {deviation:.3e}");
    }
    let phi0 = sol.eval(nehari_core::linalg::cr(0.0))?;
    let csv = grid_csv(&sol, t.grid)?;
    let json = rounded(&json!({
        "solution": sol.to_json(),
        "certificate": {
            "kind": if allpass { "all-pass" } else { "sup-norm" },
            "sup": eb.sup,
            "inf": eb.inf,
            "deviation": deviation,
            "tol": t.tol,
            "n_grid": t.grid,
            "passed": passed,
        },
    }));
    write_extras(spec, Some(&json), Some(&csv))?;
    let composite_states = sol.realization_2n.as_ref().map_or(0, |c| c.states());
    let text = match format {
        Format::Json => pretty(&json),
        Format::Csv => csv,
        Format::Table => table(&[
            ("gamma", fmt_sig(sol.gamma)),
            ("phi_plus(0)", fmt_matrix(&phi0)),
            ("composite_states", composite_states.to_string()),
            ("t_spectral_radius", fmt_sig(sol.state_data().t_radius)),
            ("error_sup", fmt_sig(eb.sup)),
            ("error_inf", fmt_sig(eb.inf)),
            ("certificate", format!("{} (deviation {})", if passed { "pass" } else { "fail" }, fmt_sig(deviation))),
        ]),
    };
    Ok(Outcome { text, code: EXIT_OK })
}

fn certificate_size(sol: &CentralSolution, grid: usize) -> usize {
    let m = sol.ladder().map_or(0, |lb| lb.dim());
    let need = 8 * (m + sol.realization().states());
    grid.max(need).next_power_of_two()
}

fn cmd_restrict(spec: &ProblemSpec, k: usize, format: Format) -> Result<Outcome, Failure> {
    let r = &spec.realization;
    let t = spec.tolerances;
    let gp = gramians(r)?;
    let sol = solve_restricted(r, &gp, &spec.q_roots, k)?;
    let cert = restricted_certificate(&sol, certificate_size(&sol, t.grid), t.tol)?;
    let passed = cert.residual <= t.tol;
    let csv = grid_csv(&sol, t.grid)?;
    let json = rounded(&json!({
        "solution": sol.to_json(),
        "certificate": {
            "norm": cert.norm,
            "residual": cert.residual,
            "n_fft": cert.n_fft,
            "underresolved": cert.underresolved,
            "tol": t.tol,
            "passed": passed,
        },
        "projection_defect": sol.projection_defect()?,
    }));
    write_extras(spec, Some(&json), Some(&csv))?;
    let text = match format {
        Format::Json => pretty(&json),
        Format::Csv => csv,
        Format::Table => table(&[
            ("k", k.to_string()),
            ("gamma_k", fmt_sig(sol.gamma)),
            ("basis_dim", sol.ladder().map_or(0, |lb| lb.dim()).to_string()),
            (
                "lambda_spectral_radius",
                fmt_sig(nehari_core::linalg::spectral_radius(sol.lambda_m.as_ref().expect("restricted"))),
            ),
            ("phi_plus(0)", fmt_matrix(&sol.eval(nehari_core::linalg::cr(0.0))?)),
            ("certificate_norm", fmt_sig(cert.norm)),
            ("certificate", format!("{} (residual {})", if passed { "pass" } else { "fail" }, fmt_sig(cert.residual))),
        ]),
    };
    Ok(Outcome { text, code: EXIT_OK })
}

fn cmd_sweep(spec: &ProblemSpec, k_max: usize, opts: SweepOptions, format: Format) -> Result<Outcome, Failure> {
    let r = &spec.realization;
    let gp = gramians(r)?;
    let rep = check_conditions(r, &gp, spec.tolerances.gap_rtol)?;
    let report = convergence_sweep(r, &gp, &rep, &spec.q_roots, k_max, opts)?;
    let json = rounded(&report);
    let csv = report.to_csv();
    if let Some(p) = &spec.outputs.sweep_csv {
        write_file(p, &csv)?;
    }
    if let Some(p) = &spec.outputs.sweep_json {
        write_file(p, &pretty(&json))?;
    }
    let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_else(|| "-".into());
    let text = match format {
        Format::Json => pretty(&json),
        Format::Csv => csv,
        Format::Table => {
            let mut t = String::new();
            let _ = writeln!(t, "{:>4}  {:>20}  {:>20}  {:>20}", "k", "gamma_k", "sup_err", "delta_gap");
            for rec in &report.records {
                let _ = writeln!(
                    t,
                    "{:>4}  {:>20}  {:>20}  {:>20}",
                    rec.k,
                    opt(rec.gamma_k),
                    opt(rec.sup_err),
                    opt(rec.delta_gap)
                );
            }
            t.push_str(&table(&[
                ("fitted_slope", opt(report.fitted_slope)),
                ("predicted_log_rate", fmt_sig(report.predicted_log_rate)),
                ("z0_radius", fmt_sig(report.z0_radius)),
                ("fit_points", report.fit_points.to_string()),
                ("fit_inconclusive", report.fit_inconclusive.to_string()),
                (
                    "slope_within_margin",
                    report.slope_within_margin.map_or("-".into(), |b| b.to_string()),
                ),
                ("gamma_monotone", report.gamma_monotone.to_string()),
            ]));
            t
        }
    };
    Ok(Outcome { text, code: EXIT_OK })
}

fn write_extras(spec: &ProblemSpec, json: Option<&Value>, csv: Option<&str>) -> Result<(), Failure> {
    if let (Some(p), Some(j)) = (&spec.outputs.solution_json, json) {
        write_file(p, &pretty(j))?;
    }
    if let (Some(p), Some(c)) = (&spec.outputs.grid_csv, csv) {
        write_file(p, c)?;
    }
    Ok(())
}

/// Run a parsed command line and return the primary output.
pub fn execute(cli: &Cli) -> Result<Outcome, Failure> {
    let format = cli.format.unwrap_or(if cli.stdin { Format::Json } else { Format::Table });
    let outcome = match &cli.command {
        Command::Check(arg) => {
            let spec = load_spec(cli, arg)?;
            let out = cmd_check(&spec, format)?;
            if let Some(p) = &spec.outputs.report_json {
                let json = cmd_check(&spec, Format::Json)?;
                write_file(p, &json.text)?;
            }
            out
        }
        Command::Solve(arg) => cmd_solve(&load_spec(cli, arg)?, format)?,
        Command::Restrict { spec, k } => {
            let spec = load_spec(cli, spec)?;
            let k = k
                .or(spec.k)
                .ok_or_else(|| SpecError { field: "k".into(), message: "required for restrict".into() })?;
            if k == 0 {
                return Err(SpecError { field: "k".into(), message: "must be at least 1".into() }.into());
            }
            cmd_restrict(&spec, k, format)?
        }
        Command::Sweep { spec, k_max, floor, margin } => {
            let mut spec = load_spec(cli, spec)?;
            let k_max = k_max
                .or(spec.k_max)
                .ok_or_else(|| SpecError { field: "k_max".into(), message: "required for sweep".into() })?;
            if k_max == 0 {
                return Err(SpecError { field: "k_max".into(), message: "must be at least 1".into() }.into());
            }
            let t: &mut Tolerances = &mut spec.tolerances;
            if let Some(f) = floor {
                t.floor = *f;
            }
            if let Some(m) = margin {
                t.margin = *m;
            }
            validate_tolerances(t)?;
            let opts = SweepOptions { n_grid: t.grid, floor: t.floor, margin: t.margin };
            cmd_sweep(&spec, k_max, opts, format)?
        }
    };
    if let Some(p) = &cli.out {
        write_file(p, &outcome.text)?;
        return Ok(Outcome { text: String::new(), code: outcome.code });
    }
    Ok(outcome)
}
