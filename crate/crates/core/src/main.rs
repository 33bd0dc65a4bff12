//! Command-line front end for the kernel-summation pipeline.
//!
//! Exit codes: 0 on success, 2 on invalid input (model file, expression
//! whitelist, measure symmetry, bad flags), 3 on numerical failure
//! (degenerate continuation, pole on the Laplace contour, quadrature or
//! validation tolerances exceeded).

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use kernelsum::borel;
use kernelsum::coeffs::{self, CoefficientTable};
use kernelsum::expr;
use kernelsum::kernels::{self, SumMode};
use kernelsum::lamperti::{check_hypotheses, DiffusionCoefficient, LampertiMap};
use kernelsum::model::{self, ModelSpec, ScalarField};

#[derive(Parser)]
#[command(name = "kernelsum", version, about = "Small-time kernel expansions and Borel resummation")]
struct Cli {
    /// model definition file (TOML)
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// output file (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// output format
    #[arg(long, global = true, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    /// reserved for stochastic validation backends; accepted and recorded
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// suppress progress notes on stderr
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the coefficient table of a model at a base point
    Coeffs {
        /// base point
        #[arg(long, default_value_t = 0.0)]
        y: f64,
        /// highest expansion order
        #[arg(long, default_value_t = 12)]
        r_max: usize,
        /// polynomial degree for non-polynomial potentials
        #[arg(long, default_value_t = 16)]
        degree: usize,
        /// half-width of the fit interval around y
        #[arg(long, default_value_t = 4.0)]
        halfwidth: f64,
        /// also emit the sequence a_r(x) at this point as "r value" lines
        #[arg(long)]
        at: Option<f64>,
    },
    /// Borel-Pade-Laplace resummation of the kernel series
    BorelSum {
        #[arg(long, default_value_t = 0.0)]
        y: f64,
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        /// comma-separated evaluation times
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        /// Pade order m,n
        #[arg(long, default_value = "5,5")]
        order: String,
        #[arg(long, default_value_t = 14)]
        r_max: usize,
        #[arg(long, default_value_t = 16)]
        degree: usize,
        #[arg(long, default_value_t = 4.0)]
        halfwidth: f64,
    },
    /// Internal consistency checks of a model's kernel
    Validate {
        /// first base point
        #[arg(long, default_value_t = 0.3)]
        x: f64,
        /// second base point
        #[arg(long, default_value_t = -0.5)]
        z: f64,
        #[arg(long, default_value_t = 0.2)]
        t: f64,
        #[arg(long, default_value = "5,5")]
        order: String,
        #[arg(long, default_value_t = 12)]
        r_max: usize,
        #[arg(long, default_value_t = 16)]
        degree: usize,
        #[arg(long, default_value_t = 6.0)]
        halfwidth: f64,
    },
    /// Factorial growth fit of the coefficient sequence at a point
    Gevrey {
        #[arg(long, default_value_t = 0.0)]
        y: f64,
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        /// fit window lo,hi
        #[arg(long, default_value = "5,10")]
        window: String,
        #[arg(long, default_value_t = 14)]
        r_max: usize,
        #[arg(long, default_value_t = 16)]
        degree: usize,
        #[arg(long, default_value_t = 4.0)]
        halfwidth: f64,
    },
    /// Lamperti reduction of a non-unit diffusion coefficient
    Lamperti {
        /// diffusion coefficient sigma(x)
        #[arg(long)]
        sigma: String,
        /// drift b(x) of the original equation
        #[arg(long, default_value = "0")]
        drift: String,
        /// anchor point of the map
        #[arg(long, default_value_t = 0.0)]
        s0: f64,
        /// half-width of the working interval
        #[arg(long, default_value_t = 16.0)]
        l: f64,
        /// points (original coordinate) to map
        #[arg(long, value_delimiter = ',', default_value = "0.5,1.0,2.0")]
        s: Vec<f64>,
    },
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Numerical(String),
}

impl From<model::ModelError> for CliError {
    fn from(e: model::ModelError) -> Self {
        match e {
            model::ModelError::InvariantViolated { .. }
            | model::ModelError::NormalizationDivergent(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<coeffs::CoeffError> for CliError {
    fn from(e: coeffs::CoeffError) -> Self {
        match e {
            coeffs::CoeffError::DegreeOverflow { .. }
            | coeffs::CoeffError::WindowOutOfRange(..) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<borel::BorelError> for CliError {
    fn from(e: borel::BorelError) -> Self {
        match e {
            borel::BorelError::TooFewCoefficients { .. } | borel::BorelError::Empty => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<kernels::KernelError> for CliError {
    fn from(e: kernels::KernelError) -> Self {
        match e {
            kernels::KernelError::BadGrid(m) => CliError::Input(m),
            kernels::KernelError::Borel(b) => b.into(),
            kernels::KernelError::Model(m) => m.into(),
            kernels::KernelError::MassLoss(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<kernelsum::lamperti::LampertiError> for CliError {
    fn from(e: kernelsum::lamperti::LampertiError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

fn parse_pair(s: &str, what: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Input(format!("{what} must be two comma-separated integers")));
    }
    let a = parts[0].trim().parse().map_err(|_| CliError::Input(format!("bad {what}")))?;
    let b = parts[1].trim().parse().map_err(|_| CliError::Input(format!("bad {what}")))?;
    Ok((a, b))
}

fn load_model(cli: &Cli) -> Result<(ModelSpec, String), CliError> {
    let path = cli
        .model
        .as_ref()
        .ok_or_else(|| CliError::Input("--model is required for this command".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let spec = model::ModelFile::parse(&text)?.build()?;
    Ok((spec, text))
}

fn digest(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    format!("{:x}", h.finalize())
}

fn envelope(config_digest: &str, seed: Option<u64>, payload: serde_json::Value) -> serde_json::Value {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config_digest": config_digest,
        "seed": seed,
        "payload": payload,
    })
}

fn emit(cli: &Cli, text: String) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.write_all(b"\n")).ok();
            Ok(())
        }
    }
}

fn note(cli: &Cli, msg: &str) {
    if !cli.quiet {
        eprintln!("kernelsum: {msg}");
    }
}

fn build_table(
    m: &ModelSpec,
    y: f64,
    degree: usize,
    halfwidth: f64,
    r_max: usize,
) -> Result<CoefficientTable, CliError> {
    Ok(CoefficientTable::build(&m.w_total, y, degree, halfwidth, r_max)?)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::Coeffs { y, r_max, degree, halfwidth, at } => {
            let (m, cfg) = load_model(cli)?;
            let table = build_table(&m, *y, *degree, *halfwidth, *r_max)?;
            let dg = digest(&[&cfg, &format!("coeffs y={y} r_max={r_max} degree={degree} halfwidth={halfwidth}")]);
            note(cli, &format!("table at y = {y} up to order {r_max}"));
            match (cli.format.as_str(), at) {
                ("csv", Some(x)) => {
                    let mut out = String::new();
                    for (r, v) in table.sequence_at(*x).iter().enumerate() {
                        out.push_str(&format!("{r} {v:.17e}\n"));
                    }
                    emit(cli, out)
                }
                ("csv", None) => {
                    let mut out = String::new();
                    for (r, row) in table.orders.iter().enumerate() {
                        let cols: Vec<String> = row.iter().map(|c| format!("{c:.17e}")).collect();
                        out.push_str(&format!("{r} {}\n", cols.join(" ")));
                    }
                    emit(cli, out)
                }
                _ => {
                    let mut payload = serde_json::to_value(&table)
                        .map_err(|e| CliError::Numerical(e.to_string()))?;
                    if let Some(x) = at {
                        payload["sequence_at"] = json!({"x": x, "values": table.sequence_at(*x)});
                    }
                    emit(cli, envelope(&dg, cli.seed, payload).to_string())
                }
            }
        }
        Cmd::BorelSum { y, x, t, order, r_max, degree, halfwidth } => {
            let (m, cfg) = load_model(cli)?;
            let ord = parse_pair(order, "--order")?;
            let table = build_table(&m, *y, *degree, *halfwidth, *r_max)?;
            let dg = digest(&[&cfg, &format!("borel-sum y={y} x={x} order={order} r_max={r_max}")]);
            let mut records = Vec::new();
            let mut lines = String::new();
            for &ti in t {
                let est = kernels::modified_kernel(&m, &table, ti, *x, SumMode::Borel { order: ord })?;
                let s = est.summation.as_ref().expect("borel mode");
                let poles: Vec<[f64; 2]> = s
                    .approximant
                    .as_ref()
                    .map(|r| r.poles.iter().map(|p| [p.re, p.im]).collect())
                    .unwrap_or_default();
                note(cli, &format!("t = {ti}: k = {:.12e} (order {:?})", est.k, s.order_used));
                lines.push_str(&format!("{ti} {:.17e}\n", est.k));
                records.push(json!({
                    "t": ti,
                    "value": est.k,
                    "u": est.u,
                    "k_tilde": est.k_tilde,
                    "quad_error": s.quad_error,
                    "clearance": s.clearance,
                    "order_used": [s.order_used.0, s.order_used.1],
                    "fallback_truncated": s.fallback_truncated,
                    "poles": poles,
                }));
            }
            if cli.format == "csv" {
                emit(cli, lines)
            } else {
                emit(cli, envelope(&dg, cli.seed, json!({"records": records})).to_string())
            }
        }
        Cmd::Validate { x, z, t, order, r_max, degree, halfwidth } => {
            let (m, cfg) = load_model(cli)?;
            let ord = parse_pair(order, "--order")?;
            let tx = build_table(&m, *x, *degree, *halfwidth, *r_max)?;
            let tz = build_table(&m, *z, *degree, *halfwidth, *r_max)?;
            let rep = kernels::consistency_suite(&m, &tx, &tz, *t, SumMode::Borel { order: ord })?;
            let slopes_ok = rep
                .residual_slopes
                .iter()
                .all(|&(n, s)| (s - (n as f64 - 0.5)).abs() < 1e-6);
            let ok = rep.chapman_kolmogorov < 1e-4 && rep.mass_defect < 1e-3 && slopes_ok;
            let dg = digest(&[&cfg, &format!("validate x={x} z={z} t={t} order={order}")]);
            let payload = json!({
                "chapman_kolmogorov": rep.chapman_kolmogorov,
                "mass_defect": rep.mass_defect,
                "detailed_balance": rep.detailed_balance,
                "residual_slopes": rep.residual_slopes,
                "ok": ok,
            });
            emit(cli, envelope(&dg, cli.seed, payload).to_string())?;
            if ok {
                Ok(())
            } else {
                Err(CliError::Numerical("consistency checks exceeded tolerances".into()))
            }
        }
        Cmd::Gevrey { y, x, window, r_max, degree, halfwidth } => {
            let (m, cfg) = load_model(cli)?;
            let win = parse_pair(window, "--window")?;
            let table = build_table(&m, *y, *degree, *halfwidth, *r_max)?;
            let est = coeffs::gevrey_fit(&table.sequence_at(*x), win)?;
            let dg = digest(&[&cfg, &format!("gevrey y={y} x={x} window={window} r_max={r_max}")]);
            let payload =
                serde_json::to_value(&est).map_err(|e| CliError::Numerical(e.to_string()))?;
            emit(cli, envelope(&dg, cli.seed, payload).to_string())
        }
        Cmd::Lamperti { sigma, drift, s0, l, s } => {
            let sig_field = ScalarField::new(
                expr::parse(sigma).map_err(|e| CliError::Input(e.to_string()))?,
                (-l, *l),
            );
            let b_field = ScalarField::new(
                expr::parse(drift).map_err(|e| CliError::Input(e.to_string()))?,
                (-l, *l),
            );
            let coeff = DiffusionCoefficient::new(sig_field)?;
            let hyp = check_hypotheses(&coeff);
            let map = LampertiMap::new(coeff, *s0)?;
            let mut points = Vec::new();
            for &si in s {
                let xi = map.gamma(si);
                let back = map.inverse(xi)?;
                let bt = map.transformed_drift_at(&b_field, xi)?;
                points.push(json!({
                    "s": si,
                    "gamma": xi,
                    "roundtrip": back,
                    "transformed_drift": bt,
                }));
            }
            let dg = digest(&[sigma, drift, &format!("s0={s0} l={l}")]);
            let payload = json!({
                "hypotheses": {
                    "sigma_positive": hyp.sigma_positive,
                    "non_integrable_inverse": hyp.non_integrable_inverse,
                    "linear_growth": hyp.linear_growth,
                    "derivative_bounded": hyp.derivative_bounded,
                    "notes": hyp.notes,
                    "all_ok": hyp.all_ok(),
                },
                "points": points,
            });
            emit(cli, envelope(&dg, cli.seed, payload).to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("kernelsum: input error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("kernelsum: numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
