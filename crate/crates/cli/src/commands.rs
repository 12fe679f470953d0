use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fstress::verify::{check_instance, CheckOptions};
use fstress::{
    feasible_random_start, fit, fstress_eval_with, BaseFunction, EvalOptions, FSpec, FitOptions, FitStatus,
    Method, DEFAULT_MAX_DIM,
};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::instance::{Instance, PairLayout};
use crate::tensor_io::{write_tensors, Encoding, TensorFile};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_CHECK_FAILED: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

/// Evaluate, verify and fit fStress multidimensional scaling models.
#[derive(Debug, Parser)]
#[command(name = "fstress", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the loss, its C/rho/eta split and per-pair distances.
    Value(ValueArgs),
    /// Write the value and derivative tensors up to a given order.
    Derivs(DerivsArgs),
    /// Compare analytic derivatives with finite differences.
    Check(CheckArgs),
    /// Minimize the loss over the configuration.
    Fit(FitArgs),
    /// Rewrite an instance (or a CSV matrix) as an instance file.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Instance file (TOML).
    #[arg(required_unless_present = "matrix")]
    pub instance: Option<PathBuf>,
    /// Square symmetric dissimilarity matrix (CSV) instead of an instance file.
    #[arg(long, conflicts_with = "instance", requires_all = ["dims", "function", "power"])]
    pub matrix: Option<PathBuf>,
    /// Weight matrix (CSV) to go with --matrix.
    #[arg(long = "weight-matrix", requires = "matrix")]
    pub weight_matrix: Option<PathBuf>,
    /// Number of dimensions p, for --matrix input.
    #[arg(short = 'p', long)]
    pub dims: Option<usize>,
    /// Base function, overriding the instance.
    #[arg(long)]
    pub function: Option<BaseFunction>,
    /// Power q, overriding the instance.
    #[arg(long, allow_negative_numbers = true)]
    pub power: Option<f64>,
}

impl InputArgs {
    pub fn load(&self) -> Result<Instance> {
        let mut inst = match (&self.instance, &self.matrix) {
            (Some(path), _) => Instance::read(path)?,
            (None, Some(matrix)) => {
                let spec = FSpec::new(self.function.unwrap(), self.power.unwrap());
                Instance::from_csv(matrix, self.weight_matrix.as_deref(), self.dims.unwrap(), spec)?
            }
            (None, None) => return Err(CliError::Usage("no input given".into())),
        };
        if let Some(base) = self.function {
            inst.spec.base = base;
        }
        if let Some(q) = self.power {
            if !q.is_finite() {
                return Err(CliError::Usage(format!("power must be finite, got {q}")));
            }
            inst.spec.power = q;
        }
        if let (Some(p), Some(_)) = (self.dims, &self.instance) {
            if p != inst.p {
                return Err(CliError::Usage(format!(
                    "--dims {p} disagrees with the instance (p = {})",
                    inst.p
                )));
            }
        }
        Ok(inst)
    }
}

#[derive(Debug, Args)]
pub struct ValueArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct DerivsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(0..=4))]
    pub max_order: u8,
    /// Output file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write numbers as hex floats.
    #[arg(long)]
    pub hex: bool,
    /// Largest coordinate count n*p for order-3/4 output.
    #[arg(long, default_value_t = DEFAULT_MAX_DIM)]
    pub max_dim: usize,
    /// Ignore --max-dim.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Orders to verify, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2], value_parser = parse_order)]
    pub orders: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random directions (orders 3-4) and sampled permutations.
    #[arg(long, default_value_t = 32)]
    pub probes: usize,
}

fn parse_order(s: &str) -> std::result::Result<usize, String> {
    match s.trim().parse() {
        Ok(r @ 1..=4) => Ok(r),
        _ => Err(format!("order must be 1, 2, 3 or 4, got {s:?}")),
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Gd,
    Newton,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gd => Method::GradientDescent,
            MethodArg::Newton => Method::Newton,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Newton)]
    pub method: MethodArg,
    /// Stop when the largest gradient entry is at most this.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start from a random configuration even if the instance has one.
    #[arg(long)]
    pub random_start: bool,
    /// Translate the result to zero column means.
    #[arg(long)]
    pub center: bool,
    /// Write the instance with the fitted configuration here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the iteration trace here as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Pair layout of the output; keeps the input's layout if absent.
    #[arg(long, value_enum)]
    pub layout: Option<PairLayout>,
    /// Output file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a parsed command, writing its report to `out`. Returns the exit status
/// for outcomes that are not errors (2 and 3); errors map to status 1.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<u8> {
    match cli.command {
        Command::Value(a) => value(a, out),
        Command::Derivs(a) => derivs(a, out),
        Command::Check(a) => check(a, out),
        Command::Fit(a) => fit_cmd(a, out),
        Command::Convert(a) => convert(a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<u8> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io("<stdout>", e))?;
    Ok(EXIT_OK)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct PairRow {
    i: usize,
    j: usize,
    w: f64,
    delta: f64,
    qdist: f64,
    fdist: f64,
}

#[derive(Serialize)]
struct ValueReport {
    function: BaseFunction,
    power: f64,
    n: usize,
    p: usize,
    stress: f64,
    stress_unhalved: f64,
    constant: f64,
    rho: f64,
    eta: f64,
    pairs: Vec<PairRow>,
}

fn value(a: ValueArgs, out: &mut dyn Write) -> Result<u8> {
    let inst = a.input.load()?;
    let cfg = inst.require_configuration("value")?;
    let opts = EvalOptions {
        max_order: 0,
        ..EvalOptions::default()
    };
    let rep = fstress_eval_with(&cfg, &inst.data, inst.spec, &opts)?;
    let pairs = inst
        .data
        .records()
        .map(|(pair, w, delta)| PairRow {
            i: pair.i,
            j: pair.j,
            w,
            delta,
            qdist: rep.qdist[pair.k],
            fdist: rep.fdist[pair.k],
        })
        .collect();
    let report = ValueReport {
        function: inst.spec.base,
        power: inst.spec.power,
        n: inst.n(),
        p: inst.p,
        stress: rep.stress,
        stress_unhalved: rep.stress_unhalved,
        constant: rep.constant,
        rho: rep.rho,
        eta: rep.eta,
        pairs,
    };
    if a.json {
        return emit(out, &json(&report));
    }
    let mut s = format!(
        "function {}\npower {}\nn {}\np {}\nstress {}\nstress_unhalved {}\nconstant {}\nrho {}\neta {}\n",
        report.function,
        report.power,
        report.n,
        report.p,
        report.stress,
        report.stress_unhalved,
        report.constant,
        report.rho,
        report.eta
    );
    s.push_str("i j w delta qdist fdist\n");
    for r in &report.pairs {
        s.push_str(&format!(
            "{} {} {} {} {} {}\n",
            r.i, r.j, r.w, r.delta, r.qdist, r.fdist
        ));
    }
    emit(out, &s)
}

fn derivs(a: DerivsArgs, out: &mut dyn Write) -> Result<u8> {
    let inst = a.input.load()?;
    let cfg = inst.require_configuration("derivs")?;
    let max_order = a.max_order as usize;
    let max_dim = if a.force { usize::MAX } else { a.max_dim };
    if max_order >= 3 && cfg.dim() > max_dim {
        return Err(CliError::Usage(format!(
            "order-{max_order} tensors over {} coordinates exceed --max-dim {max_dim}; pass --force to write them",
            cfg.dim()
        )));
    }
    let rep = fstress_eval_with(&cfg, &inst.data, inst.spec, &EvalOptions { max_order, max_dim })?;
    let enc = if a.hex { Encoding::Hex } else { Encoding::Decimal };
    let text = write_tensors(&TensorFile::from(rep), enc);
    match &a.out {
        Some(path) => write_file(path, &text).map(|_| EXIT_OK),
        None => emit(out, &text),
    }
}

fn check(a: CheckArgs, out: &mut dyn Write) -> Result<u8> {
    let inst = a.input.load()?;
    let cfg = inst.require_configuration("check")?;
    let mut orders = a.orders.clone();
    orders.sort_unstable();
    orders.dedup();
    let opts = CheckOptions {
        orders,
        seed: a.seed,
        probes: a.probes,
        ..CheckOptions::default()
    };
    let report = check_instance(&cfg, &inst.data, inst.spec, &opts)?;
    emit(out, &json(&report))?;
    Ok(if report.passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[derive(Serialize)]
struct FitSummary {
    status: FitStatus,
    stress: f64,
    iterations: usize,
    x: Vec<f64>,
}

fn fit_cmd(a: FitArgs, out: &mut dyn Write) -> Result<u8> {
    if !(a.tol.is_finite() && a.tol >= 0.0) {
        return Err(CliError::Usage(format!(
            "--tol must be a non-negative number, got {}",
            a.tol
        )));
    }
    let mut inst = a.input.load()?;
    let opts = FitOptions {
        method: a.method.into(),
        tol: a.tol,
        max_iter: a.max_iter,
        seed: a.seed,
        center: a.center,
        ..FitOptions::default()
    };
    let start = match inst.configuration() {
        Some(cfg) if !a.random_start => cfg?,
        _ => feasible_random_start(inst.n(), inst.p, &inst.data, inst.spec, &opts)?,
    };
    let result = fit(&start, &inst.data, inst.spec, &opts)?;
    if let Some(path) = &a.trace {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::format(path, e))?;
        for rec in &result.trace {
            w.serialize(rec).map_err(|e| CliError::format(path, e))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    inst.x = Some(result.config.x().to_vec());
    if let Some(path) = &a.out {
        inst.write(path)?;
    }
    let summary = FitSummary {
        status: result.status,
        stress: result.stress,
        iterations: result.iterations(),
        x: result.config.x().to_vec(),
    };
    emit(out, &json(&summary))?;
    Ok(if result.converged() {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn convert(a: ConvertArgs, out: &mut dyn Write) -> Result<u8> {
    let mut inst = a.input.load()?;
    if let Some(layout) = a.layout {
        inst.layout = layout;
    }
    let text = inst.to_toml();
    match &a.out {
        Some(path) => write_file(path, &text).map(|_| EXIT_OK),
        None => emit(out, &text),
    }
}
