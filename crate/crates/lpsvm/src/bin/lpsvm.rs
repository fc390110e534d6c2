//! Command line front end: trains and evaluates lp-norm SVMs, runs the dual
//! and moment solvers, and decomposes kernel tensors.
//!
//! Exit codes: 0 on success, 2 on input/parse errors, 3 on solver failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lpsvm::dual::{recover_hyperplane, solve_dual, DualMethod};
use lpsvm::dual::{enumerate_cells, expand_homogeneous};
use lpsvm::experiments::{
    cross_validate, emit_report, grid_search, load_csv, load_libsvm, power_grid, ExperimentConfig,
    ReportFormat,
};
use lpsvm::feature_maps::{apply_transform, TransformSpec};
use lpsvm::kernel_tensor::{als_decompose, SymmetricTensor};
use lpsvm::moment::{build_relaxation, extract_solution, solve_sdp};
use lpsvm::primal::{classify, train_primal, PrimalModel};
use lpsvm::{Dataset, Error, NormParam};

#[derive(Parser)]
#[command(name = "lpsvm", about = "lp-norm support vector machines", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a primal model and save it.
    Train(TrainArgs),
    /// Classify data with a saved model.
    Predict(PredictArgs),
    /// Cross-validate over a parameter grid and print a report.
    Cv(CvArgs),
    /// Pick the best C (and sigma) by cross-validated accuracy.
    Gridsearch(CvArgs),
    /// Solve the Lagrangian dual and recover the hyperplane.
    Dual(DualArgs),
    /// Build and solve the moment relaxation of the dual, cell by cell.
    Moment(MomentArgs),
    /// Decompose a symmetric tensor into rank-one terms.
    Tensor(TensorArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DataFormat {
    Csv,
    Libsvm,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    Identity,
    Monomial,
    Gaussian,
    Quadratic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Markdown,
    Csv,
}

#[derive(Args)]
struct DataArgs {
    /// Data file: CSV (label last) or libsvm lines.
    #[arg(long)]
    data: PathBuf,
    /// Input format.
    #[arg(long, value_enum, default_value = "csv")]
    format: DataFormat,
}

#[derive(Args)]
struct ModelArgs {
    /// Norm parameter as R/S (p = r/(r-s), q = r/s).
    #[arg(long = "p", value_parser = parse_norm, default_value = "2/1")]
    norm: NormParam,
    /// Slack penalty.
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    /// Feature transformation.
    #[arg(long, value_enum, default_value = "identity")]
    transform: TransformArg,
    /// Monomial degree of the transformation.
    #[arg(long, default_value_t = 2)]
    eta: u32,
    /// Gaussian width parameter.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Solver tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Where to write the model (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Saved model file.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Values of C to sweep (defaults to powers of two from 2^-7 to 2^7).
    #[arg(long = "C-grid", value_delimiter = ',')]
    c_grid: Vec<f64>,
    /// Number of folds.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Shuffle seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standardize features on each training fold.
    #[arg(long, default_value_t = false)]
    standardize: bool,
    /// Report format.
    #[arg(long, value_enum, default_value = "markdown")]
    report: ReportArg,
}

#[derive(Args)]
struct DualArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Maximize cell by cell instead of by projected gradient.
    #[arg(long, default_value_t = false)]
    cellwise: bool,
}

#[derive(Args)]
struct MomentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Relaxation order t.
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Print the assembled SDP instead of solving it.
    #[arg(long, default_value_t = false)]
    emit: bool,
}

#[derive(Args)]
struct TensorArgs {
    /// Tensor file: "order dim" header, then "i1 ... ir value" lines.
    #[arg(long)]
    input: PathBuf,
    /// Maximum number of rank-one terms.
    #[arg(long, default_value_t = 8)]
    dmax: usize,
    /// Random restarts per term.
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Fitting tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Restart seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_norm(text: &str) -> Result<NormParam, String> {
    let (r, s) = match text.split_once('/') {
        Some((r, s)) => (r, s),
        None => (text, "1"),
    };
    let r: u32 = r.trim().parse().map_err(|e| format!("r: {e}"))?;
    let s: u32 = s.trim().parse().map_err(|e| format!("s: {e}"))?;
    NormParam::new(r, s).map_err(|e| e.to_string())
}

impl ModelArgs {
    fn transform_spec(&self) -> TransformSpec {
        match self.transform {
            TransformArg::Identity => TransformSpec::identity(),
            TransformArg::Monomial => TransformSpec::monomial(self.eta),
            TransformArg::Gaussian => {
                TransformSpec::gaussian(self.eta, self.sigma, self.norm.r())
            }
            TransformArg::Quadratic => TransformSpec::quadratic(self.norm.r()),
        }
    }
}

fn load(args: &DataArgs) -> Result<Dataset, Error> {
    match args.format {
        DataFormat::Csv => load_csv(&args.data),
        DataFormat::Libsvm => load_libsvm(&args.data),
    }
}

fn read_to_string(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Parse { line: 0, message: format!("{}: {e}", path.display()) })
}

fn run_train(args: &TrainArgs) -> Result<(), Error> {
    let ds = load(&args.data)?;
    let model =
        train_primal(&ds, args.model.norm, args.model.c, &args.model.transform_spec(), args.model.tol)?;
    let text = model.to_text();
    match &args.output {
        Some(path) => std::fs::write(path, &text).map_err(|e| {
            Error::InvalidConfig(format!("cannot write {}: {e}", path.display()))
        })?,
        None => print!("{text}"),
    }
    eprintln!(
        "objective {:.6}  margin {:.6}  nonzero {}/{}",
        model.objective,
        model.margin_value,
        model.hyperplane.omega.iter().filter(|w| w.abs() > 1e-9).count(),
        model.hyperplane.omega.len()
    );
    Ok(())
}

fn run_predict(args: &PredictArgs) -> Result<(), Error> {
    let ds = load(&args.data)?;
    let model = PrimalModel::from_text(&read_to_string(&args.model)?)?;
    let mut correct = 0usize;
    for i in 0..ds.n() {
        let label = classify(&model, &ds.row(i))?;
        if label == ds.labels()[i] {
            correct += 1;
        }
        println!("{label}");
    }
    eprintln!("accuracy {:.2}%", 100.0 * correct as f64 / ds.n() as f64);
    Ok(())
}

fn cv_config(args: &CvArgs) -> ExperimentConfig {
    let c_grid = if args.c_grid.is_empty() { power_grid() } else { args.c_grid.clone() };
    let mut config =
        ExperimentConfig::new(vec![args.model.norm], vec![args.model.transform_spec()], c_grid);
    config.folds = args.folds;
    config.seed = args.seed;
    config.standardize = args.standardize;
    config
}

fn run_cv(args: &CvArgs) -> Result<(), Error> {
    let ds = load(&args.data)?;
    let rows = cross_validate(&ds, &cv_config(args))?;
    let format = match args.report {
        ReportArg::Markdown => ReportFormat::Markdown,
        ReportArg::Csv => ReportFormat::Csv,
    };
    print!("{}", emit_report(&rows, format));
    Ok(())
}

fn run_gridsearch(args: &CvArgs) -> Result<(), Error> {
    let ds = load(&args.data)?;
    let (c, sigma) = grid_search(&ds, &cv_config(args))?;
    match sigma {
        Some(sigma) => println!("C {c}\nsigma {sigma}"),
        None => println!("C {c}"),
    }
    Ok(())
}

fn run_dual(args: &DualArgs) -> Result<(), Error> {
    let ds = apply_transform(&load(&args.data)?, &args.model.transform_spec())?;
    let method =
        if args.cellwise { DualMethod::Cellwise } else { DualMethod::ProjectedGradient };
    let (alpha, value) = solve_dual(&ds, args.model.norm, args.model.c, method, args.model.tol)?;
    println!("objective {value}");
    let coeffs: Vec<String> = alpha.iter().map(|a| format!("{a:.6}")).collect();
    println!("alpha {}", coeffs.join(" "));
    match recover_hyperplane(&alpha, &ds, args.model.norm, args.model.c) {
        Ok(h) => {
            let coeffs: Vec<String> = h.omega.iter().map(|w| format!("{w:.6}")).collect();
            println!("omega {}", coeffs.join(" "));
            println!("b {}", h.b);
        }
        Err(e) => eprintln!("hyperplane not recovered: {e}"),
    }
    Ok(())
}

fn run_moment(args: &MomentArgs) -> Result<(), Error> {
    let np = args.model.norm;
    if !np.q_is_integer() {
        return Err(Error::InvalidConfig("the relaxation needs integer q = r/s".into()));
    }
    let ds = apply_transform(&load(&args.data)?, &args.model.transform_spec())?;
    let cells = enumerate_cells(&ds, np)?;
    let ones = vec![1.0; ds.n()];
    for (k, cell) in cells.iter().enumerate() {
        let poly = expand_homogeneous(&ds, cell, np.r())?;
        let problem = build_relaxation(
            &poly,
            np.dual_coefficient(),
            &ones,
            cell,
            ds.labels(),
            args.model.c,
            args.order,
        )?;
        if args.emit {
            println!("cell {k}");
            print!("{}", problem.emit_text());
            continue;
        }
        let (rho, w, status) = solve_sdp(&problem, args.model.tol)?;
        let (alpha, certified) = extract_solution(&w, args.order, 1e-4)?;
        let coeffs: Vec<String> = alpha.iter().map(|a| format!("{a:.6}")).collect();
        println!("cell {k}  rho {rho:.9}  status {status:?}  certified {certified}");
        println!("cell {k}  alpha {}", coeffs.join(" "));
    }
    Ok(())
}

fn run_tensor(args: &TensorArgs) -> Result<(), Error> {
    let tensor = SymmetricTensor::from_text(&read_to_string(&args.input)?)?;
    let dec = als_decompose(&tensor, args.dmax, args.restarts, args.tol, args.seed);
    println!("terms {}", dec.psi.len());
    for (psi, v) in dec.psi.iter().zip(&dec.vectors) {
        let coords: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
        println!("psi {psi:.9}  v {}", coords.join(" "));
    }
    let norm = tensor.frobenius_norm().max(1e-300);
    let residual: f64 = tensor
        .sorted_indices()
        .iter()
        .map(|(idx, mult)| {
            let diff = tensor.get(idx) - dec.reconstruct_entry(idx);
            *mult as f64 * diff * diff
        })
        .sum::<f64>()
        .sqrt();
    println!("relative error {:.3e}", residual / norm);
    Ok(())
}

fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::Parse { .. }
        | Error::InvalidDataset(_)
        | Error::InvalidNormParam(_)
        | Error::InvalidConfig(_)
        | Error::InvalidProgram(_)
        | Error::OrderTooLow { .. }
        | Error::SizeGuard(_)
        | Error::Io(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => run_train(args),
        Command::Predict(args) => run_predict(args),
        Command::Cv(args) => run_cv(args),
        Command::Gridsearch(args) => run_gridsearch(args),
        Command::Dual(args) => run_dual(args),
        Command::Moment(args) => run_moment(args),
        Command::Tensor(args) => run_tensor(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_for(&err)
        }
    }
}
