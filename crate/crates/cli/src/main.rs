mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use baws::baselines::SawsConfig;
use baws::bootstrap::{BootstrapConfig, ResampleMode};
use baws::pipeline::{
    load_price_csv, run_backtest, run_experiment, write_plot_csv, write_records, BacktestConfig, ColumnSpec,
    ExperimentSpec, Method,
};
use baws::scenarios::Scenario;
use baws::selection::{rejection_frequency_monte_carlo, rejection_probability_gaussian, ErrorControl, TwoBlockGaussian};
use baws::{BawsError, CandidateGridConfig, ForecastTarget, Level};

const WORKERS_ENV: &str = "BAWS_WORKERS";

/// Adaptive window selection for forecasting the mean, VaR and (VaR, ES).
#[derive(Parser, Debug)]
#[command(name = "baws", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a scenario path and write it as CSV.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Run a rolling backtest on a price or loss CSV.
    #[command(args_override_self = true)]
    Backtest(BacktestArgs),
    /// Replicate a simulation study and write the metrics table.
    #[command(args_override_self = true)]
    Experiment(ExperimentArgs),
    /// Tabulate the two-block Gaussian rejection probability.
    #[command(args_override_self = true)]
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetKind {
    Mean,
    Var,
    Vares,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeKind {
    Iid,
    Block,
}

#[derive(Args, Debug)]
struct SelectionArgs {
    /// Statistic to forecast.
    #[arg(long, value_enum, default_value = "var")]
    target: TargetKind,
    /// Risk level for VaR and ES.
    #[arg(long, default_value_t = 0.95)]
    alpha: f64,
    /// First forecast origin (1-based).
    #[arg(long, default_value_t = 501)]
    t0: usize,
    /// Bootstrap quantile level.
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    /// Bootstrap replications per threshold.
    #[arg(long, default_value_t = 500)]
    boot_reps: usize,
    /// Resampling scheme (default: block for real data and GARCH, iid otherwise).
    #[arg(long, value_enum)]
    mode: Option<ModeKind>,
    /// Block-length constant `c` in `c * ceil(i^(1/3))`.
    #[arg(long, default_value_t = 1.0)]
    block_c: f64,
    /// Smallest candidate window.
    #[arg(long, default_value_t = 20)]
    k0: usize,
    /// Cap on the window of every method.
    #[arg(long)]
    max_window: Option<usize>,
    /// Family-wise error control (Bonferroni) instead of per-comparison.
    #[arg(long)]
    fwer: bool,
    /// SAWS threshold exponent parameter.
    #[arg(long)]
    saws_alpha: Option<f64>,
    /// SAWS threshold constant.
    #[arg(long)]
    saws_c: Option<f64>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// A1, A2, A3, B1, B2, B3 or GARCH.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 2000)]
    length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Level of the true VaR column.
    #[arg(long, default_value_t = 0.95)]
    alpha: f64,
    /// Output file (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BacktestArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV with a `price` or `loss` column and an optional `date` column.
    #[arg(long)]
    input: PathBuf,
    /// Read prices from this column.
    #[arg(long, conflicts_with = "loss_column")]
    price_column: Option<String>,
    /// Read losses from this column.
    #[arg(long)]
    loss_column: Option<String>,
    /// baws, saws, full, or fixed(k).
    #[arg(long, default_value = "baws")]
    method: String,
    #[command(flatten)]
    selection: SelectionArgs,
    /// Forecast CSV (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Long-format plot data.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: String,
    /// Comma-separated methods.
    #[arg(long, default_value = "baws,saws,fixed(250),fixed(500),fixed(750),full")]
    methods: String,
    /// Number of simulated paths.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 2000)]
    length: usize,
    #[command(flatten)]
    selection: SelectionArgs,
    /// Metrics CSV (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mu_old: f64,
    #[arg(long)]
    mu_recent: f64,
    #[arg(long)]
    var_old: f64,
    #[arg(long)]
    var_recent: f64,
    /// Candidate window.
    #[arg(long)]
    k: usize,
    /// Reference window.
    #[arg(long)]
    k0: usize,
    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',', required = true)]
    tau: Vec<f64>,
    /// Also estimate each probability from this many simulated trials.
    #[arg(long)]
    mc_trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Error with the process exit code it maps to.
#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<BawsError> for CliError {
    fn from(e: BawsError) -> Self {
        let code = match e {
            BawsError::Parameter(_) | BawsError::Config(_) => 1,
            BawsError::Parse { .. } | BawsError::Csv(_) | BawsError::InsufficientHistory { .. } => 2,
            BawsError::Domain(_) | BawsError::Io(_) => 3,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

fn open_output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn target_of(sel: &SelectionArgs) -> CliResult<ForecastTarget> {
    Ok(match sel.target {
        TargetKind::Mean => ForecastTarget::Mean,
        TargetKind::Var => ForecastTarget::var(sel.alpha)?,
        TargetKind::Vares => ForecastTarget::var_es(sel.alpha)?,
    })
}

fn backtest_config(sel: &SelectionArgs, method: Method, default_mode: ModeKind) -> CliResult<BacktestConfig> {
    let target = target_of(sel)?;
    let mode = match sel.mode.unwrap_or(default_mode) {
        ModeKind::Iid => ResampleMode::Iid,
        ModeKind::Block => ResampleMode::Block { c: sel.block_c },
    };
    let mut cfg = BacktestConfig::new(method, target);
    cfg.t0 = sel.t0;
    cfg.bootstrap = BootstrapConfig::new(sel.beta, sel.boot_reps, mode, sel.seed)?;
    cfg.control = if sel.fwer { ErrorControl::Fwer } else { ErrorControl::Pcer };
    cfg.grid = CandidateGridConfig::default().with_min_window(sel.k0).with_max_window(sel.max_window);
    if sel.saws_alpha.is_some() || sel.saws_c.is_some() {
        cfg.saws = SawsConfig::new(
            sel.saws_alpha.unwrap_or(cfg.saws.alpha_tau),
            sel.saws_c.unwrap_or(cfg.saws.c_tau),
            SawsConfig::family_for(&target),
        )?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let scenario: Scenario = args.scenario.parse()?;
    let path = scenario.generate(args.length, args.seed, Some(Level::new(args.alpha)?))?;
    let out = open_output(&args.output)?;
    path.write_csv(out)?;
    Ok(())
}

fn backtest(args: BacktestArgs) -> CliResult<()> {
    let method: Method = args.method.parse()?;
    let cfg = backtest_config(&args.selection, method, ModeKind::Block)?;
    let spec = match (&args.price_column, &args.loss_column) {
        (Some(c), _) => ColumnSpec::Price(c.clone()),
        (None, Some(c)) => ColumnSpec::Loss(c.clone()),
        (None, None) => ColumnSpec::Auto,
    };
    let series = load_price_csv(&args.input, &spec).map_err(|e| match e {
        BawsError::Io(io) => CliError::data(format!("cannot read {}: {io}", args.input.display())),
        other => other.into(),
    })?;
    let records = run_backtest(&series, &cfg)?;
    write_records(&records, &cfg.target, open_output(&args.output)?)?;
    if args.plot.is_some() {
        write_plot_csv(&records, &cfg.target, &[], open_output(&args.plot)?)?;
    }
    Ok(())
}

fn experiment(args: ExperimentArgs) -> CliResult<()> {
    let scenario: Scenario = args.scenario.parse()?;
    let methods = args
        .methods
        .split(',')
        .filter(|m| !m.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Method>, _>>()?;
    let default_mode = if scenario.is_independent() { ModeKind::Iid } else { ModeKind::Block };
    let base = backtest_config(&args.selection, Method::Baws, default_mode)?;
    let spec = ExperimentSpec {
        scenario,
        length: args.length,
        replications: args.runs,
        seed: args.selection.seed,
        methods,
        base,
    };
    let report = run_experiment(&spec)?;
    report.write_csv(open_output(&args.output)?)?;
    Ok(())
}

fn diagnose(args: DiagnoseArgs) -> CliResult<()> {
    let model = TwoBlockGaussian {
        mu_old: args.mu_old,
        mu_recent: args.mu_recent,
        var_old: args.var_old,
        var_recent: args.var_recent,
        k: args.k,
        k0: args.k0,
    };
    let mut out = open_output(&args.output)?;
    let io_err = |e: io::Error| CliError::runtime(e.to_string());
    let header = if args.mc_trials.is_some() { "tau,probability,simulated" } else { "tau,probability" };
    writeln!(out, "{header}").map_err(io_err)?;
    for (idx, &tau) in args.tau.iter().enumerate() {
        let p = rejection_probability_gaussian(&model, tau)?;
        let mut line = format!("{},{}", baws::scenarios::format_sig(tau), baws::scenarios::format_sig(p));
        if let Some(trials) = args.mc_trials {
            let sim = rejection_frequency_monte_carlo(&model, tau, trials, args.seed.wrapping_add(idx as u64))?;
            line.push_str(&format!(",{}", baws::scenarios::format_sig(sim)));
        }
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}

fn configure_workers() -> CliResult<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::usage(format!("{WORKERS_ENV} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::runtime(e.to_string()))
}

/// Inserts the arguments expanded from `--config` right after the subcommand name.
fn expand_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config::config_path(&args) else {
        return Ok(args);
    };
    let Some(sub_pos) = args.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 1) else {
        return Ok(args);
    };
    let sub_name = args[sub_pos].to_string_lossy().into_owned();
    let cmd = Cli::command();
    let Some(sub) = cmd.find_subcommand(&sub_name) else {
        return Ok(args);
    };
    let known: Vec<String> = sub.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect();
    let switches: Vec<String> = sub
        .get_arguments()
        .filter(|a| !a.get_action().takes_values())
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    let table = config::read_table(PathBuf::from(path).as_path()).map_err(CliError::usage)?;
    let extra = config::table_to_args(&table, &known, &switches).map_err(CliError::usage)?;
    let mut merged = args[..=sub_pos].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&args[sub_pos + 1..]);
    Ok(merged)
}

fn run() -> CliResult<()> {
    let args = expand_config(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return Ok(());
            }
            return Err(CliError::usage(e.to_string().trim_end().to_string()));
        }
    };
    configure_workers()?;
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Backtest(a) => backtest(a),
        Command::Experiment(a) => experiment(a),
        Command::Diagnose(a) => diagnose(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
