//! `ldnn`: train Legendre networks on the benchmark integral equations, compare
//! with the published numbers and run the self-checks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ldnn::bench::{
    self, compare_to_reference, emit_report, parse_csv_report, parse_problem, EmitOptions,
    ExperimentRun, Model, ReferenceData, ReportFormat,
};
use ldnn::network::NetworkConfig;
use ldnn::training::{threads_from_env, Sampling, TrainConfig, TrainFailure};

/// Exit status when training diverges; usage errors exit with 2.
const DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "ldnn", version, about = "Legendre deep neural network solver for nonlinear integral equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the Legendre network on one experiment and report its accuracy.
    Run(RunArgs),
    /// Train the plain tanh network on the data term only, for comparison.
    Baseline(RunArgs),
    /// Compare a CSV report with the published errors.
    Compare {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        experiment: u32,
    },
    /// Run the deterministic property checks.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Equispaced,
    Uniform,
}

#[derive(Args)]
struct RunArgs {
    /// Benchmark equation, 1 to 4.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=4))]
    experiment: u32,
    /// Problem definition file; replaces the built-in equation.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Layer sizes, input and output included.
    #[arg(long, value_delimiter = ',', default_value = "1,10,30,20,10,1")]
    layers: Vec<usize>,
    /// Legendre degrees of the first hidden layer (default 0..width).
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
    #[arg(long, default_value_t = 50)]
    n1: usize,
    #[arg(long, default_value_t = 50)]
    n2: usize,
    #[arg(long, default_value_t = 500)]
    m1: usize,
    #[arg(long, default_value_t = 100)]
    m2: usize,
    #[arg(long, default_value_t = 5000)]
    adam_iters: usize,
    #[arg(long, default_value_t = 2000)]
    lbfgs_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include the exact-solution data term in the loss.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    supervised: bool,
    /// Weights of the data and residual terms.
    #[arg(long, value_delimiter = ',', default_value = "1,1")]
    loss_weights: Vec<f64>,
    #[arg(long, value_enum, default_value_t = SamplingArg::Equispaced)]
    sampling: SamplingArg,
    /// Write the report here, with `.history.csv` and `.params.csv` alongside.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Include wall-clock time in the report.
    #[arg(long)]
    timing: bool,
}

impl RunArgs {
    fn configs(&self) -> anyhow::Result<(NetworkConfig, TrainConfig)> {
        let [w_data, w_res] = self.loss_weights[..] else {
            bail!("--loss-weights takes two values, got {}", self.loss_weights.len());
        };
        let net = match &self.degrees {
            Some(d) => NetworkConfig::with_degrees(self.layers.clone(), d.clone(), self.seed)?,
            None => NetworkConfig::ldnn(self.layers.clone(), self.seed)?,
        };
        let train = TrainConfig {
            m1: self.m1,
            m2: self.m2,
            n1: self.n1,
            n2: self.n2,
            adam_iters: self.adam_iters,
            lbfgs_max_iters: self.lbfgs_iters,
            loss_weights: (w_data, w_res),
            seed: self.seed,
            supervised: self.supervised,
            sampling: match self.sampling {
                SamplingArg::Equispaced => Sampling::Equispaced,
                SamplingArg::Uniform => Sampling::Uniform,
            },
            workers: threads_from_env(),
            ..TrainConfig::default()
        };
        train.validate()?;
        Ok((net, train))
    }
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn write_history(out: &Path, state: &ldnn::training::TrainState<f64>) -> anyhow::Result<()> {
    let path = sibling(out, "history.csv");
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    state.write_history_csv(file)?;
    Ok(())
}

fn run(args: &RunArgs, model: Model) -> anyhow::Result<ExitCode> {
    let (net, train) = args.configs()?;
    let result: Result<ExperimentRun<f64>, TrainFailure<f64>> = match (&args.problem, model) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let problem = parse_problem::<f64>(&text).with_context(|| format!("in {}", path.display()))?;
            let (net, train) = match model {
                Model::Ldnn => (net.clone(), train.clone()),
                Model::Fnn => bench::baseline_configs(&train, &net)?,
            };
            bench::run_problem(&problem, 0, model, &train, &net)
        }
        (None, Model::Ldnn) => bench::run_experiment(args.experiment, &train, &net),
        (None, Model::Fnn) => bench::run_fnn_baseline(args.experiment, &train, &net),
    };
    let run = match result {
        Ok(run) => run,
        Err(failure) => {
            eprintln!("error: {failure}");
            if let Some(out) = &args.out {
                write_history(out, &failure.state)?;
            }
            return Ok(ExitCode::from(DIVERGED));
        }
    };
    let format = match args.format {
        Format::Table => ReportFormat::Table,
        Format::Csv => ReportFormat::Csv,
    };
    let text = emit_report(&run.report, format, EmitOptions { timing: args.timing });
    print!("{text}");
    if let Some(warning) = &run.outcome.warning {
        eprintln!("warning: {warning}");
    }
    if let Some(out) = &args.out {
        fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
        write_history(out, &run.outcome.state)?;
        let path = sibling(out, "params.csv");
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let net = &run.report.config.as_ref().expect("fresh reports carry their config").net;
        run.outcome.params().write_csv(net, file)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn compare(report: &Path, experiment: u32) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(report).with_context(|| format!("reading {}", report.display()))?;
    let parsed = parse_csv_report::<f64>(&text).with_context(|| format!("in {}", report.display()))?;
    if parsed.experiment != experiment {
        bail!("report is for experiment {}, not {experiment}", parsed.experiment);
    }
    let comparison = compare_to_reference(&parsed, &ReferenceData::embedded())?;
    print!("{}", comparison.render());
    Ok(ExitCode::SUCCESS)
}

fn verify() -> anyhow::Result<ExitCode> {
    let checks = bench::verify::run_all()?;
    let mut failed = 0;
    for check in &checks {
        let flag = if check.passed { "PASS" } else { "FAIL" };
        println!("{flag} {}: {}", check.name, check.detail);
        failed += usize::from(!check.passed);
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args, Model::Ldnn),
        Command::Baseline(args) => run(args, Model::Fnn),
        Command::Compare { report, experiment } => compare(report, *experiment),
        Command::Verify => verify(),
    };
    result.unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        ExitCode::from(1)
    })
}
