//! `trunctest`: mean testing, center estimation, and simulation sweeps for
//! ε-truncated samples.
//!
//! Exit codes: 0 success, 2 config error, 3 infeasible-regime-only run,
//! 4 oracle failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use trunctest::harness::{run_scenario, ExperimentConfig, ExperimentReport, Scenario};
use trunctest::median::{default_net_size, estimate_center, net_medians, DirectionNet};
use trunctest::oracle::verify_grid;
use trunctest::ustat::{amplified_test, const_error_test, Decision};
use trunctest::{SampleBatch, StreamRng};

#[derive(Parser)]
#[command(name = "trunctest", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for output files; stdout when absent.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the U-statistic mean test on a batch of samples.
    Test {
        /// CSV of samples, one row per observation.
        #[arg(long)]
        data: PathBuf,
        /// Separation scale α of the alternative.
        #[arg(long)]
        alpha: f64,
        /// Use the majority-vote amplified test at confidence δ.
        #[arg(long)]
        amplified: bool,
        /// Failure probability for the amplified test.
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Estimate the center via directional medians and the Chebyshev center.
    Estimate {
        /// CSV of samples, one row per observation.
        #[arg(long)]
        data: PathBuf,
        /// Number of net directions (defaults to max(4d, 64)).
        #[arg(long)]
        net_size: Option<usize>,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        /// Seed for the random net directions.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a Monte Carlo sweep scenario from a JSON config.
    Simulate {
        #[arg(value_enum)]
        scenario: ScenarioArg,
        /// JSON experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Rayon thread count (defaults to the number of cores).
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Ground-truth oracles.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Check exact U-statistic moments against closed forms on the full grid.
    Verify {
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    #[value(alias = "power-curve")]
    Power,
    PhaseDiagram,
    Scaling,
    BiasFrontier,
    ImpossibilityDemo,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Power => Scenario::PowerCurve,
            ScenarioArg::PhaseDiagram => Scenario::PhaseDiagram,
            ScenarioArg::Scaling => Scenario::Scaling,
            ScenarioArg::BiasFrontier => Scenario::BiasFrontier,
            ScenarioArg::ImpossibilityDemo => Scenario::ImpossibilityDemo,
        }
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_ORACLE: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test { data, alpha, amplified, delta, output } => {
            cmd_test(&data, alpha, amplified, delta, &output)
        }
        Command::Estimate { data, net_size, tolerance, seed, output } => {
            cmd_estimate(&data, net_size, tolerance, seed, &output)
        }
        Command::Simulate { scenario, config, seed, threads, output } => {
            cmd_simulate(scenario, &config, seed, threads, &output)
        }
        Command::Oracle { command: OracleCommand::Verify { output } } => cmd_oracle(&output),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn load_batch(path: &Path) -> Result<SampleBatch, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| tok.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
        rows.push(row);
    }
    SampleBatch::from_rows(rows, vec![]).map_err(|e| e.to_string())
}

fn emit(output: &OutputArgs, stem: &str, csv: &str, json: &str) -> Result<(), String> {
    match &output.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            let ext = match output.format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            let path = dir.join(format!("{stem}.{ext}"));
            let body = match output.format {
                Format::Csv => csv,
                Format::Json => json,
            };
            fs::write(&path, body).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => {
            match output.format {
                Format::Csv => print!("{csv}"),
                Format::Json => println!("{json}"),
            }
            Ok(())
        }
    }
}

fn cmd_test(
    data: &Path,
    alpha: f64,
    amplified: bool,
    delta: f64,
    output: &OutputArgs,
) -> Result<u8, String> {
    let batch = load_batch(data)?;
    let verdict = if amplified {
        amplified_test(&batch, alpha, delta)
    } else {
        const_error_test(&batch, alpha)
    }
    .map_err(|e| e.to_string())?;
    let decision = match verdict.decision {
        Decision::RejectNull => "reject_null",
        Decision::AcceptNull => "accept_null",
    };
    let csv = format!(
        "decision,statistic,threshold,n,alpha,blocks\n{},{},{},{},{},{}\n",
        decision,
        verdict.statistic,
        verdict.threshold,
        verdict.n_used,
        alpha,
        verdict.meta.blocks.map(|k| k.to_string()).unwrap_or_default(),
    );
    let json = serde_json::to_string_pretty(&verdict).map_err(|e| e.to_string())?;
    emit(output, "verdict", &csv, &json)?;
    Ok(0)
}

fn cmd_estimate(
    data: &Path,
    net_size: Option<usize>,
    tolerance: f64,
    seed: u64,
    output: &OutputArgs,
) -> Result<u8, String> {
    let batch = load_batch(data)?;
    let d = batch.dim();
    let m = net_size.unwrap_or_else(|| default_net_size(d));
    let mut rng = StreamRng::from_master(seed);
    let net = DirectionNet::axes_random(d, m, &mut rng).map_err(|e| e.to_string())?;
    let (mu_hat, objective) = estimate_center(&batch, &net, tolerance).map_err(|e| e.to_string())?;
    let medians = net_medians(&batch, &net).map_err(|e| e.to_string())?;

    let mut csv = String::from("row,kind,direction,value\n");
    for (k, x) in mu_hat.iter().enumerate() {
        csv.push_str(&format!("{k},mu_hat,,{x}\n"));
    }
    csv.push_str(&format!("0,objective,,{objective}\n"));
    for (j, (v, m_j)) in net.directions().iter().zip(&medians).enumerate() {
        let fit: f64 = v.iter().zip(&mu_hat).map(|(a, b)| a * b).sum();
        let dir = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        csv.push_str(&format!("{j},residual,{dir},{}\n", (fit - m_j).abs()));
    }
    let json = serde_json::json!({
        "mu_hat": mu_hat,
        "objective": objective,
        "net_size": m,
        "tolerance": tolerance,
        "seed": seed,
    });
    emit(output, "estimate", &csv, &serde_json::to_string_pretty(&json).unwrap())?;
    Ok(0)
}

fn cmd_simulate(
    scenario: ScenarioArg,
    config_path: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
    output: &OutputArgs,
) -> Result<u8, String> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let text =
        fs::read_to_string(config_path).map_err(|e| format!("{}: {e}", config_path.display()))?;
    let mut config = ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?;
    config.scenario = scenario.into();
    if let Some(s) = seed {
        config.master_seed = s;
    }
    config.validate().map_err(|e| e.to_string())?;

    let report = match run_scenario(&config) {
        Ok(r) => r,
        Err(trunctest::Error::InfeasibleRegime(msg)) => {
            eprintln!("infeasible regime: {msg}");
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e) => return Err(e.to_string()),
    };
    write_report(&report, output)?;

    let all_infeasible = !report.rows.is_empty()
        && report.rows.iter().all(|r| r.flag == "infeasible");
    Ok(if all_infeasible { EXIT_INFEASIBLE } else { 0 })
}

fn write_report(report: &ExperimentReport, output: &OutputArgs) -> Result<(), String> {
    let manifest_json =
        serde_json::to_string_pretty(&report.manifest).map_err(|e| e.to_string())?;
    match &output.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            // The manifest is always emitted as JSON alongside the rows.
            let manifest_path = dir.join("manifest.json");
            fs::write(&manifest_path, &manifest_json)
                .map_err(|e| format!("{}: {e}", manifest_path.display()))?;
            match output.format {
                Format::Csv => {
                    let path = dir.join("report.csv");
                    fs::write(&path, report.to_csv())
                        .map_err(|e| format!("{}: {e}", path.display()))
                }
                Format::Json => {
                    let path = dir.join("report.json");
                    let body =
                        serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
                    fs::write(&path, body).map_err(|e| format!("{}: {e}", path.display()))
                }
            }
        }
        None => {
            match output.format {
                Format::Csv => {
                    print!("{}", report.to_csv());
                    eprintln!("{manifest_json}");
                }
                Format::Json => {
                    let body =
                        serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
                    println!("{body}");
                }
            }
            Ok(())
        }
    }
}

fn cmd_oracle(output: &OutputArgs) -> Result<u8, String> {
    let checks = verify_grid().map_err(|e| e.to_string())?;
    let mut csv = String::from("law,check,n,value,reference,pass\n");
    for c in &checks {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.law, c.check, c.n, c.value, c.reference, c.pass
        ));
    }
    let json = serde_json::to_string_pretty(&checks).map_err(|e| e.to_string())?;
    emit(output, "oracle", &csv, &json)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        eprintln!("{failed} of {} oracle checks failed", checks.len());
        return Ok(EXIT_ORACLE);
    }
    Ok(0)
}
