use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlcouple::harness::{self, compare_to_reference, ExperimentConfig, ResultTable};
use mlcouple::Error;

#[derive(Parser)]
#[command(name = "mlcouple", version, about = "Schwarz coupling experiments with learned interface values")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment configuration.
    config: PathBuf,
    /// Override a field, e.g. `--set training.max_epochs=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (same as `--set output_dir=...`).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Single run with the first architecture and seed.
    Run(ConfigArgs),
    /// Full sweep over architectures and seeds; writes table.csv.
    Sweep(ConfigArgs),
    /// Compare a result table against a reference table.
    Compare {
        result: PathBuf,
        reference: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        factor: f64,
    },
    /// Write the residual history of the coupled solve.
    Convergence(ConfigArgs),
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig, Error> {
    let mut ov = args.overrides.clone();
    if let Some(out) = &args.out {
        ov.push(format!("output_dir={}", json_string(out)));
    }
    ExperimentConfig::load(&args.config, &ov)
}

fn json_string(p: &std::path::Path) -> String {
    format!("{:?}", p.display().to_string())
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::Config(_) | Error::InvalidGrid(_) | Error::InvalidDecomposition(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn real_main(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run(args) => {
            let out = harness::run_single(&load(&args)?)?;
            println!("wrote {}", out.run_json.display());
            println!("wrote {}", out.metadata_json.display());
            println!("wrote {}", out.convergence_csv.display());
            for f in &out.field_csvs {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep(args) => {
            let cfg = load(&args)?;
            let (result, table) = harness::run_sweep(&cfg)?;
            print!("{}", result.table().to_csv()?);
            for row in &result.rows {
                for f in &row.failures {
                    eprintln!("Nl={} Nn={} seed {} failed: {}", row.n_layers, row.n_neurons, f.seed, f.reason);
                }
            }
            println!("wrote {}", table.display());
        }
        Command::Compare {
            result,
            reference,
            factor,
        } => {
            let res = ResultTable::load(&result)?;
            let reference = ResultTable::load(&reference)?;
            let report = compare_to_reference(&res, &reference, factor)?;
            println!("Nl,Nn,column,value,reference,ratio,pass");
            for c in &report.cells {
                let value = c.value.map(|v| format!("{v:e}")).unwrap_or_default();
                let ratio = c.ratio.map(|v| format!("{v:.3}")).unwrap_or_default();
                println!(
                    "{},{},{},{},{:e},{},{}",
                    c.n_layers, c.n_neurons, c.column, value, c.reference, ratio, c.pass
                );
            }
            let failed = report.cells.iter().filter(|c| !c.pass).count();
            if !report.passed {
                eprintln!("{failed} of {} cells outside factor {factor}", report.cells.len());
                return Ok(ExitCode::from(1));
            }
        }
        Command::Convergence(args) => {
            let path = harness::run_convergence(&load(&args)?)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match real_main(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
