use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tfch::experiments::{self, RunConfig};
use tfch::verify::{self, VerifyConfig};
use tfch::{Error, TimeMesh};

/// Variable-step FBDF2 integrator for the time-fractional Cahn-Hilliard equation.
#[derive(Parser)]
#[command(name = "tfch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate r*(alpha), gamma_max(alpha) and 3 - alpha.
    Bounds {
        /// Alpha grid as start:stop:count.
        #[arg(long, default_value = "0.01:0.99:99")]
        alphas: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Randomized certification of kernel properties, bridging identities and the DGS inequality.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 40)]
        max_n: usize,
        /// Add one mesh with a ratio above r*(alpha) to every suite.
        #[arg(long)]
        inject_bad_mesh: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Manufactured-solution convergence study on graded meshes.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a simulation and write ledger, step records and snapshots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Write the kernel rows n = 1..=N of a mesh CSV (columns k,t_k,tau_k,r_k) to a CSV file.
    DumpKernels {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_VERIFY: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::FixedPoint { .. } | Error::NoConvergence(_) => ExitCode::from(EXIT_SOLVER),
        _ => ExitCode::FAILURE,
    }
}

fn run(cli: Cli) -> tfch::Result<ExitCode> {
    match cli.command {
        Command::Bounds { alphas, out } => {
            let rows = experiments::bounds_table(&experiments::parse_grid(&alphas)?)?;
            experiments::write_bounds_csv(&rows, BufWriter::new(File::create(out)?))?;
        }
        Command::Verify {
            seed,
            trials,
            max_n,
            inject_bad_mesh,
            out,
        } => {
            let cfg = VerifyConfig {
                seed,
                trials,
                max_n,
                inject_bad_mesh,
                ..VerifyConfig::default()
            };
            let report = verify::run(&cfg)?;
            serde_json::to_writer_pretty(File::create(out)?, &report)?;
            for s in &report.suites {
                println!(
                    "{:<22} {} cases={} violations={} worst_margin={:e} flagged={}",
                    s.name,
                    if s.passed { "PASS" } else { "FAIL" },
                    s.cases,
                    s.violations,
                    s.worst_margin,
                    s.flagged_meshes
                );
            }
            if !report.all_passed {
                return Ok(ExitCode::from(EXIT_VERIFY));
            }
        }
        Command::Converge { config, out } => {
            let series = experiments::converge(&RunConfig::load(&config)?)?;
            experiments::write_convergence_csv(&series, BufWriter::new(File::create(out)?))?;
            for s in &series {
                println!(
                    "alpha={} gamma={} expected={:.3} observed={:.3}",
                    s.alpha,
                    s.gamma,
                    s.expected_order,
                    s.finest_order().unwrap_or(f64::NAN)
                );
            }
        }
        Command::Simulate { config, outdir } => {
            let summary = experiments::simulate(&RunConfig::load(&config)?, &outdir)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::DumpKernels { mesh, alpha, out } => {
            let mesh = TimeMesh::read_csv(std::io::BufReader::new(File::open(mesh)?))?;
            tfch::kernels::write_kernel_csv(&mesh, alpha, mesh.num_steps(), BufWriter::new(File::create(out)?))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}
