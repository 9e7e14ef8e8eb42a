use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use radtrans::error::{Error, Result};
use radtrans::harness::{
    compare_fields, convergence_study, run_simulation, stability_sweep, CompareField, CompareNorm,
};
use radtrans::output::{read_fields_csv, write_outputs};
use radtrans::parse_config;

#[derive(Parser)]
#[command(name = "radtrans", about = "1D gray radiative transfer solver suite", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write fields.csv, diagnostics.csv, meta.json.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Extra snapshot times t1,t2,... (overrides the config list).
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<f64>,
    },
    /// Self-convergence study over a dx refinement ladder.
    Converge {
        config: PathBuf,
        /// Comma-separated dx values, fractions allowed: 1/25,1/50,...
        #[arg(long, value_delimiter = ',', required = true)]
        dx: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Optional directory for a CSV copy of the table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Largest stable CFL constant per (epsilon, dx) cell.
    Stability {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        dx: Vec<String>,
        #[arg(short = 'C', long = "C", value_delimiter = ',', required = true)]
        candidates: Vec<f64>,
    },
    /// Distance between two written runs.
    Compare {
        a_dir: PathBuf,
        b_dir: PathBuf,
        #[arg(long, default_value = "T")]
        field: String,
        #[arg(long, default_value = "l1")]
        norm: String,
    },
}

fn parse_dx(s: &str) -> Result<f64> {
    let v = if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|_| bad_dx(s))?;
        let d: f64 = den.trim().parse().map_err(|_| bad_dx(s))?;
        n / d
    } else {
        s.trim().parse().map_err(|_| bad_dx(s))?
    };
    if !(v > 0.0) {
        return Err(bad_dx(s));
    }
    Ok(v)
}

fn bad_dx(s: &str) -> Error {
    Error::Config(format!("cannot parse dx value \"{s}\""))
}

fn load_config(path: &PathBuf) -> Result<radtrans::SimulationConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, snapshots } => {
            let mut cfg = load_config(&config)?;
            if !snapshots.is_empty() {
                let mut s = snapshots;
                s.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot times"));
                if s.iter().any(|&t| !(t > 0.0) || t > cfg.t_max) {
                    return Err(Error::Config("snapshot times must lie in (0, tmax]".into()));
                }
                cfg.snapshots = s;
            }
            let result = run_simulation(&cfg)?;
            write_outputs(&result, &out)?;
            println!(
                "{}: {} steps to t = {} in {:.2}s ({})",
                cfg.solver.name(),
                result.diagnostics.len(),
                cfg.t_max,
                result.wall.as_secs_f64(),
                if result.stable { "stable" } else { "UNSTABLE" }
            );
            Ok(())
        }
        Command::Converge { config, dx, eps, out } => {
            let cfg = load_config(&config)?;
            let dx: Vec<f64> = dx.iter().map(|s| parse_dx(s)).collect::<Result<_>>()?;
            let report = convergence_study(&cfg, &dx, &eps)?;
            let mut csv = String::from("epsilon,dx,error_rho,error_T\n");
            for e in &report.per_epsilon {
                println!("epsilon = {:e}", e.epsilon);
                println!("  {:>12} {:>14} {:>14}", "dx", "error_rho", "error_T");
                for row in &e.rows {
                    println!("  {:>12.6e} {:>14.6e} {:>14.6e}", row.dx, row.error_rho, row.error_t);
                    csv.push_str(&format!(
                        "{:e},{:e},{:e},{:e}\n",
                        e.epsilon, row.dx, row.error_rho, row.error_t
                    ));
                }
                println!("  fitted order: rho = {:.3}, T = {:.3}", e.order_rho, e.order_t);
            }
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("convergence.csv"), csv)?;
            }
            Ok(())
        }
        Command::Stability { config, eps, dx, candidates } => {
            let cfg = load_config(&config)?;
            let dx: Vec<f64> = dx.iter().map(|s| parse_dx(s)).collect::<Result<_>>()?;
            let report = stability_sweep(&cfg, &eps, &dx, &candidates)?;
            println!("criterion: {}", report.criterion);
            println!("{:>10} {:>12} {:>16}", "epsilon", "dx", "largest stable C");
            for cell in &report.cells {
                match cell.largest_stable_c {
                    Some(c) => println!("{:>10.1e} {:>12.6e} {:>16}", cell.epsilon, cell.dx, c),
                    None => println!("{:>10.1e} {:>12.6e} {:>16}", cell.epsilon, cell.dx, "-"),
                }
            }
            Ok(())
        }
        Command::Compare { a_dir, b_dir, field, norm } => {
            let field = match field.as_str() {
                "T" | "t" | "temperature" => CompareField::Temperature,
                "U" | "u" => CompareField::U,
                "rho" | "density" => CompareField::Rho,
                other => return Err(Error::Config(format!("unknown field \"{other}\""))),
            };
            let norm = match norm.as_str() {
                "l1" => CompareNorm::L1,
                "linf" => CompareNorm::LInf,
                other => return Err(Error::Config(format!("unknown norm \"{other}\""))),
            };
            let a = read_fields_csv(&a_dir.join("fields.csv"))?;
            let b = read_fields_csv(&b_dir.join("fields.csv"))?;
            println!("{:.10e}", compare_fields(&a, &b, field, norm)?);
            Ok(())
        }
    }
}
