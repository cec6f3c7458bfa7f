use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nmg_core::scenario::{load_config, parse_levels, parse_solver, run};
use nmg_core::Error;

#[derive(Parser)]
#[command(name = "nmg", version, about = "Steady rarefied cavity flows with moment methods and nonlinear multigrid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario to steady state and write history.tsv, field.tsv and report.txt.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// euler, fs or nmg
        #[arg(long)]
        solver: Option<String>,
        /// Spatial reconstruction order, 1 or 2.
        #[arg(long)]
        order: Option<usize>,
        /// "auto" or the number of coarsenings.
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let Command::Solve {
        config,
        solver,
        order,
        levels,
        threads,
        output,
    } = Cli::parse().command;

    let prepared = (|| {
        let mut c = load_config(&config)?;
        if let Some(s) = solver {
            c.solver = parse_solver(&s)?;
        }
        if let Some(o) = order {
            c.order = o;
        }
        if let Some(l) = levels {
            c.levels = parse_levels(&l)?;
        }
        if let Some(t) = threads {
            c.threads = t;
        }
        if let Some(o) = output {
            c.output_dir = o;
        }
        c.validate()?;
        Ok::<_, Error>(c)
    })();
    let config = match prepared {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    match run(&config) {
        Ok(out) => {
            println!(
                "converged in {} iterations (relative residual {:e}, {:.2} s); results in {}",
                out.report.iterations,
                out.report.final_ratio,
                out.report.wall_seconds,
                config.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonConvergence { .. } | Error::Divergence { .. } | Error::Aborted { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
