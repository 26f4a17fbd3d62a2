use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cwrmt_cli::{run, CliError, CliResult, ExperimentSpec, Task};

#[derive(Parser)]
#[command(name = "cwrmt", version, about = "Curie-Weiss random matrix experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write summary.json plus CSVs.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment spec; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    task: Option<Task>,
    /// full_cw, diagonal_cw, generalized or iid.
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Matrix dimension; replaces the grid with this single value.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn spec(&self) -> CliResult<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                ExperimentSpec::from_json(&text)?
            }
            None => ExperimentSpec::new(
                self.task
                    .ok_or_else(|| CliError::Config("either --config or --task is required".into()))?,
            ),
        };
        if let Some(t) = self.task {
            spec.task = t;
        }
        if let Some(e) = &self.ensemble {
            spec.ensemble.kind = e.clone();
        }
        if let Some(b) = self.beta {
            spec.ensemble.beta = Some(b);
        }
        if let Some(a) = self.alpha {
            spec.ensemble.alpha = Some(a);
        }
        if let Some(n) = self.n {
            spec.ensemble.n = n;
            spec.n_grid.clear();
        }
        if let Some(r) = self.replicas {
            spec.replicas = r;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(k) = self.k_max {
            spec.k_max = k;
        }
        if let Some(o) = &self.out {
            spec.output_dir = o.clone();
        }
        Ok(spec)
    }
}

fn main() -> ExitCode {
    let Command::Run(args) = Cli::parse().command;
    let result = args.spec().and_then(|spec| run(&spec));
    match result {
        Ok(report) => {
            for m in &report.messages {
                println!("{m}");
            }
            for c in &report.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {:.4e} (threshold {:.4e})", c.name, c.value, c.threshold);
            }
            println!("summary: {}", report.spec.output_dir.join("summary.json").display());
            ExitCode::from(report.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
