use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use mbl_cli::{run, Command, Format, PartialConfig, RunConfig};

/// Martingale Bellman laboratory.
///
/// Exit status: 0 when every check passes, 1 when a check fails (reports are
/// still written), 2 for invalid configuration or I/O errors.
#[derive(Debug, Parser)]
#[command(name = "mbl", version)]
struct Cli {
    command: Command,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    max_children: Option<usize>,
    #[arg(long)]
    split_prob: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Sample count for `lemma1` and for rescaling candidates.
    #[arg(long)]
    samples: Option<usize>,
    /// Coordinate-ascent rounds for `search`.
    #[arg(long)]
    refine: Option<usize>,
    /// Witness JSON for `certify` and `bound`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// `quadratic`, `radial` or `linear`.
    #[arg(long)]
    candidate: Option<String>,
    /// Target point `x1_1,…,x1_d,x2,x3,x4` for `search`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    target: Option<Vec<f64>>,
    /// `check`: run the full default corpus instead of one filtration.
    #[arg(long)]
    corpus: bool,
    /// Multiplies every tolerance; overrides `MBL_TOL`.
    #[arg(long)]
    tol_scale: Option<f64>,
}

impl Cli {
    fn overrides(&self) -> PartialConfig {
        PartialConfig {
            depth: self.depth,
            delta: self.delta,
            max_children: self.max_children,
            split_prob: self.split_prob,
            dim: self.dim,
            p: self.p,
            trials: self.trials,
            samples: self.samples,
            refine: self.refine,
            seed: self.seed,
            input: self.input.clone(),
            out: self.out.clone(),
            format: self.format,
            candidate: self.candidate.clone(),
            target: self.target.clone(),
            corpus: self.corpus.then_some(true),
            tol_scale: self.tol_scale,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let resolved = cli
        .config
        .as_deref()
        .map(PartialConfig::from_file)
        .transpose()
        .and_then(|file| {
            let env = std::env::var("MBL_TOL").ok();
            RunConfig::resolve(cli.command, file.unwrap_or_default().merge(cli.overrides()), env.as_deref())
        });
    let outcome = resolved.and_then(|cfg| run(&cfg));
    match outcome {
        Ok(o) => {
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            println!("{}", o.message);
            if !o.passed {
                eprintln!("check failed");
            }
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
