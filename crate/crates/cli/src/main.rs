use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plap_cli::{exit_code, run, Mode, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "plap", version, about = "Radial p-Laplacian solver with duality-gap certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and certify one problem; writes the profile CSV and an energy report.
    Solve(Common),
    /// Run the full certification suite (or check a profile given by `profile_csv`).
    Verify(Common),
    /// Distances to the small-epsilon reference along a decreasing epsilon sequence.
    Converge(Common),
    /// Certified solves over the p/f (and epsilon) cross product.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of grid nodes (overrides `grid_size`).
    #[arg(long)]
    grid: Option<usize>,
    /// First probe seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Override any top-level config field, e.g. `--set grid_kind="uniform"`.
    #[arg(long = "set", value_name = "KEY=JSON")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Solve(a) => (Mode::Solve, a),
        Command::Verify(a) => (Mode::Verify, a),
        Command::Converge(a) => (Mode::Converge, a),
        Command::Sweep(a) => (Mode::Sweep, a),
    };
    let overrides =
        Overrides { mode: Some(mode), out_dir: args.out, grid_size: args.grid, seed: args.seed, set: args.set };
    let result = RunConfig::load(&args.config, &overrides).and_then(|config| run(&config));
    let code = exit_code(&result);
    match &result {
        Ok(outcome) => println!("{}", serde_json::to_string_pretty(&outcome.report).expect("report serializes")),
        Err(e) => {
            println!("{}", serde_json::to_string_pretty(&e.to_json()).expect("error serializes"));
            eprintln!("plap: {e}");
        }
    }
    ExitCode::from(code as u8)
}
