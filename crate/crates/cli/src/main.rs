use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use kinrate_cli::scenario::Scenario;
use kinrate_cli::simulate::RunOpts;
use kinrate_cli::{certify, chain_demo, simulate, tabulate, verify};

#[derive(Parser)]
#[command(
    name = "kinrate",
    version,
    about = "Certified decay envelopes and verification runs for weakly confined kinetic dynamics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the particle seed from the scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Step-halving levels behind the discretization budget.
    #[arg(long, default_value_t = 1)]
    refine: usize,
    /// Also run the particle ensemble and compare autocovariances.
    #[arg(long)]
    mc: bool,
    /// Override the averaging window length from the scenario.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the explicit constants and certified envelopes for a scenario.
    Certify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the averaging window length from the scenario.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Run the grid solver and write the sampled decay series.
    Simulate(RunArgs),
    /// Certify, simulate, and judge domination and dissipation.
    Verify(RunArgs),
    /// Emit the nine-cell benchmark exponent table.
    Tabulate {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Dump the chained tradeoff curve, its conjugate, and the envelope.
    ChainDemo {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Returns false when a verdict failed; errors abort with a message.
fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Certify { scenario, out, tau } => {
            let sc = Scenario::load(&scenario)?;
            let res = certify::run(&sc, &out, tau)?;
            println!("{}", serde_json::to_string_pretty(&res.json)?);
            eprintln!("wrote {}", res.path.display());
            Ok(true)
        }
        Cmd::Simulate(a) => {
            let sc = Scenario::load(&a.scenario)?;
            let opts = RunOpts { seed: a.seed, refine: a.refine, mc: a.mc, tau: a.tau };
            let sim = simulate::run(&sc, &a.out, &opts)?;
            println!("{}", serde_json::to_string_pretty(&sim.summary)?);
            eprintln!("wrote {}", sim.csv_path.display());
            if let Some(mc) = &sim.mc {
                eprintln!("wrote {}", mc.csv_path.display());
            }
            Ok(sim.dominated != Some(false))
        }
        Cmd::Verify(a) => {
            let sc = Scenario::load(&a.scenario)?;
            let opts = RunOpts { seed: a.seed, refine: a.refine, mc: a.mc, tau: a.tau };
            let (row, _, path) = verify::run(&sc, &a.out, &opts)?;
            print!("{}", row.to_json());
            eprintln!("wrote {}", path.display());
            Ok(!row.has_fail())
        }
        Cmd::Tabulate { out } => {
            let table = tabulate::run(&out)?;
            print!("{}", table.csv);
            eprintln!("wrote {}", table.path.display());
            Ok(true)
        }
        Cmd::ChainDemo { out, p, q } => {
            let res = chain_demo::run(&out, p, q)?;
            println!("wrote {}", res.beta_path.display());
            println!("wrote {}", res.kstar_path.display());
            println!("wrote {}", res.finv_path.display());
            Ok(true)
        }
    }
}
