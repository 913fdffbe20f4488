use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use biphoton::scenario::{self, RunOptions, ScenarioConfig};
use biphoton::Result;

/// Biphoton wave-function simulator.
#[derive(Parser)]
#[command(name = "biphoton", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Directory for arrays, previews and the manifest.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Replaces scatterer seeds (near field = S, far field = S + 1).
    #[arg(long, global = true, value_name = "S")]
    seed_override: Option<u64>,
    /// Worker threads; implies parallel accumulation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Force bit-reproducible serial accumulation.
    #[arg(long, global = true)]
    serial: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its artifacts.
    Run { config: PathBuf },
    /// Time the engine over grid sizes and slice counts.
    Bench {
        #[arg(long, num_args = 1.., default_values_t = [16usize, 24, 32])]
        n: Vec<usize>,
        #[arg(long, num_args = 1.., default_values_t = [2usize, 4])]
        m: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Compare the engine against the brute-force reference.
    OracleCheck { config: PathBuf },
}

fn execute(cli: Cli) -> Result<()> {
    let options = RunOptions {
        output_dir: cli.common.output_dir,
        seed_override: cli.common.seed_override,
        threads: cli.common.threads,
        serial: cli.common.serial,
    };
    match cli.command {
        Command::Run { config } => {
            let report = scenario::run_scenario(&config, &options)?;
            let m = &report.manifest;
            println!("scenario      {}", m.name);
            println!("total weight  {:.6e}", m.total_weight);
            for (k, v) in &m.pairs_ratio {
                println!("pairs ratio   {k:<10} {v:.6}");
            }
            for (k, (sx, sy)) in &m.peak_std {
                println!("peak std      {k:<10} {sx:.4e} {sy:.4e}");
            }
            for s in &m.schmidt {
                println!("schmidt       {:<10} {:.4e}", s.label, s.value);
            }
            println!("wall time     {:.2} s", m.wall_time_s);
            println!("manifest      {}", report.manifest_path.display());
        }
        Command::Bench { n, m, repeats } => {
            let report = scenario::run_benchmark(&n, &m, repeats, &options)?;
            println!("{:>4} {:>4} {:>12}", "n", "M", "seconds");
            for c in &report.cases {
                println!("{:>4} {:>4} {:>12.4}", c.n, c.slices, c.seconds);
            }
            for (m, slope) in &report.n_slopes {
                println!("M = {m}: log-time vs log-n slope {slope:.3}");
            }
            if let Some(dir) = options.output_dir {
                std::fs::create_dir_all(&dir)?;
                let json =
                    serde_json::to_string_pretty(&report).expect("benchmark report serializes");
                std::fs::write(dir.join("bench.json"), json)?;
            }
        }
        Command::OracleCheck { config } => {
            let mut config = ScenarioConfig::load(&config)?;
            options.apply(&mut config);
            let r = scenario::oracle_check(&config)?;
            println!("wave function relative L2  {:.3e}", r.wavefunction_error);
            println!("correlation max abs diff   {:.3e}", r.correlation_error);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
