use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mgdispatch::coa::{Benchmark, CoaConfig};
use mgdispatch::config::load_config;
use mgdispatch::grid::{distflow_residual, load_network, run_power_flow, Injections};
use mgdispatch::pipeline::run_pipeline;
use mgdispatch::{Error, ErrorClass};

#[derive(Parser)]
#[command(name = "mgdispatch", version, about = "Stochastic day-ahead microgrid dispatch")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write a report directory.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's out_dir (relative to the working directory).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config and its dataset without running anything.
    Validate { config: PathBuf },
    /// Run the optimizer on its benchmark functions.
    BenchmarkCoa {
        /// Number of seeds per benchmark, starting at --seed.
        #[arg(long, default_value_t = 10)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        iterations: usize,
    },
    /// Nominal-load power flow of a dataset.
    Powerflow {
        dataset: PathBuf,
        /// Scales every bus load.
        #[arg(long, default_value_t = 1.0)]
        load_factor: f64,
        /// Also print the voltage of every bus.
        #[arg(long)]
        profile: bool,
    },
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 1,
        ErrorClass::Dataset => 2,
        ErrorClass::Runtime => 3,
    }
}

fn run(config: &Path, seed: Option<u64>, out_dir: Option<PathBuf>, threads: Option<usize>) -> Result<(), Error> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.raw.seed = s;
    }
    if let Some(dir) = out_dir {
        cfg.out_dir = dir;
    }
    let out = run_pipeline(&cfg, threads)?;
    let r = &out.report;
    println!("run directory: {}", out.run_dir.display());
    println!("converged: {}", r.converged);
    println!("z: {:.4} (baseline {:.4})", r.cost.z, r.baseline_cost.z);
    println!(
        "losses kWh/day: {:.3} optimized, {:.3} baseline, {:.3} without DG",
        r.losses_optimized, r.losses_baseline, r.losses_no_dg
    );
    println!(
        "min voltage p.u.: {:.5} optimized, {:.5} baseline, {:.5} without DG",
        r.vmin_optimized, r.vmin_baseline, r.vmin_no_dg
    );
    println!("AENS {:.4} kWh/day, EIR {:.6}", r.reliability.aens, r.reliability.eir);
    Ok(())
}

fn validate(config: &Path) -> Result<(), Error> {
    let cfg = load_config(config)?;
    let net = load_network(&cfg.dataset).map_err(|e| e.in_stage("load dataset"))?;
    cfg.check_placement(&net)?;
    println!(
        "ok: {} buses, {} branches; {} CHP, {} ESS, {} WT, {} PV; {} -> {} scenarios",
        net.buses().len(),
        net.branches().len(),
        cfg.fleet.chp.len(),
        cfg.fleet.ess.len(),
        cfg.fleet.wt.len(),
        cfg.fleet.pv.len(),
        cfg.raw.scenarios.n_generate,
        cfg.raw.scenarios.n_keep
    );
    Ok(())
}

fn benchmark(runs: u64, seed: u64, iterations: usize) -> Result<(), Error> {
    println!("benchmark,seed,best_fitness,iterations,monotone");
    for b in Benchmark::ALL {
        for s in seed..seed + runs {
            let cfg = CoaConfig {
                seed: s,
                max_iterations: iterations,
                ..CoaConfig::default()
            };
            let r = b.run(2, &cfg)?;
            let monotone = r.trace.windows(2).all(|w| w[1].best_fitness <= w[0].best_fitness);
            println!(
                "{},{},{:e},{},{}",
                b.name(),
                s,
                r.best.fitness,
                r.trace.len() - 1,
                monotone
            );
        }
    }
    Ok(())
}

fn powerflow(dataset: &Path, load_factor: f64, profile: bool) -> Result<(), Error> {
    let net = load_network(dataset).map_err(|e| e.in_stage("load dataset"))?;
    let sol = run_power_flow(&net, &Injections::from_loads(&net, load_factor))?;
    let (k, vmin) = sol
        .v
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    println!("network: {} ({} buses)", net.name, net.buses().len());
    println!("converged: {} after {} sweeps", sol.converged, sol.iterations);
    println!("losses: {:.4} kW", sol.losses_kw);
    println!("substation: {:.4} kW, {:.4} kVAr", sol.slack_p_kw, sol.slack_q_kvar);
    println!("min voltage: {:.5} p.u. at bus {}", vmin, net.buses()[k].id);
    println!("distflow residual: {:.3e}", distflow_residual(&net, &sol));
    if profile {
        println!("bus,v_pu");
        for (b, v) in net.buses().iter().zip(&sol.v) {
            println!("{},{}", b.id, v);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out_dir,
            threads,
        } => run(&config, seed, out_dir, threads),
        Command::Validate { config } => validate(&config),
        Command::BenchmarkCoa {
            runs,
            seed,
            iterations,
        } => benchmark(runs, seed, iterations),
        Command::Powerflow {
            dataset,
            load_factor,
            profile,
        } => powerflow(&dataset, load_factor, profile),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
