//! End-to-end run: load, generate, reduce, optimize, evaluate, report.

use std::path::PathBuf;

use crate::coa::{optimize_from, CoaConfig};
use crate::config::RunConfig;
use crate::dispatch::{renewable_penetration, CostBreakdown, DispatchProblem, DispatchSchedule, Evaluation};
use crate::error::{Error, Result};
use crate::grid::{dataset_digest, load_network};
use crate::reliability::evaluate_reliability;
use crate::report::{baseline_dispatch, build_report, without_devices, RunArtifacts, RunReport};
use crate::scenario::{generate_scenarios, reduce_scenarios};

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub run_dir: PathBuf,
}

/// Seed of the optimizer's stream, kept apart from the scenario streams.
pub fn coa_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Runs the whole pipeline and writes the run directory. `threads` caps the
/// worker pool; results do not depend on it.
pub fn run_pipeline(cfg: &RunConfig, threads: Option<usize>) -> Result<RunOutcome> {
    match threads {
        None => run(cfg),
        Some(n) => {
            if n == 0 {
                return Err(Error::InvalidParameter("thread count must be >= 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidState(format!("cannot start worker pool: {e}")))?
                .install(|| run(cfg))
        }
    }
}

fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let raw = &cfg.raw;
    let seed = cfg.seed();
    let horizon = cfg.horizon();

    let net = load_network(&cfg.dataset).map_err(|e| e.in_stage("load dataset"))?;
    cfg.check_placement(&net).map_err(|e| e.in_stage("load dataset"))?;
    let dataset_hash = dataset_digest(&cfg.dataset).map_err(|e| e.in_stage("load dataset"))?;

    let generated = cfg
        .scenario_model(net.buses().len())
        .and_then(|m| generate_scenarios(&m, horizon, raw.scenarios.n_generate, seed))
        .map_err(|e| e.in_stage("generate scenarios"))?;
    let scen = reduce_scenarios(&generated, raw.scenarios.n_keep).map_err(|e| e.in_stage("reduce scenarios"))?;

    let reliability = evaluate_reliability(&net, &cfg.fleet, &scen, &raw.reliability)
        .map_err(|e| e.in_stage("reliability"))?;
    let f2 = reliability.f2();
    let rep = renewable_penetration(&scen, &net, &cfg.fleet).map_err(|e| e.in_stage("reliability"))?;

    let problem = DispatchProblem::new(&net, &cfg.fleet, &scen, raw.prices, raw.weights, f2)
        .map_err(|e| e.in_stage("optimize"))?;
    let baseline = baseline_dispatch(&net, &cfg.fleet, &scen);
    let coa_cfg = CoaConfig {
        seed: coa_seed(seed),
        ..raw.coa.clone()
    };
    let coa = optimize_from(|x| problem.objective(x), &problem.bounds(), &coa_cfg, &[baseline.to_vector()])
        .map_err(|e| e.in_stage("optimize"))?;

    let (optimized, opt_eval, base_eval, no_dg_eval) = (|| {
        let optimized = problem.decode(&coa.best.position)?;
        let opt_eval = problem.evaluate(&optimized, true)?;
        let base_eval = problem.evaluate(&baseline, true)?;
        let bare = without_devices(&cfg.fleet);
        let none = DispatchProblem::new(&net, &bare, &scen, raw.prices, raw.weights, f2)?;
        let no_dg_eval = none.evaluate(&DispatchSchedule::zeros(horizon, 0, 0), true)?;
        Ok((optimized, opt_eval, base_eval, no_dg_eval))
    })()
    .map_err(|e: Error| e.in_stage("evaluate"))?;
    let cost = |e: &Evaluation| CostBreakdown::assemble(&e.f1, f2, e.violation_total(), &raw.weights);

    let manifest: Vec<(String, String)> = [
        ("seed", seed.to_string()),
        ("coa_seed", coa_cfg.seed.to_string()),
        ("config_sha256", cfg.digest.clone()),
        ("dataset", raw.dataset.display().to_string()),
        ("dataset_sha256", dataset_hash),
        ("n_generate", raw.scenarios.n_generate.to_string()),
        ("n_keep", raw.scenarios.n_keep.to_string()),
        ("coa_max_iterations", coa_cfg.max_iterations.to_string()),
        ("horizon", horizon.to_string()),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();

    let report = build_report(&RunArtifacts {
        net: &net,
        fleet: &cfg.fleet,
        scenarios: &scen,
        optimized: &optimized,
        optimized_eval: &opt_eval,
        optimized_cost: cost(&opt_eval),
        baseline_eval: &base_eval,
        baseline_cost: cost(&base_eval),
        no_dg_eval: &no_dg_eval,
        reliability: &reliability,
        rep: &rep,
        coa: &coa,
        period_len: raw.period_len,
        histogram_bins: raw.scenarios.histogram_bins,
        manifest: &manifest,
    })
    .map_err(|e| e.in_stage("report"))?;
    report.write(&cfg.out_dir).map_err(|e| e.in_stage("write report"))?;
    Ok(RunOutcome {
        report,
        run_dir: cfg.out_dir.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::error::ErrorClass;
    use std::fs;
    use std::path::Path;

    fn write_dataset(dir: &Path) {
        fs::write(
            dir.join("network.toml"),
            "name = \"four\"\nsubstation_bus = 1\nv_base_kv = 12.66\ns_base_kva = 1000.0\n",
        )
        .unwrap();
        fs::write(
            dir.join("buses.csv"),
            "bus_id,p_load_kw,q_load_kvar,mg_zone\n1,0,0,1\n2,120,60,1\n3,200,90,2\n4,150,70,2\n",
        )
        .unwrap();
        fs::write(
            dir.join("branches.csv"),
            "branch_id,from,to,r_ohm,x_ohm,length_km,failures_per_km_yr,has_sectionalizer\n\
             1,1,2,0.5,0.3,1.0,0.1,false\n2,2,3,0.8,0.4,1.5,0.1,true\n3,3,4,0.6,0.3,1.0,0.1,false\n",
        )
        .unwrap();
    }

    fn config(dir: &Path, out: &str) -> RunConfig {
        let text = format!(
            "config_version = 1\ndataset = \".\"\nout_dir = \"{out}\"\nseed = 3\n\
             [scenarios]\nn_generate = 12\nn_keep = 4\n\
             [coa]\nmax_iterations = 8\nn_initial = 8\nmax_population = 16\n\
             [[chp]]\nbus = 3\n[[ess]]\nbus = 4\n[[wt]]\nbus = 2\n[[pv]]\nbus = 4\n"
        );
        parse_config(&text, dir).unwrap()
    }

    #[test]
    fn small_run_writes_every_file() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path());
        let out = run_pipeline(&config(dir.path(), "run"), Some(1)).unwrap();
        let r = &out.report;
        assert!(r.cost.z <= r.baseline_cost.z + 1e-9);
        assert_eq!(r.dispatch_table.rows.len(), 8);
        for f in ["dispatch.csv", "voltage.csv", "losses.csv", "summary.csv", "trace.csv", "manifest.csv"] {
            assert!(out.run_dir.join(f).is_file(), "{f}");
        }
        assert!(out.run_dir.join("histograms/ens_cost.csv").is_file());
        let manifest = fs::read_to_string(out.run_dir.join("manifest.csv")).unwrap();
        assert!(manifest.contains("seed,3\n"));
    }

    #[test]
    fn summary_ignores_thread_count() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path());
        let a = run_pipeline(&config(dir.path(), "a"), Some(1)).unwrap();
        let b = run_pipeline(&config(dir.path(), "b"), Some(3)).unwrap();
        let read = |p: &Path| fs::read(p.join("summary.csv")).unwrap();
        assert_eq!(read(&a.run_dir), read(&b.run_dir));
    }

    #[test]
    fn stage_errors_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "run");
        let err = run_pipeline(&cfg, None).unwrap_err();
        assert!(err.to_string().starts_with("load dataset:"), "{err}");
        assert_eq!(err.class(), ErrorClass::Dataset);
        assert!(run_pipeline(&cfg, Some(0)).is_err());
    }
}
