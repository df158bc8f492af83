//! Run outputs: period-aggregated dispatch, voltage and loss comparisons,
//! histograms, and cost and reliability summaries, written as CSV.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coa::{CoaResult, TraceEntry};
use crate::dispatch::{aggregate_periods, CostBreakdown, DispatchSchedule, Evaluation, Fleet, HourDetail, DT};
use crate::error::{Error, Result};
use crate::grid::NetworkModel;
use crate::reliability::ReliabilityReport;
use crate::scenario::{empirical_distribution, Histogram, ScenarioSet};

/// Load-following reference schedule: every CHP runs at
/// `p_max · load(t) / peak load`, storage stays idle. Hours with positive
/// load are lifted to the unit's `p_min`.
pub fn baseline_dispatch(net: &NetworkModel, fleet: &Fleet, scen: &ScenarioSet) -> DispatchSchedule {
    let horizon = scen.horizon();
    let load: Vec<f64> = (0..horizon)
        .map(|t| {
            scen.iter()
                .map(|s| {
                    s.probability
                        * net
                            .buses()
                            .iter()
                            .enumerate()
                            .map(|(i, b)| b.p_load_kw * s.load_factor(t, i))
                            .sum::<f64>()
                })
                .sum()
        })
        .collect();
    let peak = load.iter().cloned().fold(0.0, f64::max);
    let mut s = DispatchSchedule::zeros(horizon, fleet.chp.len(), fleet.ess.len());
    if peak <= 0.0 {
        return s;
    }
    for (t, row) in s.chp_p.iter_mut().enumerate() {
        let ratio = (load[t] / peak).max(0.0);
        for (p, u) in row.iter_mut().zip(&fleet.chp) {
            let target = u.params.p_max * ratio;
            *p = if ratio > 0.0 {
                target.clamp(u.params.p_min, u.params.p_max)
            } else {
                0.0
            };
        }
    }
    s
}

/// Fleet with every device removed, for the no-DG reference.
pub fn without_devices(fleet: &Fleet) -> Fleet {
    Fleet {
        chp: Vec::new(),
        ess: Vec::new(),
        wt: Vec::new(),
        pv: Vec::new(),
        cell_temperature: fleet.cell_temperature.clone(),
        power_factor: fleet.power_factor,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchRow {
    pub period: usize,
    pub start_hour: usize,
    pub end_hour: usize,
    /// Mean kW per column of [`DispatchTable::columns`].
    pub values: Vec<f64>,
}

/// Expected PV and WT output and scheduled CHP and ESS setpoints, averaged
/// per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchTable {
    pub columns: Vec<String>,
    pub rows: Vec<DispatchRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageRow {
    pub bus: u32,
    pub optimized: f64,
    pub baseline: f64,
    pub no_dg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub hour: usize,
    pub optimized_kw: f64,
    pub baseline_kw: f64,
    pub no_dg_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dispatch_table: DispatchTable,
    /// Expected voltage per bus, averaged over hours.
    pub voltage_profile: Vec<VoltageRow>,
    pub losses_hourly: Vec<LossRow>,
    /// Expected daily losses, kWh.
    pub losses_optimized: f64,
    pub losses_baseline: f64,
    pub losses_no_dg: f64,
    /// Minimum of each column of the voltage profile.
    pub vmin_optimized: f64,
    pub vmin_baseline: f64,
    pub vmin_no_dg: f64,
    pub histograms: Vec<(String, Histogram)>,
    pub cost: CostBreakdown,
    pub baseline_cost: CostBreakdown,
    pub reliability: ReliabilityReport,
    /// `(zone, renewable penetration)`.
    pub rep: Vec<(u32, f64)>,
    /// Optimized schedule met every constraint and every power flow converged.
    pub converged: bool,
    pub coa_stalled: bool,
    pub coa_evaluations: usize,
    pub trace: Vec<TraceEntry>,
    pub manifest: Vec<(String, String)>,
}

/// Everything [`build_report`] draws on. Evaluations must carry detail.
#[derive(Debug, Clone, Copy)]
pub struct RunArtifacts<'a> {
    pub net: &'a NetworkModel,
    pub fleet: &'a Fleet,
    pub scenarios: &'a ScenarioSet,
    pub optimized: &'a DispatchSchedule,
    pub optimized_eval: &'a Evaluation,
    pub optimized_cost: CostBreakdown,
    pub baseline_eval: &'a Evaluation,
    pub baseline_cost: CostBreakdown,
    pub no_dg_eval: &'a Evaluation,
    pub reliability: &'a ReliabilityReport,
    pub rep: &'a [(u32, f64)],
    pub coa: &'a CoaResult,
    pub period_len: usize,
    pub histogram_bins: usize,
    pub manifest: &'a [(String, String)],
}

fn detail<'e>(name: &str, e: &'e Evaluation, scen: &ScenarioSet, n_buses: usize) -> Result<&'e [Vec<HourDetail>]> {
    let d = e
        .detail
        .as_deref()
        .ok_or_else(|| Error::InvalidInput(format!("{name} evaluation carries no detail")))?;
    let shaped = d.len() == scen.len()
        && d.iter().all(|h| h.len() == scen.horizon() && h.iter().all(|x| x.v.len() == n_buses));
    if !shaped {
        return Err(Error::InvalidInput(format!(
            "{name} evaluation does not match the scenario set ({} scenarios, {} hours)",
            scen.len(),
            scen.horizon()
        )));
    }
    Ok(d)
}

/// `[bus]` expected voltage averaged over hours, and `[hour]` expected losses.
fn expected_network(d: &[Vec<HourDetail>], scen: &ScenarioSet, n_buses: usize) -> (Vec<f64>, Vec<f64>) {
    let horizon = scen.horizon();
    let mut v = vec![0.0; n_buses];
    let mut losses = vec![0.0; horizon];
    for (s, hours) in scen.iter().zip(d) {
        for (t, h) in hours.iter().enumerate() {
            for (acc, &x) in v.iter_mut().zip(&h.v) {
                *acc += s.probability * x / horizon as f64;
            }
            losses[t] += s.probability * h.losses_kw;
        }
    }
    (v, losses)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn dispatch_table(a: &RunArtifacts, d: &[Vec<HourDetail>]) -> Result<DispatchTable> {
    let horizon = a.scenarios.horizon();
    let mut columns = Vec::new();
    let mut hourly: Vec<Vec<f64>> = Vec::new();
    let expected = |pick: &dyn Fn(&HourDetail) -> f64| -> Vec<f64> {
        (0..horizon)
            .map(|t| a.scenarios.iter().zip(d).map(|(s, h)| s.probability * pick(&h[t])).sum())
            .collect()
    };
    for k in 0..a.fleet.pv.len() {
        columns.push(format!("pv{}", k + 1));
        hourly.push(expected(&|h| h.pv_kw[k]));
    }
    for k in 0..a.fleet.wt.len() {
        columns.push(format!("wt{}", k + 1));
        hourly.push(expected(&|h| h.wt_kw[k]));
    }
    for k in 0..a.fleet.chp.len() {
        columns.push(format!("chp{}", k + 1));
        hourly.push(a.optimized.chp_p.iter().map(|r| r[k]).collect());
    }
    for k in 0..a.fleet.ess.len() {
        columns.push(format!("ess{}", k + 1));
        hourly.push(a.optimized.ess_p.iter().map(|r| r[k]).collect());
    }
    columns.push("grid".into());
    hourly.push(expected(&|h| h.slack_p_kw));

    let per_column: Vec<Vec<f64>> = hourly
        .iter()
        .map(|h| aggregate_periods(h, a.period_len))
        .collect::<Result<_>>()?;
    let rows = (0..horizon / a.period_len)
        .map(|p| DispatchRow {
            period: p + 1,
            start_hour: p * a.period_len,
            end_hour: (p + 1) * a.period_len,
            values: per_column.iter().map(|c| c[p]).collect(),
        })
        .collect();
    Ok(DispatchTable { columns, rows })
}

fn histograms(a: &RunArtifacts, d: &[Vec<HourDetail>]) -> Result<Vec<(String, Histogram)>> {
    let horizon = a.scenarios.horizon() as f64;
    let mut wt = Vec::new();
    let mut pv = Vec::new();
    for (s, hours) in a.scenarios.iter().zip(d) {
        for h in hours {
            wt.push((h.wt_kw.iter().sum::<f64>(), s.probability / horizon));
            pv.push((h.pv_kw.iter().sum::<f64>(), s.probability / horizon));
        }
    }
    let mut out = Vec::new();
    if !a.fleet.wt.is_empty() {
        out.push(("wt_power".to_string(), empirical_distribution(&wt, a.histogram_bins)?));
    }
    if !a.fleet.pv.is_empty() {
        out.push(("pv_power".to_string(), empirical_distribution(&pv, a.histogram_bins)?));
    }
    let ens: Vec<(f64, f64)> = a.reliability.ens_cost_by_scenario.iter().map(|&(p, c)| (c, p)).collect();
    out.push(("ens_cost".to_string(), empirical_distribution(&ens, a.histogram_bins)?));
    Ok(out)
}

pub fn build_report(a: &RunArtifacts) -> Result<RunReport> {
    let n = a.net.buses().len();
    a.optimized.validate_shape(a.fleet, a.scenarios.horizon())?;
    let opt = detail("optimized", a.optimized_eval, a.scenarios, n)?;
    let base = detail("baseline", a.baseline_eval, a.scenarios, n)?;
    let no_dg = detail("no-DG", a.no_dg_eval, a.scenarios, n)?;
    if a.reliability.ens_cost_by_scenario.len() != a.scenarios.len() {
        return Err(Error::InvalidInput("reliability report covers a different scenario set".into()));
    }

    let (v_opt, l_opt) = expected_network(opt, a.scenarios, n);
    let (v_base, l_base) = expected_network(base, a.scenarios, n);
    let (v_none, l_none) = expected_network(no_dg, a.scenarios, n);
    let voltage_profile = a
        .net
        .buses()
        .iter()
        .enumerate()
        .map(|(i, b)| VoltageRow {
            bus: b.id,
            optimized: v_opt[i],
            baseline: v_base[i],
            no_dg: v_none[i],
        })
        .collect();
    let losses_hourly = (0..a.scenarios.horizon())
        .map(|t| LossRow {
            hour: t,
            optimized_kw: l_opt[t],
            baseline_kw: l_base[t],
            no_dg_kw: l_none[t],
        })
        .collect();

    Ok(RunReport {
        dispatch_table: dispatch_table(a, opt)?,
        voltage_profile,
        losses_hourly,
        losses_optimized: l_opt.iter().sum::<f64>() * DT,
        losses_baseline: l_base.iter().sum::<f64>() * DT,
        losses_no_dg: l_none.iter().sum::<f64>() * DT,
        vmin_optimized: min_of(&v_opt),
        vmin_baseline: min_of(&v_base),
        vmin_no_dg: min_of(&v_none),
        histograms: histograms(a, opt)?,
        cost: a.optimized_cost,
        baseline_cost: a.baseline_cost,
        reliability: a.reliability.clone(),
        rep: a.rep.to_vec(),
        converged: a.optimized_eval.feasible && a.optimized_eval.violation_total() == 0.0,
        coa_stalled: a.coa.stalled,
        coa_evaluations: a.coa.evaluations,
        trace: a.coa.trace.clone(),
        manifest: a.manifest.to_vec(),
    })
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl RunReport {
    /// `metric,value` pairs for `summary.csv`.
    pub fn summary(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("converged", self.converged.to_string());
        put("coa_stalled", self.coa_stalled.to_string());
        put("coa_iterations", self.trace.len().saturating_sub(1).to_string());
        put("coa_evaluations", self.coa_evaluations.to_string());
        let c = &self.cost;
        put("z", num(c.z));
        put("f1", num(c.f1()));
        put("fuel", num(c.fuel));
        put("om", num(c.om));
        put("emission", num(c.emission));
        put("losses_cost", num(c.losses));
        put("grid", num(c.grid));
        put("interruption", num(c.interruption));
        put("penalty", num(c.penalty));
        put("baseline_z", num(self.baseline_cost.z));
        put("baseline_f1", num(self.baseline_cost.f1()));
        put("baseline_penalty", num(self.baseline_cost.penalty));
        put("losses_optimized_kwh", num(self.losses_optimized));
        put("losses_baseline_kwh", num(self.losses_baseline));
        put("losses_no_dg_kwh", num(self.losses_no_dg));
        put("vmin_optimized", num(self.vmin_optimized));
        put("vmin_baseline", num(self.vmin_baseline));
        put("vmin_no_dg", num(self.vmin_no_dg));
        let r = &self.reliability;
        put("aens_kwh", num(r.aens));
        put("eir", num(r.eir));
        put("c_aens", num(r.c_aens));
        put("ic_day", num(r.ic_day));
        put("demand_kwh", num(r.demand_kwh));
        for z in &r.zones {
            put(&format!("zone{}_eir", z.zone), num(z.eir));
            put(&format!("zone{}_ic_day", z.zone), num(z.ic_day));
        }
        for &(zone, rep) in &self.rep {
            put(&format!("zone{zone}_rep"), num(rep));
        }
        out
    }

    /// Writes the run directory, creating it when missing.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let hist_dir = dir.join("histograms");
        fs::create_dir_all(&hist_dir).map_err(|e| Error::io(&hist_dir, e))?;

        let mut header = strings(&["period", "start_hour", "end_hour"]);
        header.extend(self.dispatch_table.columns.iter().cloned());
        write_rows(
            &dir.join("dispatch.csv"),
            &header,
            self.dispatch_table.rows.iter().map(|r| {
                let mut row = vec![r.period.to_string(), r.start_hour.to_string(), r.end_hour.to_string()];
                row.extend(r.values.iter().map(|&v| num(v)));
                row
            }),
        )?;
        write_rows(
            &dir.join("voltage.csv"),
            &strings(&["bus", "optimized", "baseline", "no_dg"]),
            self.voltage_profile
                .iter()
                .map(|r| vec![r.bus.to_string(), num(r.optimized), num(r.baseline), num(r.no_dg)]),
        )?;
        write_rows(
            &dir.join("losses.csv"),
            &strings(&["hour", "optimized_kw", "baseline_kw", "no_dg_kw"]),
            self.losses_hourly
                .iter()
                .map(|r| vec![r.hour.to_string(), num(r.optimized_kw), num(r.baseline_kw), num(r.no_dg_kw)]),
        )?;
        for (name, h) in &self.histograms {
            write_rows(
                &hist_dir.join(format!("{name}.csv")),
                &strings(&["bin_lo", "bin_hi", "density", "cdf_hi"]),
                (0..h.bins()).map(|k| {
                    vec![
                        num(h.bin_edges[k]),
                        num(h.bin_edges[k + 1]),
                        num(h.densities[k]),
                        num(h.cdf[k + 1]),
                    ]
                }),
            )?;
        }
        write_rows(
            &dir.join("summary.csv"),
            &strings(&["metric", "value"]),
            self.summary().into_iter().map(|(k, v)| vec![k, v]),
        )?;
        write_rows(
            &dir.join("trace.csv"),
            &strings(&["iteration", "best_fitness", "population_size"]),
            self.trace
                .iter()
                .map(|e| vec![e.iteration.to_string(), num(e.best_fitness), e.population_size.to_string()]),
        )?;
        write_rows(
            &dir.join("manifest.csv"),
            &strings(&["key", "value"]),
            self.manifest.iter().map(|(k, v)| vec![k.clone(), v.clone()]),
        )
    }
}
