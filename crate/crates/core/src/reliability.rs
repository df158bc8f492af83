//! Contingency-based reliability: energy not supplied per branch outage,
//! AENS, EIR and the interruption cost term of the objective.
//!
//! Branch failure rates are per year and are spread over the day (`λ·L/365`),
//! with the outage equally likely to start in any hour. After a fault, the
//! subtree below the branch is lost. It is restored after `t_res` if the
//! branch carries a sectionalizer and the island's installed capacity covers
//! its peak load, otherwise it waits `t_rep` for the repair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispatch::Fleet;
use crate::error::{Error, Result};
use crate::grid::NetworkModel;
use crate::scenario::ScenarioSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReliabilityParams {
    /// Hours to locate the fault and switch.
    pub t_res: f64,
    /// Hours to repair.
    pub t_rep: f64,
    /// $/kWh not supplied.
    pub c_int: f64,
    pub h_c: f64,
}

impl Default for ReliabilityParams {
    fn default() -> Self {
        Self {
            t_res: 0.5,
            t_rep: 4.0,
            c_int: 1.5,
            h_c: 1.0,
        }
    }
}

impl ReliabilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_res >= 0.0 && self.t_res <= self.t_rep && self.t_rep.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= t_res <= t_rep, got {} and {}",
                self.t_res, self.t_rep
            )));
        }
        if !(self.c_int >= 0.0 && self.h_c >= 0.0) {
            return Err(Error::InvalidParameter("c_int and h_c must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contingency {
    pub branch_id: u32,
    /// Expected outages of this branch per day.
    pub probability_weight: f64,
    /// kW restored after switching.
    pub restored_load: f64,
    /// kW out until repair.
    pub unrestored_load: f64,
    pub t_res: f64,
    pub t_rep: f64,
}

impl Contingency {
    /// Energy not supplied if this outage happens, kWh.
    pub fn ens(&self) -> f64 {
        self.restored_load * self.t_res + self.unrestored_load * self.t_rep
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneReliability {
    pub zone: u32,
    pub aens: f64,
    pub eir: f64,
    pub c_aens: f64,
    pub ic_day: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    /// kWh per day.
    pub aens: f64,
    pub eir: f64,
    pub c_aens: f64,
    pub ic_day: f64,
    /// Expected daily demand, kWh.
    pub demand_kwh: f64,
    pub zones: Vec<ZoneReliability>,
    /// `(probability, expected interruption cost)` per scenario.
    pub ens_cost_by_scenario: Vec<(f64, f64)>,
}

impl ReliabilityReport {
    /// The interruption term of the objective: Σ over zones of `IC_day`.
    pub fn f2(&self) -> f64 {
        self.zones.iter().map(|z| z.ic_day).sum()
    }
}

/// Splits the load below `branch_id` into restored and unrestored parts.
/// `supply` and `load` are per bus (kW) in network order; the island is
/// restorable when the branch has a sectionalizer and the island's supply
/// covers its load.
pub fn contingency_partition(
    net: &NetworkModel,
    supply: &[f64],
    load: &[f64],
    branch_id: u32,
    params: &ReliabilityParams,
) -> Result<Contingency> {
    let k = net
        .branch_index(branch_id)
        .ok_or_else(|| Error::InvalidInput(format!("unknown branch {branch_id}")))?;
    let n = net.buses().len();
    if supply.len() != n || load.len() != n {
        return Err(Error::InvalidInput(format!("supply and load need {n} entries")));
    }
    let mut island = net.downstream_buses(k);
    island.sort_unstable();
    let island_load: f64 = island.iter().map(|&i| load[i]).sum();
    let br = &net.branches()[k];
    let restorable = restorable(net, k, &island, supply, load);
    Ok(Contingency {
        branch_id,
        probability_weight: br.failure_rate * br.length_km / 365.0,
        restored_load: if restorable { island_load } else { 0.0 },
        unrestored_load: if restorable { 0.0 } else { island_load },
        t_res: params.t_res,
        t_rep: params.t_rep,
    })
}

fn restorable(net: &NetworkModel, branch: usize, island: &[usize], supply: &[f64], load: &[f64]) -> bool {
    let island_load: f64 = island.iter().map(|&i| load[i]).sum();
    let island_supply: f64 = island.iter().map(|&i| supply[i]).sum();
    net.branches()[branch].has_sectionalizer && island_supply >= island_load
}

/// Probability-weighted energy not supplied.
pub fn aens(contingencies: &[(f64, f64)]) -> f64 {
    contingencies.iter().map(|(ens, p)| ens * p).sum()
}

pub fn eir(aens: f64, total_demand: f64) -> Result<f64> {
    if total_demand <= 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "EIR needs positive demand, got {total_demand} kWh"
        )));
    }
    Ok(1.0 - aens / total_demand)
}

pub fn interruption_cost_day(c_aens: f64, h_c: f64) -> f64 {
    h_c * c_aens
}

/// Installed capacity per bus at `hour`: scenario-expected wind and PV
/// output plus CHP and storage ratings.
pub fn installed_capacity(net: &NetworkModel, fleet: &Fleet, scen: &ScenarioSet, hour: usize) -> Result<Vec<f64>> {
    let mut cap = vec![0.0; net.buses().len()];
    let idx = |bus: u32| {
        net.bus_index(bus)
            .ok_or_else(|| Error::InvalidInput(format!("device on unknown bus {bus}")))
    };
    for s in scen.iter() {
        for (u, kw) in fleet.wt.iter().zip(fleet.wt_output(s.wind_speed[hour])) {
            cap[idx(u.bus_id)?] += s.probability * kw;
        }
        for (u, kw) in fleet.pv.iter().zip(fleet.pv_output(s.irradiance[hour], hour)) {
            cap[idx(u.bus_id)?] += s.probability * kw;
        }
    }
    for u in &fleet.chp {
        cap[idx(u.params.bus_id)?] += u.params.p_max;
    }
    for u in &fleet.ess {
        cap[idx(u.params.bus_id)?] += u.params.p_dis_max;
    }
    Ok(cap)
}

/// Full reliability evaluation. The result does not depend on the dispatch
/// schedule, only on installed capacity.
pub fn evaluate_reliability(
    net: &NetworkModel,
    fleet: &Fleet,
    scen: &ScenarioSet,
    params: &ReliabilityParams,
) -> Result<ReliabilityReport> {
    params.validate()?;
    fleet.validate(scen.horizon())?;
    let horizon = scen.horizon();
    let n = net.buses().len();
    let zones = net.zones();
    let zone_of: Vec<usize> = net
        .buses()
        .iter()
        .map(|b| zones.binary_search(&b.mg_zone).expect("zone listed"))
        .collect();

    // peak of the expected hourly load at each bus
    let peak: Vec<f64> = (0..n)
        .map(|i| {
            let nominal = net.buses()[i].p_load_kw;
            (0..horizon)
                .map(|t| scen.iter().map(|s| s.probability * nominal * s.load_factor(t, i)).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .collect();
    let capacity: Vec<Vec<f64>> = (0..horizon)
        .map(|t| installed_capacity(net, fleet, scen, t))
        .collect::<Result<_>>()?;

    // ens[branch][scenario][zone]: expected kWh lost if the branch fails at a
    // uniformly random hour
    let per_branch: Vec<(f64, Vec<Vec<f64>>)> = net
        .branches()
        .par_iter()
        .enumerate()
        .map(|(k, br)| {
            let island = net.downstream_buses(k);
            let restored: Vec<bool> = capacity.iter().map(|cap| restorable(net, k, &island, cap, &peak)).collect();
            let ens: Vec<Vec<f64>> = scen
                .iter()
                .map(|s| {
                    let mut z = vec![0.0; zones.len()];
                    for (t, &res) in restored.iter().enumerate() {
                        let hours = if res { params.t_res } else { params.t_rep };
                        for &i in &island {
                            z[zone_of[i]] += net.buses()[i].p_load_kw * s.load_factor(t, i) * hours / horizon as f64;
                        }
                    }
                    z
                })
                .collect();
            (br.failure_rate * br.length_km / 365.0, ens)
        })
        .collect();

    let mut zone_aens = vec![0.0; zones.len()];
    let mut by_scenario = vec![0.0; scen.len()];
    for (w, ens) in &per_branch {
        for (k, s) in scen.iter().enumerate() {
            for (z, e) in ens[k].iter().enumerate() {
                zone_aens[z] += s.probability * w * e;
                by_scenario[k] += w * e;
            }
        }
    }
    let mut zone_demand = vec![0.0; zones.len()];
    for s in scen.iter() {
        for t in 0..horizon {
            for (i, b) in net.buses().iter().enumerate() {
                zone_demand[zone_of[i]] += s.probability * b.p_load_kw * s.load_factor(t, i);
            }
        }
    }

    let total_aens: f64 = zone_aens.iter().sum();
    let demand: f64 = zone_demand.iter().sum();
    let zone_reports = zones
        .iter()
        .enumerate()
        .map(|(z, &zone)| {
            let c = params.c_int * zone_aens[z];
            Ok(ZoneReliability {
                zone,
                aens: zone_aens[z],
                eir: if zone_demand[z] > 0.0 { eir(zone_aens[z], zone_demand[z])? } else { 1.0 },
                c_aens: c,
                ic_day: interruption_cost_day(c, params.h_c),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let c_aens = params.c_int * total_aens;
    Ok(ReliabilityReport {
        aens: total_aens,
        eir: eir(total_aens, demand)?,
        c_aens,
        ic_day: interruption_cost_day(c_aens, params.h_c),
        demand_kwh: demand,
        zones: zone_reports,
        ens_cost_by_scenario: scen
            .iter()
            .zip(by_scenario)
            .map(|(s, e)| (s.probability, params.c_int * e))
            .collect(),
    })
}
