//! Scenario-expected operating cost and the weighted objective.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::costs::{chp_fuel_cost, emission_cost, om_cost};
use super::fleet::{Fleet, Placement};
use super::{check_schedule, network_violation, penetration_ratio, DispatchSchedule, Violation};
use crate::error::{Error, Result};
use crate::grid::{run_power_flow, Injections, NetworkModel};
use crate::scenario::{Scenario, ScenarioSet};

/// Length of one scheduling step, hours.
pub const DT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Prices {
    /// $/kWh drawn from the upstream grid.
    pub grid_buy: f64,
    /// $/kWh credited for export.
    pub grid_sell: f64,
    /// $/kWh of network losses.
    pub c_ploss: f64,
}

impl Default for Prices {
    fn default() -> Self {
        Self {
            grid_buy: 0.12,
            grid_sell: 0.06,
            c_ploss: 0.12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Weights {
    pub h1: f64,
    pub h2: f64,
    /// $ per unit of constraint violation.
    pub penalty: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            h1: 1.0,
            h2: 1.0,
            penalty: 1e6,
        }
    }
}

/// Expected daily operating cost by component, $.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct F1Costs {
    pub fuel: f64,
    pub om: f64,
    pub emission: f64,
    pub losses: f64,
    /// Purchases minus export credit.
    pub grid: f64,
}

impl F1Costs {
    pub fn total(&self) -> f64 {
        self.fuel + self.om + self.emission + self.losses + self.grid
    }

    fn add_scaled(&mut self, o: &F1Costs, w: f64) {
        self.fuel += w * o.fuel;
        self.om += w * o.om;
        self.emission += w * o.emission;
        self.losses += w * o.losses;
        self.grid += w * o.grid;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub fuel: f64,
    pub om: f64,
    pub emission: f64,
    pub losses: f64,
    pub grid: f64,
    pub interruption: f64,
    pub penalty: f64,
    pub z: f64,
}

impl CostBreakdown {
    /// `z = h1·F1 + h2·F2 + penalty·Σ violations`.
    pub fn assemble(f1: &F1Costs, f2: f64, violation_total: f64, w: &Weights) -> Self {
        let penalty = w.penalty * violation_total;
        Self {
            fuel: f1.fuel,
            om: f1.om,
            emission: f1.emission,
            losses: f1.losses,
            grid: f1.grid,
            interruption: f2,
            penalty,
            z: w.h1 * f1.total() + w.h2 * f2 + penalty,
        }
    }

    pub fn f1(&self) -> f64 {
        self.fuel + self.om + self.emission + self.losses + self.grid
    }
}

/// Network state of one scenario-hour.
#[derive(Debug, Clone, PartialEq)]
pub struct HourDetail {
    pub v: Vec<f64>,
    pub losses_kw: f64,
    pub slack_p_kw: f64,
    pub wt_kw: Vec<f64>,
    pub pv_kw: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub f1: F1Costs,
    /// Device bound and storage violations.
    pub violations: Vec<Violation>,
    /// Probability-weighted magnitude of power-flow divergence and balance
    /// violations.
    pub network_violation: f64,
    /// False when any scenario-hour power flow failed to converge.
    pub feasible: bool,
    /// `[scenario][hour]`, only when requested.
    pub detail: Option<Vec<Vec<HourDetail>>>,
}

impl Evaluation {
    pub fn violation_total(&self) -> f64 {
        self.violations.iter().map(|v| v.magnitude).sum::<f64>() + self.network_violation
    }
}

struct ScenarioOutcome {
    costs: F1Costs,
    network_violation: f64,
    feasible: bool,
    detail: Option<Vec<HourDetail>>,
}

/// Everything needed to price schedules against one scenario set.
#[derive(Debug, Clone)]
pub struct DispatchProblem<'a> {
    pub net: &'a NetworkModel,
    pub fleet: &'a Fleet,
    pub scenarios: &'a ScenarioSet,
    pub prices: Prices,
    pub weights: Weights,
    /// Reliability term, independent of the schedule.
    pub f2: f64,
    placement: Placement,
}

impl<'a> DispatchProblem<'a> {
    pub fn new(
        net: &'a NetworkModel,
        fleet: &'a Fleet,
        scenarios: &'a ScenarioSet,
        prices: Prices,
        weights: Weights,
        f2: f64,
    ) -> Result<Self> {
        fleet.validate(scenarios.horizon())?;
        let placement = fleet.place(net)?;
        if scenarios.iter().any(|s| s.load_multiplier.iter().any(|r| r.len() != 1 && r.len() != net.buses().len())) {
            return Err(Error::InvalidInput("per-bus load multipliers do not match the network".into()));
        }
        Ok(Self {
            net,
            fleet,
            scenarios,
            prices,
            weights,
            f2,
            placement,
        })
    }

    pub fn horizon(&self) -> usize {
        self.scenarios.horizon()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        DispatchSchedule::bounds(self.fleet, self.horizon())
    }

    pub fn decode(&self, x: &[f64]) -> Result<DispatchSchedule> {
        DispatchSchedule::from_vector(x, self.horizon(), self.fleet.chp.len(), self.fleet.ess.len())
    }

    /// Net bus injections for one scenario-hour, plus the renewable output
    /// per unit.
    pub fn injections(&self, s: &DispatchSchedule, scen: &Scenario, hour: usize) -> (Injections, Vec<f64>, Vec<f64>) {
        let net = self.net;
        let fleet = self.fleet;
        let mut inj = Injections {
            p_kw: net
                .buses()
                .iter()
                .enumerate()
                .map(|(i, b)| -b.p_load_kw * scen.load_factor(hour, i))
                .collect(),
            q_kvar: net
                .buses()
                .iter()
                .enumerate()
                .map(|(i, b)| -b.q_load_kvar * scen.load_factor(hour, i))
                .collect(),
        };
        let wt = fleet.wt_output(scen.wind_speed[hour]);
        let pv = fleet.pv_output(scen.irradiance[hour], hour);
        let p = &self.placement;
        let gens = p
            .wt
            .iter()
            .zip(&wt)
            .chain(p.pv.iter().zip(&pv))
            .chain(p.chp.iter().zip(&s.chp_p[hour]))
            .chain(p.ess.iter().zip(&s.ess_p[hour]));
        for (&bus, &kw) in gens {
            inj.p_kw[bus] += kw;
            if kw > 0.0 {
                inj.q_kvar[bus] += fleet.reactive(kw);
            }
        }
        (inj, wt, pv)
    }

    /// Device costs that do not depend on the scenario.
    fn schedule_costs(&self, s: &DispatchSchedule) -> Result<F1Costs> {
        let mut c = F1Costs::default();
        for t in 0..self.horizon() {
            for (u, &p) in self.fleet.chp.iter().zip(&s.chp_p[t]) {
                let p = p.max(0.0);
                c.fuel += chp_fuel_cost(p, &u.params, DT)?;
                c.om += om_cost(p, u.k_om, DT);
                c.emission += emission_cost(p, &u.emission) * DT;
            }
            for (u, &p) in self.fleet.ess.iter().zip(&s.ess_p[t]) {
                c.om += om_cost(p.abs(), u.k_om, DT);
            }
        }
        Ok(c)
    }

    fn run_scenario(&self, s: &DispatchSchedule, scen: &Scenario, detail: bool) -> Result<ScenarioOutcome> {
        let mut costs = F1Costs::default();
        let mut flow_violation = 0.0;
        let mut feasible = true;
        let mut hours = detail.then(|| Vec::with_capacity(self.horizon()));
        for t in 0..self.horizon() {
            let (inj, wt, pv) = self.injections(s, scen, t);
            let sol = run_power_flow(self.net, &inj)?;
            for (u, &kw) in self.fleet.wt.iter().zip(&wt) {
                costs.om += om_cost(kw, u.k_om, DT);
            }
            for (u, &kw) in self.fleet.pv.iter().zip(&pv) {
                costs.om += om_cost(kw, u.k_om, DT);
            }
            if let Some(v) = network_violation(t, &sol) {
                flow_violation += v.magnitude;
            }
            if sol.converged {
                costs.losses += self.prices.c_ploss * sol.losses_kw * DT;
                let price = if sol.slack_p_kw >= 0.0 {
                    self.prices.grid_buy
                } else {
                    self.prices.grid_sell
                };
                costs.grid += price * sol.slack_p_kw * DT;
            } else {
                feasible = false;
            }
            if let Some(h) = hours.as_mut() {
                h.push(HourDetail {
                    v: sol.v,
                    losses_kw: sol.losses_kw,
                    slack_p_kw: sol.slack_p_kw,
                    wt_kw: wt,
                    pv_kw: pv,
                    converged: sol.converged,
                });
            }
        }
        Ok(ScenarioOutcome {
            costs,
            network_violation: flow_violation,
            feasible,
            detail: hours,
        })
    }

    /// Probability-weighted F1 and constraint status of `s`.
    pub fn evaluate(&self, s: &DispatchSchedule, detail: bool) -> Result<Evaluation> {
        s.validate_shape(self.fleet, self.horizon())?;
        let outcomes: Vec<ScenarioOutcome> = self
            .scenarios
            .scenarios()
            .par_iter()
            .map(|scen| self.run_scenario(s, scen, detail))
            .collect::<Result<_>>()?;

        let mut f1 = self.schedule_costs(s)?;
        let mut network = 0.0;
        let mut feasible = true;
        let mut details = detail.then(|| Vec::with_capacity(outcomes.len()));
        for (scen, o) in self.scenarios.iter().zip(outcomes) {
            f1.add_scaled(&o.costs, scen.probability);
            network += scen.probability * o.network_violation;
            feasible &= o.feasible;
            if let (Some(d), Some(h)) = (details.as_mut(), o.detail) {
                d.push(h);
            }
        }
        Ok(Evaluation {
            f1,
            violations: check_schedule(s, self.fleet, DT),
            network_violation: network,
            feasible,
            detail: details,
        })
    }

    pub fn fitness(&self, s: &DispatchSchedule) -> Result<CostBreakdown> {
        let e = self.evaluate(s, false)?;
        Ok(CostBreakdown::assemble(&e.f1, self.f2, e.violation_total(), &self.weights))
    }

    /// Objective on the flattened decision vector. Evaluation failures map
    /// to +∞.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.decode(x)
            .and_then(|s| self.fitness(&s))
            .map(|c| c.z)
            .unwrap_or(f64::INFINITY)
    }
}

/// Expected daily F1 of `s`.
pub fn evaluate_f1(
    s: &DispatchSchedule,
    scen: &ScenarioSet,
    net: &NetworkModel,
    fleet: &Fleet,
    prices: &Prices,
) -> Result<Evaluation> {
    DispatchProblem::new(net, fleet, scen, *prices, Weights::default(), 0.0)?.evaluate(s, false)
}

/// Weighted objective of `s` given the reliability term `f2`.
pub fn fitness(
    s: &DispatchSchedule,
    scen: &ScenarioSet,
    net: &NetworkModel,
    fleet: &Fleet,
    weights: &Weights,
    prices: &Prices,
    f2: f64,
) -> Result<CostBreakdown> {
    DispatchProblem::new(net, fleet, scen, *prices, *weights, f2)?.fitness(s)
}

/// Expected share of each zone's demand energy met by wind and PV, in zone
/// order. Renewables run at maximum available output, so the schedule does
/// not enter.
pub fn renewable_penetration(scen: &ScenarioSet, net: &NetworkModel, fleet: &Fleet) -> Result<Vec<(u32, f64)>> {
    fleet.validate(scen.horizon())?;
    let placement = fleet.place(net)?;
    let zones = net.zones();
    let zone_of = |bus: usize| zones.binary_search(&net.buses()[bus].mg_zone).expect("zone listed");
    let mut renewable = vec![0.0; zones.len()];
    let mut demand = vec![0.0; zones.len()];
    for s in scen.iter() {
        for t in 0..scen.horizon() {
            for (i, b) in net.buses().iter().enumerate() {
                demand[zone_of(i)] += s.probability * b.p_load_kw * s.load_factor(t, i) * DT;
            }
            for (&bus, kw) in placement.wt.iter().zip(fleet.wt_output(s.wind_speed[t])) {
                renewable[zone_of(bus)] += s.probability * kw * DT;
            }
            for (&bus, kw) in placement.pv.iter().zip(fleet.pv_output(s.irradiance[t], t)) {
                renewable[zone_of(bus)] += s.probability * kw * DT;
            }
        }
    }
    zones
        .iter()
        .enumerate()
        .map(|(k, &z)| Ok((z, penetration_ratio(renewable[k], demand[k])?)))
        .collect()
}
