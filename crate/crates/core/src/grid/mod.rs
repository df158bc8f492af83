//! Radial feeder model and power flow.

mod io;
mod sweep;

pub use io::{dataset_digest, load_network};
pub use sweep::{
    distflow_residual, losses_cost, run_power_flow, run_power_flow_with, voltage_profile, Injections,
    PowerFlowSolution, SweepOptions,
};

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type BusId = u32;
pub type BranchId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub p_load_kw: f64,
    pub q_load_kvar: f64,
    pub mg_zone: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: BranchId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub r_ohm: f64,
    pub x_ohm: f64,
    pub length_km: f64,
    /// Failures per km-year.
    pub failure_rate: f64,
    pub has_sectionalizer: bool,
}

/// Index structure of the rooted tree. Buses and branches are addressed by
/// their position in the id-sorted vectors of [`NetworkModel`].
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Topology {
    pub bus_index: HashMap<BusId, usize>,
    /// Breadth-first bus order starting at the substation.
    pub order: Vec<usize>,
    /// Branch feeding each bus (none for the substation).
    pub feeder: Vec<Option<usize>>,
    /// Branches leaving each bus away from the substation.
    pub children: Vec<Vec<usize>>,
    /// Upstream and downstream bus of every branch.
    pub upstream: Vec<usize>,
    pub downstream: Vec<usize>,
}

/// A validated radial network. Buses and branches are kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub name: String,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    substation_bus: BusId,
    v_base_kv: f64,
    s_base_kva: f64,
    pub(crate) topo: Topology,
}

impl NetworkModel {
    pub fn new(
        name: impl Into<String>,
        mut buses: Vec<Bus>,
        mut branches: Vec<Branch>,
        substation_bus: BusId,
        v_base_kv: f64,
        s_base_kva: f64,
    ) -> Result<Self> {
        if !(v_base_kv > 0.0 && s_base_kva > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bases must be positive, got v_base={v_base_kv} kV, s_base={s_base_kva} kVA"
            )));
        }
        buses.sort_by_key(|b| b.id);
        branches.sort_by_key(|b| b.id);

        let mut bus_index = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            if bus_index.insert(b.id, i).is_some() {
                return Err(Error::Topology(format!("duplicate bus id {}", b.id)));
            }
            if !(b.p_load_kw >= 0.0 && b.q_load_kvar >= 0.0) {
                return Err(Error::Topology(format!("bus {} has a negative load", b.id)));
            }
        }
        for w in branches.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::Topology(format!("duplicate branch id {}", w[0].id)));
            }
        }
        let root = *bus_index
            .get(&substation_bus)
            .ok_or_else(|| Error::Topology(format!("substation bus {substation_bus} not found")))?;

        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); buses.len()];
        for (k, br) in branches.iter().enumerate() {
            if !(br.r_ohm >= 0.0 && br.x_ohm >= 0.0 && br.length_km > 0.0 && br.failure_rate >= 0.0) {
                return Err(Error::Topology(format!("branch {} has out-of-range parameters", br.id)));
            }
            let lookup = |id: BusId| {
                bus_index
                    .get(&id)
                    .copied()
                    .ok_or_else(|| Error::Topology(format!("branch {} references unknown bus {id}", br.id)))
            };
            let (f, t) = (lookup(br.from_bus)?, lookup(br.to_bus)?);
            if f == t {
                return Err(Error::Topology(format!("branch {} is a self-loop", br.id)));
            }
            adjacency[f].push((t, k));
            adjacency[t].push((f, k));
        }

        let n = buses.len();
        let mut feeder = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut upstream = vec![usize::MAX; branches.len()];
        let mut downstream = vec![usize::MAX; branches.len()];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &(j, k) in &adjacency[i] {
                if Some(k) == feeder[i] {
                    continue;
                }
                if seen[j] {
                    return Err(Error::Topology(format!("branch {} closes a cycle", branches[k].id)));
                }
                seen[j] = true;
                feeder[j] = Some(k);
                children[i].push(k);
                upstream[k] = i;
                downstream[k] = j;
                queue.push_back(j);
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Topology(format!("bus {} is not connected to the substation", buses[i].id)));
        }
        if branches.len() + 1 != buses.len() {
            return Err(Error::Topology(format!(
                "radial network needs {} branches for {} buses, found {}",
                buses.len() - 1,
                buses.len(),
                branches.len()
            )));
        }

        Ok(Self {
            name: name.into(),
            buses,
            branches,
            substation_bus,
            v_base_kv,
            s_base_kva,
            topo: Topology {
                bus_index,
                order,
                feeder,
                children,
                upstream,
                downstream,
            },
        })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn substation_bus(&self) -> BusId {
        self.substation_bus
    }

    pub fn v_base_kv(&self) -> f64 {
        self.v_base_kv
    }

    pub fn s_base_kva(&self) -> f64 {
        self.s_base_kva
    }

    /// Impedance base in ohms.
    pub fn z_base_ohm(&self) -> f64 {
        self.v_base_kv * self.v_base_kv * 1000.0 / self.s_base_kva
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.topo.bus_index.get(&id).copied()
    }

    pub fn branch_index(&self, id: BranchId) -> Option<usize> {
        self.branches.binary_search_by_key(&id, |b| b.id).ok()
    }

    /// Bus indices of the subtree hanging below `branch` (by index).
    pub fn downstream_buses(&self, branch: usize) -> Vec<usize> {
        let mut out = vec![self.topo.downstream[branch]];
        let mut k = 0;
        while k < out.len() {
            let i = out[k];
            out.extend(self.topo.children[i].iter().map(|&c| self.topo.downstream[c]));
            k += 1;
        }
        out
    }

    /// Distinct microgrid zones in ascending order.
    pub fn zones(&self) -> Vec<u32> {
        let mut z: Vec<u32> = self.buses.iter().map(|b| b.mg_zone).collect();
        z.sort_unstable();
        z.dedup();
        z
    }

    pub fn total_load_kw(&self) -> f64 {
        self.buses.iter().map(|b| b.p_load_kw).sum()
    }
}
