//! Backward-forward sweep on the branch-flow (DistFlow) equations.
//!
//! Backward pass: each branch carries its downstream demand plus its own
//! series loss `r·(P² + Q²)/V²`. Forward pass: squared voltage magnitudes
//! drop along each branch as
//! `V_j² = V_i² − 2(r·P + x·Q) + (r² + x²)(P² + Q²)/V_i²`, which is exact for
//! radial networks. The substation is held at 1.0 p.u.

use serde::{Deserialize, Serialize};

use super::NetworkModel;
use crate::error::{Error, Result};

/// Net injections per bus (generation minus load), kW and kVAr, in
/// network bus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injections {
    pub p_kw: Vec<f64>,
    pub q_kvar: Vec<f64>,
}

impl Injections {
    pub fn zeros(n: usize) -> Self {
        Self {
            p_kw: vec![0.0; n],
            q_kvar: vec![0.0; n],
        }
    }

    /// Nominal bus loads scaled by `factor`, as negative injections.
    pub fn from_loads(net: &NetworkModel, factor: f64) -> Self {
        Self {
            p_kw: net.buses().iter().map(|b| -b.p_load_kw * factor).collect(),
            q_kvar: net.buses().iter().map(|b| -b.q_load_kvar * factor).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Largest voltage change (p.u.) between sweeps at convergence.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    /// Voltage magnitude per bus, p.u., in bus-id order.
    pub v: Vec<f64>,
    /// Sending-end (substation side) flow per branch, in branch-id order.
    pub branch_p_kw: Vec<f64>,
    pub branch_q_kvar: Vec<f64>,
    pub losses_kw: f64,
    /// Power drawn from the upstream grid at the substation.
    pub slack_p_kw: f64,
    pub slack_q_kvar: f64,
    pub converged: bool,
    pub iterations: usize,
    pub injection_p_kw: Vec<f64>,
    pub injection_q_kvar: Vec<f64>,
}

pub fn run_power_flow(net: &NetworkModel, injections: &Injections) -> Result<PowerFlowSolution> {
    run_power_flow_with(net, injections, SweepOptions::default())
}

pub fn run_power_flow_with(
    net: &NetworkModel,
    injections: &Injections,
    opts: SweepOptions,
) -> Result<PowerFlowSolution> {
    let n = net.buses().len();
    if injections.p_kw.len() != n || injections.q_kvar.len() != n {
        return Err(Error::InvalidInput(format!(
            "injection vectors must have {n} entries (one per bus)"
        )));
    }
    let topo = &net.topo;
    let s_base = net.s_base_kva();
    let z_base = net.z_base_ohm();
    let r: Vec<f64> = net.branches().iter().map(|b| b.r_ohm / z_base).collect();
    let x: Vec<f64> = net.branches().iter().map(|b| b.x_ohm / z_base).collect();
    let inj_p: Vec<f64> = injections.p_kw.iter().map(|p| p / s_base).collect();
    let inj_q: Vec<f64> = injections.q_kvar.iter().map(|q| q / s_base).collect();

    let m = net.branches().len();
    let mut v2 = vec![1.0; n];
    let mut send_p = vec![0.0; m];
    let mut send_q = vec![0.0; m];

    let backward = |v2: &[f64], send_p: &mut [f64], send_q: &mut [f64]| {
        for &j in topo.order.iter().rev() {
            let Some(k) = topo.feeder[j] else { continue };
            let mut p = -inj_p[j];
            let mut q = -inj_q[j];
            for &c in &topo.children[j] {
                p += send_p[c];
                q += send_q[c];
            }
            let flow2 = (p * p + q * q) / v2[j];
            send_p[k] = p + r[k] * flow2;
            send_q[k] = q + x[k] * flow2;
        }
    };

    let mut converged = false;
    let mut iterations = 0;
    let mut diverged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        backward(&v2, &mut send_p, &mut send_q);
        let mut max_dv: f64 = 0.0;
        for &j in topo.order.iter().skip(1) {
            let k = topo.feeder[j].expect("non-root bus has a feeder");
            let i = topo.upstream[k];
            let (p, q) = (send_p[k], send_q[k]);
            let next = v2[i] - 2.0 * (r[k] * p + x[k] * q) + (r[k] * r[k] + x[k] * x[k]) * (p * p + q * q) / v2[i];
            // Re(V_j·conj(V_i)) = V_i² − (r·P + x·Q) must stay positive, otherwise
            // the recursion has jumped to the non-physical branch (|δ| > 90°)
            let aligned = v2[i] - (r[k] * p + x[k] * q);
            if !(next > 0.0 && next.is_finite() && aligned > 0.0) {
                diverged = true;
                break;
            }
            max_dv = max_dv.max((next.sqrt() - v2[j].sqrt()).abs());
            v2[j] = next;
        }
        if diverged {
            break;
        }
        if max_dv < opts.tolerance {
            converged = true;
            break;
        }
    }
    if converged {
        backward(&v2, &mut send_p, &mut send_q);
    }

    let losses_pu: f64 = (0..m)
        .map(|k| r[k] * (send_p[k] * send_p[k] + send_q[k] * send_q[k]) / v2[topo.upstream[k]])
        .sum();
    let root = topo.order[0];
    let slack_p: f64 = topo.children[root].iter().map(|&c| send_p[c]).sum::<f64>() - inj_p[root];
    let slack_q: f64 = topo.children[root].iter().map(|&c| send_q[c]).sum::<f64>() - inj_q[root];

    Ok(PowerFlowSolution {
        v: v2.iter().map(|v| v.sqrt()).collect(),
        branch_p_kw: send_p.iter().map(|p| p * s_base).collect(),
        branch_q_kvar: send_q.iter().map(|q| q * s_base).collect(),
        losses_kw: losses_pu * s_base,
        slack_p_kw: slack_p * s_base,
        slack_q_kvar: slack_q * s_base,
        converged: converged && !diverged,
        iterations,
        injection_p_kw: injections.p_kw.clone(),
        injection_q_kvar: injections.q_kvar.clone(),
    })
}

/// Largest violation (p.u.) of the branch real/reactive balance
/// `P_b − r·(P_b² + Q_b²)/V_i² = P_load,j − P_gen,j + Σ P_children`, and
/// likewise for Q, over all branches.
pub fn distflow_residual(net: &NetworkModel, sol: &PowerFlowSolution) -> f64 {
    let topo = &net.topo;
    let s = net.s_base_kva();
    let z = net.z_base_ohm();
    net.branches()
        .iter()
        .enumerate()
        .map(|(k, br)| {
            let (i, j) = (topo.upstream[k], topo.downstream[k]);
            let p = sol.branch_p_kw[k] / s;
            let q = sol.branch_q_kvar[k] / s;
            let flow2 = (p * p + q * q) / (sol.v[i] * sol.v[i]);
            let mut recv_p = -sol.injection_p_kw[j] / s;
            let mut recv_q = -sol.injection_q_kvar[j] / s;
            for &c in &topo.children[j] {
                recv_p += sol.branch_p_kw[c] / s;
                recv_q += sol.branch_q_kvar[c] / s;
            }
            let res_p = p - br.r_ohm / z * flow2 - recv_p;
            let res_q = q - br.x_ohm / z * flow2 - recv_q;
            res_p.abs().max(res_q.abs())
        })
        .fold(0.0, f64::max)
}

/// Cost of series losses over `dt` hours at `price` per kWh, evaluating
/// `Σ_b (P_b² + Q_b²)·R_b / V_b²` from the sending-end flows.
pub fn losses_cost(net: &NetworkModel, sol: &PowerFlowSolution, price: f64, dt: f64) -> Result<f64> {
    if !sol.converged {
        return Err(Error::InvalidState("losses requested from a non-converged power flow".into()));
    }
    let s = net.s_base_kva();
    let z = net.z_base_ohm();
    let loss_pu: f64 = net
        .branches()
        .iter()
        .enumerate()
        .map(|(k, br)| {
            let v = sol.v[net.topo.upstream[k]];
            let p = sol.branch_p_kw[k] / s;
            let q = sol.branch_q_kvar[k] / s;
            (p * p + q * q) * (br.r_ohm / z) / (v * v)
        })
        .sum();
    Ok(loss_pu * s * dt * price)
}

/// Bus voltages (p.u.) in bus-id order, paired with the bus id.
pub fn voltage_profile(net: &NetworkModel, sol: &PowerFlowSolution) -> Vec<(u32, f64)> {
    net.buses().iter().zip(&sol.v).map(|(b, &v)| (b.id, v)).collect()
}
