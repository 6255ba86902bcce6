//! Power allocation for the orthogonal subchannel strategy.
//!
//! With no subchannel reuse every link is interference-free, so the per-slot
//! objective separates per UE into `V0*P - Q*R(P)` (traditional UEs) or
//! `V1*P` (F-UEs, whose rates are constraints rather than rewards, so they
//! sit at the cheapest power meeting the relay-laden requirement). The
//! closed-form extreme point is clamped into the rate-feasible box; when the
//! computing constraint C1 is violated, powers are walked down a fixed step
//! at a time along the smallest partial derivative until the load fits.

use crate::error::{Result, SimError};
use crate::netmodel::{ComputeBudget, PowerParams, RateParams};

/// One UE's slice of the orthogonal problem: scalar effective gain, queue
/// weight and rate requirement on its assigned `(node, subchannel)`.
#[derive(Debug, Clone)]
pub struct OrthUe {
    /// Global UE index (for reporting only).
    pub ue: usize,
    /// Serving node m.
    pub node: usize,
    /// Effective per-watt SNR `||h||^2 / noise` on the assigned subchannel.
    pub gain: f64,
    /// Q_i for traditional UEs; zero for F-UEs.
    pub queue_weight: f64,
    /// C2 / C3 rate requirement in this mode, bits/slot.
    pub required_rate: f64,
    pub p_max: f64,
    pub is_tue: bool,
}

/// Detector-generation cost of node `m` in MOPTS (zero for D2D relays).
#[derive(Debug, Clone)]
pub struct NodeCosts {
    /// mu0 * dim(m)^3 for m in 0..=M0.
    pub detector: Vec<f64>,
}

impl NodeCosts {
    pub fn new(budget: &ComputeBudget, rrh_count: usize, fap_antennas: usize) -> Self {
        let fap_cost = budget.mu0 * (fap_antennas as f64).powi(3);
        let mut detector = vec![budget.mu0 * (rrh_count as f64).powi(3)];
        detector.extend(std::iter::repeat(fap_cost).take(budget.d_cpu.len().saturating_sub(1)));
        Self { detector }
    }
}

/// The orthogonal power problem over one slot's assignment.
#[derive(Debug, Clone)]
pub struct OrthPowerProblem<'a> {
    pub ues: Vec<OrthUe>,
    pub power: &'a PowerParams,
    pub rate: &'a RateParams,
    pub budget: &'a ComputeBudget,
    pub node_costs: NodeCosts,
    /// Fixed restoration step, watts.
    pub step: f64,
}

impl<'a> OrthPowerProblem<'a> {
    pub fn validate(&self) -> Result<()> {
        if self.step <= 0.0 {
            return Err(SimError::config("restoration step must be positive"));
        }
        if self.ues.iter().any(|u| u.gain <= 0.0 || u.p_max < 0.0) {
            return Err(SimError::config("gains must be positive and caps non-negative"));
        }
        Ok(())
    }

    pub fn rate_at(&self, i: usize, p: f64) -> f64 {
        self.rate.rate_from_sinr(self.ues[i].gain * p)
    }

    /// Minimum power meeting the UE's rate requirement.
    pub fn rate_floor_power(&self, i: usize) -> f64 {
        let u = &self.ues[i];
        if u.required_rate <= 0.0 {
            0.0
        } else {
            (2f64.powf(u.required_rate / self.rate.bits_per_unit()) - 1.0) / u.gain
        }
    }

    /// Partial derivative of the objective at power `p` for UE `i`.
    pub fn derivative(&self, i: usize, p: f64) -> f64 {
        let u = &self.ues[i];
        if u.is_tue {
            self.power.v0()
                - u.queue_weight * self.rate.bits_per_unit() * u.gain
                    / (std::f64::consts::LN_2 * (1.0 + u.gain * p))
        } else {
            self.power.v1()
        }
    }

    /// Objective contribution of UE `i` at power `p`.
    pub fn objective_term(&self, i: usize, p: f64) -> f64 {
        let u = &self.ues[i];
        if u.is_tue {
            self.power.v0() * p - u.queue_weight * self.rate_at(i, p)
        } else {
            self.power.v1() * p
        }
    }

    /// Load of node `m in 0..=M0` under the candidate powers.
    fn node_load(&self, m: usize, solution: &OrthSolution) -> f64 {
        self.ues
            .iter()
            .enumerate()
            .filter(|(i, u)| u.node == m && solution.served[*i])
            .map(|(i, _)| {
                self.node_costs.detector[m] + self.budget.mu1 * self.rate_at(i, solution.powers[i]) + self.budget.c_cons
            })
            .sum()
    }

    /// Nodes in 0..=M0 whose C1 budget is exceeded.
    fn overloaded_nodes(&self, solution: &OrthSolution) -> Vec<usize> {
        (0..self.budget.d_cpu.len())
            .filter(|&m| self.node_load(m, solution) > self.budget.d_cpu[m] * (1.0 + 1e-12) + 1e-9)
            .collect()
    }
}

/// Per-UE powers aligned with the problem's UE list. `served[i] = false`
/// marks a UE whose requirement is unreachable even at `p_max` (the caller
/// treats that mode as reward-0 / zero service).
#[derive(Debug, Clone, PartialEq)]
pub struct OrthSolution {
    pub powers: Vec<f64>,
    pub served: Vec<bool>,
}

impl OrthSolution {
    pub fn all_served(&self) -> bool {
        self.served.iter().all(|&s| s)
    }
}

/// Closed-form extreme point of the separable objective, clamped into each
/// UE's rate-feasible box `[rate floor, p_max]`.
pub fn extreme_point(problem: &OrthPowerProblem) -> Result<OrthSolution> {
    problem.validate()?;
    let mut powers = Vec::with_capacity(problem.ues.len());
    let mut served = Vec::with_capacity(problem.ues.len());
    for (i, u) in problem.ues.iter().enumerate() {
        let floor = problem.rate_floor_power(i);
        if floor > u.p_max * (1.0 + 1e-12) {
            powers.push(0.0);
            served.push(false);
            continue;
        }
        let stationary = if !u.is_tue || u.queue_weight <= 0.0 {
            0.0
        } else if problem.power.v0() <= 0.0 {
            f64::INFINITY
        } else {
            u.queue_weight * problem.rate.bits_per_unit()
                / (problem.power.v0() * std::f64::consts::LN_2)
                - 1.0 / u.gain
        };
        powers.push(stationary.clamp(floor, u.p_max));
        served.push(true);
    }
    Ok(OrthSolution { powers, served })
}

/// Walk the extreme point back into the C1-feasible region by fixed-step
/// descent: while some node is overloaded, decrement the power
/// with the smallest objective derivative among UEs at overloaded nodes,
/// never crossing a UE's rate floor. Returns `None` when every such power is
/// already at its floor and C1 still fails.
pub fn restore_feasibility(
    start: &OrthSolution,
    problem: &OrthPowerProblem,
) -> Result<Option<OrthSolution>> {
    problem.validate()?;
    let mut sol = start.clone();
    let floors: Vec<f64> = (0..problem.ues.len())
        .map(|i| problem.rate_floor_power(i))
        .collect();
    loop {
        let overloaded = problem.overloaded_nodes(&sol);
        if overloaded.is_empty() {
            return Ok(Some(sol));
        }
        // Candidate set: movable powers at overloaded nodes.
        let mut best: Option<(usize, f64)> = None;
        for (i, u) in problem.ues.iter().enumerate() {
            if !sol.served[i] || !overloaded.contains(&u.node) {
                continue;
            }
            if sol.powers[i] <= floors[i] + 1e-15 {
                continue;
            }
            let d = problem.derivative(i, sol.powers[i]);
            // Ties broken by the lowest UE index (strict < keeps the first).
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let Some((i, _)) = best else {
            return Ok(None);
        };
        sol.powers[i] = (sol.powers[i] - problem.step).max(floors[i]);
    }
}

/// Extreme point followed by C1 restoration.
pub fn solve(problem: &OrthPowerProblem) -> Result<Option<OrthSolution>> {
    let start = extreme_point(problem)?;
    restore_feasibility(&start, problem)
}
