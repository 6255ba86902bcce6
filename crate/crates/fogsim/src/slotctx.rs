//! Per-slot evaluation context shared by the mode-selection policies.
//!
//! Bundles the slot's channels, queues and parameters, precomputes the
//! interference-free per-watt SNRs used by the orthogonal solver, and maps a
//! candidate assignment to powers, rates and the power-minus-rate objective
//! through the strategy-appropriate solver. Infeasible selections are
//! resolved by dropping UEs (zero power, zero service) so a slot always
//! emits a physically consistent outcome; drops are reported so learners can
//! hand out zero rewards.

use crate::error::Result;
use crate::netmodel::{
    self, ComputeBudget, ModeAssignment, PowerAllocation, PowerParams, RateParams, Strategy,
};
use crate::powerorth::{self, NodeCosts, OrthPowerProblem, OrthUe};
use crate::queueing::QueueState;
use crate::topology::{ChannelRealization, NetworkTopology};
use crate::wmmse::{self, BcdError, WmmseProblem};

/// Everything the policies need to evaluate one slot.
pub struct SlotContext<'a> {
    pub topology: &'a NetworkTopology,
    pub channels: &'a ChannelRealization,
    pub queues: &'a QueueState,
    pub power: &'a PowerParams,
    pub rate: &'a RateParams,
    pub budget: &'a ComputeBudget,
    /// Per-UE transmit power caps.
    pub caps: Vec<f64>,
    /// WMMSE convergence precision and iteration cap.
    pub kappa: f64,
    pub max_bcd_iterations: usize,
    node_costs: NodeCosts,
    /// `||h||^2 / noise` per `(k, m, n)`, flattened.
    gains: Vec<f64>,
}

/// Outcome of evaluating one assignment: final powers, realized rates, which
/// UEs were actually served, and the full-objective power-minus-rate.
#[derive(Debug, Clone)]
pub struct SlotEval {
    /// The assignment after any feasibility drops.
    pub assignment: ModeAssignment,
    pub powers: PowerAllocation,
    pub rates: Vec<f64>,
    /// Served flag per UE; false means dropped (zero power and service) or
    /// never assigned.
    pub served: Vec<bool>,
    /// `V * P(t) - sum Q_i R_i` including fronthaul power.
    pub pmr: f64,
    pub system_power_w: f64,
    /// UEs removed by feasibility restoration this slot.
    pub dropped: Vec<usize>,
}

impl<'a> SlotContext<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        topology: &'a NetworkTopology,
        channels: &'a ChannelRealization,
        queues: &'a QueueState,
        power: &'a PowerParams,
        rate: &'a RateParams,
        budget: &'a ComputeBudget,
        caps: Vec<f64>,
        kappa: f64,
        max_bcd_iterations: usize,
    ) -> Self {
        let nodes = topology.node_count();
        let subs = topology.subchannels;
        let mut gains = vec![0.0; topology.ue_count() * nodes * subs];
        for k in 0..topology.ue_count() {
            for m in 0..nodes {
                for n in 0..subs {
                    gains[(k * nodes + m) * subs + n] =
                        channels.gain(k, m, n) / channels.noise_power;
                }
            }
        }
        Self {
            topology,
            channels,
            queues,
            power,
            rate,
            budget,
            caps,
            kappa,
            max_bcd_iterations,
            node_costs: NodeCosts::new(budget, topology.rrh_positions.len(), topology.fap_antennas),
            gains,
        }
    }

    /// Interference-free per-watt SNR of `(k, m, n)`.
    pub fn gain(&self, k: usize, m: usize, n: usize) -> f64 {
        self.gains[(k * self.topology.node_count() + m) * self.topology.subchannels + n]
    }

    pub fn tue_count(&self) -> usize {
        self.topology.tue_count()
    }

    pub fn ue_count(&self) -> usize {
        self.topology.ue_count()
    }

    /// Build the separable orthogonal power problem for the assigned UEs in
    /// `members` (callers guarantee the members do not share subchannels).
    pub fn orth_problem(&self, assignment: &ModeAssignment, members: &[usize]) -> OrthPowerProblem<'_> {
        let tue_count = self.tue_count();
        let ues = members
            .iter()
            .map(|&k| {
                let (m, n) = assignment.choice(k).expect("member must be assigned");
                OrthUe {
                    ue: k,
                    node: m,
                    gain: self.gain(k, m, n),
                    queue_weight: if k < tue_count { self.queues.backlog[k] } else { 0.0 },
                    required_rate: netmodel::required_rate(
                        assignment,
                        &self.queues.prev_rates,
                        k,
                        tue_count,
                        self.rate,
                    ),
                    p_max: self.caps[k],
                    is_tue: k < tue_count,
                }
            })
            .collect();
        let step = self.caps.iter().fold(0.0f64, |a, &b| a.max(b)) / 1000.0;
        OrthPowerProblem {
            ues,
            power: self.power,
            rate: self.rate,
            budget: self.budget,
            node_costs: self.node_costs.clone(),
            step,
        }
    }

    /// Max-power surrogate allocation on the assigned pairs (used to form
    /// MMSE detectors before powers are decided).
    pub fn surrogate_powers(&self, assignment: &ModeAssignment) -> PowerAllocation {
        let mut powers = PowerAllocation::zero(&self.caps, self.topology.subchannels);
        for k in 0..assignment.ue_count() {
            if let Some((_, n)) = assignment.choice(k) {
                powers.set(k, n, self.caps[k]);
            }
        }
        powers
    }

    fn assemble(
        &self,
        assignment: ModeAssignment,
        powers: PowerAllocation,
        dropped: Vec<usize>,
    ) -> Result<SlotEval> {
        let rates = netmodel::rates_all(self.channels, &assignment, &powers, self.rate)?;
        let served: Vec<bool> = (0..assignment.ue_count())
            .map(|k| assignment.choice(k).is_some() && powers.ue_power(k) > 0.0)
            .collect();
        let pmr = netmodel::power_minus_rate(
            &assignment,
            &powers,
            &rates,
            self.queues,
            self.power,
            self.tue_count(),
        );
        let system_power_w =
            netmodel::system_power(&assignment, &powers, self.power, self.tue_count());
        Ok(SlotEval {
            assignment,
            powers,
            rates,
            served,
            pmr,
            system_power_w,
            dropped,
        })
    }

    /// Solve powers for an orthogonal assignment; UEs whose own requirement
    /// is unreachable, or that must leave to restore the compute budget, are
    /// dropped deterministically (largest compute charge first).
    pub fn evaluate_orthogonal(&self, assignment: &ModeAssignment) -> Result<SlotEval> {
        debug_assert!(assignment.is_orthogonal(), "caller must resolve subchannel collisions");
        let mut asn = assignment.clone();
        let mut dropped = Vec::new();
        loop {
            let members: Vec<usize> = (0..asn.ue_count()).filter(|&k| asn.choice(k).is_some()).collect();
            let problem = self.orth_problem(&asn, &members);
            let start = powerorth::extreme_point(&problem)?;
            // Per-UE infeasible modes leave the assignment now.
            let mut changed = false;
            for (i, &k) in members.iter().enumerate() {
                if !start.served[i] {
                    asn.clear(k);
                    dropped.push(k);
                    changed = true;
                }
            }
            if changed {
                continue;
            }
            match powerorth::restore_feasibility(&start, &problem)? {
                Some(sol) => {
                    let mut powers = PowerAllocation::zero(&self.caps, self.topology.subchannels);
                    for (i, &k) in members.iter().enumerate() {
                        let (_, n) = asn.choice(k).unwrap();
                        powers.set(k, n, sol.powers[i]);
                    }
                    return self.assemble(asn, powers, dropped);
                }
                None => {
                    // Compute budget unrestorable: shed the heaviest charge.
                    let k = self
                        .heaviest_charge(&problem, &members)
                        .expect("restoration failed with no members");
                    asn.clear(k);
                    dropped.push(k);
                }
            }
        }
    }

    fn heaviest_charge(&self, problem: &OrthPowerProblem, members: &[usize]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, u) in problem.ues.iter().enumerate() {
            if u.node >= self.budget.d_cpu.len() {
                continue; // D2D consumes nothing
            }
            let floor = problem.rate_floor_power(i);
            let charge = self.node_costs.detector[u.node]
                + self.budget.mu1 * problem.rate_at(i, floor)
                + self.budget.c_cons;
            if best.map_or(true, |(_, c)| charge > c) {
                best = Some((members[i], charge));
            }
        }
        best.map(|(k, _)| k).or_else(|| members.first().copied())
    }

    /// Solve powers for a multiplexed assignment through WMMSE BCD; QoS- or
    /// compute-infeasible selections shed UEs (hardest-to-serve first) until
    /// the remainder solves.
    pub fn evaluate_multiplexed(&self, assignment: &ModeAssignment) -> Result<SlotEval> {
        let mut asn = assignment.clone();
        let mut dropped = Vec::new();
        loop {
            if (0..asn.ue_count()).all(|k| asn.choice(k).is_none()) {
                let powers = PowerAllocation::zero(&self.caps, self.topology.subchannels);
                return self.assemble(asn, powers, dropped);
            }
            let surrogate = self.surrogate_powers(&asn);
            let problem = WmmseProblem::build(
                self.channels,
                &asn,
                &surrogate,
                self.queues,
                self.power,
                self.rate,
                self.budget,
                self.topology,
                self.kappa,
                self.max_bcd_iterations,
            )?;
            match wmmse::bcd_solve(&problem, problem.initial_state()) {
                Ok(res) => {
                    let mut powers = PowerAllocation::zero(&self.caps, self.topology.subchannels);
                    for (i, ue) in problem.ues.iter().enumerate() {
                        powers.set(ue.ue, ue.subchannel, res.state.q[i] * res.state.q[i]);
                    }
                    return self.assemble(asn, powers, dropped);
                }
                Err(BcdError::QosInfeasible { ues }) => {
                    // Shed the UE with the smallest full-power SINR margin
                    // over its own threshold.
                    let k = ues
                        .iter()
                        .map(|&i| {
                            let ue = &problem.ues[i];
                            let own = ue.peer_gain[ue.self_pos].norm_sqr() * ue.p_max;
                            let margin = if ue.gamma_qos > 0.0 {
                                own / (self.channels.noise_power * ue.v_norm_sq * ue.gamma_qos)
                            } else {
                                f64::INFINITY
                            };
                            (margin, ue.ue)
                        })
                        .min_by(|a, b| a.partial_cmp(b).unwrap())
                        .map(|(_, k)| k)
                        .expect("infeasible group cannot be empty");
                    asn.clear(k);
                    dropped.push(k);
                }
                Err(BcdError::ComputeInfeasible { nodes }) => {
                    let k = problem
                        .ues
                        .iter()
                        .filter(|u| nodes.contains(&u.node))
                        .map(|u| {
                            let charge = self.node_costs.detector[u.node] + self.budget.c_cons;
                            (charge, u.ue)
                        })
                        .max_by(|a, b| a.partial_cmp(b).unwrap())
                        .map(|(_, k)| k)
                        .expect("overloaded node without members");
                    asn.clear(k);
                    dropped.push(k);
                }
                Err(BcdError::Numeric(msg)) => {
                    return Err(crate::SimError::numeric(msg));
                }
            }
        }
    }

    /// Dispatch on the strategy.
    pub fn evaluate(&self, assignment: &ModeAssignment, strategy: Strategy) -> Result<SlotEval> {
        match strategy {
            Strategy::Orthogonal => self.evaluate_orthogonal(assignment),
            Strategy::Multiplexed => self.evaluate_multiplexed(assignment),
        }
    }

    /// Constraint verdicts for an evaluated slot.
    pub fn constraint_report(&self, eval: &SlotEval) -> netmodel::ConstraintReport {
        netmodel::check_constraints(
            &eval.assignment,
            &eval.powers,
            &eval.rates,
            self.queues,
            self.budget,
            self.topology,
            self.rate,
        )
    }
}
