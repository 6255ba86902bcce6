//! WMMSE power allocation for the multiplexed subchannel strategy.
//!
//! For a fixed mode selection every UE `k` has one `(m(k), n(k))` pair and a
//! fixed MMSE detection vector `v_k`; the per-slot objective restricted to
//! powers is equivalent to a weighted-MSE problem over the scalar receiver
//! `u_k`, the MSE weight `w_k` and the amplitude `q_k = P_k^{1/2}`. Block
//! coordinate descent alternates closed-form `u` and `w` updates with a
//! convex QP-with-cones power step; the power-minus-rate value is
//! non-increasing along the iterates and a fixed point satisfies the
//! first-order conditions of the original problem.
//!
//! The rate weights inside the MSE surrogate are `Q_i * W0 * slot / ln 2`,
//! which makes the `w e - ln w` envelope reproduce the bits/slot rate term
//! of the power-minus-rate objective exactly.

pub mod subproblem;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::netmodel::{
    self, ComputeBudget, ModeAssignment, PowerParams, RateParams,
};
use crate::queueing::QueueState;
use crate::topology::NetworkTopology;
use subproblem::{Cone, QpSocProblem, SolveError};

/// One UE's fixed data inside the WMMSE problem.
#[derive(Debug, Clone)]
pub struct WmmseUe {
    /// Global UE index.
    pub ue: usize,
    pub node: usize,
    pub subchannel: usize,
    /// Indices (into the problem's UE list) sharing this UE's subchannel,
    /// self included.
    pub peers: Vec<usize>,
    /// `v_k^H h_{k'}` for each peer, aligned with `peers`.
    pub peer_gain: Vec<Complex64>,
    /// Position of self inside `peers`.
    pub self_pos: usize,
    /// `||v_k||^2`.
    pub v_norm_sq: f64,
    /// Raw queue backlog Q_i (zero for F-UEs).
    pub queue_weight: f64,
    /// Q_i * W0 * slot / ln2; the MSE-surrogate weight.
    pub rate_weight: f64,
    /// V0 for traditional UEs, V1 for F-UEs.
    pub power_cost: f64,
    /// QoS SINR threshold; zero disarms the cone.
    pub gamma_qos: f64,
    pub p_max: f64,
    pub is_tue: bool,
}

/// The solver's view of one slot's multiplexed assignment.
#[derive(Debug, Clone)]
pub struct WmmseProblem {
    pub ues: Vec<WmmseUe>,
    pub noise_power: f64,
    /// Convergence precision kappa on the relative PMR change.
    pub kappa: f64,
    pub max_iterations: usize,
    /// Rate scale W0 * slot (bits per unit spectral efficiency).
    pub bits_per_unit: f64,
    /// Compute-budget data for D3: per-node budgets and detector costs for
    /// `m in 0..=M0`, plus the consumption slopes.
    pub node_budget: Vec<f64>,
    pub node_detector_cost: Vec<f64>,
    pub mu1: f64,
    pub c_cons: f64,
}

/// Iterate state of the BCD loop.
#[derive(Debug, Clone)]
pub struct WmmseState {
    pub u: Vec<Complex64>,
    pub w: Vec<f64>,
    pub q: Vec<f64>,
}

/// Why the BCD loop stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum BcdOutcome {
    /// Relative PMR change fell below kappa.
    Converged,
    /// The compute constraint broke; the last compute-feasible iterate was
    /// returned.
    ComputeStopped,
    /// Iteration cap reached; best iterate returned.
    IterationCap,
}

/// BCD failure modes (the slot's assignment cannot be served as selected).
#[derive(Debug, Clone, PartialEq)]
pub enum BcdError {
    /// The QoS cones admit no feasible power profile; the listed problem
    /// UEs (indices into the problem) share the offending subchannels.
    QosInfeasible { ues: Vec<usize> },
    /// No iterate ever satisfied the compute budget.
    ComputeInfeasible { nodes: Vec<usize> },
    Numeric(String),
}

#[derive(Debug, Clone)]
pub struct BcdResult {
    pub state: WmmseState,
    /// Power-minus-rate of the returned iterate (wireless terms only, as in
    /// the per-subchannel problem; fronthaul constants are assignment-fixed).
    pub pmr: f64,
    pub iterations: usize,
    pub outcome: BcdOutcome,
    /// PMR trace, one entry per completed iteration.
    pub pmr_trace: Vec<f64>,
}

impl WmmseProblem {
    /// Assemble the problem from a slot's channels and a C5-C7-valid
    /// assignment. Detection vectors are the MMSE receivers under the
    /// supplied power surrogate (callers pass the maximum powers during
    /// mode selection).
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        channels: &crate::topology::ChannelRealization,
        assignment: &ModeAssignment,
        surrogate: &netmodel::PowerAllocation,
        queues: &QueueState,
        power: &PowerParams,
        rate: &RateParams,
        budget: &ComputeBudget,
        topology: &NetworkTopology,
        kappa: f64,
        max_iterations: usize,
    ) -> Result<Self> {
        let tue_count = topology.tue_count();
        let members: Vec<usize> = (0..assignment.ue_count())
            .filter(|&k| assignment.choice(k).is_some())
            .collect();
        let index_of = |k: usize| members.iter().position(|&x| x == k).unwrap();

        let mut ues = Vec::with_capacity(members.len());
        for &k in &members {
            let (m, n) = assignment.choice(k).unwrap();
            let group: Vec<usize> = assignment.ues_on_subchannel(n);
            let v = netmodel::mmse_receiver(channels, assignment, surrogate, k, m, n)?;
            let peer_gain: Vec<Complex64> = group
                .iter()
                .map(|&kp| {
                    v.iter()
                        .zip(channels.h(kp, m, n))
                        .map(|(vi, hi)| vi.conj() * hi)
                        .sum()
                })
                .collect();
            let self_pos = group.iter().position(|&kp| kp == k).unwrap();
            let required = netmodel::required_rate(assignment, &queues.prev_rates, k, tue_count, rate);
            let is_tue = k < tue_count;
            let queue_weight = if is_tue { queues.backlog[k] } else { 0.0 };
            ues.push(WmmseUe {
                ue: k,
                node: m,
                subchannel: n,
                peers: group.iter().map(|&kp| index_of(kp)).collect(),
                peer_gain,
                self_pos,
                v_norm_sq: v.iter().map(|c| c.norm_sqr()).sum(),
                queue_weight,
                rate_weight: queue_weight * rate.bits_per_unit() / std::f64::consts::LN_2,
                power_cost: if is_tue { power.v0() } else { power.v1() },
                gamma_qos: netmodel::qos_sinr_threshold(required, rate),
                p_max: surrogate.cap(k, n),
                is_tue,
            });
        }
        let node_costs =
            crate::powerorth::NodeCosts::new(budget, topology.rrh_positions.len(), topology.fap_antennas);
        Ok(Self {
            ues,
            noise_power: channels.noise_power,
            kappa,
            max_iterations,
            bits_per_unit: rate.bits_per_unit(),
            node_budget: budget.d_cpu.clone(),
            node_detector_cost: node_costs.detector,
            mu1: budget.mu1,
            c_cons: budget.c_cons,
        })
    }

    /// Warm-start initialization: each UE at the stationary point of its
    /// interference-free problem, clamped between its QoS floor and cap.
    ///
    /// The BCD map contracts like `1 - 1/SINR` per iteration, so a
    /// mid-range start needs thousands of iterations at cellular SNRs; the
    /// interference-free optimum starts at the fixed point whenever the
    /// subchannel is not reused and close to it otherwise, and it can only
    /// be zero when zero is actually optimal (no reward and no QoS floor).
    pub fn initial_state(&self) -> WmmseState {
        let q: Vec<f64> = self
            .ues
            .iter()
            .map(|ue| {
                let own = ue.peer_gain[ue.self_pos].norm_sqr();
                let a = own / (self.noise_power * ue.v_norm_sq);
                if !a.is_finite() || a <= 0.0 {
                    return ue.p_max.sqrt() / 2.0;
                }
                let floor = ue.gamma_qos / a;
                let stationary = if ue.rate_weight > 0.0 && ue.power_cost > 0.0 {
                    (ue.rate_weight / ue.power_cost - 1.0 / a).max(0.0)
                } else {
                    0.0
                };
                stationary.max(floor).min(ue.p_max).sqrt()
            })
            .collect();
        WmmseState {
            u: vec![Complex64::new(0.0, 0.0); self.ues.len()],
            w: vec![1.0; self.ues.len()],
            q,
        }
    }

    /// Received-signal denominator at UE `i`'s detector:
    /// `sum_peers |g|^2 q^2 + noise ||v||^2`.
    fn denom(&self, state: &WmmseState, i: usize) -> f64 {
        let ue = &self.ues[i];
        let mut acc = self.noise_power * ue.v_norm_sq;
        for (pos, &p) in ue.peers.iter().enumerate() {
            acc += ue.peer_gain[pos].norm_sqr() * state.q[p] * state.q[p];
        }
        acc
    }

    /// SINR of UE `i` under the state's amplitudes.
    pub fn sinr(&self, state: &WmmseState, i: usize) -> f64 {
        let ue = &self.ues[i];
        let own = ue.peer_gain[ue.self_pos].norm_sqr() * state.q[i] * state.q[i];
        let rest = self.denom(state, i) - own - self.noise_power * ue.v_norm_sq;
        own / (rest + self.noise_power * ue.v_norm_sq)
    }

    /// Rate of UE `i` in bits/slot.
    pub fn rate(&self, state: &WmmseState, i: usize) -> f64 {
        self.bits_per_unit * (1.0 + self.sinr(state, i)).log2()
    }

    /// Power-minus-rate of the iterate (wireless power terms only).
    pub fn pmr(&self, state: &WmmseState) -> f64 {
        let mut acc = 0.0;
        for (i, ue) in self.ues.iter().enumerate() {
            acc += ue.power_cost * state.q[i] * state.q[i];
            if ue.queue_weight > 0.0 {
                acc -= ue.queue_weight * self.rate(state, i);
            }
        }
        acc
    }

    /// Compute consumption of UE `i` at the iterate's rates (zero in D2D).
    pub fn compute_charge(&self, state: &WmmseState, i: usize) -> f64 {
        let m = self.ues[i].node;
        if m >= self.node_budget.len() {
            return 0.0;
        }
        self.node_detector_cost[m] + self.mu1 * self.rate(state, i) + self.c_cons
    }

    /// Nodes whose budget the iterate's charges exceed (constraint D3 with
    /// charges from this iterate).
    pub fn overloaded_nodes(&self, state: &WmmseState) -> Vec<usize> {
        let mut load = vec![0.0; self.node_budget.len()];
        for i in 0..self.ues.len() {
            let m = self.ues[i].node;
            if m < load.len() {
                load[m] += self.compute_charge(state, i);
            }
        }
        (0..load.len())
            .filter(|&m| load[m] > self.node_budget[m] * (1.0 + 1e-12) + 1e-9)
            .collect()
    }
}

/// MSE of UE `i` under the state (completed square plus one).
pub fn mse(problem: &WmmseProblem, state: &WmmseState, i: usize) -> f64 {
    let ue = &problem.ues[i];
    let u = state.u[i];
    let mut sq = 0.0;
    for (pos, &p) in ue.peers.iter().enumerate() {
        sq += ue.peer_gain[pos].norm_sqr() * state.q[p] * state.q[p];
    }
    u.norm_sqr() * sq - 2.0 * (u * ue.peer_gain[ue.self_pos]).re * state.q[i]
        + problem.noise_power * u.norm_sqr() * ue.v_norm_sq
        + 1.0
}

/// Receiver minimizing the MSE for fixed amplitudes:
/// `u = conj(g_kk) q_k / (sum |g|^2 q^2 + noise ||v||^2)`.
pub fn optimal_receiver(problem: &WmmseProblem, state: &WmmseState, i: usize) -> Complex64 {
    let ue = &problem.ues[i];
    ue.peer_gain[ue.self_pos].conj() * state.q[i] / problem.denom(state, i)
}

/// MSE weight `w = 1/e`.
pub fn optimal_weight(e: f64) -> Result<f64> {
    if e <= 0.0 || !e.is_finite() {
        return Err(SimError::numeric(format!("non-positive MSE {e}")));
    }
    Ok(1.0 / e)
}

/// Solve the power block for fixed `u`, `w`: a diagonal convex quadratic in
/// the amplitudes under the box C4 and the QoS cones D2, decomposed per
/// subchannel. Returns the new amplitudes.
pub fn power_step(problem: &WmmseProblem, state: &WmmseState) -> std::result::Result<Vec<f64>, BcdError> {
    let n_ues = problem.ues.len();
    let mut q_new = state.q.clone();
    // Group problem indices by subchannel.
    let mut subchannels: Vec<usize> = problem.ues.iter().map(|u| u.subchannel).collect();
    subchannels.sort_unstable();
    subchannels.dedup();

    for &n in &subchannels {
        let group: Vec<usize> = (0..n_ues).filter(|&i| problem.ues[i].subchannel == n).collect();
        let g = group.len();
        let pos_of = |i: usize| group.iter().position(|&x| x == i).unwrap();

        let mut quad = vec![0.0; g];
        let mut lin = vec![0.0; g];
        let mut upper = vec![0.0; g];
        let mut cones = Vec::new();
        for (gi, &i) in group.iter().enumerate() {
            let ue = &problem.ues[i];
            upper[gi] = ue.p_max.sqrt();
            quad[gi] += ue.power_cost;
            if ue.rate_weight > 0.0 {
                let scale = ue.rate_weight * state.w[i] * state.u[i].norm_sqr();
                for (pos, &p) in ue.peers.iter().enumerate() {
                    quad[pos_of(p)] += scale * ue.peer_gain[pos].norm_sqr();
                }
                // Noise term of the MSE is constant in q; the cross term is
                // linear in own amplituide.
                lin[gi] += 2.0
                    * ue.rate_weight
                    * state.w[i]
                    * (state.u[i] * ue.peer_gain[ue.self_pos]).re;
            }
            if ue.gamma_qos > 0.0 {
                let own_gain = ue.peer_gain[ue.self_pos];
                let c = (1.0 + 1.0 / ue.gamma_qos) * own_gain.re * own_gain.re - own_gain.norm_sqr();
                if c <= 0.0 || own_gain.re <= 0.0 {
                    return Err(BcdError::QosInfeasible { ues: vec![i] });
                }
                let mut coeffs = vec![0.0; g];
                for (pos, &p) in ue.peers.iter().enumerate() {
                    if p != i {
                        coeffs[pos_of(p)] = ue.peer_gain[pos].norm_sqr();
                    }
                }
                cones.push(Cone {
                    own: gi,
                    coeffs,
                    noise: problem.noise_power * ue.v_norm_sq,
                    own_coeff: c,
                });
            }
        }
        let qp = QpSocProblem {
            quad,
            lin,
            upper,
            cones,
        };
        match subproblem::solve(&qp) {
            Ok(sol) => {
                for (gi, &i) in group.iter().enumerate() {
                    q_new[i] = sol.q[gi];
                }
            }
            Err(SolveError::Infeasible) => {
                return Err(BcdError::QosInfeasible { ues: group });
            }
            Err(SolveError::Numeric(msg)) => return Err(BcdError::Numeric(msg)),
        }
    }
    Ok(q_new)
}

/// Refresh the scalar receivers and MSE weights from the state's
/// amplitudes, making (u, w) the exact image of q under the closed-form
/// updates. Returned fixed
/// points are always refreshed, so re-applying those maps is idempotent.
fn refresh_receivers(problem: &WmmseProblem, state: &mut WmmseState) -> std::result::Result<(), BcdError> {
    for i in 0..problem.ues.len() {
        state.u[i] = optimal_receiver(problem, state, i);
        let e = mse(problem, state, i);
        state.w[i] = optimal_weight(e).map_err(|e| BcdError::Numeric(e.to_string()))?;
    }
    Ok(())
}

/// Run the BCD loop from the given state (use
/// [`WmmseProblem::initial_state`] for the standard mid-range start).
pub fn bcd_solve(problem: &WmmseProblem, initial: WmmseState) -> std::result::Result<BcdResult, BcdError> {
    let mut state = initial;
    let mut pmr = problem.pmr(&state);
    let mut last_feasible: Option<(WmmseState, f64)> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        // Constraint D3 check with charges from the current iterate; stop on
        // violation and fall back to the last compliant iterate.
        if problem.overloaded_nodes(&state).is_empty() {
            last_feasible = Some((state.clone(), pmr));
        } else if let Some((mut s, p)) = last_feasible {
            refresh_receivers(problem, &mut s)?;
            return Ok(BcdResult {
                state: s,
                pmr: p,
                iterations,
                outcome: BcdOutcome::ComputeStopped,
                pmr_trace: trace,
            });
        } else {
            return Err(BcdError::ComputeInfeasible {
                nodes: problem.overloaded_nodes(&state),
            });
        }

        if iterations >= problem.max_iterations {
            refresh_receivers(problem, &mut state)?;
            return Ok(BcdResult {
                state,
                pmr,
                iterations,
                outcome: BcdOutcome::IterationCap,
                pmr_trace: trace,
            });
        }
        iterations += 1;

        refresh_receivers(problem, &mut state)?;
        state.q = power_step(problem, &state)?;
        let new_pmr = problem.pmr(&state);
        trace.push(new_pmr);
        let converged = (new_pmr - pmr).abs() <= problem.kappa * pmr.abs().max(1e-12);
        pmr = new_pmr;
        if converged {
            if problem.overloaded_nodes(&state).is_empty() {
                refresh_receivers(problem, &mut state)?;
                return Ok(BcdResult {
                    state,
                    pmr,
                    iterations,
                    outcome: BcdOutcome::Converged,
                    pmr_trace: trace,
                });
            }
            // Final iterate broke D3; next loop head falls back.
            continue;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    /// Synthetic scalar problem: each UE on one shared subchannel with
    /// scalar detector v = 1 and given complex gains.
    fn scalar_problem(
        gains: Vec<Vec<Complex64>>,
        queue: Vec<f64>,
        power_cost: Vec<f64>,
        gamma: Vec<f64>,
        p_max: f64,
        noise: f64,
    ) -> WmmseProblem {
        let n = gains.len();
        let bits = 180e3;
        let ues = (0..n)
            .map(|i| WmmseUe {
                ue: i,
                node: usize::MAX, // no compute charge
                subchannel: 0,
                peers: (0..n).collect(),
                peer_gain: gains[i].clone(),
                self_pos: i,
                v_norm_sq: 1.0,
                queue_weight: queue[i],
                rate_weight: queue[i] * bits / std::f64::consts::LN_2,
                power_cost: power_cost[i],
                gamma_qos: gamma[i],
                p_max,
                is_tue: queue[i] > 0.0 || gamma[i] == 0.0,
            })
            .collect();
        WmmseProblem {
            ues,
            noise_power: noise,
            kappa: 1e-8,
            max_iterations: 400,
            bits_per_unit: bits,
            node_budget: vec![],
            node_detector_cost: vec![],
            mu1: 0.0,
            c_cons: 0.0,
        }
    }

    fn one(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn mse_constant_when_receiver_zero() {
        let p = scalar_problem(vec![vec![one(1.0)]], vec![0.0], vec![1.0], vec![0.0], 4.0, 1.0);
        let mut s = p.initial_state();
        s.u[0] = one(0.0);
        assert_relative_eq!(mse(&p, &s, 0), 1.0);
    }

    #[test]
    fn mse_scalar_substitution() {
        // h = 1, v = 1, q = 1, noise 1, u = 0.5 -> e = 0.25 - 1 + 0.25 + 1.
        let p = scalar_problem(vec![vec![one(1.0)]], vec![0.0], vec![1.0], vec![0.0], 4.0, 1.0);
        let s = WmmseState {
            u: vec![one(0.5)],
            w: vec![1.0],
            q: vec![1.0],
        };
        assert_relative_eq!(mse(&p, &s, 0), 0.5);
    }

    #[test]
    fn receiver_scalar_case_and_zero_amplitude() {
        let p = scalar_problem(vec![vec![one(1.0)]], vec![0.0], vec![1.0], vec![0.0], 4.0, 1.0);
        let s = WmmseState {
            u: vec![one(0.0)],
            w: vec![1.0],
            q: vec![1.0],
        };
        assert_relative_eq!(optimal_receiver(&p, &s, 0).re, 0.5);
        let s0 = WmmseState {
            u: vec![one(0.0)],
            w: vec![1.0],
            q: vec![0.0],
        };
        assert_eq!(optimal_receiver(&p, &s0, 0), one(0.0));
    }

    // Local-perturbation oracle plus the classical MMSE identity
    // e(u*) = 1 - SINR/(1+SINR).
    #[test]
    fn optimal_receiver_minimizes_mse() {
        let mut rng = crate::rng::stream_rng(31, crate::rng::Stream::Policy, 0);
        for _ in 0..50 {
            let mut gains = Vec::new();
            for _ in 0..3 {
                gains.push(
                    (0..3)
                        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                        .collect::<Vec<_>>(),
                );
            }
            let p = scalar_problem(
                gains,
                vec![1.0, 1.0, 1.0],
                vec![1.0; 3],
                vec![0.0; 3],
                4.0,
                0.3,
            );
            let mut s = p.initial_state();
            for i in 0..3 {
                s.q[i] = rng.random::<f64>() + 0.2;
            }
            for i in 0..3 {
                s.u[i] = optimal_receiver(&p, &s, i);
                let e = mse(&p, &s, i);
                for (dr, di) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3)] {
                    let mut sp = s.clone();
                    sp.u[i] += Complex64::new(dr, di);
                    assert!(mse(&p, &sp, i) >= e - 1e-12);
                }
                let sinr = p.sinr(&s, i);
                assert!(e >= 1.0 - sinr / (1.0 + sinr) - 1e-9);
                assert_relative_eq!(e, 1.0 / (1.0 + sinr), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn weight_inverts_mse() {
        assert_relative_eq!(optimal_weight(0.5).unwrap(), 2.0);
        assert_relative_eq!(optimal_weight(1.0).unwrap(), 1.0);
        assert!(optimal_weight(0.0).is_err());
        let e = 0.37;
        assert_relative_eq!(optimal_weight(e).unwrap() * e, 1.0);
    }

    #[test]
    fn power_step_idles_unloaded_ue() {
        // Single UE, no QoS, zero queue: objective is increasing in q.
        let p = scalar_problem(vec![vec![one(1.0)]], vec![0.0], vec![2e12], vec![0.0], 4.0, 1.0);
        let mut s = p.initial_state();
        s.u[0] = one(0.1);
        s.w[0] = 1.0;
        let q = power_step(&p, &s).unwrap();
        assert!(q[0] < 1e-3, "q = {}", q[0]);
    }

    #[test]
    fn power_step_hits_qos_threshold_exactly() {
        // Single UE with gamma = 3: q^2 = gamma * noise / |g|^2.
        let g = 2.0;
        let noise = 0.5;
        let gamma = 3.0;
        let p = scalar_problem(
            vec![vec![one(g)]],
            vec![0.0],
            vec![1.0],
            vec![gamma],
            9.0,
            noise,
        );
        let s = WmmseState {
            u: vec![one(0.0)],
            w: vec![1.0],
            q: vec![1.0],
        };
        let q = power_step(&p, &s).unwrap();
        let expect = (gamma * noise / (g * g)).sqrt();
        assert_relative_eq!(q[0], expect, max_relative = 1e-4);
    }

    #[test]
    fn power_step_beats_random_feasible_points() {
        let mut rng = crate::rng::stream_rng(77, crate::rng::Stream::Policy, 1);
        let mut gains = Vec::new();
        for i in 0..3 {
            let row: Vec<Complex64> = (0..3)
                .map(|j| {
                    if i == j {
                        one(1.0 + rng.random::<f64>())
                    } else {
                        Complex64::new(0.3 * (rng.random::<f64>() - 0.5), 0.3 * (rng.random::<f64>() - 0.5))
                    }
                })
                .collect();
            gains.push(row);
        }
        let p = scalar_problem(
            gains,
            vec![2.0, 0.0, 1.0],
            vec![1.5, 1.0, 2.0],
            vec![0.8, 1.2, 0.0],
            4.0,
            0.4,
        );
        let mut s = p.initial_state();
        for i in 0..3 {
            s.u[i] = optimal_receiver(&p, &s, i);
            s.w[i] = optimal_weight(mse(&p, &s, i)).unwrap();
        }
        let q = power_step(&p, &s).unwrap();

        // Objective of the subproblem at fixed (u, w).
        let sub_obj = |qv: &[f64]| -> f64 {
            let st = WmmseState {
                u: s.u.clone(),
                w: s.w.clone(),
                q: qv.to_vec(),
            };
            let mut acc = 0.0;
            for i in 0..3 {
                acc += p.ues[i].power_cost * qv[i] * qv[i];
                if p.ues[i].rate_weight > 0.0 {
                    acc += p.ues[i].rate_weight * s.w[i] * mse(&p, &st, i);
                }
            }
            acc
        };
        let feasible = |qv: &[f64]| -> bool {
            let st = WmmseState {
                u: s.u.clone(),
                w: s.w.clone(),
                q: qv.to_vec(),
            };
            (0..3).all(|i| {
                qv[i] >= 0.0
                    && qv[i] * qv[i] <= p.ues[i].p_max
                    && (p.ues[i].gamma_qos == 0.0 || p.sinr(&st, i) >= p.ues[i].gamma_qos * (1.0 - 1e-9))
            })
        };
        assert!(feasible(&q), "solver output infeasible");
        let best = sub_obj(&q);
        let mut accepted = 0;
        while accepted < 10_000 {
            let cand: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0).collect();
            if feasible(&cand) {
                accepted += 1;
                assert!(sub_obj(&cand) >= best - 1e-6 * best.abs().max(1.0));
            }
        }
    }

    #[test]
    fn bcd_descends_and_reaches_fixed_point() {
        let mut rng = crate::rng::stream_rng(13, crate::rng::Stream::Policy, 2);
        for trial in 0..20 {
            let n = 2 + (trial % 2);
            let mut gains = Vec::new();
            for i in 0..n {
                let row: Vec<Complex64> = (0..n)
                    .map(|j| {
                        if i == j {
                            one(0.8 + rng.random::<f64>())
                        } else {
                            Complex64::new(
                                0.4 * (rng.random::<f64>() - 0.5),
                                0.4 * (rng.random::<f64>() - 0.5),
                            )
                        }
                    })
                    .collect();
                gains.push(row);
            }
            let queue: Vec<f64> = (0..n).map(|i| if i == 0 { 3.0 } else { 0.0 }).collect();
            let gamma: Vec<f64> = (0..n).map(|i| if i == 0 { 0.5 } else { 0.9 }).collect();
            let p = scalar_problem(gains, queue, vec![2e5; 3][..n].to_vec(), gamma, 4.0, 0.2);
            let r = match bcd_solve(&p, p.initial_state()) {
                Ok(r) => r,
                Err(BcdError::QosInfeasible { .. }) => continue,
                Err(e) => panic!("unexpected BCD error {e:?}"),
            };
            // Descent within slack.
            let mut prev = f64::INFINITY;
            for &v in &r.pmr_trace {
                assert!(v <= prev + 1e-9 * prev.abs().max(1.0), "trial {trial}: {v} > {prev}");
                prev = v;
            }
            // Fixed point: u/w reapplication barely moves.
            if r.outcome == BcdOutcome::Converged {
                let mut s = r.state.clone();
                for i in 0..p.ues.len() {
                    let u_new = optimal_receiver(&p, &s, i);
                    let rel = (u_new - s.u[i]).norm() / s.u[i].norm().max(1e-12);
                    assert!(rel < 1e-3, "trial {trial}: receiver moved {rel}");
                    s.u[i] = u_new;
                    let w_new = optimal_weight(mse(&p, &s, i)).unwrap();
                    let relw = (w_new - s.w[i]).abs() / s.w[i].abs().max(1e-12);
                    assert!(relw < 1e-3, "trial {trial}: weight moved {relw}");
                }
                // QoS met at the returned point.
                for i in 0..p.ues.len() {
                    if p.ues[i].gamma_qos > 0.0 {
                        assert!(
                            p.sinr(&r.state, i) >= p.ues[i].gamma_qos * (1.0 - 1e-6),
                            "trial {trial}: SINR below threshold"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn zero_start_with_backlog_descends_strictly() {
        // Queue weight large enough that serving beats idling; start at 0.
        let p = scalar_problem(
            vec![vec![one(2.0)]],
            vec![50.0],
            vec![1e5],
            vec![1.0],
            4.0,
            0.1,
        );
        let zero = WmmseState {
            u: vec![one(0.0)],
            w: vec![1.0],
            q: vec![0.0],
        };
        let pmr0 = p.pmr(&zero);
        let r = bcd_solve(&p, zero).unwrap();
        assert!(!r.pmr_trace.is_empty());
        assert!(
            r.pmr_trace[0] < pmr0 - 1e-6,
            "first iteration did not strictly decrease: {} vs {}",
            r.pmr_trace[0],
            pmr0
        );
    }
}
