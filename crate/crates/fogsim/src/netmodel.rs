//! Per-slot physical model: mode-assignment tensor, link rates, system
//! power, computing consumption and the constraint predicates C1-C7.
//!
//! Index conventions follow [`crate::topology`]: UE `k` (traditional UEs
//! first), serving node `m` (0 C-RAN, then F-APs, then F-UE relays),
//! subchannel `n`.

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::queueing::QueueState;
use crate::topology::{mmse_detector, sinr_at, ChannelRealization, NetworkTopology};

/// Subchannel sharing rule of the active slice-isolation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// A subchannel carries at most one UE (hard isolation).
    Orthogonal,
    /// Subchannels may be reused; isolation comes from QoS constraints.
    Multiplexed,
}

/// The binary mode-selection tensor `s[k][m][n]`, stored as at most one
/// `(m, n)` pair per UE so the structural constraints C5-C7 hold by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeAssignment {
    choice: Vec<Option<(usize, usize)>>,
    tue_count: usize,
    fap_count: usize,
    node_count: usize,
    subchannels: usize,
}

impl ModeAssignment {
    pub fn empty(topology: &NetworkTopology) -> Self {
        Self {
            choice: vec![None; topology.ue_count()],
            tue_count: topology.tue_count(),
            fap_count: topology.fap_count(),
            node_count: topology.node_count(),
            subchannels: topology.subchannels,
        }
    }

    pub fn ue_count(&self) -> usize {
        self.choice.len()
    }

    pub fn subchannels(&self) -> usize {
        self.subchannels
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Assign UE `k` to node `m` on subchannel `n`, replacing any previous
    /// pair (C7). Rejects out-of-range indices and self-relay.
    pub fn set(&mut self, k: usize, m: usize, n: usize) -> Result<()> {
        if k >= self.choice.len() || m >= self.node_count || n >= self.subchannels {
            return Err(SimError::config(format!(
                "assignment index out of range: k={k} m={m} n={n}"
            )));
        }
        if self.is_self_relay(k, m) {
            return Err(SimError::config(format!(
                "F-UE {k} cannot relay through itself (node {m})"
            )));
        }
        self.choice[k] = Some((m, n));
        Ok(())
    }

    pub fn clear(&mut self, k: usize) {
        self.choice[k] = None;
    }

    pub fn choice(&self, k: usize) -> Option<(usize, usize)> {
        self.choice[k]
    }

    /// Tensor view: `s[k][m][n]`.
    pub fn s(&self, k: usize, m: usize, n: usize) -> bool {
        self.choice[k] == Some((m, n))
    }

    pub fn is_self_relay(&self, k: usize, m: usize) -> bool {
        m > self.fap_count && k >= self.tue_count && self.tue_count + (m - self.fap_count - 1) == k
    }

    /// UEs transmitting on subchannel `n`.
    pub fn ues_on_subchannel(&self, n: usize) -> Vec<usize> {
        self.choice
            .iter()
            .enumerate()
            .filter_map(|(k, c)| match c {
                Some((_, cn)) if *cn == n => Some(k),
                _ => None,
            })
            .collect()
    }

    /// UEs connected to serving node `m`.
    pub fn ues_at_node(&self, m: usize) -> Vec<usize> {
        self.choice
            .iter()
            .enumerate()
            .filter_map(|(k, c)| match c {
                Some((cm, _)) if *cm == m => Some(k),
                _ => None,
            })
            .collect()
    }

    /// UEs relayed via F-UE `j` (`j` counted within F-UEs).
    pub fn relayed_via(&self, j: usize) -> Vec<usize> {
        let relay_node = self.fap_count + 1 + j;
        self.ues_at_node(relay_node)
    }

    /// Number of C-RAN connections (each pays the fronthaul power).
    pub fn cran_connections(&self) -> usize {
        self.ues_at_node(0).len()
    }

    /// True when no subchannel is shared by two UEs.
    pub fn is_orthogonal(&self) -> bool {
        let mut used = vec![false; self.subchannels];
        for c in &self.choice {
            if let Some((_, n)) = c {
                if used[*n] {
                    return false;
                }
                used[*n] = true;
            }
        }
        true
    }
}

/// Transmit powers `P[k][n]` with their caps.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    p: Vec<f64>,
    p_max: Vec<f64>,
    subchannels: usize,
}

impl PowerAllocation {
    /// All-zero allocation with a per-UE cap applied to every subchannel.
    pub fn zero(per_ue_cap: &[f64], subchannels: usize) -> Self {
        let mut p_max = Vec::with_capacity(per_ue_cap.len() * subchannels);
        for &cap in per_ue_cap {
            p_max.extend(std::iter::repeat(cap).take(subchannels));
        }
        Self {
            p: vec![0.0; per_ue_cap.len() * subchannels],
            p_max,
            subchannels,
        }
    }

    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.p[k * self.subchannels + n]
    }

    pub fn cap(&self, k: usize, n: usize) -> f64 {
        self.p_max[k * self.subchannels + n]
    }

    pub fn set(&mut self, k: usize, n: usize, power: f64) {
        self.p[k * self.subchannels + n] = power;
    }

    pub fn ue_count(&self) -> usize {
        self.p.len() / self.subchannels
    }

    /// Total transmit power of UE `k` over all subchannels.
    pub fn ue_power(&self, k: usize) -> f64 {
        let base = k * self.subchannels;
        self.p[base..base + self.subchannels].iter().sum()
    }

    /// C4: zero off the assigned pair, within `[0, cap]` on it.
    pub fn satisfies_c4(&self, assignment: &ModeAssignment) -> bool {
        for k in 0..self.ue_count() {
            for n in 0..self.subchannels {
                let p = self.get(k, n);
                let assigned = matches!(assignment.choice(k), Some((_, cn)) if cn == n);
                if assigned {
                    if p < 0.0 || p > self.cap(k, n) + 1e-12 {
                        return false;
                    }
                } else if p != 0.0 {
                    return false;
                }
            }
        }
        true
    }
}

/// Amplifier efficiencies, fronthaul power and the Lyapunov tradeoff weight.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PowerParams {
    pub eta0: f64,
    pub eta1: f64,
    pub p_fronthaul_w: f64,
    /// Drift-plus-penalty tradeoff weight V.
    pub v: f64,
}

impl PowerParams {
    pub fn v0(&self) -> f64 {
        self.v / self.eta0
    }

    pub fn v1(&self) -> f64 {
        self.v / self.eta1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0 && self.eta1 > 0.0 && self.eta1 <= 1.0) {
            return Err(SimError::config("amplifier efficiencies must lie in (0, 1]"));
        }
        if self.p_fronthaul_w < 0.0 || self.v < 0.0 {
            return Err(SimError::config("fronthaul power and V must be non-negative"));
        }
        Ok(())
    }
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            eta0: 0.05,
            eta1: 0.05,
            p_fronthaul_w: 0.35,
            v: 1e11,
        }
    }
}

/// Bandwidth, slot length and the slice rate requirements.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RateParams {
    pub w0_hz: f64,
    pub slot_seconds: f64,
    /// F-UE own-traffic requirement R_th, bits/slot.
    pub r_th_bits: f64,
    /// Traditional-UE minimum rate, bits/slot.
    pub r_min_bits: f64,
}

impl RateParams {
    /// Bits per slot at 1 bit/s/Hz.
    pub fn bits_per_unit(&self) -> f64 {
        self.w0_hz * self.slot_seconds
    }

    pub fn rate_from_sinr(&self, sinr: f64) -> f64 {
        self.bits_per_unit() * (1.0 + sinr).log2()
    }

    pub fn validate(&self) -> Result<()> {
        if self.w0_hz <= 0.0 || self.slot_seconds <= 0.0 {
            return Err(SimError::config("bandwidth and slot duration must be positive"));
        }
        if self.r_th_bits < 0.0 || self.r_min_bits < 0.0 {
            return Err(SimError::config("rate requirements must be non-negative"));
        }
        Ok(())
    }
}

impl Default for RateParams {
    fn default() -> Self {
        Self {
            w0_hz: 180e3,
            slot_seconds: 1.0,
            r_th_bits: 0.6e6,
            r_min_bits: 0.06e6,
        }
    }
}

/// Computing budgets (MOPTS) and the consumption model slopes.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ComputeBudget {
    /// Available MOPTS per node `m in 0..=M0`; index 0 is the BBU pool.
    pub d_cpu: Vec<f64>,
    /// MOPTS per (antenna count)^3 of the MMSE detector.
    pub mu0: f64,
    /// MOPTS per bit/slot of demodulation and decoding.
    pub mu1: f64,
    /// Constant IFFT cost, MOPTS.
    pub c_cons: f64,
}

impl ComputeBudget {
    pub fn validate(&self) -> Result<()> {
        if self.d_cpu.iter().any(|&d| d < 0.0) || self.mu0 < 0.0 || self.mu1 < 0.0 || self.c_cons < 0.0 {
            return Err(SimError::config("compute budget fields must be non-negative"));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.d_cpu.iter().sum()
    }
}

/// MMSE detection vector for UE `k` at `(m, n)` given the assignment and the
/// current power allocation (interference set per the uplink rate model).
pub fn mmse_receiver(
    channels: &ChannelRealization,
    assignment: &ModeAssignment,
    powers: &PowerAllocation,
    k: usize,
    m: usize,
    n: usize,
) -> Result<Vec<Complex64>> {
    let tx: Vec<(usize, f64)> = assignment
        .ues_on_subchannel(n)
        .into_iter()
        .map(|kp| (kp, powers.get(kp, n)))
        .collect();
    mmse_detector(channels, k, m, n, &tx)
}

/// Uplink rate of UE `k` in bits/slot with MMSE detection.
pub fn rate(
    channels: &ChannelRealization,
    assignment: &ModeAssignment,
    powers: &PowerAllocation,
    k: usize,
    params: &RateParams,
) -> Result<f64> {
    let Some((m, n)) = assignment.choice(k) else {
        return Ok(0.0);
    };
    let own = powers.get(k, n);
    if own <= 0.0 {
        return Ok(0.0);
    }
    let tx: Vec<(usize, f64)> = assignment
        .ues_on_subchannel(n)
        .into_iter()
        .map(|kp| (kp, powers.get(kp, n)))
        .collect();
    let v = mmse_detector(channels, k, m, n, &tx)?;
    let sinr = sinr_at(channels, &v, k, m, n, own, &tx);
    Ok(params.rate_from_sinr(sinr))
}

/// Realized rates for every UE.
pub fn rates_all(
    channels: &ChannelRealization,
    assignment: &ModeAssignment,
    powers: &PowerAllocation,
    params: &RateParams,
) -> Result<Vec<f64>> {
    (0..assignment.ue_count())
        .map(|k| rate(channels, assignment, powers, k, params))
        .collect()
}

/// System power: amplifier-side wireless power plus fronthaul power for each
/// C-RAN connection.
pub fn system_power(
    assignment: &ModeAssignment,
    powers: &PowerAllocation,
    params: &PowerParams,
    tue_count: usize,
) -> f64 {
    let mut total = 0.0;
    for k in 0..assignment.ue_count() {
        let eta = if k < tue_count { params.eta0 } else { params.eta1 };
        total += powers.ue_power(k) / eta;
    }
    total + assignment.cran_connections() as f64 * params.p_fronthaul_w
}

/// Computing consumption of UE `k`: detector generation
/// plus rate-proportional baseband work plus the constant term. D2D
/// connections consume nothing.
pub fn compute_load(
    assignment: &ModeAssignment,
    rates: &[f64],
    budget: &ComputeBudget,
    topology: &NetworkTopology,
    k: usize,
) -> f64 {
    match assignment.choice(k) {
        Some((0, _)) => {
            let l1 = topology.rrh_positions.len() as f64;
            budget.mu0 * l1.powi(3) + budget.mu1 * rates[k] + budget.c_cons
        }
        Some((m, _)) if m <= topology.fap_count() => {
            let l0 = topology.fap_antennas as f64;
            budget.mu0 * l0.powi(3) + budget.mu1 * rates[k] + budget.c_cons
        }
        _ => 0.0,
    }
}

/// Invert the rate formula: the SINR needed for `required_rate` bits/slot.
pub fn qos_sinr_threshold(required_rate: f64, params: &RateParams) -> f64 {
    debug_assert!(required_rate >= 0.0);
    2f64.powf(required_rate / params.bits_per_unit()) - 1.0
}

/// Rate an F-UE must reach under C3: its own threshold plus the
/// previous-slot rates of every UE it currently relays.
pub fn relay_required_rate(
    assignment: &ModeAssignment,
    prev_rates: &[f64],
    fue_index: usize,
    params: &RateParams,
) -> f64 {
    let relayed: f64 = assignment
        .relayed_via(fue_index)
        .iter()
        .map(|&k| prev_rates[k])
        .sum();
    params.r_th_bits + relayed
}

/// Required rate of UE `k` in its current mode: C2's threshold for a
/// traditional UE, C3's relay-laden threshold for an F-UE.
pub fn required_rate(
    assignment: &ModeAssignment,
    prev_rates: &[f64],
    k: usize,
    tue_count: usize,
    params: &RateParams,
) -> f64 {
    if k < tue_count {
        params.r_min_bits
    } else {
        relay_required_rate(assignment, prev_rates, k - tue_count, params)
    }
}

/// Full verdict set over C1-C7. Infeasibility is data, not an error.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    /// Per node `m in 0..=M0`: consumed load within budget.
    pub c1: Vec<bool>,
    /// Per traditional UE: rate at least R_min.
    pub c2: Vec<bool>,
    /// Per F-UE: rate covers relayed previous-slot traffic plus R_th.
    pub c3: Vec<bool>,
    pub c4: bool,
    pub c5: bool,
    pub c6: bool,
    pub c7: bool,
}

impl ConstraintReport {
    pub fn all_hold(&self) -> bool {
        self.c1.iter().all(|&b| b)
            && self.c2.iter().all(|&b| b)
            && self.c3.iter().all(|&b| b)
            && self.c4
            && self.c5
            && self.c6
            && self.c7
    }

    pub fn violation_count(&self) -> usize {
        self.c1.iter().filter(|&&b| !b).count()
            + self.c2.iter().filter(|&&b| !b).count()
            + self.c3.iter().filter(|&&b| !b).count()
            + usize::from(!self.c4)
            + usize::from(!self.c5)
            + usize::from(!self.c6)
            + usize::from(!self.c7)
    }
}

/// Evaluate every constraint predicate on realized rates.
///
/// `rates` must be the realized per-UE rates for this allocation (pass the
/// output of [`rates_all`]); the report never short-circuits.
pub fn check_constraints(
    assignment: &ModeAssignment,
    powers: &PowerAllocation,
    rates: &[f64],
    queues: &QueueState,
    budget: &ComputeBudget,
    topology: &NetworkTopology,
    params: &RateParams,
) -> ConstraintReport {
    let tue_count = topology.tue_count();
    let rate_eps = 1e-6 * params.bits_per_unit().max(1.0);

    let c1 = (0..=topology.fap_count())
        .map(|m| {
            let load: f64 = assignment
                .ues_at_node(m)
                .iter()
                .map(|&k| compute_load(assignment, rates, budget, topology, k))
                .sum();
            load <= budget.d_cpu[m] * (1.0 + 1e-12) + 1e-9
        })
        .collect();

    let c2 = (0..tue_count)
        .map(|i| rates[i] + rate_eps >= params.r_min_bits)
        .collect();

    let c3 = (0..topology.fue_count())
        .map(|j| {
            let need = relay_required_rate(assignment, &queues.prev_rates, j, params);
            rates[tue_count + j] + rate_eps >= need
        })
        .collect();

    // C5-C7 hold by construction of ModeAssignment; re-derive C5's
    // no-self-relay clause defensively.
    let c5 = (0..assignment.ue_count())
        .all(|k| !matches!(assignment.choice(k), Some((m, _)) if assignment.is_self_relay(k, m)));

    ConstraintReport {
        c1,
        c2,
        c3,
        c4: powers.satisfies_c4(assignment),
        c5,
        c6: true,
        c7: true,
    }
}

/// The per-slot deterministic objective `V * P(t) - sum_i Q_i R_i`
/// (traditional UEs only in the rate-reward term).
pub fn power_minus_rate(
    assignment: &ModeAssignment,
    powers: &PowerAllocation,
    rates: &[f64],
    queues: &QueueState,
    power_params: &PowerParams,
    tue_count: usize,
) -> f64 {
    let p = system_power(assignment, powers, power_params, tue_count);
    let weighted: f64 = queues
        .backlog
        .iter()
        .zip(rates.iter())
        .map(|(q, r)| q * r)
        .sum();
    power_params.v * p - weighted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{draw_channels, generate_topology, ChannelModel, TopologyConfig};
    use approx::assert_relative_eq;

    fn topo() -> NetworkTopology {
        generate_topology(
            &TopologyConfig {
                rrh_count: 4,
                fap_count: 2,
                fap_antennas: 2,
                tue_count: 2,
                fue_count: 2,
                subchannels: 3,
                area_side_m: 600.0,
                neighbor_radius_m: 300.0,
            },
            21,
        )
        .unwrap()
    }

    fn queues(topology: &NetworkTopology, backlog: &[f64]) -> QueueState {
        let mut q = QueueState::new(vec![0.0; topology.tue_count()], topology.ue_count()).unwrap();
        q.backlog = backlog.to_vec();
        q
    }

    #[test]
    fn assignment_enforces_structure() {
        let t = topo();
        let mut a = ModeAssignment::empty(&t);
        a.set(0, 1, 0).unwrap();
        a.set(0, 2, 1).unwrap(); // C7: replaces the previous pair
        assert!(!a.s(0, 1, 0));
        assert!(a.s(0, 2, 1));
        // F-UE 0 is UE index 2; its relay node is fap_count + 1 = 3.
        assert!(a.set(2, 3, 0).is_err());
        a.set(3, 3, 0).unwrap(); // F-UE 1 relaying through F-UE 0 is fine
        assert_eq!(a.relayed_via(0), vec![3]);
        assert!(a.set(9, 0, 0).is_err());
    }

    #[test]
    fn orthogonality_detection() {
        let t = topo();
        let mut a = ModeAssignment::empty(&t);
        a.set(0, 0, 0).unwrap();
        a.set(1, 1, 1).unwrap();
        assert!(a.is_orthogonal());
        a.set(2, 2, 1).unwrap();
        assert!(!a.is_orthogonal());
    }

    #[test]
    fn zero_power_means_zero_rate() {
        let t = topo();
        let ch = draw_channels(&t, &ChannelModel::default(), 21, 0).unwrap();
        let mut a = ModeAssignment::empty(&t);
        a.set(0, 0, 0).unwrap();
        let powers = PowerAllocation::zero(&[0.2; 4], t.subchannels);
        let r = rate(&ch, &a, &powers, 0, &RateParams::default()).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn unit_sinr_gives_one_bit_per_unit() {
        // Scalar link with P|h|^2 / noise = 1 and W0*slot = 180000.
        let t = topo();
        let model = ChannelModel {
            shadowing_sigma_db: 0.0,
            fast_fading_variance: 0.0,
            noise_power_w: 1.0,
            ..ChannelModel::default()
        };
        let mut ch = draw_channels(&t, &model, 21, 0).unwrap();
        let m = t.relay_node_of_fue(0); // scalar receiver
        ch.set_h(0, m, 0, vec![Complex64::new(1.0, 0.0)]);
        let mut a = ModeAssignment::empty(&t);
        a.set(0, m, 0).unwrap();
        let mut powers = PowerAllocation::zero(&[2.0; 4], t.subchannels);
        powers.set(0, 0, 1.0);
        let r = rate(&ch, &a, &powers, 0, &RateParams::default()).unwrap();
        assert_relative_eq!(r, 180e3, max_relative = 1e-12);
    }

    #[test]
    fn interference_monotonicity() {
        let t = topo();
        let ch = draw_channels(&t, &ChannelModel::default(), 22, 0).unwrap();
        let mut a = ModeAssignment::empty(&t);
        a.set(0, 1, 0).unwrap();
        a.set(1, 2, 0).unwrap(); // shares subchannel 0
        let params = RateParams::default();
        let mut powers = PowerAllocation::zero(&[1.0; 4], t.subchannels);
        powers.set(0, 0, 0.1);
        powers.set(1, 0, 0.01);
        let r_low = rate(&ch, &a, &powers, 0, &params).unwrap();
        powers.set(1, 0, 1.0);
        let r_high = rate(&ch, &a, &powers, 0, &params).unwrap();
        assert!(r_high < r_low, "{r_high} !< {r_low}");
    }

    #[test]
    fn rate_monotone_in_own_power() {
        let t = topo();
        let ch = draw_channels(&t, &ChannelModel::default(), 25, 0).unwrap();
        let mut a = ModeAssignment::empty(&t);
        a.set(0, 1, 0).unwrap();
        a.set(1, 0, 0).unwrap(); // interferer on the same subchannel
        let params = RateParams::default();
        let mut prev = -1.0;
        for i in 1..=10 {
            let mut powers = PowerAllocation::zero(&[1.0; 4], t.subchannels);
            powers.set(0, 0, 0.02 * i as f64);
            powers.set(1, 0, 0.1);
            let r = rate(&ch, &a, &powers, 0, &params).unwrap();
            assert!(r >= prev, "rate fell when own power grew: {r} < {prev}");
            prev = r;
        }
    }

    #[test]
    fn system_power_cases() {
        let t = topo();
        let params = PowerParams::default();
        let a = ModeAssignment::empty(&t);
        let powers = PowerAllocation::zero(&[0.2, 0.2, 1.0, 1.0], t.subchannels);
        assert_eq!(system_power(&a, &powers, &params, 2), 0.0);

        // One traditional UE at 0.05 W through eta0 = 0.05 -> 1 W.
        let mut a = ModeAssignment::empty(&t);
        a.set(0, 1, 0).unwrap();
        let mut powers = PowerAllocation::zero(&[0.2, 0.2, 1.0, 1.0], t.subchannels);
        powers.set(0, 0, 0.05);
        assert_relative_eq!(system_power(&a, &powers, &params, 2), 1.0);

        // An F-UE in C-RAN mode at zero power still pays fronthaul.
        let mut a = ModeAssignment::empty(&t);
        a.set(2, 0, 1).unwrap();
        let powers = PowerAllocation::zero(&[0.2, 0.2, 1.0, 1.0], t.subchannels);
        assert_relative_eq!(system_power(&a, &powers, &params, 2), 0.35);
    }

    #[test]
    fn compute_load_cases() {
        let t = generate_topology(
            &TopologyConfig {
                rrh_count: 10,
                fap_count: 3,
                fap_antennas: 6,
                ..TopologyConfig::default()
            },
            5,
        )
        .unwrap();
        let budget = ComputeBudget {
            d_cpu: vec![2000.0, 200.0, 200.0, 200.0],
            mu0: 0.1,
            mu1: 1e-5,
            c_cons: 5.0,
        };
        let rates = vec![0.0; t.ue_count()];

        let mut a = ModeAssignment::empty(&t);
        a.set(0, 0, 0).unwrap(); // C-RAN: mu0 * 1000 + c_cons
        assert_relative_eq!(compute_load(&a, &rates, &budget, &t, 0), 105.0);

        a.set(0, 1, 0).unwrap(); // F-AP: mu0 * 216 + c_cons
        assert_relative_eq!(compute_load(&a, &rates, &budget, &t, 0), 26.6);

        a.set(2, t.relay_node_of_fue(1), 0).unwrap(); // D2D: free
        assert_eq!(compute_load(&a, &rates, &budget, &t, 2), 0.0);
    }

    #[test]
    fn qos_threshold_cases() {
        let params = RateParams::default();
        assert_eq!(qos_sinr_threshold(0.0, &params), 0.0);
        assert_relative_eq!(qos_sinr_threshold(params.bits_per_unit(), &params), 1.0);
        assert_relative_eq!(
            qos_sinr_threshold(0.6e6, &params),
            2f64.powf(10.0 / 3.0) - 1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn constraints_on_empty_assignment() {
        let t = topo();
        let ch = draw_channels(&t, &ChannelModel::default(), 23, 0).unwrap();
        let a = ModeAssignment::empty(&t);
        let powers = PowerAllocation::zero(&[0.2, 0.2, 1.0, 1.0], t.subchannels);
        let budget = ComputeBudget {
            d_cpu: vec![2000.0, 200.0, 200.0],
            mu0: 0.1,
            mu1: 1e-5,
            c_cons: 5.0,
        };
        let params = RateParams::default();
        let q = queues(&t, &[0.0, 0.0]);
        let rates = rates_all(&ch, &a, &powers, &params).unwrap();
        let rep = check_constraints(&a, &powers, &rates, &q, &budget, &t, &params);
        assert!(rep.c1.iter().all(|&b| b));
        assert!(rep.c4 && rep.c5 && rep.c6 && rep.c7);
        // Zero rates cannot meet positive requirements.
        assert!(rep.c2.iter().all(|&b| !b));
        assert!(rep.c3.iter().all(|&b| !b));
    }

    #[test]
    fn c3_includes_relayed_previous_rates() {
        let t = topo();
        let mut a = ModeAssignment::empty(&t);
        // UE 0 relays through F-UE 0 (node 3).
        a.set(0, 3, 0).unwrap();
        let mut q = queues(&t, &[0.0, 0.0]);
        q.prev_rates = vec![5.0, 0.0, 0.0, 0.0];
        let params = RateParams {
            r_th_bits: 10.0,
            ..RateParams::default()
        };
        assert_relative_eq!(relay_required_rate(&a, &q.prev_rates, 0, &params), 15.0);
        assert_relative_eq!(relay_required_rate(&a, &q.prev_rates, 1, &params), 10.0);
    }

    #[test]
    fn power_minus_rate_recomposition() {
        let t = topo();
        let ch = draw_channels(&t, &ChannelModel::default(), 24, 1).unwrap();
        let mut a = ModeAssignment::empty(&t);
        a.set(0, 1, 0).unwrap();
        a.set(1, 0, 1).unwrap();
        a.set(2, 2, 2).unwrap();
        let mut powers = PowerAllocation::zero(&[0.2, 0.2, 1.0, 1.0], t.subchannels);
        powers.set(0, 0, 0.08);
        powers.set(1, 1, 0.15);
        powers.set(2, 2, 0.4);
        let rparams = RateParams::default();
        let pparams = PowerParams {
            v: 2.5,
            ..PowerParams::default()
        };
        let q = queues(&t, &[3.0, 7.0]);
        let rates = rates_all(&ch, &a, &powers, &rparams).unwrap();

        let pmr = power_minus_rate(&a, &powers, &rates, &q, &pparams, t.tue_count());
        let direct = pparams.v * system_power(&a, &powers, &pparams, t.tue_count())
            - (3.0 * rates[0] + 7.0 * rates[1]);
        assert_relative_eq!(pmr, direct, max_relative = 1e-12);

        // V = 0 leaves pure weighted-rate maximization.
        let pparams0 = PowerParams { v: 0.0, ..pparams };
        let pmr0 = power_minus_rate(&a, &powers, &rates, &q, &pparams0, t.tue_count());
        assert_relative_eq!(pmr0, -(3.0 * rates[0] + 7.0 * rates[1]), max_relative = 1e-12);

        // All-zero instance.
        let a0 = ModeAssignment::empty(&t);
        let p0 = PowerAllocation::zero(&[0.2, 0.2, 1.0, 1.0], t.subchannels);
        let r0 = vec![0.0; 4];
        let q0 = queues(&t, &[0.0, 0.0]);
        assert_eq!(power_minus_rate(&a0, &p0, &r0, &q0, &pparams, 2), 0.0);
    }
}
