//! Tabular Q-learning for communication-mode selection.
//!
//! Actions are `(node, subchannel)` pairs encoded as `a = n + m*N` (1-based
//! subchannel). Q values follow the stateless exponential average
//! `Q <- (1-alpha) Q + alpha W` with softmax exploration at temperature
//! `tau = tau0 / ln(1 + t_epi)`.
//!
//! Centralized learning (orthogonal strategy) sweeps one UE at a time over a
//! shared state and zero-rewards subchannel collisions; distributed learning
//! (multiplexed strategy) lets every UE pick simultaneously from a
//! neighbor-restricted table and zero-rewards selections that break the
//! compute budget or the rate requirements.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Result, SimError};
use crate::netmodel::{ModeAssignment, PowerParams};
use crate::slotctx::{SlotContext, SlotEval};

/// Decode `a = n + m*N` into `(node m, subchannel n)`, `n` 1-based.
pub fn decode_action(a: usize, subchannels: usize) -> Result<(usize, usize)> {
    if a == 0 || subchannels == 0 {
        return Err(SimError::config("action codes are 1-based"));
    }
    let n = (a - 1) % subchannels + 1;
    let m = (a - n) / subchannels;
    Ok((m, n))
}

/// Inverse of [`decode_action`].
pub fn encode_action(m: usize, n: usize, subchannels: usize) -> usize {
    debug_assert!(n >= 1 && n <= subchannels);
    n + m * subchannels
}

/// Temperature schedule for the softmax policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSchedule {
    /// `tau0 / ln(1 + t_epi)`.
    Log,
    /// Constant temperature (ignores `tau0`).
    Fixed(f64),
}

impl std::str::FromStr for TauSchedule {
    type Err = SimError;

    /// `"log"` or `"fixed:<tau>"`.
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("log") {
            return Ok(TauSchedule::Log);
        }
        if let Some(v) = s.strip_prefix("fixed:") {
            let tau: f64 = v
                .parse()
                .map_err(|_| SimError::config(format!("bad fixed temperature: {v}")))?;
            if tau <= 0.0 {
                return Err(SimError::config("fixed temperature must be positive"));
            }
            return Ok(TauSchedule::Fixed(tau));
        }
        Err(SimError::config(format!(
            "unknown tau schedule '{s}' (expected 'log' or 'fixed:<tau>')"
        )))
    }
}

impl std::fmt::Display for TauSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TauSchedule::Log => write!(f, "log"),
            TauSchedule::Fixed(t) => write!(f, "fixed:{t}"),
        }
    }
}

/// One UE's action-value table over its admissible action codes.
#[derive(Debug, Clone)]
pub struct QTable {
    /// Admissible action codes (scope), in increasing order.
    pub scope: Vec<usize>,
    /// Q value per scope entry, always in [0, 1].
    pub values: Vec<f64>,
}

impl QTable {
    /// Fresh table with optimistic values: rewards live in [0, 1], so
    /// starting at 1 keeps rarely-visited actions in the softmax race until
    /// their true value is learned (a zero start lets one early collision
    /// freeze an action out once the temperature cools).
    pub fn new(scope: Vec<usize>) -> Self {
        let values = vec![1.0; scope.len()];
        Self { scope, values }
    }

    pub fn value_of(&self, action: usize) -> Option<f64> {
        self.scope.iter().position(|&a| a == action).map(|i| self.values[i])
    }
}

/// Softmax selection over the table's scope at temperature `tau`; returns
/// the chosen action code. Probabilities follow `exp(Q/tau)` normalized over
/// the scope (max-shifted for numeric safety).
pub fn softmax_select(table: &QTable, tau: f64, rng: &mut ChaCha12Rng) -> usize {
    let idx = softmax_sample_index(&table.values, tau, rng);
    table.scope[idx]
}

/// Softmax probabilities over raw values (exposed for tests/diagnostics).
pub fn softmax_probabilities(values: &[f64], tau: f64) -> Vec<f64> {
    assert!(!values.is_empty() && tau > 0.0);
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = values.iter().map(|&q| ((q - top) / tau).exp()).collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    probs
}

fn softmax_sample_index(values: &[f64], tau: f64, rng: &mut ChaCha12Rng) -> usize {
    let probs = softmax_probabilities(values, tau);
    let draw: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Exponential-average update `Q <- (1-alpha) Q + alpha W`.
pub fn q_update(table: &mut QTable, action: usize, alpha: f64, reward: f64) {
    debug_assert!((0.0..=1.0).contains(&reward));
    if let Some(i) = table.scope.iter().position(|&a| a == action) {
        table.values[i] = (1.0 - alpha) * table.values[i] + alpha * reward;
    }
}

/// Why a selection earns zero reward before the formula applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardContext {
    Ok,
    /// Orthogonal strategy: the chosen subchannel is already held.
    OrthogonalCollision,
    /// Multiplexed strategy: C1, C2 or C3 failed for the selected mode.
    ConstraintViolated,
}

/// Inputs to the reward, everything already realized for the slot.
#[derive(Debug, Clone, Copy)]
pub struct RewardInputs {
    pub is_tue: bool,
    /// Selected mode is C-RAN (pays fronthaul in the reward).
    pub is_cran: bool,
    pub power_w: f64,
    pub rate_bits: f64,
    pub queue_bits: f64,
    pub p_max_w: f64,
    pub r_min_bits: f64,
}

/// Reward in [0, 1], decreasing in the power-minus-rate of the selection.
pub fn reward(context: RewardContext, inputs: &RewardInputs, power: &PowerParams) -> f64 {
    if context != RewardContext::Ok {
        return 0.0;
    }
    let fronthaul = if inputs.is_cran { power.v * power.p_fronthaul_w } else { 0.0 };
    let (num, den) = if inputs.is_tue {
        (
            power.v0() * inputs.power_w + fronthaul - inputs.queue_bits * inputs.rate_bits,
            power.v0() * inputs.p_max_w + fronthaul - inputs.queue_bits * inputs.r_min_bits,
        )
    } else {
        (
            power.v1() * inputs.power_w + fronthaul,
            power.v1() * inputs.p_max_w + fronthaul,
        )
    };
    if den <= 0.0 {
        // Degenerate denominator (huge backlog): keep the intent of the
        // formula, full reward only when the numerator is non-positive.
        return if num <= 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - num / den).clamp(0.0, 1.0)
}

/// Persistent learner: per-UE tables, the shared episode counter and the
/// current joint action state.
#[derive(Debug, Clone)]
pub struct Learner {
    pub tables: Vec<QTable>,
    pub alpha: f64,
    pub tau0: f64,
    pub schedule: TauSchedule,
    /// Episode counter t_epi, shared by all agents, never reset.
    pub episode: u64,
    /// Current action code per UE (the learning state's `s_k`).
    pub state: Vec<usize>,
    /// Randomize the sweep order each centralized episode.
    pub randomize_sweep: bool,
}

impl Learner {
    /// Centralized tables: every UE may use any node and subchannel except
    /// its own relay port.
    pub fn centralized(
        topology: &crate::topology::NetworkTopology,
        alpha: f64,
        tau0: f64,
        schedule: TauSchedule,
    ) -> Self {
        let scopes = (0..topology.ue_count())
            .map(|k| full_scope(topology, k))
            .collect::<Vec<_>>();
        Self::from_scopes(scopes, alpha, tau0, schedule)
    }

    /// Distributed tables restricted to each UE's neighbor nodes (C-RAN is
    /// always reachable).
    pub fn distributed(
        topology: &crate::topology::NetworkTopology,
        alpha: f64,
        tau0: f64,
        schedule: TauSchedule,
    ) -> Self {
        let scopes = (0..topology.ue_count())
            .map(|k| {
                let mut scope = Vec::new();
                for m in topology.neighbor_nodes(k) {
                    for n in 1..=topology.subchannels {
                        scope.push(encode_action(m, n, topology.subchannels));
                    }
                }
                scope.sort_unstable();
                scope
            })
            .collect::<Vec<_>>();
        Self::from_scopes(scopes, alpha, tau0, schedule)
    }

    fn from_scopes(scopes: Vec<Vec<usize>>, alpha: f64, tau0: f64, schedule: TauSchedule) -> Self {
        assert!(alpha > 0.0 && alpha < 1.0, "learning rate must lie in (0,1)");
        assert!(tau0 > 0.0, "initial temperature must be positive");
        let state = scopes.iter().map(|s| s[0]).collect();
        Self {
            tables: scopes.into_iter().map(QTable::new).collect(),
            alpha,
            tau0,
            schedule,
            episode: 0,
            state,
            randomize_sweep: true,
        }
    }

    /// Temperature at the current episode (episodes count from 1).
    pub fn tau(&self) -> f64 {
        match self.schedule {
            TauSchedule::Fixed(t) => t,
            TauSchedule::Log => self.tau0 / (1.0 + self.episode.max(1) as f64).ln(),
        }
    }

    /// Structured-text snapshot of every table (diagnostics export).
    pub fn snapshot_text(&self, subchannels: usize) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for (k, table) in self.tables.iter().enumerate() {
            let _ = writeln!(out, "ue {k}");
            for (i, &a) in table.scope.iter().enumerate() {
                let (m, n) = decode_action(a, subchannels).expect("scope codes are valid");
                let _ = writeln!(out, "  action {a} (m={m} n={n}) q {:.9e}", table.values[i]);
            }
        }
        out
    }
}

fn full_scope(topology: &crate::topology::NetworkTopology, k: usize) -> Vec<usize> {
    let mut scope = Vec::new();
    for m in 0..topology.node_count() {
        if let Some(j) = topology.fue_of_relay_node(m) {
            if j == k {
                continue; // no self-relay
            }
        }
        for n in 1..=topology.subchannels {
            scope.push(encode_action(m, n, topology.subchannels));
        }
    }
    scope
}

/// Build the assignment encoded by the learner state, skipping `exclude`d
/// UEs.
fn assignment_from_state(
    ctx: &SlotContext,
    state: &[usize],
    exclude: &[bool],
) -> Result<ModeAssignment> {
    let mut asn = ModeAssignment::empty(ctx.topology);
    for (k, &a) in state.iter().enumerate() {
        if exclude[k] {
            continue;
        }
        let (m, n) = decode_action(a, ctx.topology.subchannels)?;
        asn.set(k, m, n - 1)?;
    }
    Ok(asn)
}

/// Mark every UE involved in a subchannel collision.
fn collision_flags(ctx: &SlotContext, state: &[usize]) -> Result<Vec<bool>> {
    let subs = ctx.topology.subchannels;
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); subs];
    for (k, &a) in state.iter().enumerate() {
        let (_, n) = decode_action(a, subs)?;
        holders[n - 1].push(k);
    }
    let mut flags = vec![false; state.len()];
    for hs in holders {
        if hs.len() > 1 {
            for k in hs {
                flags[k] = true;
            }
        }
    }
    Ok(flags)
}

/// One centralized episode: every UE reselects once (round-robin, order
/// randomized when configured), with rewards from the joint orthogonal power
/// solve. Returns the episode's total reward.
pub fn centralized_episode(
    learner: &mut Learner,
    ctx: &SlotContext,
    rng: &mut ChaCha12Rng,
) -> Result<f64> {
    learner.episode += 1;
    let tau = learner.tau();
    let k_count = learner.tables.len();
    let mut order: Vec<usize> = (0..k_count).collect();
    if learner.randomize_sweep {
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
    }

    let mut total = 0.0;
    for &k0 in &order {
        let action = softmax_select(&learner.tables[k0], tau, rng);
        learner.state[k0] = action;
        let w = evaluate_centralized_reward(learner, ctx, k0)?;
        q_update(&mut learner.tables[k0], action, learner.alpha, w);
        total += w;
    }
    Ok(total)
}

fn evaluate_centralized_reward(learner: &Learner, ctx: &SlotContext, k0: usize) -> Result<f64> {
    let collisions = collision_flags(ctx, &learner.state)?;
    if collisions[k0] {
        return Ok(0.0);
    }
    let asn = assignment_from_state(ctx, &learner.state, &collisions)?;
    let members: Vec<usize> = (0..asn.ue_count()).filter(|&k| asn.choice(k).is_some()).collect();
    let problem = ctx.orth_problem(&asn, &members);
    let start = crate::powerorth::extreme_point(&problem)?;
    let pos = members.iter().position(|&k| k == k0).expect("k0 is collision-free");
    if !start.served[pos] {
        return Ok(0.0); // own requirement unreachable in this mode
    }
    let Some(sol) = crate::powerorth::restore_feasibility(&start, &problem)? else {
        return Ok(0.0); // compute budget unrestorable around this selection
    };
    let (m, _) = asn.choice(k0).unwrap();
    let inputs = RewardInputs {
        is_tue: k0 < ctx.tue_count(),
        is_cran: m == 0,
        power_w: sol.powers[pos],
        rate_bits: problem.rate_at(pos, sol.powers[pos]),
        queue_bits: if k0 < ctx.tue_count() { ctx.queues.backlog[k0] } else { 0.0 },
        p_max_w: ctx.caps[k0],
        r_min_bits: ctx.rate.r_min_bits,
    };
    Ok(reward(RewardContext::Ok, &inputs, ctx.power))
}

/// Decode the learner state into a hard-isolation assignment: residual
/// collisions keep only the holder with the highest learned Q value (ties to
/// the lowest UE index).
pub fn emit_orthogonal_assignment(learner: &Learner, ctx: &SlotContext) -> Result<ModeAssignment> {
    let subs = ctx.topology.subchannels;
    let mut best_per_sub: Vec<Option<(usize, f64)>> = vec![None; subs];
    for (k, &a) in learner.state.iter().enumerate() {
        let (_, n) = decode_action(a, subs)?;
        let q = learner.tables[k].value_of(a).unwrap_or(0.0);
        let slot = &mut best_per_sub[n - 1];
        if slot.map_or(true, |(_, bq)| q > bq) {
            *slot = Some((k, q));
        }
    }
    let mut exclude = vec![true; learner.state.len()];
    for winner in best_per_sub.into_iter().flatten() {
        exclude[winner.0] = false;
    }
    assignment_from_state(ctx, &learner.state, &exclude)
}

/// One distributed episode: all agents select simultaneously, the joint
/// multiplexed assignment is solved once, and each agent updates on its own
/// reward. Returns the per-UE rewards and the slot evaluation.
pub fn distributed_episode(
    learner: &mut Learner,
    ctx: &SlotContext,
    rng: &mut ChaCha12Rng,
) -> Result<(Vec<f64>, SlotEval)> {
    learner.episode += 1;
    let tau = learner.tau();
    for k in 0..learner.tables.len() {
        learner.state[k] = softmax_select(&learner.tables[k], tau, rng);
    }
    let asn = assignment_from_state(ctx, &learner.state, &vec![false; learner.state.len()])?;
    let eval = ctx.evaluate_multiplexed(&asn)?;
    let report = ctx.constraint_report(&eval);

    let mut rewards = Vec::with_capacity(learner.tables.len());
    for k in 0..learner.tables.len() {
        let (m, _) = decode_action(learner.state[k], ctx.topology.subchannels)?;
        let is_tue = k < ctx.tue_count();
        let violated = !eval.served[k]
            || (m < report.c1.len() && !report.c1[m])
            || (is_tue && !report.c2[k])
            || (!is_tue && !report.c3[k - ctx.tue_count()]);
        let context = if violated { RewardContext::ConstraintViolated } else { RewardContext::Ok };
        let inputs = RewardInputs {
            is_tue,
            is_cran: m == 0,
            power_w: eval.powers.ue_power(k),
            rate_bits: eval.rates[k],
            queue_bits: if is_tue { ctx.queues.backlog[k] } else { 0.0 },
            p_max_w: ctx.caps[k],
            r_min_bits: ctx.rate.r_min_bits,
        };
        let w = reward(context, &inputs, ctx.power);
        q_update(&mut learner.tables[k], learner.state[k], learner.alpha, w);
        rewards.push(w);
    }
    Ok((rewards, eval))
}
