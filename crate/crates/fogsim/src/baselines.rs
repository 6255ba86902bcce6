//! Comparison policies: All-to-RRHs, PL-First, exhaustive search and the
//! particle-swarm benchmark.
//!
//! All baselines produce a `ModeAssignment` for the current slot; powers
//! always come from the strategy-appropriate solver so objective comparisons
//! across policies are apples-to-apples.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Result, SimError};
use crate::netmodel::{ModeAssignment, Strategy};
use crate::qlearn::decode_action;
use crate::slotctx::{SlotContext, SlotEval};

/// Distinct random subchannels for hard isolation. When there are fewer
/// subchannels than UEs, the surplus UEs stay idle.
fn distinct_subchannels(ue_count: usize, subchannels: usize, rng: &mut ChaCha12Rng) -> Vec<Option<usize>> {
    let mut pool: Vec<usize> = (0..subchannels).collect();
    for i in (1..pool.len()).rev() {
        let j = rng.random_range(0..=i);
        pool.swap(i, j);
    }
    (0..ue_count).map(|k| pool.get(k).copied()).collect()
}

/// Everybody on C-RAN; subchannels random (distinct under the orthogonal
/// strategy, independent uniform under the multiplexed one).
pub fn all_to_rrhs(ctx: &SlotContext, strategy: Strategy, rng: &mut ChaCha12Rng) -> Result<ModeAssignment> {
    let mut asn = ModeAssignment::empty(ctx.topology);
    let subs = ctx.topology.subchannels;
    match strategy {
        Strategy::Orthogonal => {
            for (k, n) in distinct_subchannels(ctx.ue_count(), subs, rng).into_iter().enumerate() {
                if let Some(n) = n {
                    asn.set(k, 0, n)?;
                }
            }
        }
        Strategy::Multiplexed => {
            for k in 0..ctx.ue_count() {
                asn.set(k, 0, rng.random_range(0..subs))?;
            }
        }
    }
    Ok(asn)
}

/// Lowest-propagation-loss node among C-RAN and the F-APs (C-RAN distance is
/// the nearest RRH; ties go to the lowest node index). D2D is not offered.
pub fn pl_first(ctx: &SlotContext, strategy: Strategy, rng: &mut ChaCha12Rng) -> Result<ModeAssignment> {
    let mut asn = ModeAssignment::empty(ctx.topology);
    let subs = ctx.topology.subchannels;
    let picks = match strategy {
        Strategy::Orthogonal => distinct_subchannels(ctx.ue_count(), subs, rng),
        Strategy::Multiplexed => (0..ctx.ue_count()).map(|_| Some(rng.random_range(0..subs))).collect(),
    };
    for (k, n) in picks.into_iter().enumerate() {
        let Some(n) = n else { continue };
        let mut best = (0usize, ctx.topology.ue_node_distance(k, 0));
        for m in 1..=ctx.topology.fap_count() {
            let d = ctx.topology.ue_node_distance(k, m);
            if d < best.1 {
                best = (m, d);
            }
        }
        asn.set(k, best.0, n)?;
    }
    Ok(asn)
}

/// Outcome of the exhaustive oracle.
#[derive(Debug, Clone)]
pub struct ExhaustiveResult {
    pub eval: SlotEval,
    /// Best (minimum) power-minus-rate over feasible candidates.
    pub objective: f64,
    /// Worst feasible power-minus-rate (with `objective`, the dynamic range).
    pub worst_objective: f64,
    /// Candidates enumerated and how many were feasible.
    pub candidates: u64,
    pub feasible: u64,
}

struct Enumerator<'c, 'a> {
    ctx: &'c SlotContext<'a>,
    strategy: Strategy,
    options: Vec<Vec<(usize, usize)>>,
    stack: Vec<Option<(usize, usize)>>,
    used_sub: Vec<bool>,
    best: Option<(f64, SlotEval)>,
    worst: f64,
    candidates: u64,
    feasible: u64,
}

impl Enumerator<'_, '_> {
    fn recurse(&mut self, k: usize) -> Result<()> {
        if k == self.options.len() {
            self.candidates += 1;
            let mut asn = ModeAssignment::empty(self.ctx.topology);
            for (ue, choice) in self.stack.iter().enumerate() {
                if let Some((m, n)) = choice {
                    asn.set(ue, *m, *n)?;
                }
            }
            let eval = self.ctx.evaluate(&asn, self.strategy)?;
            if !eval.dropped.is_empty() || !self.ctx.constraint_report(&eval).all_hold() {
                return Ok(());
            }
            self.feasible += 1;
            if eval.pmr > self.worst {
                self.worst = eval.pmr;
            }
            if self.best.as_ref().map_or(true, |(b, _)| eval.pmr < *b) {
                self.best = Some((eval.pmr, eval));
            }
            return Ok(());
        }
        self.stack[k] = None;
        self.recurse(k + 1)?;
        for idx in 0..self.options[k].len() {
            let (m, n) = self.options[k][idx];
            if self.strategy == Strategy::Orthogonal && self.used_sub[n] {
                continue;
            }
            self.stack[k] = Some((m, n));
            if self.strategy == Strategy::Orthogonal {
                self.used_sub[n] = true;
            }
            self.recurse(k + 1)?;
            if self.strategy == Strategy::Orthogonal {
                self.used_sub[n] = false;
            }
            self.stack[k] = None;
        }
        Ok(())
    }
}

/// Enumerate every C5-C7-valid assignment (each UE idle or on one valid
/// `(m, n)` pair; under the orthogonal strategy subchannels are exclusive),
/// solve powers for each, and return the feasible minimum of the
/// power-minus-rate. A candidate is feasible when the solver needed no drops
/// and every constraint verdict holds. Refuses spaces above 1e6 candidates.
pub fn exhaustive_search(ctx: &SlotContext, strategy: Strategy) -> Result<ExhaustiveResult> {
    let ue_count = ctx.ue_count();
    let subs = ctx.topology.subchannels;
    let nodes = ctx.topology.node_count();

    let mut options: Vec<Vec<(usize, usize)>> = Vec::with_capacity(ue_count);
    for k in 0..ue_count {
        let mut opts = Vec::new();
        for m in 0..nodes {
            if let Some(j) = ctx.topology.fue_of_relay_node(m) {
                if j == k {
                    continue;
                }
            }
            for n in 0..subs {
                opts.push((m, n));
            }
        }
        options.push(opts);
    }
    let mut space: f64 = 1.0;
    for o in &options {
        space *= (o.len() + 1) as f64;
    }
    if space > 1e6 {
        return Err(SimError::config(format!(
            "exhaustive search space of {space:.3e} candidates exceeds the 1e6 guard"
        )));
    }

    let mut e = Enumerator {
        ctx,
        strategy,
        options,
        stack: vec![None; ue_count],
        used_sub: vec![false; subs],
        best: None,
        worst: f64::NEG_INFINITY,
        candidates: 0,
        feasible: 0,
    };
    e.recurse(0)?;

    let Some((objective, eval)) = e.best else {
        return Err(SimError::config("no feasible assignment exists for this instance"));
    };
    Ok(ExhaustiveResult {
        eval,
        objective,
        worst_objective: e.worst,
        candidates: e.candidates,
        feasible: e.feasible,
    })
}

/// PSO hyperparameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            particles: 30,
            iterations: 100,
            inertia: 0.7,
            c1: 1.5,
            c2: 1.5,
        }
    }
}

/// Decode a particle position into an assignment via `a = floor(x_k)`.
/// Returns `None` for structurally violating decodes (self-relay, or shared
/// subchannels under the orthogonal strategy).
pub fn decode_position(
    ctx: &SlotContext,
    strategy: Strategy,
    x: &[f64],
) -> Result<Option<ModeAssignment>> {
    let subs = ctx.topology.subchannels;
    let mut asn = ModeAssignment::empty(ctx.topology);
    let mut used = vec![false; subs];
    for (k, &xk) in x.iter().enumerate() {
        let a = xk.floor() as usize;
        let (m, n) = decode_action(a, subs)?;
        if m >= ctx.topology.node_count() || asn.is_self_relay(k, m) {
            return Ok(None);
        }
        if strategy == Strategy::Orthogonal {
            if used[n - 1] {
                return Ok(None);
            }
            used[n - 1] = true;
        }
        asn.set(k, m, n - 1)?;
    }
    Ok(Some(asn))
}

/// Fitness of a particle position: the solved power-minus-rate, or infinity
/// for violating decodes and infeasible power problems (no silent repair).
pub fn pso_fitness(ctx: &SlotContext, strategy: Strategy, x: &[f64]) -> Result<f64> {
    let Some(asn) = decode_position(ctx, strategy, x)? else {
        return Ok(f64::INFINITY);
    };
    let eval = ctx.evaluate(&asn, strategy)?;
    if !eval.dropped.is_empty() || !ctx.constraint_report(&eval).all_hold() {
        return Ok(f64::INFINITY);
    }
    Ok(eval.pmr)
}

/// Result of a swarm run.
#[derive(Debug, Clone)]
pub struct PsoOutcome {
    /// Best decoded assignment, if any feasible position was found.
    pub assignment: Option<ModeAssignment>,
    pub fitness: f64,
    /// Global-best fitness after each iteration.
    pub best_trace: Vec<f64>,
}

/// Particle-swarm benchmark over the integer-coded assignment space.
///
/// Positions map to assignments by `a = floor(x_k)`; decodes violating the
/// structural rules or failing the power solve take infinite fitness rather
/// than being repaired. Components are clamped to `[1, N*(M0+K1+1)+1)` so
/// the floor always lands on an action code.
pub fn pso_optimize(
    ctx: &SlotContext,
    strategy: Strategy,
    params: &PsoParams,
    rng: &mut ChaCha12Rng,
) -> Result<PsoOutcome> {
    if params.particles == 0 || params.iterations == 0 {
        return Err(SimError::config("PSO needs at least one particle and one iteration"));
    }
    let dim = ctx.ue_count();
    let lo = 1.0;
    let hi = (ctx.topology.subchannels * ctx.topology.node_count()) as f64 + 1.0 - 1e-9;

    let span = hi - lo;
    let mut x: Vec<Vec<f64>> = (0..params.particles)
        .map(|_| (0..dim).map(|_| lo + rng.random::<f64>() * span).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..params.particles)
        .map(|_| (0..dim).map(|_| (rng.random::<f64>() - 0.5) * span).collect())
        .collect();
    let mut p_best = x.clone();
    let mut p_fit = vec![f64::INFINITY; params.particles];
    let mut g_best: Vec<f64> = x[0].clone();
    let mut g_fit = f64::INFINITY;
    let mut best_trace = Vec::with_capacity(params.iterations);

    for _ in 0..params.iterations {
        for e in 0..params.particles {
            let fit = pso_fitness(ctx, strategy, &x[e])?;
            if fit < p_fit[e] {
                p_fit[e] = fit;
                p_best[e] = x[e].clone();
            }
            if fit < g_fit {
                g_fit = fit;
                g_best = x[e].clone();
            }
        }
        best_trace.push(g_fit);
        for e in 0..params.particles {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                v[e][d] = params.inertia * v[e][d]
                    + r1 * params.c1 * (p_best[e][d] - x[e][d])
                    + r2 * params.c2 * (g_best[d] - x[e][d]);
                x[e][d] = (x[e][d] + v[e][d]).clamp(lo, hi);
            }
        }
    }

    let assignment = if g_fit.is_finite() {
        decode_position(ctx, strategy, &g_best)?
    } else {
        None
    };
    Ok(PsoOutcome {
        assignment,
        fitness: g_fit,
        best_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{ComputeBudget, PowerParams, RateParams};
    use crate::queueing::QueueState;
    use crate::rng::{stream_rng, Stream};
    use crate::topology::{draw_channels, generate_topology, ChannelModel, NetworkTopology, TopologyConfig};

    struct Fixture {
        topology: NetworkTopology,
        channels: crate::topology::ChannelRealization,
        queues: QueueState,
        power: PowerParams,
        rate: RateParams,
        budget: ComputeBudget,
    }

    fn fixture(seed: u64) -> Fixture {
        let topology = generate_topology(
            &TopologyConfig {
                rrh_count: 6,
                fap_count: 2,
                fap_antennas: 3,
                tue_count: 2,
                fue_count: 1,
                subchannels: 3,
                area_side_m: 400.0,
                neighbor_radius_m: 400.0,
            },
            seed,
        )
        .unwrap();
        let channels = draw_channels(&topology, &ChannelModel::default(), seed, 0).unwrap();
        let mut queues = QueueState::new(vec![0.0, 0.0], 3).unwrap();
        queues.backlog = vec![4e5, 1e5];
        Fixture {
            topology,
            channels,
            queues,
            power: PowerParams::default(),
            rate: RateParams::default(),
            budget: ComputeBudget {
                d_cpu: vec![2000.0, 200.0, 200.0],
                mu0: 0.1,
                mu1: 1e-5,
                c_cons: 5.0,
            },
        }
    }

    fn ctx(f: &Fixture) -> SlotContext<'_> {
        SlotContext::new(
            &f.topology,
            &f.channels,
            &f.queues,
            &f.power,
            &f.rate,
            &f.budget,
            vec![0.2, 0.2, 1.0],
            1e-4,
            150,
        )
    }

    #[test]
    fn all_to_rrhs_connects_everyone_to_cran() {
        let f = fixture(3);
        let c = ctx(&f);
        let mut rng = stream_rng(3, Stream::Policy, 0);
        let asn = all_to_rrhs(&c, Strategy::Orthogonal, &mut rng).unwrap();
        for k in 0..3 {
            let (m, _) = asn.choice(k).expect("N >= K so everyone is assigned");
            assert_eq!(m, 0);
        }
        assert!(asn.is_orthogonal());
        assert_eq!(asn.cran_connections(), 3);

        let asn = all_to_rrhs(&c, Strategy::Multiplexed, &mut rng).unwrap();
        assert_eq!(asn.cran_connections(), 3);
    }

    #[test]
    fn pl_first_picks_nearest_node() {
        let f = fixture(4);
        let c = ctx(&f);
        let mut rng = stream_rng(4, Stream::Policy, 0);
        let asn = pl_first(&c, Strategy::Orthogonal, &mut rng).unwrap();
        for k in 0..3 {
            let (m, _) = asn.choice(k).unwrap();
            assert!(m <= f.topology.fap_count(), "PL-First never picks D2D");
            let chosen = f.topology.ue_node_distance(k, m);
            for alt in 0..=f.topology.fap_count() {
                assert!(
                    chosen <= f.topology.ue_node_distance(k, alt) + 1e-12,
                    "ue {k}: node {m} is not nearest"
                );
            }
        }
    }

    #[test]
    fn exhaustive_dominates_baselines() {
        let f = fixture(5);
        let c = ctx(&f);
        let result = exhaustive_search(&c, Strategy::Orthogonal).unwrap();
        assert!(result.feasible > 0);
        assert!(result.objective <= result.worst_objective);

        let mut rng = stream_rng(5, Stream::Policy, 0);
        for _ in 0..5 {
            let asn = all_to_rrhs(&c, Strategy::Orthogonal, &mut rng).unwrap();
            let eval = c.evaluate_orthogonal(&asn).unwrap();
            assert!(result.objective <= eval.pmr + 1e-4 * eval.pmr.abs().max(1.0));
            let asn = pl_first(&c, Strategy::Orthogonal, &mut rng).unwrap();
            let eval = c.evaluate_orthogonal(&asn).unwrap();
            assert!(result.objective <= eval.pmr + 1e-4 * eval.pmr.abs().max(1.0));
        }
    }

    #[test]
    fn exhaustive_guard_refuses_large_spaces() {
        let topology = generate_topology(
            &TopologyConfig {
                rrh_count: 8,
                fap_count: 6,
                fap_antennas: 4,
                tue_count: 6,
                fue_count: 6,
                subchannels: 6,
                area_side_m: 800.0,
                neighbor_radius_m: 400.0,
            },
            9,
        )
        .unwrap();
        let channels = draw_channels(&topology, &ChannelModel::default(), 9, 0).unwrap();
        let queues = QueueState::new(vec![0.0; 6], 12).unwrap();
        let power = PowerParams::default();
        let rate = RateParams::default();
        let budget = ComputeBudget {
            d_cpu: vec![2000.0; 7],
            mu0: 0.1,
            mu1: 1e-5,
            c_cons: 5.0,
        };
        let c = SlotContext::new(&topology, &channels, &queues, &power, &rate, &budget, vec![0.5; 12], 1e-4, 100);
        let err = exhaustive_search(&c, Strategy::Orthogonal).unwrap_err();
        assert!(err.to_string().contains("guard"), "{err}");
    }

    #[test]
    fn pso_floor_mapping_and_degenerate_swarm() {
        // floor(7.3) = 7 with N = 4 decodes to (m=1, n=3).
        assert_eq!(decode_action(7.3f64.floor() as usize, 4).unwrap(), (1, 3));

        let f = fixture(6);
        let c = ctx(&f);
        let params = PsoParams {
            particles: 1,
            iterations: 1,
            ..PsoParams::default()
        };
        let mut rng = stream_rng(6, Stream::Swarm, 0);
        let out = pso_optimize(&c, Strategy::Orthogonal, &params, &mut rng).unwrap();
        // A degenerate swarm just reports its single decoded position.
        assert_eq!(out.assignment.is_some(), out.fitness.is_finite());
        assert_eq!(out.best_trace.len(), 1);
    }

    #[test]
    fn pso_reaches_near_exhaustive_on_small_instance() {
        let f = fixture(7);
        let c = ctx(&f);
        let oracle = exhaustive_search(&c, Strategy::Orthogonal).unwrap();
        let params = PsoParams {
            particles: 20,
            iterations: 60,
            ..PsoParams::default()
        };
        let mut rng = stream_rng(7, Stream::Swarm, 0);
        let out = pso_optimize(&c, Strategy::Orthogonal, &params, &mut rng).unwrap();
        assert!(out.assignment.is_some());
        let fit = out.fitness;
        assert!(fit >= oracle.objective - 1e-6 * oracle.objective.abs().max(1.0));
        let range = oracle.worst_objective - oracle.objective;
        assert!(
            fit <= oracle.objective + 0.25 * range,
            "PSO fitness {fit} far from optimum {} (range {range})",
            oracle.objective
        );
        // Best-so-far bookkeeping is monotone non-increasing.
        for w in out.best_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
