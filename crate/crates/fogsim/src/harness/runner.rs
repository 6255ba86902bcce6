//! The slotted simulation loop: one world per (config, seed), policies with
//! persistent state, queue evolution and metric recording.

use std::time::Instant;

use crate::baselines;
use crate::error::Result;
use crate::harness::config::{PolicyKind, SimConfig};
use crate::harness::metrics::{RunAggregate, SlotRecord};
use crate::netmodel::Strategy;
use crate::qlearn::{self, Learner, RewardContext, RewardInputs};
use crate::queueing::{advance_queue, draw_arrivals, QueueState};
use crate::rng::{stream_rng, Stream};
use crate::slotctx::{SlotContext, SlotEval};
use crate::topology::{draw_channels, generate_topology, NetworkTopology};

/// Mutable policy state carried across slots.
enum PolicyState {
    Qlearn(Box<Learner>),
    AllToRrhs,
    PlFirst,
    Pso,
    Exhaustive,
}

impl PolicyState {
    fn new(cfg: &SimConfig, topology: &NetworkTopology) -> Result<Self> {
        Ok(match cfg.sim.policy {
            PolicyKind::Qlearn => {
                let schedule = cfg.learner.tau_schedule()?;
                let mut learner = match cfg.sim.strategy {
                    Strategy::Orthogonal => {
                        Learner::centralized(topology, cfg.learner.alpha, cfg.learner.tau0, schedule)
                    }
                    Strategy::Multiplexed => {
                        Learner::distributed(topology, cfg.learner.alpha, cfg.learner.tau0, schedule)
                    }
                };
                learner.randomize_sweep = cfg.learner.randomize_sweep;
                PolicyState::Qlearn(Box::new(learner))
            }
            PolicyKind::AllToRrhs => PolicyState::AllToRrhs,
            PolicyKind::PlFirst => PolicyState::PlFirst,
            PolicyKind::Pso => PolicyState::Pso,
            PolicyKind::Exhaustive => PolicyState::Exhaustive,
        })
    }

    /// Run the policy's mode selection for the slot and evaluate it.
    fn decide(&mut self, cfg: &SimConfig, ctx: &SlotContext, seed: u64, slot: u64) -> Result<SlotEval> {
        let strategy = cfg.sim.strategy;
        match self {
            PolicyState::Qlearn(learner) => {
                let mut rng = stream_rng(seed, Stream::Policy, slot);
                match strategy {
                    Strategy::Orthogonal => {
                        for _ in 0..cfg.learner.episodes_per_slot {
                            qlearn::centralized_episode(learner, ctx, &mut rng)?;
                        }
                        let asn = qlearn::emit_orthogonal_assignment(learner, ctx)?;
                        ctx.evaluate_orthogonal(&asn)
                    }
                    Strategy::Multiplexed => {
                        // The slot decision is the best fully-feasible joint
                        // selection seen this slot (every episode is already
                        // evaluated for rewards); the last episode is the
                        // fallback when nothing clean appeared.
                        let mut best: Option<SlotEval> = None;
                        let mut last = None;
                        for _ in 0..cfg.learner.episodes_per_slot {
                            let (_, eval) = qlearn::distributed_episode(learner, ctx, &mut rng)?;
                            let clean = eval.dropped.is_empty()
                                && ctx.constraint_report(&eval).all_hold();
                            if clean && best.as_ref().map_or(true, |b| eval.pmr < b.pmr) {
                                best = Some(eval.clone());
                            }
                            last = Some(eval);
                        }
                        Ok(best.or(last).expect("episodes_per_slot is validated positive"))
                    }
                }
            }
            PolicyState::AllToRrhs => {
                let mut rng = stream_rng(seed, Stream::Policy, slot);
                let asn = baselines::all_to_rrhs(ctx, strategy, &mut rng)?;
                ctx.evaluate(&asn, strategy)
            }
            PolicyState::PlFirst => {
                let mut rng = stream_rng(seed, Stream::Policy, slot);
                let asn = baselines::pl_first(ctx, strategy, &mut rng)?;
                ctx.evaluate(&asn, strategy)
            }
            PolicyState::Pso => {
                let mut rng = stream_rng(seed, Stream::Swarm, slot);
                let out = baselines::pso_optimize(ctx, strategy, &cfg.pso, &mut rng)?;
                match out.assignment {
                    Some(asn) => ctx.evaluate(&asn, strategy),
                    None => {
                        let empty = crate::netmodel::ModeAssignment::empty(ctx.topology);
                        ctx.evaluate(&empty, strategy)
                    }
                }
            }
            PolicyState::Exhaustive => {
                Ok(baselines::exhaustive_search(ctx, strategy)?.eval)
            }
        }
    }
}

/// Total learning reward of an emitted allocation (used as the comparable
/// per-slot reward metric across all policies): served UEs whose constraints
/// hold earn the formula value, everything else earns zero.
pub fn total_reward_of_eval(ctx: &SlotContext, eval: &SlotEval) -> f64 {
    let report = ctx.constraint_report(eval);
    let mut total = 0.0;
    for k in 0..ctx.ue_count() {
        let Some((m, _)) = eval.assignment.choice(k) else {
            continue;
        };
        let is_tue = k < ctx.tue_count();
        let violated = !eval.served[k]
            || (m < report.c1.len() && !report.c1[m])
            || (is_tue && !report.c2[k])
            || (!is_tue && !report.c3[k - ctx.tue_count()]);
        let context = if violated {
            RewardContext::ConstraintViolated
        } else {
            RewardContext::Ok
        };
        let inputs = RewardInputs {
            is_tue,
            is_cran: m == 0,
            power_w: eval.powers.ue_power(k),
            rate_bits: eval.rates[k],
            queue_bits: if is_tue { ctx.queues.backlog[k] } else { 0.0 },
            p_max_w: ctx.caps[k],
            r_min_bits: ctx.rate.r_min_bits,
        };
        total += qlearn::reward(context, &inputs, ctx.power);
    }
    total
}

/// Result of one (config, seed) run.
pub struct RunResult {
    pub rows: Vec<SlotRecord>,
    pub aggregate: RunAggregate,
    pub wall_clock_s: f64,
    pub qtable_snapshot: Option<String>,
}

/// Simulate `horizon` slots under one seed.
pub fn run_single(cfg: &SimConfig, seed: u64) -> Result<RunResult> {
    let topology = generate_topology(&cfg.topology, seed)?;
    let model = cfg.channel_model();
    let power = cfg.power_params();
    let budget = cfg.compute.budget(cfg.topology.fap_count);
    let caps = cfg.caps();

    let mut queues = QueueState::new(cfg.lambdas(), topology.ue_count())?;
    queues.backlog = vec![cfg.arrivals.initial_backlog_bits; topology.tue_count()];
    let mut policy = PolicyState::new(cfg, &topology)?;

    // Wall clock excludes the shared topology setup above, includes learning.
    let started = Instant::now();
    let mut rows = Vec::with_capacity(cfg.sim.horizon as usize);
    for slot in 0..cfg.sim.horizon {
        let channels = draw_channels(&topology, &model, seed, slot)?;
        let ctx = SlotContext::new(
            &topology,
            &channels,
            &queues,
            &power,
            &cfg.rate,
            &budget,
            caps.clone(),
            cfg.wmmse.kappa,
            cfg.wmmse.max_iterations,
        );
        let eval = policy.decide(cfg, &ctx, seed, slot)?;
        let report = ctx.constraint_report(&eval);
        let reward_sum = total_reward_of_eval(&ctx, &eval);

        rows.push(SlotRecord {
            seed,
            slot,
            power_w: eval.system_power_w,
            pmr: eval.pmr,
            reward_sum,
            violations: report.violation_count(),
            cran_connections: eval.assignment.cran_connections(),
            fap_connections: (1..=topology.fap_count())
                .map(|m| eval.assignment.ues_at_node(m).len())
                .sum(),
            d2d_connections: (topology.fap_count() + 1..topology.node_count())
                .map(|m| eval.assignment.ues_at_node(m).len())
                .sum(),
            rates: eval.rates.clone(),
            backlogs: queues.backlog.clone(),
        });

        let arrivals = draw_arrivals(&queues, seed);
        queues = advance_queue(&queues, &eval.rates, &arrivals)?;
    }
    let wall_clock_s = started.elapsed().as_secs_f64();

    let aggregate = RunAggregate::from_rows(seed, &rows, &queues.backlog);
    let qtable_snapshot = match (&policy, cfg.learner.export_qtable) {
        (PolicyState::Qlearn(learner), true) => Some(learner.snapshot_text(topology.subchannels)),
        _ => None,
    };
    Ok(RunResult {
        rows,
        aggregate,
        wall_clock_s,
        qtable_snapshot,
    })
}

/// All seeds of an experiment plus the cross-seed mean.
pub struct ExperimentResult {
    pub runs: Vec<RunResult>,
    pub mean: RunAggregate,
    pub wall_clock_s: f64,
}

/// Run every configured seed (concurrently) and average the aggregates.
pub fn run_experiment(cfg: &SimConfig) -> Result<ExperimentResult> {
    use rayon::prelude::*;
    let runs: Vec<RunResult> = cfg
        .sim
        .seeds
        .par_iter()
        .map(|&seed| run_single(cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let aggs: Vec<RunAggregate> = runs.iter().map(|r| r.aggregate.clone()).collect();
    let mean = RunAggregate::mean_of(&aggs);
    let wall_clock_s = runs.iter().map(|r| r.wall_clock_s).sum();
    Ok(ExperimentResult {
        runs,
        mean,
        wall_clock_s,
    })
}
