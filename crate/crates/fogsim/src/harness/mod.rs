//! Experiment orchestration: configuration, runs, sweeps, policy
//! comparisons and file output.
//!
//! Output files are plain text with a `#`-prefixed copy of the resolved
//! configuration embedded at the top, so every artifact is self-describing
//! and byte-reproducible from `(config, seed)` alone (wall-clock columns
//! appear only in `compare.csv`, which is the one timing-bearing output).

pub mod config;
pub mod metrics;
pub mod runner;

use std::path::Path;

use rayon::prelude::*;

use crate::baselines;
use crate::error::{Result, SimError};
use crate::queueing::QueueState;
use crate::slotctx::SlotContext;
use crate::topology::{draw_channels, generate_topology};

pub use config::{PolicyKind, SimConfig, SweepDimension};
pub use metrics::{fmt9, RunAggregate, SlotRecord};
pub use runner::{run_experiment, run_single, total_reward_of_eval, ExperimentResult, RunResult};

/// Write `body` under `dir/name` with the resolved config embedded as
/// comment lines.
fn write_output(dir: &Path, name: &str, config_toml: &str, body: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir.display().to_string(), e))?;
    let path = dir.join(name);
    let mut text = String::new();
    text.push_str("# resolved configuration:\n");
    for line in config_toml.lines() {
        text.push_str("#   ");
        text.push_str(line);
        text.push('\n');
    }
    text.push_str(body);
    std::fs::write(&path, text).map_err(|e| SimError::io(path.display().to_string(), e))
}

/// Run one experiment and write `slots.csv` and `aggregate.txt`.
pub fn run_to_files(cfg: &SimConfig, out_dir: &Path) -> Result<ExperimentResult> {
    let result = run_experiment(cfg)?;
    let config_toml = cfg.to_toml_string();

    let mut slots = String::new();
    slots.push_str(&SlotRecord::csv_header(
        cfg.topology.tue_count + cfg.topology.fue_count,
        cfg.topology.tue_count,
    ));
    slots.push('\n');
    for run in &result.runs {
        for row in &run.rows {
            slots.push_str(&row.csv_row());
            slots.push('\n');
        }
    }
    write_output(out_dir, "slots.csv", &config_toml, &slots)?;

    let mut agg = String::new();
    for run in &result.runs {
        for line in run.aggregate.text_lines(&format!("seed {}", run.aggregate.seed)) {
            agg.push_str(&line);
            agg.push('\n');
        }
        agg.push('\n');
    }
    for line in result.mean.text_lines("mean") {
        agg.push_str(&line);
        agg.push('\n');
    }
    write_output(out_dir, "aggregate.txt", &config_toml, &agg)?;

    for run in &result.runs {
        if let Some(snapshot) = &run.qtable_snapshot {
            write_output(
                out_dir,
                &format!("qtable_seed{}.txt", run.aggregate.seed),
                &config_toml,
                snapshot,
            )?;
        }
    }
    Ok(result)
}

/// One grid point of a sweep.
pub struct SweepPoint {
    pub label: String,
    pub result: ExperimentResult,
}

fn configure_point(
    base: &SimConfig,
    dim: SweepDimension,
    value: Option<f64>,
    schedule: Option<&str>,
) -> Result<SimConfig> {
    let mut cfg = base.clone();
    match dim {
        SweepDimension::V => cfg.power.v = value.unwrap(),
        SweepDimension::Lambda => cfg.arrivals.lambda_bits = value.unwrap(),
        SweepDimension::ComputeBudget => {
            cfg.compute.set_total(value.unwrap(), cfg.topology.fap_count);
        }
        SweepDimension::K1 => {
            let k1 = value.unwrap();
            if k1 < 1.0 || k1.fract() != 0.0 {
                return Err(SimError::config(format!(
                    "K1 grid value {k1} is not a positive integer"
                )));
            }
            cfg.topology.fue_count = k1 as usize;
        }
        SweepDimension::TauSchedule => {
            cfg.learner.schedule = schedule.unwrap().to_string();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Run one experiment per grid point (points run concurrently).
pub fn sweep(cfg: &SimConfig) -> Result<Vec<SweepPoint>> {
    let dim = cfg.sweep.dimension;
    let points: Vec<(String, SimConfig)> = match dim {
        SweepDimension::TauSchedule => {
            if cfg.sweep.schedules.is_empty() {
                return Err(SimError::config("tau-schedule sweep needs a non-empty grid"));
            }
            cfg.sweep
                .schedules
                .iter()
                .map(|s| Ok((s.clone(), configure_point(cfg, dim, None, Some(s))?)))
                .collect::<Result<Vec<_>>>()?
        }
        _ => {
            if cfg.sweep.values.is_empty() {
                return Err(SimError::config("sweep needs a non-empty value grid"));
            }
            cfg.sweep
                .values
                .iter()
                .map(|&v| Ok((fmt9(v), configure_point(cfg, dim, Some(v), None)?)))
                .collect::<Result<Vec<_>>>()?
        }
    };
    points
        .into_par_iter()
        .map(|(label, point_cfg)| {
            let result = run_experiment(&point_cfg)?;
            Ok(SweepPoint { label, result })
        })
        .collect()
}

/// Run a sweep and write the table keyed by the swept value.
pub fn sweep_to_files(cfg: &SimConfig, out_dir: &Path) -> Result<Vec<SweepPoint>> {
    let points = sweep(cfg)?;
    let mut body = String::from(
        "value,p_bar_w,q_bar_bits,pmr_mean,reward_mean,violations_total,cran_mean,fap_mean,d2d_mean,stability_max\n",
    );
    for p in &points {
        let a = &p.result.mean;
        let stab = a.stability.iter().cloned().fold(0.0f64, f64::max);
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            p.label,
            fmt9(a.p_bar),
            fmt9(a.q_bar),
            fmt9(a.pmr_mean),
            fmt9(a.reward_mean),
            a.violations_total,
            fmt9(a.cran_mean),
            fmt9(a.fap_mean),
            fmt9(a.d2d_mean),
            fmt9(stab),
        ));
    }
    write_output(out_dir, "sweep.csv", &cfg.to_toml_string(), &body)?;
    Ok(points)
}

/// One policy's line in a comparison.
pub struct CompareRow {
    pub policy: String,
    pub result: ExperimentResult,
}

/// Estimated exhaustive candidate count for the configured instance.
pub fn exhaustive_space(cfg: &SimConfig) -> f64 {
    let nodes = 1 + cfg.topology.fap_count + cfg.topology.fue_count;
    let subs = cfg.topology.subchannels;
    let tue_opts = (nodes * subs + 1) as f64;
    let fue_opts = ((nodes - 1) * subs + 1) as f64;
    tue_opts.powi(cfg.topology.tue_count as i32) * fue_opts.powi(cfg.topology.fue_count as i32)
}

/// Run every requested policy over identical worlds (same seeds, channels
/// and arrivals) and report objectives plus wall clock. The exhaustive
/// oracle joins automatically when the instance fits its guard.
pub fn compare(cfg: &SimConfig) -> Result<Vec<CompareRow>> {
    if cfg.compare.policies.len() < 2 {
        return Err(SimError::config("compare needs at least two policies"));
    }
    let mut kinds: Vec<PolicyKind> = cfg.compare.policies.clone();
    if cfg.compare.include_oracle
        && !kinds.contains(&PolicyKind::Exhaustive)
        && exhaustive_space(cfg) <= 1e6
    {
        kinds.push(PolicyKind::Exhaustive);
    }
    kinds
        .into_iter()
        .map(|kind| {
            let mut policy_cfg = cfg.clone();
            policy_cfg.sim.policy = kind;
            let result = run_experiment(&policy_cfg)?;
            Ok(CompareRow {
                policy: kind.to_string(),
                result,
            })
        })
        .collect()
}

/// Write the comparison table (the only output carrying wall-clock).
pub fn compare_to_files(cfg: &SimConfig, out_dir: &Path) -> Result<Vec<CompareRow>> {
    let rows = compare(cfg)?;
    let mut body = String::from(
        "policy,pmr_mean,reward_mean,p_bar_w,q_bar_bits,violations_total,wall_clock_s\n",
    );
    for r in &rows {
        let a = &r.result.mean;
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.policy,
            fmt9(a.pmr_mean),
            fmt9(a.reward_mean),
            fmt9(a.p_bar),
            fmt9(a.q_bar),
            a.violations_total,
            fmt9(r.result.wall_clock_s),
        ));
    }
    write_output(out_dir, "compare.csv", &cfg.to_toml_string(), &body)?;
    Ok(rows)
}

/// Exhaustive oracle on the first configured seed's slot 0 (initial
/// backlogs, first channel draw). Returns the report text.
pub fn oracle_to_files(cfg: &SimConfig, out_dir: &Path) -> Result<String> {
    let seed = cfg.sim.seeds[0];
    let topology = generate_topology(&cfg.topology, seed)?;
    let model = cfg.channel_model();
    let channels = draw_channels(&topology, &model, seed, 0)?;
    let mut queues = QueueState::new(cfg.lambdas(), topology.ue_count())?;
    queues.backlog = vec![cfg.arrivals.initial_backlog_bits; topology.tue_count()];
    let power = cfg.power_params();
    let budget = cfg.compute.budget(cfg.topology.fap_count);
    let ctx = SlotContext::new(
        &topology,
        &channels,
        &queues,
        &power,
        &cfg.rate,
        &budget,
        cfg.caps(),
        cfg.wmmse.kappa,
        cfg.wmmse.max_iterations,
    );
    let result = baselines::exhaustive_search(&ctx, cfg.sim.strategy)?;

    let mut body = String::new();
    body.push_str(&format!("seed {seed}\n"));
    body.push_str(&format!("candidates {}\n", result.candidates));
    body.push_str(&format!("feasible {}\n", result.feasible));
    body.push_str(&format!("objective {}\n", fmt9(result.objective)));
    body.push_str(&format!("worst_objective {}\n", fmt9(result.worst_objective)));
    body.push_str(&format!("system_power_w {}\n", fmt9(result.eval.system_power_w)));
    for k in 0..topology.ue_count() {
        match result.eval.assignment.choice(k) {
            Some((m, n)) => body.push_str(&format!(
                "ue {k} node {m} subchannel {n} power_w {} rate_bits {}\n",
                fmt9(result.eval.powers.get(k, n)),
                fmt9(result.eval.rates[k]),
            )),
            None => body.push_str(&format!("ue {k} idle\n")),
        }
    }
    write_output(out_dir, "oracle.txt", &cfg.to_toml_string(), &body)?;
    Ok(body)
}
