//! Experiment configuration: TOML sections with defaults for every omitted
//! field, `key=value` overrides, and validation against the module
//! invariants at load time.

use serde::{Deserialize, Serialize};

use crate::baselines::PsoParams;
use crate::error::{Result, SimError};
use crate::netmodel::{ComputeBudget, PowerParams, RateParams, Strategy};
use crate::qlearn::TauSchedule;
use crate::topology::{noise_power_from_psd, ChannelModel, TopologyConfig};

/// Which mode-selection policy drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Qlearn,
    AllToRrhs,
    PlFirst,
    Pso,
    Exhaustive,
}

impl std::str::FromStr for PolicyKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qlearn" => Ok(PolicyKind::Qlearn),
            "all_to_rrhs" => Ok(PolicyKind::AllToRrhs),
            "pl_first" => Ok(PolicyKind::PlFirst),
            "pso" => Ok(PolicyKind::Pso),
            "exhaustive" => Ok(PolicyKind::Exhaustive),
            other => Err(SimError::config(format!("unknown policy '{other}'"))),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PolicyKind::Qlearn => "qlearn",
            PolicyKind::AllToRrhs => "all_to_rrhs",
            PolicyKind::PlFirst => "pl_first",
            PolicyKind::Pso => "pso",
            PolicyKind::Exhaustive => "exhaustive",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelSection {
    pub shadowing_sigma_db: f64,
    pub fast_fading_variance: f64,
    pub antenna_gain_db: f64,
    pub noise_psd_dbm_hz: f64,
    pub min_distance_m: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            shadowing_sigma_db: 8.0,
            fast_fading_variance: 1.0,
            antenna_gain_db: 0.0,
            noise_psd_dbm_hz: -164.0,
            min_distance_m: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerSection {
    pub eta0: f64,
    pub eta1: f64,
    pub p_fronthaul_w: f64,
    pub v: f64,
    pub p_max_tue_w: f64,
    pub p_max_fue_w: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            eta0: 0.05,
            eta1: 0.05,
            p_fronthaul_w: 0.35,
            v: 1e11,
            p_max_tue_w: 0.2,
            p_max_fue_w: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ComputeSection {
    pub mu0: f64,
    pub mu1: f64,
    pub c_cons: f64,
    /// Budget per F-AP, MOPTS.
    pub d_fap: f64,
    /// The BBU pool's budget as a multiple of `d_fap`.
    pub pool_multiplier: f64,
}

impl Default for ComputeSection {
    fn default() -> Self {
        Self {
            mu0: 0.1,
            mu1: 1e-5,
            c_cons: 5.0,
            d_fap: 200.0,
            pool_multiplier: 10.0,
        }
    }
}

impl ComputeSection {
    pub fn budget(&self, fap_count: usize) -> ComputeBudget {
        let mut d_cpu = vec![self.pool_multiplier * self.d_fap];
        d_cpu.extend(std::iter::repeat(self.d_fap).take(fap_count));
        ComputeBudget {
            d_cpu,
            mu0: self.mu0,
            mu1: self.mu1,
            c_cons: self.c_cons,
        }
    }

    /// Total budget over the pool and the F-APs.
    pub fn total(&self, fap_count: usize) -> f64 {
        self.d_fap * (self.pool_multiplier + fap_count as f64)
    }

    /// Redistribute a target total back onto the per-node layout.
    pub fn set_total(&mut self, total: f64, fap_count: usize) {
        self.d_fap = total / (self.pool_multiplier + fap_count as f64);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrivalsSection {
    /// Mean Poisson arrival per traditional UE, bits/slot.
    pub lambda_bits: f64,
    /// Backlog every traditional UE starts with, bits.
    pub initial_backlog_bits: f64,
}

impl Default for ArrivalsSection {
    fn default() -> Self {
        Self {
            lambda_bits: 1e5,
            initial_backlog_bits: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerSection {
    pub alpha: f64,
    pub tau0: f64,
    /// `"log"` or `"fixed:<tau>"`.
    pub schedule: String,
    pub episodes_per_slot: usize,
    pub randomize_sweep: bool,
    /// Write a Q-table snapshot next to the other outputs.
    pub export_qtable: bool,
}

impl Default for LearnerSection {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            tau0: 0.5,
            schedule: "log".to_string(),
            episodes_per_slot: 50,
            randomize_sweep: true,
            export_qtable: false,
        }
    }
}

impl LearnerSection {
    pub fn tau_schedule(&self) -> Result<TauSchedule> {
        self.schedule.parse()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WmmseSection {
    pub kappa: f64,
    pub max_iterations: usize,
}

impl Default for WmmseSection {
    fn default() -> Self {
        Self {
            kappa: 1e-4,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSection {
    pub strategy: Strategy,
    pub policy: PolicyKind,
    pub horizon: u64,
    pub seeds: Vec<u64>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            strategy: Strategy::Orthogonal,
            policy: PolicyKind::Qlearn,
            horizon: 10_000,
            seeds: vec![1],
        }
    }
}

/// Swept dimension for the `sweep` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDimension {
    V,
    Lambda,
    ComputeBudget,
    K1,
    TauSchedule,
}

impl std::fmt::Display for SweepDimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SweepDimension::V => "v",
            SweepDimension::Lambda => "lambda",
            SweepDimension::ComputeBudget => "compute_budget",
            SweepDimension::K1 => "k1",
            SweepDimension::TauSchedule => "tau_schedule",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    pub dimension: SweepDimension,
    /// Grid for the numeric dimensions.
    pub values: Vec<f64>,
    /// Grid for the tau-schedule dimension.
    pub schedules: Vec<String>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            dimension: SweepDimension::V,
            values: vec![1e9, 1e10, 1e11, 1e12, 1e13, 1e14],
            schedules: vec!["log".into(), "fixed:0.5".into(), "fixed:0.1".into()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareSection {
    pub policies: Vec<PolicyKind>,
    /// Add the exhaustive oracle when the search space fits the guard.
    pub include_oracle: bool,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            policies: vec![PolicyKind::Qlearn, PolicyKind::PlFirst, PolicyKind::AllToRrhs],
            include_oracle: true,
        }
    }
}

/// The full experiment configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub topology: TopologyConfig,
    pub channel: ChannelSection,
    pub rate: RateParams,
    pub power: PowerSection,
    pub compute: ComputeSection,
    pub arrivals: ArrivalsSection,
    pub learner: LearnerSection,
    pub wmmse: WmmseSection,
    pub pso: PsoParams,
    pub sim: SimSection,
    pub sweep: SweepSection,
    pub compare: CompareSection,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| SimError::config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::io(path.display().to_string(), e))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    /// Parse, apply dotted-path overrides, re-validate.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut value: toml::Table =
            toml::from_str(text).map_err(|e| SimError::config(format!("bad config: {e}")))?;
        for (path, raw) in overrides {
            apply_override(&mut value, path, raw)?;
        }
        let cfg: SimConfig = toml::Value::Table(value)
            .try_into()
            .map_err(|e| SimError::config(format!("bad config after overrides: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.rate.validate()?;
        self.power_params().validate()?;
        self.compute.budget(self.topology.fap_count).validate()?;
        if self.sim.horizon < 1 {
            return Err(SimError::config("horizon must be at least 1 slot"));
        }
        if self.sim.seeds.is_empty() {
            return Err(SimError::config("at least one seed is required"));
        }
        if self.arrivals.lambda_bits < 0.0 || self.arrivals.initial_backlog_bits < 0.0 {
            return Err(SimError::config("arrival parameters must be non-negative"));
        }
        if !(self.learner.alpha > 0.0 && self.learner.alpha < 1.0) {
            return Err(SimError::config("learning rate must lie in (0,1)"));
        }
        if self.learner.tau0 <= 0.0 {
            return Err(SimError::config("tau0 must be positive"));
        }
        if self.learner.episodes_per_slot == 0 {
            return Err(SimError::config("episodes_per_slot must be positive"));
        }
        self.learner.tau_schedule()?;
        for s in &self.sweep.schedules {
            s.parse::<TauSchedule>()?;
        }
        if self.wmmse.kappa <= 0.0 || self.wmmse.max_iterations == 0 {
            return Err(SimError::config("wmmse kappa and iteration cap must be positive"));
        }
        if self.channel.fast_fading_variance < 0.0 || self.channel.shadowing_sigma_db < 0.0 {
            return Err(SimError::config("channel variances must be non-negative"));
        }
        if self.power.p_max_tue_w <= 0.0 || self.power.p_max_fue_w <= 0.0 {
            return Err(SimError::config("power caps must be positive"));
        }
        Ok(())
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            shadowing_sigma_db: self.channel.shadowing_sigma_db,
            fast_fading_variance: self.channel.fast_fading_variance,
            antenna_gain_db: self.channel.antenna_gain_db,
            noise_power_w: noise_power_from_psd(self.channel.noise_psd_dbm_hz, self.rate.w0_hz),
            min_distance_m: self.channel.min_distance_m,
        }
    }

    pub fn power_params(&self) -> PowerParams {
        PowerParams {
            eta0: self.power.eta0,
            eta1: self.power.eta1,
            p_fronthaul_w: self.power.p_fronthaul_w,
            v: self.power.v,
        }
    }

    /// Per-UE power caps, traditional UEs first.
    pub fn caps(&self) -> Vec<f64> {
        let mut caps = vec![self.power.p_max_tue_w; self.topology.tue_count];
        caps.extend(std::iter::repeat(self.power.p_max_fue_w).take(self.topology.fue_count));
        caps
    }

    pub fn lambdas(&self) -> Vec<f64> {
        vec![self.arrivals.lambda_bits; self.topology.tue_count]
    }
}

/// Set `path` (dot-separated) in the table to the parsed `raw` value.
fn apply_override(table: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(SimError::config(format!("bad override path '{path}'")));
    }
    // Parse the value through a tiny TOML document so types come out right;
    // fall back to a bare string.
    let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("x = {raw}")) {
        Ok(mut t) => t.remove("x").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| SimError::config(format!("override path '{path}' crosses a non-table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}
