//! Per-slot metric rows and run aggregates.
//!
//! Numeric output is fixed at nine significant digits so files diff cleanly
//! and reruns are byte-identical.

/// Format with 9 significant digits (scientific).
pub fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

/// One slot's record.
#[derive(Debug, Clone)]
pub struct SlotRecord {
    pub seed: u64,
    pub slot: u64,
    pub power_w: f64,
    /// Full objective V*P - sum Q_i R_i at the emitted allocation.
    pub pmr: f64,
    /// Sum over UEs of the slot's realized rewards.
    pub reward_sum: f64,
    /// Count of violated constraint predicates this slot.
    pub violations: usize,
    pub cran_connections: usize,
    pub fap_connections: usize,
    pub d2d_connections: usize,
    /// Realized rates, every UE, bits/slot.
    pub rates: Vec<f64>,
    /// Backlogs at the start of the slot, traditional UEs, bits.
    pub backlogs: Vec<f64>,
}

impl SlotRecord {
    pub fn csv_header(ue_count: usize, tue_count: usize) -> String {
        let mut cols = vec![
            "seed".to_string(),
            "slot".into(),
            "power_w".into(),
            "pmr".into(),
            "reward_sum".into(),
            "violations".into(),
            "cran_connections".into(),
            "fap_connections".into(),
            "d2d_connections".into(),
        ];
        cols.extend((0..ue_count).map(|k| format!("rate_{k}")));
        cols.extend((0..tue_count).map(|i| format!("queue_{i}")));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            self.seed.to_string(),
            self.slot.to_string(),
            fmt9(self.power_w),
            fmt9(self.pmr),
            fmt9(self.reward_sum),
            self.violations.to_string(),
            self.cran_connections.to_string(),
            self.fap_connections.to_string(),
            self.d2d_connections.to_string(),
        ];
        cols.extend(self.rates.iter().map(|&r| fmt9(r)));
        cols.extend(self.backlogs.iter().map(|&q| fmt9(q)));
        cols.join(",")
    }
}

/// Aggregates of one run (one seed).
#[derive(Debug, Clone)]
pub struct RunAggregate {
    pub seed: u64,
    pub horizon: u64,
    /// Time-averaged system power, watts.
    pub p_bar: f64,
    /// Time average of the summed traditional-UE backlog, bits.
    pub q_bar: f64,
    pub pmr_mean: f64,
    pub reward_mean: f64,
    /// `|Q_i(T)|/T` per traditional UE.
    pub stability: Vec<f64>,
    pub violations_total: u64,
    pub cran_mean: f64,
    pub fap_mean: f64,
    pub d2d_mean: f64,
}

impl RunAggregate {
    pub fn from_rows(seed: u64, rows: &[SlotRecord], final_backlog: &[f64]) -> Self {
        let n = rows.len().max(1) as f64;
        let horizon = rows.len() as u64;
        let p_bar = rows.iter().map(|r| r.power_w).sum::<f64>() / n;
        let q_bar = rows.iter().map(|r| r.backlogs.iter().sum::<f64>()).sum::<f64>() / n;
        let pmr_mean = rows.iter().map(|r| r.pmr).sum::<f64>() / n;
        let reward_mean = rows.iter().map(|r| r.reward_sum).sum::<f64>() / n;
        let stability = final_backlog
            .iter()
            .map(|q| q.abs() / horizon.max(1) as f64)
            .collect();
        Self {
            seed,
            horizon,
            p_bar,
            q_bar,
            pmr_mean,
            reward_mean,
            stability,
            violations_total: rows.iter().map(|r| r.violations as u64).sum(),
            cran_mean: rows.iter().map(|r| r.cran_connections as f64).sum::<f64>() / n,
            fap_mean: rows.iter().map(|r| r.fap_connections as f64).sum::<f64>() / n,
            d2d_mean: rows.iter().map(|r| r.d2d_connections as f64).sum::<f64>() / n,
        }
    }

    /// Element-wise mean across seeds.
    pub fn mean_of(aggs: &[RunAggregate]) -> RunAggregate {
        assert!(!aggs.is_empty());
        let n = aggs.len() as f64;
        let tues = aggs[0].stability.len();
        RunAggregate {
            seed: 0,
            horizon: aggs[0].horizon,
            p_bar: aggs.iter().map(|a| a.p_bar).sum::<f64>() / n,
            q_bar: aggs.iter().map(|a| a.q_bar).sum::<f64>() / n,
            pmr_mean: aggs.iter().map(|a| a.pmr_mean).sum::<f64>() / n,
            reward_mean: aggs.iter().map(|a| a.reward_mean).sum::<f64>() / n,
            stability: (0..tues)
                .map(|i| aggs.iter().map(|a| a.stability[i]).sum::<f64>() / n)
                .collect(),
            violations_total: aggs.iter().map(|a| a.violations_total).sum(),
            cran_mean: aggs.iter().map(|a| a.cran_mean).sum::<f64>() / n,
            fap_mean: aggs.iter().map(|a| a.fap_mean).sum::<f64>() / n,
            d2d_mean: aggs.iter().map(|a| a.d2d_mean).sum::<f64>() / n,
        }
    }

    /// Key-value lines for the aggregate file.
    pub fn text_lines(&self, label: &str) -> Vec<String> {
        let mut out = vec![
            format!("[{label}]"),
            format!("horizon {}", self.horizon),
            format!("p_bar_w {}", fmt9(self.p_bar)),
            format!("q_bar_bits {}", fmt9(self.q_bar)),
            format!("pmr_mean {}", fmt9(self.pmr_mean)),
            format!("reward_mean {}", fmt9(self.reward_mean)),
            format!("violations_total {}", self.violations_total),
            format!("cran_connections_mean {}", fmt9(self.cran_mean)),
            format!("fap_connections_mean {}", fmt9(self.fap_mean)),
            format!("d2d_connections_mean {}", fmt9(self.d2d_mean)),
        ];
        for (i, s) in self.stability.iter().enumerate() {
            out.push(format!("stability_ue{i} {}", fmt9(*s)));
        }
        out
    }
}
