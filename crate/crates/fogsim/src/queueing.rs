//! Traffic arrivals, queue backlog evolution and drift-plus-penalty
//! bookkeeping for the traditional-UE slice.
//!
//! Backlogs follow `Q(t+1) = max(Q(t) - R(t), 0) + A(t)`; the Lyapunov
//! function is `L = 1/2 sum_i Q_i^2`. Rates realized by every UE (including
//! F-UEs) in the previous slot are kept because the F-UE relay requirement
//! references them.

use rand_distr::{Distribution, Poisson};

use crate::error::{Result, SimError};
use crate::rng::{stream_rng, Stream};

/// Per-slot queue state of the traditional-UE slice.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    /// Backlogs Q_i(t), bits, traditional UEs only.
    pub backlog: Vec<f64>,
    /// Mean arrivals per slot, bits, one per traditional UE.
    pub mean_arrival: Vec<f64>,
    /// Realized rates of *all* UEs at slot t-1, bits/slot.
    pub prev_rates: Vec<f64>,
    /// Slot index t.
    pub slot: u64,
}

impl QueueState {
    /// Fresh state at t = 0: empty queues, zero previous rates.
    pub fn new(mean_arrival: Vec<f64>, total_ues: usize) -> Result<Self> {
        if mean_arrival.iter().any(|&l| l < 0.0) {
            return Err(SimError::config("mean arrival rates must be non-negative"));
        }
        if mean_arrival.len() > total_ues {
            return Err(SimError::config("more arrival rates than UEs"));
        }
        Ok(Self {
            backlog: vec![0.0; mean_arrival.len()],
            mean_arrival,
            prev_rates: vec![0.0; total_ues],
            slot: 0,
        })
    }

    pub fn tue_count(&self) -> usize {
        self.backlog.len()
    }
}

/// Poisson arrivals with the configured means, deterministic per
/// `(seed, slot)`.
pub fn draw_arrivals(state: &QueueState, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Arrivals, state.slot);
    state
        .mean_arrival
        .iter()
        .map(|&lambda| {
            if lambda <= 0.0 {
                0.0
            } else {
                Poisson::new(lambda).expect("positive lambda").sample(&mut rng)
            }
        })
        .collect()
}

/// Advance the backlogs by one slot.
///
/// `served` carries the realized rates of all UEs (traditional first); only
/// the traditional entries drain queues, but every entry is recorded as the
/// next slot's `prev_rates`.
pub fn advance_queue(state: &QueueState, served: &[f64], arrivals: &[f64]) -> Result<QueueState> {
    if served.len() != state.prev_rates.len() {
        return Err(SimError::config(format!(
            "served rates must cover all {} UEs, got {}",
            state.prev_rates.len(),
            served.len()
        )));
    }
    if arrivals.len() != state.backlog.len() {
        return Err(SimError::config("arrivals length mismatch"));
    }
    if served.iter().chain(arrivals).any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(SimError::config("served rates and arrivals must be non-negative"));
    }
    let backlog = state
        .backlog
        .iter()
        .zip(served)
        .zip(arrivals)
        .map(|((&q, &r), &a)| (q - r).max(0.0) + a)
        .collect();
    Ok(QueueState {
        backlog,
        mean_arrival: state.mean_arrival.clone(),
        prev_rates: served.to_vec(),
        slot: state.slot + 1,
    })
}

/// Lyapunov congestion metric `1/2 sum Q_i^2`.
pub fn lyapunov(state: &QueueState) -> f64 {
    0.5 * state.backlog.iter().map(|q| q * q).sum::<f64>()
}

/// Realized drift-plus-penalty sample `[L(after) - L(before)] + V * power`.
pub fn drift_plus_penalty(before: &QueueState, after: &QueueState, power_w: f64, v: f64) -> f64 {
    debug_assert!(v >= 0.0);
    (lyapunov(after) - lyapunov(before)) + v * power_w
}

/// Empirical mean-rate stability metric `|Q_i(T)| / T` from a backlog time
/// series (`history[t][i]`, `t = 0..=T`).
pub fn mean_rate_stability_metric(history: &[Vec<f64>], horizon: u64) -> Vec<f64> {
    assert!(horizon >= 1, "horizon must be at least one slot");
    let last = history
        .last()
        .expect("history must contain at least the initial state");
    last.iter().map(|q| q.abs() / horizon as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn state(backlog: &[f64]) -> QueueState {
        QueueState {
            backlog: backlog.to_vec(),
            mean_arrival: vec![0.0; backlog.len()],
            prev_rates: vec![0.0; backlog.len()],
            slot: 0,
        }
    }

    #[test]
    fn zero_lambda_means_zero_arrivals() {
        let s = QueueState::new(vec![0.0, 0.0], 3).unwrap();
        assert_eq!(draw_arrivals(&s, 11), vec![0.0, 0.0]);
    }

    #[test]
    fn arrivals_are_deterministic_per_seed_slot() {
        let s = QueueState::new(vec![5e4, 1e5], 4).unwrap();
        assert_eq!(draw_arrivals(&s, 3), draw_arrivals(&s, 3));
        assert_ne!(draw_arrivals(&s, 3), draw_arrivals(&s, 4));
    }

    // Law of large numbers on the Poisson law.
    #[test]
    fn sample_mean_tracks_lambda() {
        let lambda = 2.5e4;
        let mut s = QueueState::new(vec![lambda], 1).unwrap();
        let slots = 100_000u64;
        let mut acc = 0.0;
        for _ in 0..slots {
            acc += draw_arrivals(&s, 17)[0];
            s.slot += 1;
        }
        let mean = acc / slots as f64;
        assert!(
            (mean - lambda).abs() / lambda < 0.01,
            "mean {mean} vs lambda {lambda}"
        );
    }

    #[test]
    fn advance_follows_backlog_recursion() {
        let s = state(&[10.0]);
        let s2 = advance_queue(&s, &[4.0], &[1.0]).unwrap();
        assert_eq!(s2.backlog, vec![7.0]);
        assert_eq!(s2.slot, 1);

        let s = state(&[2.0]);
        let s2 = advance_queue(&s, &[5.0], &[3.0]).unwrap();
        assert_eq!(s2.backlog, vec![3.0]);

        let s = state(&[0.0]);
        let s2 = advance_queue(&s, &[0.0], &[0.0]).unwrap();
        assert_eq!(s2.backlog, vec![0.0]);
    }

    #[test]
    fn advance_records_all_ue_rates() {
        let mut s = QueueState::new(vec![1.0, 1.0], 4).unwrap();
        s.backlog = vec![5.0, 5.0];
        let s2 = advance_queue(&s, &[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_eq!(s2.prev_rates, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn advance_rejects_negative_inputs() {
        let s = state(&[1.0]);
        assert!(advance_queue(&s, &[-1.0], &[0.0]).is_err());
        assert!(advance_queue(&s, &[0.0], &[-2.0]).is_err());
    }

    #[test]
    fn lyapunov_values() {
        assert_relative_eq!(lyapunov(&state(&[3.0, 4.0])), 12.5);
        assert_relative_eq!(lyapunov(&state(&[0.0, 0.0])), 0.0);
        assert_relative_eq!(lyapunov(&state(&[1.0])), 0.5);
    }

    #[test]
    fn drift_plus_penalty_cases() {
        let a = state(&[3.0, 4.0]);
        assert_relative_eq!(drift_plus_penalty(&a, &a, 2.0, 3.0), 6.0);
        let b = state(&[0.0, 0.0]);
        assert_relative_eq!(drift_plus_penalty(&a, &b, 0.0, 5.0), -12.5);
        assert_relative_eq!(drift_plus_penalty(&a, &b, 9.0, 0.0), -12.5);
    }

    #[test]
    fn stability_metric_shapes() {
        // Constant backlog: metric c/T.
        let hist: Vec<Vec<f64>> = (0..=100).map(|_| vec![7.0]).collect();
        assert_relative_eq!(mean_rate_stability_metric(&hist, 100)[0], 0.07);
        // Linear growth: metric 1.
        let hist: Vec<Vec<f64>> = (0..=100).map(|t| vec![t as f64]).collect();
        assert_relative_eq!(mean_rate_stability_metric(&hist, 100)[0], 1.0);
    }
}
