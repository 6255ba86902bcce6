//! Sweep-shape integration checks that stay cheap enough for every run:
//! traffic monotonicity over the arrival grid and the temperature-schedule
//! table shape.

use fogsim::harness::{self, SimConfig, SweepDimension};

fn base() -> SimConfig {
    SimConfig::from_toml_str(
        r#"
        [topology]
        rrh_count = 6
        fap_count = 2
        fap_antennas = 3
        tue_count = 2
        fue_count = 2
        subchannels = 4
        area_side_m = 500.0
        neighbor_radius_m = 500.0

        [learner]
        episodes_per_slot = 8

        [sim]
        horizon = 1500
        seeds = [1, 2]
        "#,
    )
    .unwrap()
}

// Heavier traffic costs both power and delay.
#[test]
fn lambda_sweep_is_monotone_in_both_metrics() {
    let mut cfg = base();
    cfg.sweep.dimension = SweepDimension::Lambda;
    cfg.sweep.values = vec![5e4, 2e5, 6e5];
    let points = harness::sweep(&cfg).unwrap();
    let p: Vec<f64> = points.iter().map(|x| x.result.mean.p_bar).collect();
    let q: Vec<f64> = points.iter().map(|x| x.result.mean.q_bar).collect();
    for w in p.windows(2) {
        assert!(w[1] >= w[0] * 0.98, "P_bar not non-decreasing in lambda: {p:?}");
    }
    for w in q.windows(2) {
        assert!(w[1] >= w[0] * 0.98, "Q_bar not non-decreasing in lambda: {q:?}");
    }
}

#[test]
fn tau_schedule_sweep_emits_one_row_per_schedule() {
    let mut cfg = base();
    cfg.sim.horizon = 50;
    cfg.sim.seeds = vec![1];
    cfg.sweep.dimension = SweepDimension::TauSchedule;
    cfg.sweep.schedules = vec!["log".into(), "fixed:0.5".into(), "fixed:0.1".into()];
    let points = harness::sweep(&cfg).unwrap();
    assert_eq!(points.len(), 3);
    let labels: Vec<&str> = points.iter().map(|p| p.label.as_str()).collect();
    assert_eq!(labels, vec!["log", "fixed:0.5", "fixed:0.1"]);
    for p in &points {
        assert!(p.result.mean.reward_mean >= 0.0);
    }
}

// K1 sweep reshapes the topology.
#[test]
fn k1_sweep_changes_the_ue_population() {
    let mut cfg = base();
    cfg.sim.horizon = 20;
    cfg.sim.seeds = vec![1];
    cfg.sweep.dimension = SweepDimension::K1;
    cfg.sweep.values = vec![1.0, 3.0];
    let points = harness::sweep(&cfg).unwrap();
    assert_eq!(points.len(), 2);
    // More F-UEs, more slice-guarantee power.
    assert!(points[1].result.mean.p_bar > 0.0);
}
