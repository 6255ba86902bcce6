//! Static network layout and per-slot channel realizations.
//!
//! The network has three receiver tiers sharing one index space `m`:
//! `m = 0` is the C-RAN mode (all RRHs cooperating in the BBU pool, stacked
//! into one length-`L1` receive vector), `m = 1..=M0` are the F-APs with `L0`
//! antennas each, and `m = M0+1..=M0+K1` are single-antenna F-UE relays.
//!
//! Channel vectors combine antenna gain, distance pathloss, log-normal
//! shadowing and fast fading; all three random parts are configurable and
//! every draw is deterministic for a fixed `(seed, slot)`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, SimError};
use crate::rng::{stream_rng, Stream};

/// A point in the deployment square, metres.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance_to(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Node and UE counts plus geometry for layout generation.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TopologyConfig {
    /// Number of single-antenna RRHs (L1).
    pub rrh_count: usize,
    /// Number of F-APs (M0).
    pub fap_count: usize,
    /// Antennas per F-AP (L0); must be < L1.
    pub fap_antennas: usize,
    /// Traditional UEs (K0).
    pub tue_count: usize,
    /// F-UEs (K1).
    pub fue_count: usize,
    /// Number of subchannels (N).
    pub subchannels: usize,
    /// Side of the deployment square, metres.
    pub area_side_m: f64,
    /// Radius defining the neighbor set of a UE, metres.
    pub neighbor_radius_m: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            rrh_count: 10,
            fap_count: 3,
            fap_antennas: 6,
            tue_count: 2,
            fue_count: 2,
            subchannels: 4,
            area_side_m: 1000.0,
            neighbor_radius_m: 300.0,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rrh_count == 0
            || self.fap_count == 0
            || self.fap_antennas == 0
            || self.tue_count == 0
            || self.fue_count == 0
            || self.subchannels == 0
        {
            return Err(SimError::config("all node/UE/subchannel counts must be positive"));
        }
        if self.fap_antennas >= self.rrh_count {
            return Err(SimError::config(format!(
                "F-AP antenna count L0={} must be < RRH count L1={}",
                self.fap_antennas, self.rrh_count
            )));
        }
        if self.area_side_m <= 0.0 {
            return Err(SimError::config("area_side_m must be positive"));
        }
        if self.neighbor_radius_m <= 0.0 {
            return Err(SimError::config("neighbor_radius_m must be positive"));
        }
        Ok(())
    }
}

/// The generated static layout.
///
/// Serving-node index space: `0` C-RAN, `1..=fap_count` F-APs,
/// `fap_count+1..=fap_count+fue_count` F-UE relays. UE index space:
/// `0..tue_count` traditional UEs, then F-UEs.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    pub area_side_m: f64,
    pub rrh_positions: Vec<Point>,
    pub fap_positions: Vec<Point>,
    pub fap_antennas: usize,
    pub tue_positions: Vec<Point>,
    pub fue_positions: Vec<Point>,
    pub subchannels: usize,
    pub neighbor_radius_m: f64,
}

impl NetworkTopology {
    pub fn tue_count(&self) -> usize {
        self.tue_positions.len()
    }

    pub fn fue_count(&self) -> usize {
        self.fue_positions.len()
    }

    pub fn ue_count(&self) -> usize {
        self.tue_count() + self.fue_count()
    }

    pub fn fap_count(&self) -> usize {
        self.fap_positions.len()
    }

    /// Serving-node count: C-RAN + F-APs + F-UE relays.
    pub fn node_count(&self) -> usize {
        1 + self.fap_count() + self.fue_count()
    }

    pub fn is_fue(&self, k: usize) -> bool {
        k >= self.tue_count()
    }

    /// Receive dimension of node `m`: L1 stacked RRHs for C-RAN, L0 for an
    /// F-AP, 1 for a relaying F-UE.
    pub fn node_dim(&self, m: usize) -> usize {
        if m == 0 {
            self.rrh_positions.len()
        } else if m <= self.fap_count() {
            self.fap_antennas
        } else {
            1
        }
    }

    /// The relay node index for F-UE `j` (`j` counted within F-UEs).
    pub fn relay_node_of_fue(&self, j: usize) -> usize {
        self.fap_count() + 1 + j
    }

    /// Inverse of [`relay_node_of_fue`]: the UE index behind relay node `m`,
    /// if `m` is an F-UE relay.
    pub fn fue_of_relay_node(&self, m: usize) -> Option<usize> {
        if m > self.fap_count() && m < self.node_count() {
            Some(self.tue_count() + (m - self.fap_count() - 1))
        } else {
            None
        }
    }

    pub fn ue_position(&self, k: usize) -> Point {
        if k < self.tue_count() {
            self.tue_positions[k]
        } else {
            self.fue_positions[k - self.tue_count()]
        }
    }

    /// Distance from UE `k` to serving node `m`. For C-RAN this is the
    /// minimum distance over RRHs (used for pathloss ordering, e.g. PL-First).
    pub fn ue_node_distance(&self, k: usize, m: usize) -> f64 {
        let p = self.ue_position(k);
        if m == 0 {
            self.rrh_positions
                .iter()
                .map(|r| p.distance_to(r))
                .fold(f64::INFINITY, f64::min)
        } else if m <= self.fap_count() {
            p.distance_to(&self.fap_positions[m - 1])
        } else {
            p.distance_to(&self.fue_positions[m - self.fap_count() - 1])
        }
    }

    /// Serving nodes within `neighbor_radius_m` of UE `k`; C-RAN is always
    /// included, and an F-UE never neighbors its own relay node.
    pub fn neighbor_nodes(&self, k: usize) -> Vec<usize> {
        let mut out = vec![0];
        for m in 1..self.node_count() {
            if let Some(j) = self.fue_of_relay_node(m) {
                if j == k {
                    continue;
                }
            }
            if self.ue_node_distance(k, m) <= self.neighbor_radius_m {
                out.push(m);
            }
        }
        out
    }
}

/// Generate a layout with all positions uniform over the square.
///
/// Deterministic for a fixed `(config, seed)`.
pub fn generate_topology(config: &TopologyConfig, seed: u64) -> Result<NetworkTopology> {
    config.validate()?;
    let mut rng = stream_rng(seed, Stream::Topology, 0);
    let mut draw = |count: usize| -> Vec<Point> {
        (0..count)
            .map(|_| Point {
                x: rng.random::<f64>() * config.area_side_m,
                y: rng.random::<f64>() * config.area_side_m,
            })
            .collect()
    };
    Ok(NetworkTopology {
        area_side_m: config.area_side_m,
        rrh_positions: draw(config.rrh_count),
        fap_positions: draw(config.fap_count),
        fap_antennas: config.fap_antennas,
        tue_positions: draw(config.tue_count),
        fue_positions: draw(config.fue_count),
        subchannels: config.subchannels,
        neighbor_radius_m: config.neighbor_radius_m,
    })
}

/// Distance pathloss in dB, `127 + 25 log10(d)` with `d` in km.
pub fn pathloss_db(distance_km: f64) -> Result<f64> {
    if distance_km <= 0.0 || !distance_km.is_finite() {
        return Err(SimError::config(format!(
            "pathloss distance must be positive, got {distance_km} km"
        )));
    }
    Ok(127.0 + 25.0 * distance_km.log10())
}

/// Random parts of the channel law plus the noise floor.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ChannelModel {
    /// Log-normal shadowing standard deviation, dB. Zero disables shadowing.
    pub shadowing_sigma_db: f64,
    /// Variance of the circularly-symmetric complex Gaussian fast fading per
    /// antenna. Zero freezes fading at the deterministic amplitude.
    pub fast_fading_variance: f64,
    /// Antenna gain applied to every link, dBi.
    pub antenna_gain_db: f64,
    /// Noise power per subchannel, watts.
    pub noise_power_w: f64,
    /// Distances are clamped below this before the pathloss law, metres.
    pub min_distance_m: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            shadowing_sigma_db: 8.0,
            fast_fading_variance: 1.0,
            antenna_gain_db: 0.0,
            // -164 dBm/Hz over 180 kHz
            noise_power_w: noise_power_from_psd(-164.0, 180e3),
            min_distance_m: 1.0,
        }
    }
}

/// Noise power in watts from a density in dBm/Hz and a bandwidth in Hz.
pub fn noise_power_from_psd(psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    10f64.powf((psd_dbm_hz - 30.0) / 10.0) * bandwidth_hz
}

/// One slot's channel vectors `h[(k, m, n)]` plus the noise power.
///
/// Vector length is the receive dimension of node `m`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    ue_count: usize,
    node_count: usize,
    subchannels: usize,
    node_dims: Vec<usize>,
    h: Vec<Vec<Complex64>>,
    pub noise_power: f64,
}

impl ChannelRealization {
    /// Realization with all-zero vectors; fill via [`Self::set_h`]. Useful
    /// for synthetic instances in tests and solver benchmarks.
    pub fn synthetic(node_dims: Vec<usize>, ue_count: usize, subchannels: usize, noise_power: f64) -> Self {
        let node_count = node_dims.len();
        let h = (0..ue_count * node_count * subchannels)
            .map(|idx| {
                let m = (idx / subchannels) % node_count;
                vec![Complex64::new(0.0, 0.0); node_dims[m]]
            })
            .collect();
        Self {
            ue_count,
            node_count,
            subchannels,
            node_dims,
            h,
            noise_power,
        }
    }

    /// Overwrite one channel vector. The length must match the node's dim.
    pub fn set_h(&mut self, k: usize, m: usize, n: usize, vec: Vec<Complex64>) {
        assert_eq!(vec.len(), self.node_dims[m], "channel vector length mismatch");
        let idx = self.index(k, m, n);
        self.h[idx] = vec;
    }

    fn index(&self, k: usize, m: usize, n: usize) -> usize {
        debug_assert!(k < self.ue_count && m < self.node_count && n < self.subchannels);
        (k * self.node_count + m) * self.subchannels + n
    }

    pub fn h(&self, k: usize, m: usize, n: usize) -> &[Complex64] {
        &self.h[self.index(k, m, n)]
    }

    /// Squared norm of the channel vector.
    pub fn gain(&self, k: usize, m: usize, n: usize) -> f64 {
        self.h(k, m, n).iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn node_dim(&self, m: usize) -> usize {
        self.node_dims[m]
    }

    pub fn ue_count(&self) -> usize {
        self.ue_count
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn subchannels(&self) -> usize {
        self.subchannels
    }
}

/// Draw the slot's channel realization.
///
/// Shadowing is drawn once per (UE, physical site) per slot and shared by a
/// site's antennas and subchannels; fast fading is independent per antenna
/// and per subchannel. For C-RAN each RRH is its own site, so the stacked
/// vector has per-RRH large-scale terms.
pub fn draw_channels(
    topology: &NetworkTopology,
    model: &ChannelModel,
    seed: u64,
    slot: u64,
) -> Result<ChannelRealization> {
    if model.noise_power_w <= 0.0 {
        return Err(SimError::config("noise power must be positive"));
    }
    let mut rng = stream_rng(seed, Stream::Channels, slot);
    let shadow = if model.shadowing_sigma_db > 0.0 {
        Some(
            Normal::new(0.0, model.shadowing_sigma_db)
                .map_err(|e| SimError::config(format!("bad shadowing sigma: {e}")))?,
        )
    } else {
        None
    };
    let fading_sigma = (model.fast_fading_variance / 2.0).sqrt();
    let fading = if model.fast_fading_variance > 0.0 {
        Some(Normal::new(0.0, fading_sigma).expect("positive variance"))
    } else {
        None
    };

    let ue_count = topology.ue_count();
    let node_count = topology.node_count();
    let n_sub = topology.subchannels;
    let node_dims: Vec<usize> = (0..node_count).map(|m| topology.node_dim(m)).collect();
    let mut h = vec![Vec::new(); ue_count * node_count * n_sub];

    for k in 0..ue_count {
        let ue_pos = topology.ue_position(k);
        for m in 0..node_count {
            // Amplitude per antenna from the large-scale budget. C-RAN
            // antennas sit at distinct RRH sites.
            let dim = node_dims[m];
            let mut amp = Vec::with_capacity(dim);
            let mut site_amp = |site: &Point| -> Result<f64> {
                let d_m = ue_pos.distance_to(site).max(model.min_distance_m);
                let pl_db = pathloss_db(d_m / 1000.0)?;
                let sh_db = shadow.as_ref().map_or(0.0, |s| s.sample(&mut rng));
                Ok(10f64.powf((model.antenna_gain_db - pl_db + sh_db) / 20.0))
            };
            if m == 0 {
                for site in &topology.rrh_positions {
                    amp.push(site_amp(site)?);
                }
            } else if m <= topology.fap_count() {
                let a = site_amp(&topology.fap_positions[m - 1])?;
                amp.extend(std::iter::repeat(a).take(dim));
            } else {
                amp.push(site_amp(
                    &topology.fue_positions[m - topology.fap_count() - 1],
                )?);
            }
            for n in 0..n_sub {
                let vec: Vec<Complex64> = amp
                    .iter()
                    .map(|&a| match &fading {
                        Some(f) => {
                            let re = f.sample(&mut rng);
                            let im = f.sample(&mut rng);
                            Complex64::new(a * re, a * im)
                        }
                        None => Complex64::new(a, 0.0),
                    })
                    .collect();
                h[(k * node_count + m) * n_sub + n] = vec;
            }
        }
    }

    Ok(ChannelRealization {
        ue_count,
        node_count,
        subchannels: n_sub,
        node_dims,
        h,
        noise_power: model.noise_power_w,
    })
}

/// MMSE detection vector at node `m`, subchannel `n`, for UE `k`:
/// `v = (sum_k' P_k' h_k' h_k'^H + noise I)^{-1} h_k` over the co-channel
/// transmitters `(k', P_k')` (own signal included).
pub fn mmse_detector(
    channels: &ChannelRealization,
    k: usize,
    m: usize,
    n: usize,
    transmitters: &[(usize, f64)],
) -> Result<Vec<Complex64>> {
    use nalgebra::{DMatrix, DVector};

    let dim = channels.node_dim(m);
    let mut cov = DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(channels.noise_power, 0.0);
    for &(kp, p) in transmitters {
        if p <= 0.0 {
            continue;
        }
        let hv = DVector::from_column_slice(channels.h(kp, m, n));
        cov += (&hv * hv.adjoint()) * Complex64::new(p, 0.0);
    }
    let target = DVector::from_column_slice(channels.h(k, m, n));
    let chol = cov
        .cholesky()
        .ok_or_else(|| SimError::numeric("MMSE covariance not positive definite"))?;
    let v = chol.solve(&target);
    Ok(v.as_slice().to_vec())
}

/// SINR at detector `v` for UE `k`'s signal against the given co-channel
/// transmitters (own entry ignored in the interference sum).
pub fn sinr_at(
    channels: &ChannelRealization,
    v: &[Complex64],
    k: usize,
    m: usize,
    n: usize,
    own_power: f64,
    transmitters: &[(usize, f64)],
) -> f64 {
    let dot = |h: &[Complex64]| -> Complex64 {
        v.iter().zip(h).map(|(vi, hi)| vi.conj() * hi).sum()
    };
    let v_norm_sq: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    let signal = own_power * dot(channels.h(k, m, n)).norm_sqr();
    let mut interference = 0.0;
    for &(kp, p) in transmitters {
        if kp == k || p <= 0.0 {
            continue;
        }
        interference += p * dot(channels.h(kp, m, n)).norm_sqr();
    }
    signal / (interference + channels.noise_power * v_norm_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn small_config() -> TopologyConfig {
        TopologyConfig {
            rrh_count: 4,
            fap_count: 2,
            fap_antennas: 2,
            tue_count: 2,
            fue_count: 2,
            subchannels: 3,
            area_side_m: 500.0,
            neighbor_radius_m: 250.0,
        }
    }

    #[test]
    fn generate_matches_counts_and_is_deterministic() {
        let cfg = TopologyConfig::default();
        let t = generate_topology(&cfg, 42).unwrap();
        assert_eq!(t.rrh_positions.len(), 10);
        assert_eq!(t.fap_positions.len(), 3);
        assert_eq!(t.fap_antennas, 6);
        for p in t.rrh_positions.iter().chain(&t.fap_positions) {
            assert!(p.x >= 0.0 && p.x <= cfg.area_side_m);
            assert!(p.y >= 0.0 && p.y <= cfg.area_side_m);
        }
        let t2 = generate_topology(&cfg, 42).unwrap();
        assert_eq!(t.rrh_positions, t2.rrh_positions);
        assert_eq!(t.fue_positions, t2.fue_positions);
    }

    #[test]
    fn generate_rejects_bad_counts() {
        let mut cfg = TopologyConfig::default();
        cfg.rrh_count = 2; // L0 = 6 >= L1 = 2
        assert!(generate_topology(&cfg, 1).is_err());
        let mut cfg = TopologyConfig::default();
        cfg.tue_count = 0;
        assert!(generate_topology(&cfg, 1).is_err());
    }

    #[test]
    fn pathloss_reference_points() {
        assert_relative_eq!(pathloss_db(1.0).unwrap(), 127.0);
        assert_relative_eq!(pathloss_db(0.1).unwrap(), 102.0);
        assert_relative_eq!(pathloss_db(0.01).unwrap(), 77.0);
        assert!(pathloss_db(0.0).is_err());
        assert!(pathloss_db(-1.0).is_err());
    }

    #[test]
    fn pathloss_is_monotone() {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..200 {
            let d = i as f64 * 0.013;
            let pl = pathloss_db(d).unwrap();
            assert!(pl > prev);
            prev = pl;
        }
    }

    #[test]
    fn degenerate_fading_gives_deterministic_amplitude() {
        let t = generate_topology(&small_config(), 9).unwrap();
        let model = ChannelModel {
            shadowing_sigma_db: 0.0,
            fast_fading_variance: 0.0,
            ..ChannelModel::default()
        };
        let ch = draw_channels(&t, &model, 9, 0).unwrap();
        // F-AP link: every antenna shares the site amplitude.
        let d = t.ue_node_distance(0, 1).max(model.min_distance_m);
        let pl = pathloss_db(d / 1000.0).unwrap();
        let expect = 10f64.powf(-pl / 20.0);
        for c in ch.h(0, 1, 0) {
            assert_relative_eq!(c.re, expect, max_relative = 1e-12);
            assert_relative_eq!(c.im, 0.0);
        }
    }

    #[test]
    fn different_slots_same_seed_differ() {
        let t = generate_topology(&small_config(), 3).unwrap();
        let model = ChannelModel::default();
        let a = draw_channels(&t, &model, 3, 0).unwrap();
        let b = draw_channels(&t, &model, 3, 1).unwrap();
        assert_ne!(a.h(0, 0, 0), b.h(0, 0, 0));
        let c = draw_channels(&t, &model, 3, 0).unwrap();
        assert_eq!(a.h(1, 2, 1), c.h(1, 2, 1));
    }

    // Monte-Carlo oracle for the configured law: E|h_i|^2 equals linear
    // pathloss x mean shadowing x fading variance.
    #[test]
    fn mean_square_matches_large_scale_budget() {
        let t = generate_topology(&small_config(), 5).unwrap();
        let model = ChannelModel {
            shadowing_sigma_db: 4.0,
            ..ChannelModel::default()
        };
        let d = t.ue_node_distance(1, 2).max(model.min_distance_m);
        let pl_lin = 10f64.powf(-pathloss_db(d / 1000.0).unwrap() / 10.0);
        let b = model.shadowing_sigma_db * std::f64::consts::LN_10 / 10.0;
        let shadow_mean = (b * b / 2.0).exp();
        let expected = pl_lin * shadow_mean * model.fast_fading_variance;

        let draws = 100_000;
        let mut acc = 0.0;
        for slot in 0..draws {
            let ch = draw_channels(&t, &model, 5, slot).unwrap();
            let h = ch.h(1, 2, 0);
            acc += h[0].norm_sqr();
        }
        let mean = acc / draws as f64;
        assert!(
            (mean - expected).abs() / expected < 0.02,
            "mean |h|^2 {mean:.3e} vs expected {expected:.3e}"
        );
    }

    #[test]
    fn mmse_scalar_link_halves() {
        // h = 1, P = 1, noise 1 -> v = 1/2.
        let t = generate_topology(&small_config(), 1).unwrap();
        let model = ChannelModel {
            shadowing_sigma_db: 0.0,
            fast_fading_variance: 0.0,
            noise_power_w: 1.0,
            ..ChannelModel::default()
        };
        let mut ch = draw_channels(&t, &model, 1, 0).unwrap();
        // Overwrite one D2D (scalar) link to h = 1.
        let m = t.relay_node_of_fue(1);
        ch.set_h(0, m, 0, vec![Complex64::new(1.0, 0.0)]);
        let v = mmse_detector(&ch, 0, m, 0, &[(0, 1.0)]).unwrap();
        assert_eq!(v.len(), 1);
        assert_relative_eq!(v[0].re, 0.5, max_relative = 1e-12);
        assert_relative_eq!(v[0].im, 0.0);
    }

    #[test]
    fn mmse_no_interferers_is_matched_filter() {
        let t = generate_topology(&small_config(), 2).unwrap();
        let ch = draw_channels(&t, &ChannelModel::default(), 2, 0).unwrap();
        let v = mmse_detector(&ch, 0, 0, 1, &[(0, 0.2)]).unwrap();
        let h = ch.h(0, 0, 1);
        // v proportional to h: cross terms vanish.
        let vh: Complex64 = v.iter().zip(h).map(|(a, b)| a.conj() * b).sum();
        let vn: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        let hn: f64 = h.iter().map(|c| c.norm_sqr()).sum();
        assert_relative_eq!(vh.norm_sqr(), vn * hn, max_relative = 1e-9);
    }

    // Random-search oracle: the MMSE detector beats 1000 random receivers.
    #[test]
    fn mmse_detector_maximizes_sinr() {
        let t = generate_topology(&small_config(), 7).unwrap();
        let ch = draw_channels(&t, &ChannelModel::default(), 7, 2).unwrap();
        let tx = vec![(0usize, 0.2), (1, 0.15), (2, 0.8)];
        for &(k, p) in &tx {
            for m in [0usize, 1, 2] {
                let v = mmse_detector(&ch, k, m, 0, &tx).unwrap();
                let best = sinr_at(&ch, &v, k, m, 0, p, &tx);
                let mut rng = stream_rng(99, Stream::Policy, (k * 3 + m) as u64);
                for _ in 0..1000 {
                    let cand: Vec<Complex64> = (0..ch.node_dim(m))
                        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                        .collect();
                    let s = sinr_at(&ch, &cand, k, m, 0, p, &tx);
                    assert!(best >= s - 1e-9, "random receiver beat MMSE: {s} > {best}");
                }
            }
        }
    }
}
