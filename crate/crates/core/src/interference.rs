//! Slot-level Monte Carlo of frame errors among co-located hopping piconets.
//!
//! The observed piconet sits at the origin and `N - 1` interfering piconets
//! are dropped at uniform distances and angles around it. Every piconet hops
//! to a uniform channel each slot and carries one single-slot frame per slot.
//! A received frame is lost when any interferer within the interference
//! radius, or an active Wi-Fi transmitter whose band covers the channel,
//! uses the same channel in that slot. The master receives on odd slots and
//! the slave on even ones.
//!
//! Each interferer draws its geometry and hops from its own random stream,
//! keyed by seed, placement and interferer index. Adding interferers, growing
//! the radius or raising Wi-Fi activity therefore only adds collisions on
//! every sample path, and results do not depend on thread scheduling.

use std::f64::consts::TAU;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{param, Result};

/// Bluetooth hop channels.
pub const BLUETOOTH_CHANNELS: u32 = 79;
/// Radius minimizing the worst relative error on `1 - Pc` against the
/// reference correction rates at 4, 7, 10 and 13 piconets, Wi-Fi off.
pub const CALIBRATED_RADIUS: f64 = 3.25;

const WIFI_STREAM: u64 = u32::MAX as u64;

/// A Wi-Fi transmitter occupying a contiguous block of hop channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WifiInterferer {
    /// First occupied channel, 0-based.
    pub first_channel: u32,
    pub width: u32,
    /// Probability that a given slot carries a Wi-Fi transmission.
    pub activity: f64,
    pub x: f64,
    pub y: f64,
}

impl Default for WifiInterferer {
    fn default() -> Self {
        WifiInterferer {
            first_channel: 0,
            width: 22,
            activity: 0.2,
            x: 1.0,
            y: 0.0,
        }
    }
}

impl WifiInterferer {
    fn covers(&self, channel: u32) -> bool {
        channel >= self.first_channel && channel - self.first_channel < self.width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerParams {
    /// Piconets in the field, the observed one included.
    pub n_clusters: usize,
    pub channels: u32,
    /// Slots simulated per placement.
    pub slots: usize,
    pub placements: usize,
    pub dist_min: f64,
    pub dist_max: f64,
    pub interference_radius: f64,
    pub wifi: Option<WifiInterferer>,
    pub path_seed: u64,
}

impl Default for FerParams {
    fn default() -> Self {
        FerParams {
            n_clusters: 1,
            channels: BLUETOOTH_CHANNELS,
            slots: 10_000,
            placements: 20,
            dist_min: 0.1,
            dist_max: 10.0,
            interference_radius: CALIBRATED_RADIUS,
            wifi: None,
            path_seed: 1,
        }
    }
}

impl FerParams {
    /// Every interferer counts regardless of where it lands.
    pub fn forced(mut self) -> Self {
        self.interference_radius = self.dist_max;
        self.wifi = None;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(param("n_clusters must be >= 1"));
        }
        if self.channels == 0 {
            return Err(param("channels must be >= 1"));
        }
        if self.slots < 2 {
            return Err(param("slots must be >= 2"));
        }
        if self.placements < 2 {
            return Err(param("placements must be >= 2 for a confidence interval"));
        }
        if !(self.dist_min > 0.0 && self.dist_min <= self.dist_max && self.dist_max.is_finite()) {
            return Err(param(format!(
                "distances must satisfy 0 < min <= max, got {} and {}",
                self.dist_min, self.dist_max
            )));
        }
        if !(self.interference_radius >= 0.0) {
            return Err(param("interference_radius must be >= 0"));
        }
        if let Some(w) = &self.wifi {
            if w.width == 0 || u64::from(w.first_channel) + u64::from(w.width) > u64::from(self.channels) {
                return Err(param(format!(
                    "Wi-Fi band {}..{} does not fit in {} channels",
                    w.first_channel,
                    u64::from(w.first_channel) + u64::from(w.width),
                    self.channels
                )));
            }
            if !(0.0..=1.0).contains(&w.activity) {
                return Err(param(format!("Wi-Fi activity {} outside [0, 1]", w.activity)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FerEstimate {
    pub n_clusters: usize,
    pub master_fer: f64,
    pub master_ci95: f64,
    pub slave_fer: f64,
    pub slave_ci95: f64,
    pub frames_observed: u64,
}

impl FerEstimate {
    /// Frame error rate over both directions.
    pub fn mean_fer(&self) -> f64 {
        (self.master_fer + self.slave_fer) / 2.0
    }
}

fn stream(seed: u64, placement: usize, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((placement as u64) << 32) | index);
    rng
}

/// Error fractions `(master, slave)` for one placement.
fn run_placement(p: &FerParams, placement: usize) -> (f64, f64) {
    let mut own = stream(p.path_seed, placement, 0);
    let mut interferers: Vec<ChaCha8Rng> = (1..p.n_clusters as u64)
        .filter_map(|k| {
            let mut rng = stream(p.path_seed, placement, k);
            let d = rng.gen_range(p.dist_min..=p.dist_max);
            let _angle: f64 = rng.gen_range(0.0..TAU);
            (d <= p.interference_radius).then_some(rng)
        })
        .collect();
    let wifi = p
        .wifi
        .filter(|w| w.activity > 0.0 && w.x.hypot(w.y) <= p.interference_radius);
    let mut wifi_rng = stream(p.path_seed, placement, WIFI_STREAM);

    let mut lost = [0u64; 2];
    let mut seen = [0u64; 2];
    for slot in 0..p.slots {
        let channel = own.gen_range(0..p.channels);
        let mut hit = false;
        for rng in &mut interferers {
            hit |= rng.gen_range(0..p.channels) == channel;
        }
        if let Some(w) = &wifi {
            let u: f64 = wifi_rng.gen();
            hit |= u < w.activity && w.covers(channel);
        }
        // odd slots: slave transmits, master receives
        let role = if slot % 2 == 1 { 0 } else { 1 };
        seen[role] += 1;
        lost[role] += u64::from(hit);
    }
    (lost[0] as f64 / seen[0] as f64, lost[1] as f64 / seen[1] as f64)
}

/// Estimates master and slave frame error rates over random placements.
pub fn simulate_fer(params: &FerParams) -> Result<FerEstimate> {
    params.check()?;
    let per: Vec<(f64, f64)> = (0..params.placements)
        .into_par_iter()
        .map(|k| run_placement(params, k))
        .collect();
    let master: Vec<f64> = per.iter().map(|r| r.0).collect();
    let slave: Vec<f64> = per.iter().map(|r| r.1).collect();
    let (master_fer, master_ci95) = ci95(&master)?;
    let (slave_fer, slave_ci95) = ci95(&slave)?;
    Ok(FerEstimate {
        n_clusters: params.n_clusters,
        master_fer,
        master_ci95,
        slave_fer,
        slave_ci95,
        frames_observed: (params.placements * params.slots) as u64,
    })
}

/// One estimate per piconet count, in input order, sharing all other
/// parameters.
pub fn fer_curve(n_range: &[usize], params: &FerParams) -> Result<Vec<FerEstimate>> {
    if n_range.is_empty() {
        return Err(param("n_range must not be empty"));
    }
    n_range
        .iter()
        .map(|&n| {
            simulate_fer(&FerParams {
                n_clusters: n,
                ..params.clone()
            })
        })
        .collect()
}

/// Loss probability of a frame when `n_clusters - 1` interferers always
/// count.
pub fn forced_collision_probability(n_clusters: usize, channels: u32) -> f64 {
    let keep = (f64::from(channels) - 1.0) / f64::from(channels);
    1.0 - keep.powi(n_clusters.saturating_sub(1) as i32)
}

pub fn fer_to_pc(fer: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&fer) {
        return Err(param(format!("frame error rate {fer} outside [0, 1]")));
    }
    Ok(1.0 - fer)
}

/// Mean and Student-t 95% half-width.
pub fn ci95(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(param(format!("need at least 2 samples, got {n}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok((mean, 0.0));
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| param(e.to_string()))?
        .inverse_cdf(0.975);
    Ok((mean, t * (var / n as f64).sqrt()))
}

/// Writes `N,master_fer,master_ci95,slave_fer,slave_ci95,frames_observed`.
pub fn write_fer_csv<W: Write>(curve: &[FerEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "master_fer", "master_ci95", "slave_fer", "slave_ci95", "frames_observed"])?;
    for e in curve {
        w.write_record([
            e.n_clusters.to_string(),
            e.master_fer.to_string(),
            e.master_ci95.to_string(),
            e.slave_fer.to_string(),
            e.slave_ci95.to_string(),
            e.frames_observed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(n: usize) -> FerParams {
        FerParams {
            n_clusters: n,
            slots: 2000,
            ..FerParams::default()
        }
    }

    #[test]
    fn lone_piconet_never_loses_frames() {
        let e = simulate_fer(&quick(1)).unwrap();
        assert_eq!((e.master_fer, e.slave_fer), (0.0, 0.0));
        assert_eq!((e.master_ci95, e.slave_ci95), (0.0, 0.0));
        assert_eq!(e.frames_observed, 40_000);
    }

    #[test]
    fn forced_mode_matches_closed_form() {
        for n in [5, 10, 20] {
            let e = simulate_fer(&quick(n).forced()).unwrap();
            let p = forced_collision_probability(n, 79);
            assert!((e.master_fer - p).abs() <= e.master_ci95, "master n={n}");
            assert!((e.slave_fer - p).abs() <= e.slave_ci95, "slave n={n}");
        }
    }

    #[test]
    fn more_piconets_more_errors() {
        let a = simulate_fer(&quick(5)).unwrap();
        let b = simulate_fer(&quick(20)).unwrap();
        assert!(b.master_fer >= a.master_fer && b.slave_fer >= a.slave_fer);
    }

    #[test]
    fn pathwise_monotone_in_radius_and_wifi() {
        let small = simulate_fer(&FerParams { interference_radius: 2.0, ..quick(12) }).unwrap();
        let large = simulate_fer(&FerParams { interference_radius: 6.0, ..quick(12) }).unwrap();
        assert!(large.master_fer >= small.master_fer && large.slave_fer >= small.slave_fer);

        let mut prev = simulate_fer(&quick(12)).unwrap();
        for activity in [0.0, 0.1, 0.5, 1.0] {
            let wifi = WifiInterferer { activity, ..WifiInterferer::default() };
            let e = simulate_fer(&FerParams { wifi: Some(wifi), ..quick(12) }).unwrap();
            assert!(e.master_fer >= prev.master_fer && e.slave_fer >= prev.slave_fer);
            prev = e;
        }
    }

    #[test]
    fn wide_spectrum_dilutes_collisions() {
        let narrow = simulate_fer(&quick(10).forced()).unwrap();
        let wide = simulate_fer(&FerParams { channels: 1_000_000, ..quick(10).forced() }).unwrap();
        assert!(wide.mean_fer() < narrow.mean_fer());
    }

    #[test]
    fn thread_count_does_not_matter() {
        let p = quick(8);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = single.install(|| simulate_fer(&p)).unwrap();
        let b = simulate_fer(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ci_anchors() {
        assert_eq!(ci95(&[5.0, 5.0, 5.0, 5.0]).unwrap(), (5.0, 0.0));
        let (m, h) = ci95(&[0.0, 1.0]).unwrap();
        assert_eq!(m, 0.5);
        assert!((h - 12.706 * 0.5).abs() < 1e-3);
        assert!(ci95(&[1.0]).is_err());
    }

    #[test]
    fn ci_covers_bernoulli_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let reps = 400;
        let hits = (0..reps)
            .filter(|_| {
                let s: Vec<f64> = (0..1000).map(|_| f64::from(u8::from(rng.gen_bool(0.3)))).collect();
                let (m, h) = ci95(&s).unwrap();
                (m - 0.3).abs() <= h
            })
            .count();
        assert!(hits as f64 / reps as f64 > 0.92, "coverage {hits}/{reps}");
    }

    #[test]
    fn pc_conversion() {
        assert_eq!(fer_to_pc(0.0).unwrap(), 1.0);
        assert!((fer_to_pc(0.0068).unwrap() - 0.9932).abs() < 1e-12);
        assert_eq!(fer_to_pc(1.0).unwrap(), 0.0);
        assert!(fer_to_pc(1.5).is_err());
        assert!(fer_to_pc(-0.1).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(simulate_fer(&FerParams { placements: 1, ..quick(2) }).is_err());
        assert!(simulate_fer(&FerParams { channels: 0, ..quick(2) }).is_err());
        assert!(simulate_fer(&FerParams { dist_min: 0.0, ..quick(2) }).is_err());
        let wifi = WifiInterferer { first_channel: 70, ..WifiInterferer::default() };
        assert!(simulate_fer(&FerParams { wifi: Some(wifi), ..quick(2) }).is_err());
        assert!(fer_curve(&[], &quick(2)).is_err());
    }

    #[test]
    fn csv_header() {
        let curve = fer_curve(&[1], &quick(1)).unwrap();
        let mut buf = Vec::new();
        write_fer_csv(&curve, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "N,master_fer,master_ci95,slave_fer,slave_ci95,frames_observed\n1,0,0,0,0,40000\n");
    }
}
