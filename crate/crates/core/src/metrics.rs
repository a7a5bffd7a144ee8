//! Energy, throughput and efficiency accounting for clustered and direct
//! operation, energy-rate calibration, and method comparison.
//!
//! Energy per round is charged by role: masters pay `e_ch`, members `e_cm`,
//! uncovered nodes `e_idle`; in direct mode every node pays `e_direct`.
//! Throughput is `R * CS * FS * Pc` bits with `CS` the number of transmitting
//! nodes, and efficiency is bits per Joule.

use std::io::{Read, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::exact::{build_model, min_cluster_lower_bound, solve_exact, Objective};
use crate::heuristic::{iterative_cluster, RoundTrace};
use crate::interference::fer_to_pc;
use crate::model::{ClusterAssignment, Instance};

/// Largest relative residual a calibration may leave before it is rejected.
pub const MAX_CALIBRATION_RESIDUAL: f64 = 0.10;

/// Energy per node per round, in Joules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub e_ch: f64,
    pub e_cm: f64,
    pub e_idle: f64,
    pub e_direct: f64,
}

impl EnergyParams {
    /// Rates fitted to the built-in reference table.
    pub fn calibrated() -> Self {
        calibrate_energy(&reference_table(), &REFERENCE_CLUSTER_COUNTS)
            .expect("reference table is well conditioned")
            .params
    }

    pub fn check(&self) -> Result<()> {
        let all = [self.e_ch, self.e_cm, self.e_idle, self.e_direct];
        if all.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(param("energy rates must be finite and >= 0"));
        }
        if self.e_ch < self.e_cm {
            return Err(param(format!(
                "cluster-head energy {} is below member energy {}",
                self.e_ch, self.e_cm
            )));
        }
        Ok(())
    }
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams::calibrated()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    pub rate_kbps: f64,
    pub frame_size: f64,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        TrafficSpec {
            rate_kbps: 1000.0,
            frame_size: 160.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub te: f64,
    pub te_ch: f64,
    pub te_cm: f64,
    pub te_idle: f64,
}

impl EnergyBreakdown {
    fn from_parts(te_ch: f64, te_cm: f64, te_idle: f64) -> Self {
        EnergyBreakdown {
            te: te_ch + te_cm + te_idle,
            te_ch,
            te_cm,
            te_idle,
        }
    }
}

/// Energy of holding one assignment for `rounds` rounds.
pub fn assignment_energy(asg: &ClusterAssignment, params: &EnergyParams, rounds: usize) -> EnergyBreakdown {
    let r = rounds as f64;
    EnergyBreakdown::from_parts(
        r * asg.cluster_count() as f64 * params.e_ch,
        r * asg.member_count() as f64 * params.e_cm,
        r * asg.uncovered().len() as f64 * params.e_idle,
    )
}

/// Energy summed over a sequence of rounds.
pub fn total_energy(traces: &[RoundTrace], params: &EnergyParams) -> EnergyBreakdown {
    let (mut ch, mut cm, mut idle) = (0.0, 0.0, 0.0);
    for t in traces {
        let e = assignment_energy(&t.assignment, params, 1);
        ch += e.te_ch;
        cm += e.te_cm;
        idle += e.te_idle;
    }
    EnergyBreakdown::from_parts(ch, cm, idle)
}

pub fn direct_energy(n: usize, rounds: usize, params: &EnergyParams) -> f64 {
    n as f64 * rounds as f64 * params.e_direct
}

/// Successfully received bits.
pub fn throughput(rounds: f64, senders: f64, frame_bits: f64, pc: f64) -> f64 {
    rounds * senders * frame_bits * pc
}

/// Bits per Joule.
pub fn efficiency(tp: f64, te: f64) -> Result<f64> {
    if te == 0.0 {
        return Err(Error::UndefinedRatio(format!("throughput {tp} over zero energy")));
    }
    Ok(tp / te)
}

/// One row of the energy comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTableRow {
    pub n: usize,
    pub te_heuristic: f64,
    pub te_direct: f64,
    pub te_optimal: f64,
    /// Master count of the optimum, when known.
    #[serde(default)]
    pub clusters: Option<usize>,
}

/// Published energy comparison used for the default calibration.
pub fn reference_table() -> Vec<EnergyTableRow> {
    let rows = [
        (100, 50.8, 238.41, 49.9),
        (200, 97.9, 476.82, 96.4),
        (300, 145.9, 715.23, 144.2),
        (400, 191.2, 953.64, 189.5),
        (500, 237.8, 1192.05, 236.6),
        (600, 284.1, 1430.46, 283.2),
        (700, 330.1, 1668.87, 329.7),
        (800, 374.4, 1907.28, 374.4),
    ];
    rows.iter()
        .zip(REFERENCE_CLUSTER_COUNTS)
        .map(|(&(n, te_heuristic, te_direct, te_optimal), m)| EnergyTableRow {
            n,
            te_heuristic,
            te_direct,
            te_optimal,
            clusters: Some(m),
        })
        .collect()
}

/// Optimal master counts behind [`reference_table`].
pub const REFERENCE_CLUSTER_COUNTS: [usize; 8] = [14, 25, 38, 50, 63, 75, 88, 100];

pub fn read_energy_table_csv<R: Read>(input: R) -> Result<Vec<EnergyTableRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<EnergyTableRow>, _>>()?;
    Ok(rows)
}

pub fn write_energy_table_csv<W: Write>(rows: &[EnergyTableRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "te_heuristic", "te_direct", "te_optimal", "clusters"])?;
    for r in rows {
        let clusters = r.clusters.map(|m| m.to_string()).unwrap_or_default();
        w.write_record([
            r.n.to_string(),
            r.te_heuristic.to_string(),
            r.te_direct.to_string(),
            r.te_optimal.to_string(),
            clusters,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub n: usize,
    pub observed: f64,
    pub fitted: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub params: EnergyParams,
    pub residuals: Vec<Residual>,
}

impl Calibration {
    pub fn max_relative_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.relative.abs()).fold(0.0, f64::max)
    }
}

/// Fits energy rates to a comparison table.
///
/// `e_direct` is the mean of `te_direct / n`. `(e_ch, e_cm)` minimize the
/// squared error of `m e_ch + (n - m) e_cm` against `te_optimal` subject to
/// both being nonnegative, where `m` is the row's master count.
/// `e_idle` is set to `e_cm / 2`.
pub fn calibrate_energy(rows: &[EnergyTableRow], cluster_counts: &[usize]) -> Result<Calibration> {
    if rows.len() < 2 {
        return Err(Error::Calibration(format!("need at least 2 rows, got {}", rows.len())));
    }
    if rows.len() != cluster_counts.len() {
        return Err(Error::Calibration(format!(
            "{} rows but {} cluster counts",
            rows.len(),
            cluster_counts.len()
        )));
    }
    for (r, &m) in rows.iter().zip(cluster_counts) {
        if r.n == 0 || m == 0 || m > r.n {
            return Err(Error::Calibration(format!("row n={} has invalid master count {m}", r.n)));
        }
    }
    let e_direct = rows.iter().map(|r| r.te_direct / r.n as f64).sum::<f64>() / rows.len() as f64;

    let design: Vec<(f64, f64, f64)> = rows
        .iter()
        .zip(cluster_counts)
        .map(|(r, &m)| (m as f64, (r.n - m) as f64, r.te_optimal))
        .collect();
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(p, q, y) in &design {
        a11 += p * p;
        a12 += p * q;
        a22 += q * q;
        b1 += p * y;
        b2 += q * y;
    }
    let det = a11 * a22 - a12 * a12;
    if det <= 1e-12 * a11 * a22 {
        return Err(Error::Calibration("rows are collinear; rates are not identifiable".into()));
    }
    let sse = |ch: f64, cm: f64| design.iter().map(|&(p, q, y)| (p * ch + q * cm - y).powi(2)).sum::<f64>();
    let free = ((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det);
    let (e_ch, e_cm) = if free.0 >= 0.0 && free.1 >= 0.0 {
        free
    } else {
        let only_ch = ((b1 / a11).max(0.0), 0.0);
        let only_cm = (0.0, (b2 / a22).max(0.0));
        if sse(only_ch.0, only_ch.1) <= sse(only_cm.0, only_cm.1) {
            only_ch
        } else {
            only_cm
        }
    };

    let residuals = rows
        .iter()
        .zip(&design)
        .map(|(r, &(p, q, y))| {
            let fitted = p * e_ch + q * e_cm;
            Residual {
                n: r.n,
                observed: y,
                fitted,
                relative: if y != 0.0 { (fitted - y) / y } else { f64::INFINITY },
            }
        })
        .collect();
    Ok(Calibration {
        params: EnergyParams {
            e_ch,
            e_cm,
            e_idle: e_cm / 2.0,
            e_direct,
        },
        residuals,
    })
}

/// Master counts for calibration: the table's own column where present,
/// otherwise `ceil(n / 8)`.
pub fn table_cluster_counts(rows: &[EnergyTableRow]) -> Vec<usize> {
    rows.iter()
        .map(|r| r.clusters.unwrap_or_else(|| min_cluster_lower_bound(r.n)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Direct,
    Heuristic,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub n: usize,
    pub method: Method,
    pub energy: EnergyBreakdown,
    pub throughput: f64,
    pub efficiency: f64,
    pub rounds: usize,
    pub cluster_size_total: usize,
    pub frame_size: f64,
    pub pc: f64,
    pub cluster_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub fixed_cost: f64,
    pub d_max: f64,
    pub battery_threshold: f64,
    pub rounds: usize,
    /// Largest instance solved exactly; above it the heuristic stands in.
    pub exact_limit: usize,
    pub time_limit: Duration,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            fixed_cost: crate::model::DEFAULT_FIXED_COST,
            d_max: crate::model::DEFAULT_D_MAX,
            battery_threshold: crate::model::DEFAULT_BATTERY_THRESHOLD,
            rounds: 1,
            exact_limit: 60,
            time_limit: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub n: usize,
    pub records: Vec<MetricsRecord>,
    /// The exact row holds the heuristic because the instance exceeded the
    /// exact limit.
    pub exact_substituted: bool,
    /// Whether the exact solve finished within its time limit.
    pub exact_optimal: bool,
}

impl Comparison {
    pub fn record(&self, method: Method) -> &MetricsRecord {
        self.records
            .iter()
            .find(|r| r.method == method)
            .expect("comparison holds every method")
    }

    /// Energy above the exact row, in percent.
    pub fn pct_vs_exact(&self, method: Method) -> Result<f64> {
        let exact = self.record(Method::Exact).energy.te;
        let te = self.record(method).energy.te;
        if exact == 0.0 {
            return Err(Error::UndefinedRatio("exact energy is zero".into()));
        }
        Ok(100.0 * (te - exact) / exact)
    }

    pub fn comparison_row(&self) -> Result<ComparisonRow> {
        Ok(ComparisonRow {
            n: self.n,
            te_heuristic: self.record(Method::Heuristic).energy.te,
            te_direct: self.record(Method::Direct).energy.te,
            te_exact: self.record(Method::Exact).energy.te,
            pct_heuristic: self.pct_vs_exact(Method::Heuristic)?,
            pct_direct: self.pct_vs_exact(Method::Direct)?,
        })
    }

    /// Clustering columns use the heuristic row.
    pub fn efficiency_row(&self) -> EfficiencyRow {
        let c = self.record(Method::Heuristic);
        let d = self.record(Method::Direct);
        EfficiencyRow {
            n: self.n,
            tp_cluster: c.throughput,
            tp_direct: d.throughput,
            te_cluster: c.energy.te,
            te_direct: d.energy.te,
            eff_cluster: c.efficiency,
            eff_direct: d.efficiency,
        }
    }
}

/// Direct, heuristic and exact metrics on one instance. Clustered rows take
/// `Pc = 1 - fer_lookup(cluster_count)`; the direct row uses `Pc = 1`.
pub fn compare_methods(
    inst: &Instance,
    params: &EnergyParams,
    traffic: &TrafficSpec,
    fer_lookup: &dyn Fn(usize) -> f64,
    opts: &CompareOptions,
) -> Result<Comparison> {
    params.check()?;
    if !(traffic.frame_size > 0.0) {
        return Err(param(format!("frame size {} must be > 0", traffic.frame_size)));
    }
    let n = inst.len();
    let rounds = opts.rounds;

    let clustered = |method: Method, asg: &ClusterAssignment| -> Result<MetricsRecord> {
        let energy = assignment_energy(asg, params, rounds);
        let pc = fer_to_pc(fer_lookup(asg.cluster_count()))?;
        let senders = n - asg.uncovered().len();
        let tp = throughput(rounds as f64, senders as f64, traffic.frame_size, pc);
        Ok(MetricsRecord {
            n,
            method,
            energy,
            throughput: tp,
            efficiency: efficiency(tp, energy.te)?,
            rounds,
            cluster_size_total: senders,
            frame_size: traffic.frame_size,
            pc,
            cluster_count: asg.cluster_count(),
        })
    };

    let te_direct = direct_energy(n, rounds, params);
    let tp_direct = throughput(rounds as f64, n as f64, traffic.frame_size, 1.0);
    let direct = MetricsRecord {
        n,
        method: Method::Direct,
        energy: EnergyBreakdown {
            te: te_direct,
            ..EnergyBreakdown::default()
        },
        throughput: tp_direct,
        efficiency: efficiency(tp_direct, te_direct)?,
        rounds,
        cluster_size_total: n,
        frame_size: traffic.frame_size,
        pc: 1.0,
        cluster_count: 0,
    };

    let heuristic_asg = iterative_cluster(inst, opts.d_max, opts.battery_threshold);
    let heuristic = clustered(Method::Heuristic, &heuristic_asg)?;

    let substituted = n > opts.exact_limit;
    let (exact_asg, exact_optimal) = if substituted {
        (heuristic_asg, false)
    } else {
        let model = build_model(inst, Objective::Combined, opts.fixed_cost, opts.d_max, opts.battery_threshold);
        let s = solve_exact(&model, opts.time_limit)?;
        (s.assignment, s.optimal)
    };
    let exact = clustered(Method::Exact, &exact_asg)?;

    Ok(Comparison {
        n,
        records: vec![direct, heuristic, exact],
        exact_substituted: substituted,
        exact_optimal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub te_heuristic: f64,
    pub te_direct: f64,
    pub te_exact: f64,
    pub pct_heuristic: f64,
    pub pct_direct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub n: usize,
    pub tp_cluster: f64,
    pub tp_direct: f64,
    pub te_cluster: f64,
    pub te_direct: f64,
    pub eff_cluster: f64,
    pub eff_direct: f64,
}

/// Writes rows as CSV with a header of the struct's field names.
pub fn write_rows_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
