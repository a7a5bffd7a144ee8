use std::io::Write;
use std::time::Duration;

use super::{build_model, solve_exact, Objective, Solution};
use crate::error::{param, Error, Result};
use crate::model::{Instance, DEFAULT_BATTERY_THRESHOLD, DEFAULT_D_MAX, DEFAULT_FIXED_COST};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Range cap in meters.
    DMax,
    /// Exponent `E` with fixed cost `F = 10^E`.
    FExponent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    /// Fixed cost used while sweeping `d_max`.
    pub fixed_cost: f64,
    /// Range cap used while sweeping `F`.
    pub d_max: f64,
    pub battery_threshold: f64,
    /// Per-point solver budget.
    pub time_limit: Duration,
}

impl SweepSpec {
    /// `d_max` from 2 m to 10 m in 1 m steps.
    pub fn d_max_default() -> Self {
        SweepSpec {
            variable: SweepVariable::DMax,
            values: (2..=10).map(f64::from).collect(),
            fixed_cost: DEFAULT_FIXED_COST,
            d_max: DEFAULT_D_MAX,
            battery_threshold: DEFAULT_BATTERY_THRESHOLD,
            time_limit: Duration::from_secs(60),
        }
    }

    /// `F = 10^E` for `E = 0..=10`.
    pub fn f_exponent_default() -> Self {
        SweepSpec {
            variable: SweepVariable::FExponent,
            values: (0..=10).map(f64::from).collect(),
            ..Self::d_max_default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(param("sweep needs at least one value"));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(param("sweep values must be strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    /// `None` when the model is infeasible at this value.
    pub solution: Option<Solution>,
    /// 1-based id of an uncoverable node when infeasible.
    pub infeasible_node: Option<usize>,
}

fn power_of_ten(e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < 300.0 {
        10f64.powi(e as i32)
    } else {
        10f64.powf(e)
    }
}

/// Solves the combined-objective model once per sweep value. Infeasible
/// points are recorded, not raised.
pub fn run_sweep(inst: &Instance, sweep: &SweepSpec) -> Result<Vec<SweepPoint>> {
    sweep.check()?;
    let mut out = Vec::with_capacity(sweep.values.len());
    for &value in &sweep.values {
        let (f, d) = match sweep.variable {
            SweepVariable::DMax => (sweep.fixed_cost, value),
            SweepVariable::FExponent => (power_of_ten(value), sweep.d_max),
        };
        let model = build_model(inst, Objective::Combined, f, d, sweep.battery_threshold);
        let point = match solve_exact(&model, sweep.time_limit) {
            Ok(s) => SweepPoint {
                value,
                solution: Some(s),
                infeasible_node: None,
            },
            Err(Error::Infeasible { node }) => SweepPoint {
                value,
                solution: None,
                infeasible_node: Some(node),
            },
            Err(e) => return Err(e),
        };
        out.push(point);
    }
    Ok(out)
}

/// Writes `value,cluster_count,distance_term,z,feasible`; infeasible rows
/// leave the numeric cells empty.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "cluster_count", "distance_term", "z", "feasible"])?;
    for p in points {
        let cells = match &p.solution {
            Some(s) => [
                s.cluster_count.to_string(),
                s.distance_term.to_string(),
                s.z.to_string(),
                "true".to_string(),
            ],
            None => [String::new(), String::new(), String::new(), "false".to_string()],
        };
        let mut row = vec![p.value.to_string()];
        row.extend(cells);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
