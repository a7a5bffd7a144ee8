use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Duration;

use piconet_core::exact::lp::export_lp;
use piconet_core::interference::CALIBRATED_RADIUS;
use piconet_core::metrics::{
    read_energy_table_csv, reference_table, table_cluster_counts, write_rows_csv, ComparisonRow, EfficiencyRow,
    MAX_CALIBRATION_RESIDUAL,
};
use piconet_core::model::{DEFAULT_BATTERY_THRESHOLD, DEFAULT_D_MAX, DEFAULT_FIXED_COST};
use piconet_core::*;
use std::result::Result;

use crate::settings::{parse_area, parse_counts, parse_reals, Settings};
use crate::CliError;

type Outcome = Result<String, CliError>;

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn out_dir(s: &Settings) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(s.raw("out").unwrap_or("."));
    fs::create_dir_all(&dir).map_err(|e| config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn gen_params(s: &Settings, n: usize) -> Result<GenParams, CliError> {
    let (area_width, area_height) = s.with("area", "10x20", parse_area)?;
    Ok(GenParams {
        n,
        area_width,
        area_height,
        seed: s.get("seed", 1u64)?,
        wifi_prob: s.get("wifi-prob", 1.0)?,
        battery_low: s.get("battery-low", 50.0)?,
        battery_high: s.get("battery-high", 100.0)?,
    })
}

fn load_instance(path: &str) -> Result<Instance, CliError> {
    Instance::load(path).map_err(|e| config(format!("cannot load instance {path}: {e}")))
}

/// The `--instance` file when given, otherwise a generated field.
fn instance_or_generated(s: &Settings, n_default: usize) -> Result<Instance, CliError> {
    let params = gen_params(s, s.get("n", n_default)?)?;
    match s.raw("instance") {
        Some(path) => load_instance(path),
        None => Ok(generate_instance(&params)?),
    }
}

fn model_settings(s: &Settings) -> Result<(f64, f64, f64), CliError> {
    let f = s.get("f-cost", DEFAULT_FIXED_COST)?;
    let d = s.get("d-max", DEFAULT_D_MAX)?;
    let t = s.get("threshold", DEFAULT_BATTERY_THRESHOLD)?;
    if !(f >= 0.0) {
        return Err(config(format!("f-cost {f} must be >= 0")));
    }
    if !(d > 0.0) {
        return Err(config(format!("d-max {d} must be > 0")));
    }
    if !(0.0..=100.0).contains(&t) {
        return Err(config(format!("threshold {t} outside [0, 100]")));
    }
    Ok((f, d, t))
}

fn time_limit(s: &Settings) -> Result<Duration, CliError> {
    let secs: f64 = s.get("time-limit", 60.0)?;
    Duration::try_from_secs_f64(secs).map_err(|e| config(format!("time-limit {secs}: {e}")))
}

fn load_energy(s: &Settings) -> Result<EnergyParams, CliError> {
    let params = match s.raw("energy") {
        None => EnergyParams::calibrated(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| config(format!("cannot read {path}: {e}")))?;
            match serde_json::from_str::<Calibration>(&text) {
                Ok(c) => c.params,
                Err(_) => serde_json::from_str::<EnergyParams>(&text)
                    .map_err(|e| config(format!("{path} holds no energy parameters: {e}")))?,
            }
        }
    };
    params.check()?;
    Ok(params)
}

fn fer_base(s: &Settings) -> Result<FerParams, CliError> {
    Ok(FerParams {
        interference_radius: s.get("radius", CALIBRATED_RADIUS)?,
        slots: s.get("slots", 10_000usize)?,
        placements: s.get("placements", 20usize)?,
        path_seed: s.get("seed", 1u64)?,
        ..FerParams::default()
    })
}

pub fn generate(s: &Settings) -> Outcome {
    let params = gen_params(s, s.get("n", 100)?)?;
    let dir = out_dir(s)?;
    let inst = generate_instance(&params)?;
    let path = dir.join("instance.json");
    inst.save(&path)?;
    Ok(format!("wrote {} nodes to {}\n", inst.len(), path.display()))
}

pub fn solve(s: &Settings) -> Outcome {
    let path = s.raw("instance").ok_or_else(|| config("solve needs --instance"))?;
    let scenario: u8 = s.get("scenario", 3)?;
    let objective = Objective::from_scenario(scenario).ok_or_else(|| config(format!("scenario {scenario} is not 1, 2 or 3")))?;
    let method = s.raw("method").unwrap_or("exact").to_string();
    if !["exact", "heuristic", "export-lp"].contains(&method.as_str()) {
        return Err(config(format!("method `{method}` is not exact, heuristic or export-lp")));
    }
    let (f, d, t) = model_settings(s)?;
    let limit = time_limit(s)?;
    let dir = out_dir(s)?;
    let inst = load_instance(path)?;
    let model = build_model(&inst, objective, f, d, t);

    if method == "export-lp" {
        let lp = dir.join("model.lp");
        export_lp(&model, &lp)?;
        return Ok(format!("wrote {}\n", lp.display()));
    }

    let (asg, z, optimal, explored) = if method == "exact" {
        let sol = solve_exact(&model, limit)?;
        (sol.assignment, sol.z, Some(sol.optimal), Some(sol.nodes_explored))
    } else {
        let asg = iterative_cluster(&inst, d, t);
        let z = model.evaluate(&asg);
        (asg, z, None, None)
    };
    let csv_path = dir.join("solution.csv");
    write_assignment_csv(&asg, create(&csv_path)?)?;
    let uncovered = asg.uncovered();
    let summary = serde_json::json!({
        "scenario": scenario,
        "method": method,
        "z": z,
        "distance_term": asg.distance_term(&model.c),
        "cluster_count": asg.cluster_count(),
        "optimal": optimal,
        "nodes_explored": explored,
        "uncovered": uncovered.iter().map(|i| i + 1).collect::<Vec<_>>(),
    });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary).expect("json") + "\n")?;
    if let Some(&i) = uncovered.first() {
        return Err(CliError::Infeasible { node: i + 1 });
    }

    let mut text = String::new();
    let _ = writeln!(text, "scenario {scenario} ({}), method {method}", objective.name());
    let _ = writeln!(text, "z = {z}");
    let _ = writeln!(text, "distance_term = {}", asg.distance_term(&model.c));
    let _ = writeln!(text, "cluster_count = {}", asg.cluster_count());
    match optimal {
        Some(true) => text.push_str("optimal = true\n"),
        Some(false) => text.push_str("optimal = false (time limit reached, best incumbent shown)\n"),
        None => {}
    }
    Ok(text)
}

pub fn sweep(s: &Settings) -> Outcome {
    let mut spec = match s.raw("sweep").unwrap_or("dmax") {
        "dmax" => SweepSpec::d_max_default(),
        "fexp" => SweepSpec::f_exponent_default(),
        other => return Err(config(format!("sweep `{other}` is not dmax or fexp"))),
    };
    if s.raw("values").is_some() {
        spec.values = s.with("values", "", parse_reals)?;
    }
    let (f, d, t) = model_settings(s)?;
    spec.fixed_cost = f;
    spec.d_max = d;
    spec.battery_threshold = t;
    spec.time_limit = time_limit(s)?;
    spec.check()?;
    let dir = out_dir(s)?;
    let inst = instance_or_generated(s, 60)?;

    let points = run_sweep(&inst, &spec)?;
    let path = dir.join("sweep.csv");
    write_sweep_csv(&points, create(&path)?)?;
    let mut text = String::new();
    for p in &points {
        match &p.solution {
            Some(sol) => {
                let _ = writeln!(
                    text,
                    "{:>6}: clusters {:>3}  distance {:>10.3}  z {}{}",
                    p.value,
                    sol.cluster_count,
                    sol.distance_term,
                    sol.z,
                    if sol.optimal { "" } else { " (not proven)" }
                );
            }
            None => {
                let _ = writeln!(text, "{:>6}: infeasible (node {})", p.value, p.infeasible_node.unwrap_or(0));
            }
        }
    }
    let _ = writeln!(text, "wrote {}", path.display());
    Ok(text)
}

pub fn fer(s: &Settings) -> Outcome {
    let ns = s.with("n-clusters", "2..30", parse_counts)?;
    let mut params = fer_base(s)?;
    params.channels = s.get("channels", params.channels)?;
    let wifi = WifiInterferer {
        activity: s.get("wifi-activity", WifiInterferer::default().activity)?,
        width: s.get("wifi-width", WifiInterferer::default().width)?,
        ..WifiInterferer::default()
    };
    params.wifi = (!s.flag("no-wifi")?).then_some(wifi);
    if s.flag("forced")? {
        params = params.forced();
    }
    params.check()?;
    if ns.contains(&0) {
        return Err(config("n-clusters values must be >= 1"));
    }
    let dir = out_dir(s)?;

    let curve = fer_curve(&ns, &params)?;
    let path = dir.join("fer.csv");
    interference::write_fer_csv(&curve, create(&path)?)?;
    let mut text = String::new();
    for e in &curve {
        let _ = writeln!(
            text,
            "N {:>3}: master {:.5} ± {:.5}  slave {:.5} ± {:.5}",
            e.n_clusters, e.master_fer, e.master_ci95, e.slave_fer, e.slave_ci95
        );
    }
    let _ = writeln!(text, "wrote {}", path.display());
    Ok(text)
}

fn mean_ci(values: &[f64]) -> (f64, f64) {
    match ci95(values) {
        Ok(r) => r,
        Err(_) => (values.iter().sum::<f64>() / values.len().max(1) as f64, f64::NAN),
    }
}

pub fn compare(s: &Settings) -> Outcome {
    let ns = s.with("n", "25,50,75,100", parse_counts)?;
    let base = gen_params(s, 0)?;
    let reps: usize = s.get("reps", 10)?;
    if reps == 0 {
        return Err(config("reps must be >= 1"));
    }
    let (f, d, t) = model_settings(s)?;
    let opts = CompareOptions {
        fixed_cost: f,
        d_max: d,
        battery_threshold: t,
        rounds: s.get("rounds", 1)?,
        exact_limit: s.get("exact-limit", 60)?,
        time_limit: time_limit(s)?,
    };
    let energy = load_energy(s)?;
    let fer_params = fer_base(s)?;
    FerParams { n_clusters: 1, ..fer_params.clone() }.check()?;
    let dir = out_dir(s)?;

    let cache: RefCell<BTreeMap<usize, f64>> = RefCell::new(BTreeMap::new());
    let lookup = |k: usize| -> f64 {
        *cache.borrow_mut().entry(k).or_insert_with(|| {
            simulate_fer(&FerParams { n_clusters: k.max(1), ..fer_params.clone() })
                .expect("parameters checked")
                .mean_fer()
        })
    };

    let mut t1_mean = Vec::new();
    let mut t1_ci = Vec::new();
    let mut t2_mean = Vec::new();
    let mut t2_ci = Vec::new();
    let mut failures = Vec::new();
    let mut text = String::new();
    for &n in &ns {
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        for rep in 0..reps {
            let seed = base.seed.wrapping_add(rep as u64);
            let inst = generate_instance(&GenParams { n, seed, ..base.clone() })?;
            match compare_methods(&inst, &energy, &TrafficSpec::default(), &lookup, &opts) {
                Ok(c) => {
                    t1.push(c.comparison_row()?);
                    t2.push(c.efficiency_row());
                }
                Err(e) => failures.push((n, seed, e.to_string())),
            }
        }
        if t1.is_empty() {
            let _ = writeln!(text, "n {n}: every seed failed");
            continue;
        }
        let col = |get: &dyn Fn(&ComparisonRow) -> f64| mean_ci(&t1.iter().map(get).collect::<Vec<_>>());
        let cols = [
            col(&|r| r.te_heuristic),
            col(&|r| r.te_direct),
            col(&|r| r.te_exact),
            col(&|r| r.pct_heuristic),
            col(&|r| r.pct_direct),
        ];
        t1_mean.push(ComparisonRow {
            n,
            te_heuristic: cols[0].0,
            te_direct: cols[1].0,
            te_exact: cols[2].0,
            pct_heuristic: cols[3].0,
            pct_direct: cols[4].0,
        });
        t1_ci.push(ComparisonRow {
            n,
            te_heuristic: cols[0].1,
            te_direct: cols[1].1,
            te_exact: cols[2].1,
            pct_heuristic: cols[3].1,
            pct_direct: cols[4].1,
        });
        let col = |get: &dyn Fn(&EfficiencyRow) -> f64| mean_ci(&t2.iter().map(get).collect::<Vec<_>>());
        let cols = [
            col(&|r| r.tp_cluster),
            col(&|r| r.tp_direct),
            col(&|r| r.te_cluster),
            col(&|r| r.te_direct),
            col(&|r| r.eff_cluster),
            col(&|r| r.eff_direct),
        ];
        t2_mean.push(EfficiencyRow {
            n,
            tp_cluster: cols[0].0,
            tp_direct: cols[1].0,
            te_cluster: cols[2].0,
            te_direct: cols[3].0,
            eff_cluster: cols[4].0,
            eff_direct: cols[5].0,
        });
        t2_ci.push(EfficiencyRow {
            n,
            tp_cluster: cols[0].1,
            tp_direct: cols[1].1,
            te_cluster: cols[2].1,
            te_direct: cols[3].1,
            eff_cluster: cols[4].1,
            eff_direct: cols[5].1,
        });
        let m = t1_mean.last().expect("just pushed");
        let e = t2_mean.last().expect("just pushed");
        let _ = writeln!(
            text,
            "n {n:>4}: TE heuristic {:.2}  direct {:.2}  exact {:.2}  (+{:.2}% / +{:.2}%)  eff {:.1} vs {:.1}{}",
            m.te_heuristic,
            m.te_direct,
            m.te_exact,
            m.pct_heuristic,
            m.pct_direct,
            e.eff_cluster,
            e.eff_direct,
            if n > opts.exact_limit { "  [exact column = heuristic, n above exact limit]" } else { "" }
        );
    }
    write_rows_csv(&t1_mean, create(&dir.join("comparison.csv"))?)?;
    write_rows_csv(&t1_ci, create(&dir.join("comparison_ci95.csv"))?)?;
    write_rows_csv(&t2_mean, create(&dir.join("efficiency.csv"))?)?;
    write_rows_csv(&t2_ci, create(&dir.join("efficiency_ci95.csv"))?)?;
    if !failures.is_empty() {
        let mut body = String::from("n,seed,error\n");
        for (n, seed, e) in &failures {
            let _ = writeln!(body, "{n},{seed},\"{}\"", e.replace('"', "'"));
            let _ = writeln!(text, "n {n} seed {seed} failed: {e}");
        }
        fs::write(dir.join("failures.csv"), body)?;
    }
    let _ = writeln!(text, "wrote comparison and efficiency tables to {}", dir.display());
    Ok(text)
}

pub fn calibrate(s: &Settings) -> Outcome {
    let rows = match s.raw("table") {
        None => reference_table(),
        Some(path) => {
            let file = File::open(path).map_err(|e| config(format!("cannot open {path}: {e}")))?;
            read_energy_table_csv(file).map_err(|e| config(format!("cannot read {path}: {e}")))?
        }
    };
    let dir = out_dir(s)?;
    let cal = calibrate_energy(&rows, &table_cluster_counts(&rows))?;
    let worst = cal.max_relative_residual();
    if !(worst <= MAX_CALIBRATION_RESIDUAL) {
        return Err(config(format!(
            "fit rejected: relative residual {:.1}% exceeds {:.0}%",
            100.0 * worst,
            100.0 * MAX_CALIBRATION_RESIDUAL
        )));
    }
    let path = dir.join("energy.json");
    fs::write(&path, serde_json::to_string_pretty(&cal).expect("json") + "\n")?;
    let p = cal.params;
    let mut text = format!(
        "e_ch = {}\ne_cm = {}\ne_idle = {}\ne_direct = {}\n",
        p.e_ch, p.e_cm, p.e_idle, p.e_direct
    );
    for r in &cal.residuals {
        let _ = writeln!(text, "n {:>4}: observed {:>8.2}  fitted {:>8.2}  ({:+.2}%)", r.n, r.observed, r.fitted, 100.0 * r.relative);
    }
    let _ = writeln!(text, "wrote {}", path.display());
    Ok(text)
}

pub fn trace(s: &Settings) -> Outcome {
    let rounds: usize = s.get("rounds", 10)?;
    let (_, d, t) = model_settings(s)?;
    let speed_min = s.get("speed-min", 0.0)?;
    let speed_max = s.get("speed-max", 1.0)?;
    let pause = s.get("pause-prob", 0.0)?;
    let mobility = match s.raw("mobility").unwrap_or("static") {
        "static" => MobilityModel::fixed(),
        "waypoint" => MobilityModel::random_waypoint(speed_min, speed_max, pause),
        other => return Err(config(format!("mobility `{other}` is not static or waypoint"))),
    };
    mobility.check()?;
    let energy = load_energy(s)?;
    let base = DrainModel::from_energy(&energy, s.get("battery-capacity", 100.0)?)?;
    let drain = DrainModel {
        master: s.get("drain-master", base.master)?,
        member: s.get("drain-member", base.member)?,
        idle: s.get("drain-idle", base.idle)?,
    };
    drain.check()?;
    if rounds == 0 {
        return Err(config("rounds must be >= 1"));
    }
    let seed: u64 = s.get("seed", 1)?;
    let dir = out_dir(s)?;
    let inst = instance_or_generated(s, 60)?;

    let traces = recluster_rounds(&inst, rounds, d, t, &mobility, &drain, seed)?;
    let path = dir.join("trace.csv");
    write_trace_csv(&traces, create(&path)?)?;
    let mut text = String::new();
    for tr in &traces {
        let _ = writeln!(
            text,
            "round {:>3}: {} masters, {} uncovered",
            tr.round,
            tr.master_set.len(),
            tr.uncovered.len()
        );
    }
    let e = total_energy(&traces, &energy);
    let _ = writeln!(text, "energy {:.3} J (heads {:.3}, members {:.3}, idle {:.3})", e.te, e.te_ch, e.te_cm, e.te_idle);
    let _ = writeln!(text, "wrote {}", path.display());
    Ok(text)
}
