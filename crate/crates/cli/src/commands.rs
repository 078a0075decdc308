use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use serde_json::json;

use kinetic_em::brownian::{coarsen, sample_path, GridSpec};
use kinetic_em::drift::mollify;
use kinetic_em::integrator::{integrate, SchemeConfig};
use kinetic_em::lab::{
    strong_error, taming_demo, tv_proxy, weak_error, RateReport, ReferenceKind, StrongErrorConfig, TamingConfig,
    TestFunctionSet, TvConfig, WeakErrorConfig,
};

use crate::config::{
    ReferenceChoice, SimulateConfig, SlopeChecks, StrongRateConfig, TamingDemoConfig, TamingFunction, TvProxyConfig,
    WeakRateConfig,
};
use crate::kernel_check::run_kernel_checks;
pub use crate::kernel_check::CheckRow;
use crate::config::KernelCheckConfig;
use crate::output::Run;

/// Result of one subcommand: written files and the outcome of its checks.
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub checks: Vec<CheckRow>,
    /// Lines for standard output.
    pub summary: String,
}

impl Outcome {
    pub fn failures(&self) -> Vec<&CheckRow> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

fn csv_bytes(r: &RateReport) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.write_csv(&mut buf)?;
    Ok(buf)
}

fn slope_checks(label: &str, r: &RateReport, checks: &SlopeChecks) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    if let Some(min) = checks.min_slope {
        let value = r.slope.unwrap_or(f64::NAN);
        rows.push(CheckRow::new(format!("{label} slope >= {min}"), value, min, value >= min));
    }
    if let Some(max) = checks.max_slope_se {
        let value = r.slope_se.unwrap_or(f64::NAN);
        rows.push(CheckRow::new(format!("{label} slope_se < {max}"), value, max, value < max));
    }
    rows
}

fn slope_line(label: &str, r: &RateReport) -> String {
    match (r.slope, r.slope_se) {
        (Some(s), Some(se)) => format!("{label},{s},{se}"),
        _ => format!("{label},{},", r.fit_status),
    }
}

pub fn simulate(cfg: &SimulateConfig, base: &Path, out: &Path) -> Result<Outcome> {
    let drift = cfg.drift.build(base)?;
    drift.validate(cfg.d)?;
    let grid = GridSpec::new(cfg.n, cfg.horizon, cfg.d)?;
    let path_level = cfg.path_level.unwrap_or(cfg.n);
    if !path_level.is_multiple_of(cfg.n) {
        bail!("path_level {path_level} is not a multiple of n = {}", cfg.n);
    }
    let fine_grid = GridSpec::new(path_level, cfg.horizon, cfg.d)?;
    let scheme = SchemeConfig {
        grid,
        theta: cfg.theta,
        quad_order: cfg.quad_order,
        initial: cfg.start.initial(cfg.d)?,
    };
    scheme.check_admissible(&drift)?;
    let md = mollify(&drift, cfg.n, cfg.theta)?;
    let mut run = Run::new(out, "simulate", cfg, cfg.seed, &cfg.drift.files(base))?;
    let mut files = Vec::new();
    for stream in cfg.first_stream..cfg.first_stream + cfg.paths {
        let fine = sample_path(fine_grid, cfg.seed, stream)?;
        let path = coarsen(&fine, (path_level / cfg.n) as usize)?;
        let traj = integrate(&scheme, &md, &path)?;
        let mut buf = Vec::new();
        traj.write_csv(&mut buf)?;
        files.push(run.write(&format!("path{stream}"), "csv", &buf)?);
    }
    let summary = format!("wrote {} trajectories (drift {}, n = {})", cfg.paths, drift.id(), cfg.n);
    files.push(run.finish()?);
    Ok(Outcome {
        files,
        checks: Vec::new(),
        summary,
    })
}

pub fn strong_rate(cfg: &StrongRateConfig, base: &Path, out: &Path) -> Result<Outcome> {
    let drift = cfg.drift.build(base)?;
    let mut lab = StrongErrorConfig::new(drift, cfg.levels.clone(), cfg.samples, cfg.seed);
    lab.theta = cfg.theta;
    lab.n_ref = cfg.n_ref;
    lab.moment = cfg.moment;
    lab.d = cfg.d;
    lab.quad_order = cfg.quad_order;
    lab.initial = cfg.start.state(cfg.d)?;
    lab.reference = match cfg.reference {
        ReferenceChoice::SelfScheme => ReferenceKind::SelfScheme,
        ReferenceChoice::ExactLinear => ReferenceKind::ExactLinear,
    };
    let mut run = Run::new(out, "strong-rate", cfg, cfg.seed, &cfg.drift.files(base))?;
    let report = strong_error(&lab)?;
    let files = vec![
        run.write("", "csv", &csv_bytes(&report)?)?,
        run.write_json("summary", &report.summary_json())?,
        run.finish()?,
    ];
    Ok(Outcome {
        files,
        checks: slope_checks("strong", &report, &cfg.checks),
        summary: format!("quantity,slope,slope_se\n{}", slope_line("strong", &report)),
    })
}

pub fn weak_rate(cfg: &WeakRateConfig, base: &Path, out: &Path) -> Result<Outcome> {
    let drift = cfg.drift.build(base)?;
    let mut lab = WeakErrorConfig::new(drift, cfg.levels.clone(), cfg.samples, cfg.seed);
    lab.theta = cfg.theta;
    lab.n_ref = cfg.n_ref;
    lab.t_eval = cfg.t_eval.clone();
    lab.ref_samples = cfg.ref_samples;
    lab.d = cfg.d;
    lab.quad_order = cfg.quad_order;
    lab.initial = cfg.start.initial(cfg.d)?;
    let standard = TestFunctionSet::standard(cfg.d);
    lab.fset = match &cfg.functions {
        None => standard,
        Some(names) => {
            let picked = names
                .iter()
                .map(|n| {
                    standard
                        .functions
                        .iter()
                        .find(|f| &f.name == n)
                        .cloned()
                        .ok_or_else(|| anyhow::anyhow!("unknown test function {n:?}"))
                })
                .collect::<Result<Vec<_>>>()?;
            TestFunctionSet::new(picked, cfg.d)?
        }
    };
    let mut run = Run::new(out, "weak-rate", cfg, cfg.seed, &cfg.drift.files(base))?;
    let report = weak_error(&lab)?;
    let mut files = Vec::new();
    let mut per_function = String::from("t,function,n,difference,se\n");
    let mut summary = String::from("quantity,slope,slope_se\n");
    let mut checks = Vec::new();
    for (i, tr) in report.times.iter().enumerate() {
        files.push(run.write(&format!("t{i}"), "csv", &csv_bytes(&tr.aggregate)?)?);
        for (name, es) in &tr.per_function {
            for (n, e) in cfg.levels.iter().zip(es) {
                writeln!(per_function, "{},{name},{n},{},{}", tr.t, e.value, e.std_error)?;
            }
        }
        writeln!(summary, "{}", slope_line(&format!("weak(t={})", tr.t), &tr.aggregate))?;
        checks.extend(slope_checks(&format!("weak(t={})", tr.t), &tr.aggregate, &cfg.checks));
    }
    let mut integrated = String::from("n,integrated_squared_error\n");
    for (n, v) in cfg.levels.iter().zip(&report.time_integrated) {
        writeln!(integrated, "{n},{v}")?;
    }
    files.push(run.write("functions", "csv", per_function.as_bytes())?);
    files.push(run.write("integrated", "csv", integrated.as_bytes())?);
    let times: Vec<_> = report
        .times
        .iter()
        .map(|tr| json!({"t": tr.t, "aggregate": tr.aggregate.summary_json(), "argmax": tr.argmax}))
        .collect();
    files.push(run.write_json("summary", &json!({"times": times, "time_integrated": report.time_integrated}))?);
    files.push(run.finish()?);
    Ok(Outcome { files, checks, summary })
}

pub fn taming(cfg: &TamingDemoConfig, out: &Path) -> Result<Outcome> {
    let mut lab = TamingConfig::new(cfg.levels.clone(), cfg.samples, cfg.seed);
    lab.horizon = cfg.horizon;
    lab.d = cfg.d;
    lab = match cfg.function {
        TamingFunction::Sin => lab,
        TamingFunction::Cos => lab.with_function("cos_x1", |i| i[0].cos()),
        TamingFunction::Constant => lab.with_function("constant", |_| 1.0),
    };
    let mut run = Run::new(out, "taming-demo", cfg, cfg.seed, &[])?;
    let report = taming_demo(&lab)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut table = String::from("n,frozen,frozen_se,shifted,shifted_se,difference,difference_se\n");
    for (l, n) in cfg.levels.iter().enumerate() {
        let (a, b, c) = (report.frozen.errors[l], report.shifted.errors[l], report.difference[l]);
        writeln!(
            table,
            "{n},{},{},{},{},{},{}",
            a.value, a.std_error, b.value, b.std_error, c.value, c.std_error
        )?;
    }
    let files = vec![
        run.write("frozen", "csv", &csv_bytes(&report.frozen)?)?,
        run.write("shifted", "csv", &csv_bytes(&report.shifted)?)?,
        run.write("table", "csv", table.as_bytes())?,
        run.write_json(
            "summary",
            &json!({
                "frozen": report.frozen.summary_json(),
                "shifted": report.shifted.summary_json(),
                "warnings": report.warnings,
            }),
        )?,
        run.finish()?,
    ];
    let mut checks = slope_checks("frozen", &report.frozen, &cfg.checks_frozen);
    checks.extend(slope_checks("shifted", &report.shifted, &cfg.checks_shifted));
    if cfg.require_faster_shifted {
        let (sf, ss) = (report.frozen.slope.unwrap_or(f64::NAN), report.shifted.slope.unwrap_or(f64::NAN));
        checks.push(CheckRow::new("slope(shifted) > slope(frozen)", ss, sf, ss > sf));
    }
    let summary = format!(
        "quantity,slope,slope_se\n{}\n{}",
        slope_line("I_n", &report.frozen),
        slope_line("J_n", &report.shifted)
    );
    Ok(Outcome { files, checks, summary })
}

pub fn kernel_check(cfg: &KernelCheckConfig, out: &Path) -> Result<Outcome> {
    let mut run = Run::new(out, "kernel-check", cfg, cfg.seed, &[])?;
    let checks = run_kernel_checks(cfg)?;
    let mut table = String::from("check,value,tolerance,pass\n");
    for c in &checks {
        writeln!(table, "{},{},{},{}", c.name, c.value, c.tolerance, c.pass)?;
    }
    let files = vec![run.write("", "csv", table.as_bytes())?, run.finish()?];
    Ok(Outcome {
        files,
        summary: table.trim_end().to_string(),
        checks,
    })
}

pub fn tv(cfg: &TvProxyConfig, base: &Path, out: &Path) -> Result<Outcome> {
    let drift = cfg.drift.build(base)?;
    let mut run = Run::new(out, "tv-proxy", cfg, cfg.seed, &cfg.drift.files(base))?;
    let mut table = String::from("n,estimate,noise_floor,estimate_2bins,noise_floor_2bins\n");
    let mut reports = Vec::new();
    for (l, &n) in cfg.levels.iter().enumerate() {
        let mut lab = TvConfig::new(drift.clone(), n, cfg.bins, cfg.samples, cfg.seed.wrapping_add(l as u64));
        lab.theta = cfg.theta;
        lab.n_ref = cfg.n_ref;
        lab.t = cfg.t;
        lab.quad_order = cfg.quad_order;
        lab.initial = cfg.start.initial(1)?;
        let r = tv_proxy(&lab)?;
        writeln!(
            table,
            "{n},{},{},{},{}",
            r.primary.estimate, r.primary.noise_floor, r.refined.estimate, r.refined.noise_floor
        )?;
        reports.push(r);
    }
    let files = vec![
        run.write("", "csv", table.as_bytes())?,
        run.write_json("summary", &json!({"biased": true, "levels": reports}))?,
        run.finish()?,
    ];
    Ok(Outcome {
        files,
        checks: Vec::new(),
        summary: table.trim_end().to_string(),
    })
}
