use anyhow::Result;

use kinetic_em::brownian::{covariance_estimate, increment_identity_test, sample_path, GridSpec};
use kinetic_em::kernel::{kernel_density, mixed_lp_norm, MixedExponent, TensorGrid, KERNEL_GRID_RADIUS};
use kinetic_em::rng::{derive_seed, CounterRng};
use kinetic_em::state::PhaseState;

use crate::config::KernelCheckConfig;

#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    pub fn new(name: impl Into<String>, value: f64, tolerance: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass,
        }
    }
}

fn density(t: f64, x: &[f64], v: &[f64]) -> f64 {
    kernel_density(t, &PhaseState::new(x.to_vec(), v.to_vec()).expect("grid point")).expect("positive time")
}

fn grid_points(d: usize) -> usize {
    match d {
        1 => 257,
        2 => 41,
        _ => 13,
    }
}

/// Normalization, scaling identity, norm-decay exponents and the covariance
/// structure of sampled increments.
pub fn run_kernel_checks(cfg: &KernelCheckConfig) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for &d in &cfg.dims {
        let points = grid_points(d);
        let mut worst = 0.0f64;
        for &t in &cfg.times {
            let g = TensorGrid::for_kernel(t, d, points, KERNEL_GRID_RADIUS)?.sample(|x, v| density(t, x, v));
            worst = worst.max((mixed_lp_norm(&g, MixedExponent::new(1.0, 1.0)?)? - 1.0).abs());
        }
        rows.push(CheckRow::new(format!("normalization d={d}"), worst, cfg.mass_tolerance, worst < cfg.mass_tolerance));

        let mut rng = CounterRng::new(derive_seed(cfg.seed, 0x5343_414c_45), d as u64);
        let mut worst = 0.0f64;
        for _ in 0..cfg.probes {
            let t = 0.05 + 4.0 * rng.uniform();
            let (sx, sv) = ((t.powi(3) / 3.0).sqrt(), t.sqrt());
            let x: Vec<f64> = (0..d).map(|_| 2.0 * sx * rng.normal_pair().0).collect();
            let v: Vec<f64> = (0..d).map(|_| 2.0 * sv * rng.normal_pair().0).collect();
            let xs: Vec<f64> = x.iter().map(|a| a * t.powf(-1.5)).collect();
            let vs: Vec<f64> = v.iter().map(|a| a * t.powf(-0.5)).collect();
            let lhs = density(t, &x, &v);
            let rhs = t.powi(-2 * d as i32) * density(1.0, &xs, &vs);
            worst = worst.max(((lhs - rhs) / rhs).abs());
        }
        rows.push(CheckRow::new(format!("scaling d={d}"), worst, cfg.scaling_tolerance, worst < cfg.scaling_tolerance));

        for (px, pv) in [(1.0, 1.0), (2.0, 2.0), (f64::INFINITY, f64::INFINITY)] {
            let p = MixedExponent::new(px, pv)?;
            let pts = cfg
                .times
                .iter()
                .map(|&t| {
                    let g = TensorGrid::for_kernel(t, d, points, KERNEL_GRID_RADIUS)?.sample(|x, v| density(t, x, v));
                    Ok((t.ln(), mixed_lp_norm(&g, p)?.ln()))
                })
                .collect::<Result<Vec<(f64, f64)>>>()?;
            let k = pts.len() as f64;
            let mx = pts.iter().map(|a| a.0).sum::<f64>() / k;
            let my = pts.iter().map(|a| a.1).sum::<f64>() / k;
            let slope = pts.iter().map(|a| (a.0 - mx) * (a.1 - my)).sum::<f64>()
                / pts.iter().map(|a| (a.0 - mx).powi(2)).sum::<f64>();
            let target = -p.kernel_decay_exponent(d);
            let tol = cfg.exponent_tolerance * target.abs().max(1.0);
            rows.push(CheckRow::new(
                format!("decay exponent d={d} p=({px};{pv}) target={target}"),
                slope,
                tol,
                (slope - target).abs() <= tol,
            ));
        }

        let grid = GridSpec::unit(16, d)?;
        let reports = increment_identity_test(grid, 5, 13, cfg.samples, derive_seed(cfg.seed, 0x494e_4352))?;
        let cov_z = reports.iter().map(|r| r.max_covariance_z()).fold(0.0, f64::max);
        let cross_z = reports.iter().map(|r| r.max_cross_z()).fold(0.0, f64::max);
        rows.push(CheckRow::new(format!("increment covariance z d={d}"), cov_z, cfg.z_tolerance, cov_z <= cfg.z_tolerance));
        rows.push(CheckRow::new(format!("increment independence z d={d}"), cross_z, cfg.z_tolerance, cross_z <= cfg.z_tolerance));
    }

    let h = 1.0 / 64.0;
    let grid = GridSpec::new(64, h, 1)?;
    let seed = derive_seed(cfg.seed, 0x5341_4d50);
    let (mut dw, mut di) = (Vec::with_capacity(cfg.samples), Vec::with_capacity(cfg.samples));
    for s in 0..cfg.samples as u64 {
        let p = sample_path(grid, seed, s)?;
        dw.push(p.dw[0]);
        di.push(p.di[0]);
    }
    for (name, est, target) in [
        ("sampler Var dW z", covariance_estimate(&dw, &dw), h),
        ("sampler Var dI z", covariance_estimate(&di, &di), h.powi(3) / 3.0),
        ("sampler Cov z", covariance_estimate(&dw, &di), h * h / 2.0),
    ] {
        let z = est.z_score(target);
        rows.push(CheckRow::new(name, z, cfg.z_tolerance, z <= cfg.z_tolerance));
    }
    Ok(rows)
}
