use crate::brownian::{coarsen_into, integrate_path, sample_path, AugmentedPath, Estimate, GridSpec};
use crate::drift::{mollify, DriftSpec, MollifiedDrift};
use crate::error::{config, Result};
use crate::integrator::{check_theta, 
    check_reference_levels, exact_linear_solve, integrate, integrate_observed, InitialCondition, SchemeConfig,
    Trajectory, DEFAULT_QUAD_ORDER, DEFAULT_REFERENCE_LEVEL,
};
use crate::lab::rate::RateReport;
use crate::parallel::map_indexed;
use crate::rng::{derive_seed, CounterRng};
use crate::state::PhaseState;

pub const BOOTSTRAP_RESAMPLES: usize = 200;

const PATH_TAG: u64 = 0x5354_524f_4e47; // "STRONG"
const BOOTSTRAP_TAG: u64 = 0x424f_4f54; // "BOOT"

/// What the coarse levels are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// The same tamed scheme at `n_ref`.
    SelfScheme,
    /// The exact kinetic Ornstein-Uhlenbeck solution; requires linear friction.
    ExactLinear,
}

#[derive(Debug, Clone)]
pub struct StrongErrorConfig {
    pub drift: DriftSpec,
    pub theta: f64,
    pub levels: Vec<u64>,
    pub n_ref: u64,
    pub reference: ReferenceKind,
    /// Moment order `m` of the `L^m(Omega)` norm.
    pub moment: f64,
    pub samples: usize,
    pub seed: u64,
    pub d: usize,
    pub quad_order: usize,
    pub initial: PhaseState,
}

impl StrongErrorConfig {
    pub fn new(drift: DriftSpec, levels: Vec<u64>, samples: usize, seed: u64) -> Self {
        Self {
            drift,
            theta: 0.5,
            levels,
            n_ref: DEFAULT_REFERENCE_LEVEL,
            reference: ReferenceKind::SelfScheme,
            moment: 2.0,
            samples,
            seed,
            d: 1,
            quad_order: DEFAULT_QUAD_ORDER,
            initial: PhaseState::zeros(1),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples < 100 {
            return config(format!("strong error needs at least 100 samples, got {}", self.samples));
        }
        if !(self.moment >= 1.0) {
            return config(format!("moment order must be at least 1, got {}", self.moment));
        }
        if let Some(label) = self.drift.regularity_label() {
            let cap = label.p_x.min(label.p_v) - 1.0;
            if self.moment > cap {
                return config(format!(
                    "moment order {} exceeds min(p_x, p_v) - 1 = {cap} for {}",
                    self.moment,
                    self.drift.id()
                ));
            }
        }
        if self.levels.is_empty() || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return config("levels must be nonempty and strictly increasing");
        }
        if self.initial.dim() != self.d {
            return config("initial state dimension does not match d");
        }
        check_reference_levels(self.n_ref, &self.levels)?;
        if self.reference == ReferenceKind::ExactLinear && !matches!(self.drift, DriftSpec::LinearFriction { .. }) {
            return config("the exact reference is only available for linear friction");
        }
        self.drift.validate(self.d)?;
        check_theta(&self.drift, self.theta, self.d)
    }
}

/// `(E e^m)^{1/m}` and its bootstrap standard error.
pub fn lm_norm_with_bootstrap(samples: &[f64], m: f64, resamples: usize, seed: u64, stream: u64) -> Estimate {
    let lm = |it: &mut dyn Iterator<Item = f64>, count: usize| -> f64 {
        (it.map(|e| e.powf(m)).sum::<f64>() / count as f64).powf(1.0 / m)
    };
    let count = samples.len();
    let value = lm(&mut samples.iter().copied(), count);
    let mut rng = CounterRng::new(derive_seed(seed, BOOTSTRAP_TAG), stream);
    let boots: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut draw = (0..count).map(|_| samples[((rng.uniform() * count as f64) as usize).min(count - 1)]);
            lm(&mut draw, count)
        })
        .collect();
    let mean = boots.iter().sum::<f64>() / resamples as f64;
    let var = boots.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (resamples as f64 - 1.0);
    Estimate {
        value,
        std_error: var.sqrt(),
    }
}

struct Level {
    n: u64,
    factor: usize,
    md: MollifiedDrift,
    cfg: SchemeConfig,
}

/// Strong error `|| sup_k |Z^ref_{t_k} - Z^n_{t_k}| ||_{L^m}` over the coarse
/// grid of each level, every level driven by the coarsened reference path.
pub fn strong_error(cfg: &StrongErrorConfig) -> Result<RateReport> {
    cfg.validate()?;
    let ref_grid = GridSpec::unit(cfg.n_ref, cfg.d)?;
    let initial = InitialCondition::Point(cfg.initial.clone());
    let levels: Vec<Level> = cfg
        .levels
        .iter()
        .map(|&n| {
            Ok(Level {
                n,
                factor: (cfg.n_ref / n) as usize,
                md: mollify(&cfg.drift, n, cfg.theta)?,
                cfg: SchemeConfig {
                    grid: GridSpec::unit(n, cfg.d)?,
                    theta: cfg.theta,
                    quad_order: cfg.quad_order,
                    initial: initial.clone(),
                },
            })
        })
        .collect::<Result<_>>()?;
    let ref_md = mollify(&cfg.drift, cfg.n_ref, cfg.theta)?;
    let ref_cfg = SchemeConfig {
        grid: ref_grid,
        theta: cfg.theta,
        quad_order: cfg.quad_order,
        initial: initial.clone(),
    };
    let path_seed = derive_seed(cfg.seed, PATH_TAG);
    let reference = |path: &AugmentedPath| -> Result<Trajectory> {
        match (cfg.reference, &cfg.drift) {
            (ReferenceKind::ExactLinear, DriftSpec::LinearFriction { gamma }) => {
                exact_linear_solve(*gamma, &cfg.initial, path)
            }
            _ => integrate(&ref_cfg, &ref_md, path),
        }
    };

    // Coupling guard: the coarsened paths must reproduce the fine (W, I).
    {
        let fine = sample_path(ref_grid, path_seed, 0)?;
        let fine_int = integrate_path(&fine);
        for lvl in &levels {
            let mut coarse = AugmentedPath::zeros(lvl.cfg.grid);
            coarsen_into(&fine, lvl.factor, &mut coarse)?;
            let coarse_int = integrate_path(&coarse);
            for k in 0..coarse_int.len() {
                let kf = k * lvl.factor;
                for j in 0..cfg.d {
                    let dev = (coarse_int.w_at(k)[j] - fine_int.w_at(kf)[j])
                        .abs()
                        .max((coarse_int.i_at(k)[j] - fine_int.i_at(kf)[j]).abs());
                    if dev > 1e-10 {
                        return config(format!("coarsened path at level {} deviates by {dev}", lvl.n));
                    }
                }
            }
        }
    }

    let per_sample: Vec<Result<Vec<f64>>> = map_indexed(cfg.samples, |i| {
        let fine = sample_path(ref_grid, path_seed, i as u64)?;
        let z_ref = reference(&fine)?;
        let d = cfg.d;
        let mut coarse = AugmentedPath::zeros(levels[0].cfg.grid);
        levels
            .iter()
            .map(|lvl| {
                coarsen_into(&fine, lvl.factor, &mut coarse)?;
                let mut sup = 0.0f64;
                integrate_observed(&lvl.cfg, &lvl.md, &coarse, |k, x, v| {
                    let kf = k * lvl.factor;
                    let mut sq = 0.0;
                    for j in 0..d {
                        sq += (x[j] - z_ref.x[kf * d + j]).powi(2) + (v[j] - z_ref.v[kf * d + j]).powi(2);
                    }
                    sup = sup.max(sq.sqrt());
                })?;
                Ok(sup)
            })
            .collect()
    });
    let per_sample: Vec<Vec<f64>> = per_sample.into_iter().collect::<Result<_>>()?;

    let errors = (0..levels.len())
        .map(|l| {
            let col: Vec<f64> = per_sample.iter().map(|s| s[l]).collect();
            lm_norm_with_bootstrap(&col, cfg.moment, BOOTSTRAP_RESAMPLES, cfg.seed, l as u64)
        })
        .collect();
    let reference_name = match cfg.reference {
        ReferenceKind::SelfScheme => format!("self(n_ref={})", cfg.n_ref),
        ReferenceKind::ExactLinear => format!("exact_linear(n_ref={})", cfg.n_ref),
    };
    Ok(RateReport::new(cfg.levels.clone(), errors)
        .with_meta("kind", "strong")
        .with_meta("drift", cfg.drift.id())
        .with_meta("theta", cfg.theta)
        .with_meta("m", cfg.moment)
        .with_meta("samples", cfg.samples as u64)
        .with_meta("seed", cfg.seed)
        .with_meta("n_ref", cfg.n_ref)
        .with_meta("reference", reference_name)
        .with_meta("d", cfg.d as u64)
        .with_meta("quad_order", cfg.quad_order as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bootstrap_of_constant_sample_has_zero_error() {
        let e = lm_norm_with_bootstrap(&[0.5; 50], 2.0, 20, 1, 0);
        assert!((e.value - 0.5).abs() < 1e-15);
        assert!(e.std_error < 1e-15);
    }

    #[test]
    fn configuration_errors() {
        let mut cfg = StrongErrorConfig::new(DriftSpec::Zero, vec![4, 8, 16], 99, 0);
        cfg.n_ref = 64;
        assert!(strong_error(&cfg).is_err());
        cfg.samples = 100;
        cfg.n_ref = 48;
        assert!(strong_error(&cfg).is_err());
        cfg.n_ref = 64;
        cfg.moment = 0.5;
        assert!(strong_error(&cfg).is_err());
        cfg.moment = 2.0;
        cfg.reference = ReferenceKind::ExactLinear;
        assert!(strong_error(&cfg).is_err());
    }

    #[test]
    fn moment_is_capped_by_the_regularity_label() {
        // sign_velocity carries p = (inf, 5)
        let mut cfg = StrongErrorConfig::new(DriftSpec::SignVelocity, vec![4, 8, 16], 100, 0);
        cfg.n_ref = 64;
        cfg.moment = 4.5;
        assert!(strong_error(&cfg).is_err());
        cfg.moment = 4.0;
        assert!(strong_error(&cfg).is_ok());
        // a = (3, 1), p = (inf, 5): theta must stay below 2.5
        cfg.theta = 2.5;
        assert!(strong_error(&cfg).is_err());
    }

    #[test]
    fn zero_drift_is_exact() {
        let mut cfg = StrongErrorConfig::new(DriftSpec::Zero, vec![4, 8, 16], 100, 3);
        cfg.n_ref = 64;
        let r = strong_error(&cfg).unwrap();
        assert!(r.errors.iter().all(|e| e.value < 1e-11));
        assert!(r.is_exact());
    }
}
