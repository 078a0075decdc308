use std::sync::Arc;

use crate::brownian::{integrate_path, sample_path, Estimate, GridSpec};
use crate::error::{config, Result};
use crate::kernel::whitened_to_kernel;
use crate::lab::rate::RateReport;
use crate::parallel::chunked_fold;
use crate::rng::{derive_seed, CounterRng};

/// Default evaluation time. `2^k T` mod 1 alternates between 1/3 and 2/3, so
/// `T` is off every dyadic grid and the gap `T - k_n(T)` stays a fixed
/// multiple of `1/n` on average over consecutive levels.
pub const DEFAULT_TAMING_HORIZON: f64 = 2.0 / 3.0;

const TAMING_TAG: u64 = 0x5441_4d45; // "TAME"

type Observable = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct TamingConfig {
    pub levels: Vec<u64>,
    pub samples: usize,
    pub seed: u64,
    pub horizon: f64,
    pub d: usize,
    pub f_name: String,
    /// Function of the integral component `I_T`.
    pub f: Observable,
}

impl std::fmt::Debug for TamingConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TamingConfig")
            .field("levels", &self.levels)
            .field("samples", &self.samples)
            .field("seed", &self.seed)
            .field("horizon", &self.horizon)
            .field("d", &self.d)
            .field("f", &self.f_name)
            .finish()
    }
}

impl TamingConfig {
    /// `f = sin` of the first coordinate, `d = 1`.
    pub fn new(levels: Vec<u64>, samples: usize, seed: u64) -> Self {
        Self {
            levels,
            samples,
            seed,
            horizon: DEFAULT_TAMING_HORIZON,
            d: 1,
            f_name: "sin_x1".into(),
            f: Arc::new(|i: &[f64]| i[0].sin()),
        }
    }

    pub fn with_function(mut self, name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.f_name = name.into();
        self.f = Arc::new(f);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return config("levels must be nonempty and strictly increasing");
        }
        let top = *self.levels.last().unwrap();
        if self.levels.iter().any(|&n| n == 0 || !top.is_multiple_of(n)) {
            return config("every level must divide the finest level");
        }
        if self.samples < 2 {
            return config("taming demo needs at least 2 samples");
        }
        if self.d == 0 {
            return config("dimension must be at least 1");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return config(format!("horizon must be positive, got {}", self.horizon));
        }
        Ok(())
    }

    /// Levels on whose grid `T` lies; there both errors vanish identically.
    pub fn on_grid_levels(&self) -> Vec<u64> {
        self.levels
            .iter()
            .copied()
            .filter(|&n| {
                let k = self.horizon * n as f64;
                (k - k.round()).abs() < 1e-9
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TamingReport {
    /// `I_n = E|f(I_T) - f(I_{k_n(T)})|`.
    pub frozen: RateReport,
    /// `J_n = E|f(I_T) - f(I_{k_n(T)} + (T - k_n(T)) W_{k_n(T)})|`.
    pub shifted: RateReport,
    /// Paired estimates of `I_n - J_n`.
    pub difference: Vec<Estimate>,
    pub warnings: Vec<String>,
}

impl TamingReport {
    /// Per level, whether `J_n <= I_n` holds up to `k` standard errors of the
    /// paired difference.
    pub fn shifted_below_frozen(&self, k: f64) -> Vec<bool> {
        self.difference.iter().map(|e| e.value >= -k * e.std_error).collect()
    }
}

#[derive(Clone)]
struct Acc {
    /// Per level: sums of `a`, `a^2`, `b`, `b^2`, `a - b`, `(a - b)^2`.
    s: Vec<[f64; 6]>,
}

/// Compares the frozen value `I_{k_n(T)}` and its first-order transport
/// correction as predictors of `I_T`, on exact augmented paths.
pub fn taming_demo(cfg: &TamingConfig) -> Result<TamingReport> {
    cfg.validate()?;
    let warnings: Vec<String> = cfg
        .on_grid_levels()
        .into_iter()
        .map(|n| format!("T = {} lies on the grid of level {n}; the comparison degenerates there", cfg.horizon))
        .collect();
    let top = *cfg.levels.last().unwrap();
    let d = cfg.d;
    // fine grid up to k_N(T), then one extra increment of length T - k_N(T)
    let fine_steps = (cfg.horizon * top as f64 + 1e-9).floor() as usize;
    let tail = cfg.horizon - fine_steps as f64 / top as f64;
    let seed = derive_seed(cfg.seed, TAMING_TAG);
    let nl = cfg.levels.len();

    let acc = chunked_fold(
        cfg.samples,
        || Acc { s: vec![[0.0; 6]; nl] },
        |acc, i| {
            let (w, ints) = if fine_steps > 0 {
                let grid = GridSpec {
                    n: top,
                    horizon: fine_steps as f64 / top as f64,
                    d,
                };
                let p = integrate_path(&sample_path(grid, seed, i as u64).expect("validated grid"));
                (p.w, p.i)
            } else {
                (vec![0.0; d], vec![0.0; d])
            };
            let mut rng = CounterRng::new(seed, i as u64);
            let mut i_t = vec![0.0; d];
            for j in 0..d {
                let (xi1, xi2) = rng.normal_pair_at((fine_steps * d + j) as u64);
                let (_, di) = whitened_to_kernel(tail.max(0.0), xi1, xi2);
                i_t[j] = ints[fine_steps * d + j] + tail * w[fine_steps * d + j] + di;
            }
            let f_t = (cfg.f)(&i_t);
            let mut buf = vec![0.0; d];
            for (l, &n) in cfg.levels.iter().enumerate() {
                let k_fine = (fine_steps as u64 / (top / n) * (top / n)) as usize;
                let k_n = k_fine as f64 / top as f64;
                let gap = cfg.horizon - k_n;
                let base = &ints[k_fine * d..(k_fine + 1) * d];
                let a = (f_t - (cfg.f)(base)).abs();
                for j in 0..d {
                    buf[j] = base[j] + gap * w[k_fine * d + j];
                }
                let b = (f_t - (cfg.f)(&buf)).abs();
                let s = &mut acc.s[l];
                s[0] += a;
                s[1] += a * a;
                s[2] += b;
                s[3] += b * b;
                s[4] += a - b;
                s[5] += (a - b) * (a - b);
            }
        },
        |total, part| {
            for (t, p) in total.s.iter_mut().zip(&part.s) {
                for q in 0..6 {
                    t[q] += p[q];
                }
            }
        },
    );

    let m = cfg.samples as f64;
    let est = |sum: f64, sumsq: f64| {
        let mu = sum / m;
        let var = ((sumsq - sum * mu) / (m - 1.0)).max(0.0);
        Estimate {
            value: mu,
            std_error: (var / m).sqrt(),
        }
    };
    let frozen: Vec<Estimate> = acc.s.iter().map(|s| est(s[0], s[1])).collect();
    let shifted: Vec<Estimate> = acc.s.iter().map(|s| est(s[2], s[3])).collect();
    let difference = acc.s.iter().map(|s| est(s[4], s[5])).collect();
    let meta = |r: RateReport, which: &str| {
        r.with_meta("kind", format!("taming_{which}"))
            .with_meta("f", cfg.f_name.clone())
            .with_meta("T", cfg.horizon)
            .with_meta("samples", cfg.samples as u64)
            .with_meta("seed", cfg.seed)
            .with_meta("d", d as u64)
    };
    Ok(TamingReport {
        frozen: meta(RateReport::new(cfg.levels.clone(), frozen), "frozen"),
        shifted: meta(RateReport::new(cfg.levels.clone(), shifted), "shifted"),
        difference,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function_gives_zero() {
        let cfg = TamingConfig::new(vec![4, 8, 16], 500, 1).with_function("one", |_| 1.0);
        let r = taming_demo(&cfg).unwrap();
        assert!(r.frozen.errors.iter().chain(&r.shifted.errors).all(|e| e.value == 0.0));
    }

    #[test]
    fn on_grid_horizon_warns() {
        let mut cfg = TamingConfig::new(vec![4, 8, 16], 200, 1);
        cfg.horizon = 0.625;
        let r = taming_demo(&cfg).unwrap();
        assert_eq!(r.warnings.len(), 2);
        assert_eq!(r.frozen.errors[1].value, 0.0);
    }

    #[test]
    fn levels_must_nest() {
        assert!(taming_demo(&TamingConfig::new(vec![4, 6, 16], 200, 1)).is_err());
    }
}
