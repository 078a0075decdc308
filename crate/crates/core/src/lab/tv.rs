use crate::brownian::{sample_path, GridSpec};
use crate::drift::{mollify, DriftSpec};
use crate::error::{config, Result};
use crate::integrator::{check_theta, 
    check_reference_levels, integrate_observed, InitialCondition, SchemeConfig, DEFAULT_QUAD_ORDER,
    DEFAULT_REFERENCE_LEVEL,
};
use crate::parallel::map_indexed;
use crate::rng::derive_seed;

const TV_REF_TAG: u64 = 0x0054_5652_4546; // "TVREF"
const TV_LVL_TAG: u64 = 0x0054_564c_564c; // "TVLVL"

/// Half the L1 distance between the bin frequencies of two samples on a
/// common grid, with the value expected from multinomial noise alone.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HistogramTv {
    pub bins: usize,
    pub estimate: f64,
    /// `sum_k sqrt(p_k (1/M_a + 1/M_b) / (2 pi))`, the mean of the estimate
    /// when both samples share the law `p` (pooled frequencies plugged in).
    pub noise_floor: f64,
}

/// Inner cut points at the pooled `j / bins` quantiles; the outer cells are
/// unbounded.
fn quantile_edges(values: &mut [f64], bins: usize) -> Vec<f64> {
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len();
    (1..bins).map(|j| values[(j * m / bins).min(m - 1)]).collect()
}

fn cell(edges: &[f64], s: f64) -> usize {
    edges.partition_point(|&e| e <= s)
}

/// Histogram estimate of the total variation distance between the laws of
/// two samples of `(x, v)` pairs on a `bins x bins` grid.
pub fn histogram_tv(a: &[(f64, f64)], b: &[(f64, f64)], bins: usize) -> Result<HistogramTv> {
    if bins < 2 {
        return config("histogram needs at least 2 bins per axis");
    }
    if a.is_empty() || b.is_empty() {
        return config("histogram needs nonempty samples");
    }
    let mut xs: Vec<f64> = a.iter().chain(b).map(|z| z.0).collect();
    let mut vs: Vec<f64> = a.iter().chain(b).map(|z| z.1).collect();
    let ex = quantile_edges(&mut xs, bins);
    let ev = quantile_edges(&mut vs, bins);
    let count = |sample: &[(f64, f64)]| {
        let mut h = vec![0u64; bins * bins];
        for &(x, v) in sample {
            h[cell(&ex, x) * bins + cell(&ev, v)] += 1;
        }
        h
    };
    let (ha, hb) = (count(a), count(b));
    let (ma, mb) = (a.len() as f64, b.len() as f64);
    let mut estimate = 0.0;
    let mut noise_floor = 0.0;
    for (ca, cb) in ha.iter().zip(&hb) {
        let (pa, pb) = (*ca as f64 / ma, *cb as f64 / mb);
        estimate += 0.5 * (pa - pb).abs();
        let p = (*ca + *cb) as f64 / (ma + mb);
        noise_floor += (p * (1.0 / ma + 1.0 / mb) / (2.0 * std::f64::consts::PI)).sqrt();
    }
    Ok(HistogramTv {
        bins,
        estimate,
        noise_floor,
    })
}

#[derive(Debug, Clone)]
pub struct TvConfig {
    pub drift: DriftSpec,
    pub theta: f64,
    pub n: u64,
    pub n_ref: u64,
    pub t: f64,
    pub bins: usize,
    pub samples: usize,
    pub seed: u64,
    pub quad_order: usize,
    pub initial: InitialCondition,
}

impl TvConfig {
    pub fn new(drift: DriftSpec, n: u64, bins: usize, samples: usize, seed: u64) -> Self {
        Self {
            drift,
            theta: 0.5,
            n,
            n_ref: DEFAULT_REFERENCE_LEVEL,
            t: 1.0,
            bins,
            samples,
            seed,
            quad_order: DEFAULT_QUAD_ORDER,
            initial: InitialCondition::origin(1),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.bins < 8 {
            return config(format!("need at least 8 bins per axis, got {}", self.bins));
        }
        if self.samples < 10 * self.bins * self.bins {
            return config(format!(
                "{} samples are too few for {} x {} bins (need at least {})",
                self.samples,
                self.bins,
                self.bins,
                10 * self.bins * self.bins
            ));
        }
        check_reference_levels(self.n_ref, &[self.n])?;
        for n in [self.n, self.n_ref] {
            let k = self.t * n as f64;
            if !(self.t > 0.0 && self.t <= 1.0) || (k - k.round()).abs() > 1e-9 {
                return config(format!("time {} is not a grid point of level {n} in (0, 1]", self.t));
            }
        }
        if let InitialCondition::Point(z) = &self.initial {
            if z.dim() != 1 {
                return config("histogram TV is only supported for d = 1");
            }
        }
        self.drift.validate(1)?;
        check_theta(&self.drift, self.theta, 1)
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TvReport {
    pub n: u64,
    pub n_ref: u64,
    pub t: f64,
    pub samples: usize,
    /// At the configured bin count.
    pub primary: HistogramTv,
    /// Bin sensitivity diagnostic at twice the bin count.
    pub refined: HistogramTv,
}

fn terminal_states(cfg: &TvConfig, n: u64, seed: u64) -> Result<Vec<(f64, f64)>> {
    let grid = GridSpec::unit(n, 1)?;
    let md = mollify(&cfg.drift, n, cfg.theta)?;
    let scheme = SchemeConfig {
        grid,
        theta: cfg.theta,
        quad_order: cfg.quad_order,
        initial: cfg.initial.clone(),
    };
    let k_t = (cfg.t * n as f64).round() as usize;
    map_indexed(cfg.samples, |i| {
        let path = sample_path(grid, seed, i as u64)?;
        let mut z = (0.0, 0.0);
        integrate_observed(&scheme, &md, &path, |k, x, v| {
            if k == k_t {
                z = (x[0], v[0]);
            }
        })?;
        Ok(z)
    })
    .into_iter()
    .collect()
}

/// Biased histogram proxy for the total variation distance between the law
/// of the scheme at level `n` and an independent reference at `n_ref`, both
/// at time `t`, for `d = 1`.
pub fn tv_proxy(cfg: &TvConfig) -> Result<TvReport> {
    cfg.validate()?;
    let reference = terminal_states(cfg, cfg.n_ref, derive_seed(cfg.seed, TV_REF_TAG))?;
    let coarse = terminal_states(cfg, cfg.n, derive_seed(cfg.seed, TV_LVL_TAG))?;
    Ok(TvReport {
        n: cfg.n,
        n_ref: cfg.n_ref,
        t: cfg.t,
        samples: cfg.samples,
        primary: histogram_tv(&coarse, &reference, cfg.bins)?,
        refined: histogram_tv(&coarse, &reference, 2 * cfg.bins)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn gaussian_sample(seed: u64, m: usize, shift: f64) -> Vec<(f64, f64)> {
        let mut rng = CounterRng::new(seed, 0);
        (0..m)
            .map(|_| {
                let (a, b) = rng.normal_pair();
                (a + shift, b)
            })
            .collect()
    }

    #[test]
    fn identical_samples_have_zero_distance() {
        let a = gaussian_sample(1, 5000, 0.0);
        let r = histogram_tv(&a, &a, 8).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert!(r.noise_floor > 0.0);
    }

    #[test]
    fn independent_samples_sit_near_the_noise_floor() {
        let a = gaussian_sample(1, 20_000, 0.0);
        let b = gaussian_sample(2, 20_000, 0.0);
        let r = histogram_tv(&a, &b, 10).unwrap();
        assert!(r.estimate < 1.5 * r.noise_floor && r.estimate > 0.5 * r.noise_floor, "{r:?}");
    }

    #[test]
    fn shifted_law_is_detected() {
        let a = gaussian_sample(1, 20_000, 0.0);
        let b = gaussian_sample(2, 20_000, 1.0);
        let r = histogram_tv(&a, &b, 10).unwrap();
        // exact TV of N(0,1) vs N(1,1) is 2 Phi(1/2) - 1 = 0.3829
        assert!(r.estimate > 0.3 && r.estimate < 0.4, "{r:?}");
    }

    #[test]
    fn rejects_bad_configurations() {
        let cfg = TvConfig::new(DriftSpec::Zero, 8, 4, 10_000, 0);
        assert!(tv_proxy(&cfg).is_err());
        let cfg = TvConfig::new(DriftSpec::Zero, 8, 8, 100, 0);
        assert!(tv_proxy(&cfg).is_err());
        let mut cfg = TvConfig::new(DriftSpec::Zero, 8, 8, 1000, 0);
        cfg.initial = InitialCondition::origin(2);
        assert!(tv_proxy(&cfg).is_err());
    }
}
