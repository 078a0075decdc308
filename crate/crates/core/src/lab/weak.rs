use std::sync::Arc;

use crate::brownian::{AugmentedPath, Estimate, GridSpec};
use crate::drift::{mollify, DriftSpec, MollifiedDrift};
use crate::error::{config, Error, Result};
use crate::integrator::{check_theta, 
    check_reference_levels, integrate_observed, InitialCondition, SchemeConfig, DEFAULT_QUAD_ORDER,
    DEFAULT_REFERENCE_LEVEL,
};
use crate::lab::rate::RateReport;
use crate::parallel::chunked_fold;
use crate::rng::{derive_seed, CounterRng};

const REFERENCE_TAG: u64 = 0x0057_4541_4b52_4546; // "WEAKREF"
const LEVEL_TAG: u64 = 0x0057_4541_4b4c_564c; // "WEAKLVL"
const PROBE_TAG: u64 = 0x0050_524f_4245; // "PROBE"

type Observable = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A named bounded observable `f(x, v)`.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    f: Observable,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).finish()
    }
}

impl TestFunction {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], v: &[f64]) -> f64 {
        (self.f)(x, v)
    }
}

#[derive(Debug, Clone)]
pub struct TestFunctionSet {
    pub functions: Vec<TestFunction>,
}

fn coord_mean(a: &[f64], g: impl Fn(f64) -> f64) -> f64 {
    a.iter().map(|&s| g(s)).sum::<f64>() / a.len() as f64
}

impl TestFunctionSet {
    /// Rejects sets containing an observable that exceeds 1 in absolute
    /// value on the probe set.
    pub fn new(functions: Vec<TestFunction>, d: usize) -> Result<Self> {
        let set = Self { functions };
        set.check_bounded(d)?;
        Ok(set)
    }

    /// Eight observables, each a coordinate average of a scalar profile
    /// bounded by 1.
    pub fn standard(d: usize) -> Self {
        let functions = vec![
            TestFunction::new("sin_v", |_, v| coord_mean(v, f64::sin)),
            TestFunction::new("cos_v", |_, v| coord_mean(v, f64::cos)),
            TestFunction::new("sin_x", |x, _| coord_mean(x, f64::sin)),
            TestFunction::new("cos_x", |x, _| coord_mean(x, f64::cos)),
            TestFunction::new("sin_x_plus_v", |x, v| {
                x.iter().zip(v).map(|(a, b)| (a + b).sin()).sum::<f64>() / x.len() as f64
            }),
            TestFunction::new("tanh_v", |_, v| coord_mean(v, f64::tanh)),
            TestFunction::new("bump_v", |_, v| coord_mean(v, |s| (-s * s).exp())),
            TestFunction::new("hermite1_v", |_, v| coord_mean(v, |s| s * (-0.5 * s * s).exp())),
        ];
        let set = Self { functions };
        debug_assert!(set.check_bounded(d).is_ok());
        set
    }

    pub fn single(f: TestFunction, d: usize) -> Result<Self> {
        Self::new(vec![f], d)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// `max |f| <= 1` on a dense probe set: a tensor grid over `[-10, 10]^2`
    /// when `d = 1`, random points at several scales otherwise.
    pub fn check_bounded(&self, d: usize) -> Result<()> {
        if self.functions.is_empty() {
            return config("test function set is empty");
        }
        let mut probes: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        if d == 1 {
            let axis: Vec<f64> = (0..=200).map(|i| -10.0 + 0.1 * i as f64).collect();
            for &x in &axis {
                for &v in &axis {
                    probes.push((vec![x], vec![v]));
                }
            }
        }
        let mut rng = CounterRng::new(derive_seed(0, PROBE_TAG), d as u64);
        for scale in [0.5, 2.0, 10.0, 1e3] {
            for _ in 0..2000 {
                let mut draw = || (0..d).map(|_| scale * rng.normal_pair().0).collect::<Vec<f64>>();
                let x = draw();
                let v = draw();
                probes.push((x, v));
            }
        }
        for f in &self.functions {
            for (x, v) in &probes {
                let y = f.eval(x, v);
                if !(y.abs() <= 1.0) {
                    return config(format!("test function {} takes value {y} at x = {x:?}, v = {v:?}", f.name));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WeakErrorConfig {
    pub drift: DriftSpec,
    pub theta: f64,
    pub levels: Vec<u64>,
    pub n_ref: u64,
    pub fset: TestFunctionSet,
    /// Evaluation times; each must lie on every grid.
    pub t_eval: Vec<f64>,
    /// Samples per coarse level.
    pub samples: usize,
    /// Samples of the reference.
    pub ref_samples: usize,
    pub seed: u64,
    pub d: usize,
    pub quad_order: usize,
    pub initial: InitialCondition,
}

impl WeakErrorConfig {
    pub fn new(drift: DriftSpec, levels: Vec<u64>, samples: usize, seed: u64) -> Self {
        Self {
            drift,
            theta: 0.5,
            levels,
            n_ref: DEFAULT_REFERENCE_LEVEL,
            fset: TestFunctionSet::standard(1),
            t_eval: vec![1.0],
            samples,
            ref_samples: 4 * samples,
            seed,
            d: 1,
            quad_order: DEFAULT_QUAD_ORDER,
            initial: InitialCondition::origin(1),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples < 100 || self.ref_samples < 100 {
            return config(format!(
                "weak error needs at least 100 samples per run, got {} and {} for the reference",
                self.samples, self.ref_samples
            ));
        }
        if self.levels.is_empty() || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return config("levels must be nonempty and strictly increasing");
        }
        check_reference_levels(self.n_ref, &self.levels)?;
        if self.t_eval.is_empty() || self.t_eval.windows(2).any(|w| w[1] <= w[0]) {
            return config("evaluation times must be nonempty and strictly increasing");
        }
        for &t in &self.t_eval {
            if !(t > 0.0 && t <= 1.0) {
                return config(format!("evaluation time {t} outside (0, 1]"));
            }
            for &n in self.levels.iter().chain([self.n_ref].iter()) {
                let k = t * n as f64;
                if (k - k.round()).abs() > 1e-9 {
                    return config(format!("evaluation time {t} is not on the grid of level {n}"));
                }
            }
        }
        if let InitialCondition::Point(z) = &self.initial {
            if z.dim() != self.d {
                return config("initial state dimension does not match d");
            }
        }
        self.fset.check_bounded(self.d)?;
        self.drift.validate(self.d)?;
        check_theta(&self.drift, self.theta, self.d)
    }
}

/// Per-function estimates of `E f(Z_t)` at each evaluation time.
struct Moments {
    /// `[t][f]` means and standard errors of the mean.
    mean: Vec<Vec<Estimate>>,
}

#[derive(Clone)]
struct Acc {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    err: Option<String>,
}

fn moments(
    cfg: &WeakErrorConfig,
    n: u64,
    samples: usize,
    seed: u64,
    shift: &[f64],
) -> Result<Moments> {
    let grid = GridSpec::unit(n, cfg.d)?;
    let md: MollifiedDrift = mollify(&cfg.drift, n, cfg.theta)?;
    let scheme = SchemeConfig {
        grid,
        theta: cfg.theta,
        quad_order: cfg.quad_order,
        initial: cfg.initial.clone(),
    };
    let steps: Vec<usize> = cfg.t_eval.iter().map(|t| (t * n as f64).round() as usize).collect();
    let nf = cfg.fset.len();
    let slots = steps.len() * nf;
    let acc = chunked_fold(
        samples,
        || Acc {
            sum: vec![0.0; slots],
            sumsq: vec![0.0; slots],
            err: None,
        },
        |acc, i| {
            if acc.err.is_some() {
                return;
            }
            let mut path = AugmentedPath::zeros(grid);
            path.resample(seed, i as u64);
            let res = integrate_observed(&scheme, &md, &path, |k, x, v| {
                if let Some(ti) = steps.iter().position(|&s| s == k) {
                    for (fi, f) in cfg.fset.functions.iter().enumerate() {
                        let y = f.eval(x, v) - shift[fi];
                        acc.sum[ti * nf + fi] += y;
                        acc.sumsq[ti * nf + fi] += y * y;
                    }
                }
            });
            if let Err(e) = res {
                acc.err = Some(e.to_string());
            }
        },
        |total, part| {
            if total.err.is_none() {
                total.err = part.err;
            }
            for (a, b) in total.sum.iter_mut().zip(&part.sum) {
                *a += b;
            }
            for (a, b) in total.sumsq.iter_mut().zip(&part.sumsq) {
                *a += b;
            }
        },
    );
    if let Some(e) = acc.err {
        return Err(Error::Domain(e));
    }
    let m = samples as f64;
    let mean = (0..steps.len())
        .map(|ti| {
            (0..nf)
                .map(|fi| {
                    let s = acc.sum[ti * nf + fi];
                    let mu = s / m;
                    let var = ((acc.sumsq[ti * nf + fi] - s * mu) / (m - 1.0)).max(0.0);
                    Estimate {
                        value: mu,
                        std_error: (var / m).sqrt(),
                    }
                })
                .collect()
        })
        .collect();
    Ok(Moments { mean })
}

/// Weak errors at one evaluation time.
#[derive(Debug, Clone)]
pub struct WeakTimeReport {
    pub t: f64,
    /// Aggregate `max_f |E f(Z^ref_t) - E f(Z^n_t)|` per level; the standard
    /// error is the two-sample one of the maximizing function.
    pub aggregate: RateReport,
    /// `[f][level]` two-sample differences `E f(Z^ref_t) - E f(Z^n_t)`
    /// (signed) with their standard errors.
    pub per_function: Vec<(String, Vec<Estimate>)>,
    /// Name of the maximizing function per level.
    pub argmax: Vec<String>,
}

impl WeakTimeReport {
    /// Largest `|difference| / se` over functions and levels.
    pub fn max_z(&self) -> f64 {
        self.per_function
            .iter()
            .flat_map(|(_, es)| es.iter().map(|e| e.z_score(0.0)))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct WeakReport {
    pub times: Vec<WeakTimeReport>,
    /// Trapezoid rule for `int_0^T aggregate(t)^2 dt` per level, with the
    /// aggregate taken as 0 at `t = 0` (both laws start from the same
    /// initial condition).
    pub time_integrated: Vec<f64>,
}

/// Weak error of the scheme against an independently sampled reference at
/// `n_ref`.
pub fn weak_error(cfg: &WeakErrorConfig) -> Result<WeakReport> {
    cfg.validate()?;
    let z0 = cfg.initial.draw(0);
    let shift: Vec<f64> = cfg.fset.functions.iter().map(|f| f.eval(&z0.x, &z0.v)).collect();
    let reference = moments(cfg, cfg.n_ref, cfg.ref_samples, derive_seed(cfg.seed, REFERENCE_TAG), &shift)?;
    let coarse: Vec<Moments> = cfg
        .levels
        .iter()
        .enumerate()
        .map(|(l, &n)| moments(cfg, n, cfg.samples, derive_seed(cfg.seed, LEVEL_TAG + l as u64), &shift))
        .collect::<Result<_>>()?;

    let nf = cfg.fset.len();
    let times: Vec<WeakTimeReport> = cfg
        .t_eval
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let per_function: Vec<(String, Vec<Estimate>)> = (0..nf)
                .map(|fi| {
                    let r = reference.mean[ti][fi];
                    let diffs = coarse
                        .iter()
                        .map(|c| {
                            let e = c.mean[ti][fi];
                            Estimate {
                                value: r.value - e.value,
                                std_error: r.std_error.hypot(e.std_error),
                            }
                        })
                        .collect();
                    (cfg.fset.functions[fi].name.clone(), diffs)
                })
                .collect();
            let mut argmax = Vec::with_capacity(cfg.levels.len());
            let aggregate: Vec<Estimate> = (0..cfg.levels.len())
                .map(|l| {
                    let (name, best) = per_function
                        .iter()
                        .map(|(name, es)| (name, es[l]))
                        .fold(None::<(&String, Estimate)>, |acc, (name, e)| match acc {
                            Some((_, b)) if b.value.abs() >= e.value.abs() => acc,
                            _ => Some((name, e)),
                        })
                        .expect("nonempty function set");
                    argmax.push(name.clone());
                    Estimate {
                        value: best.value.abs(),
                        std_error: best.std_error,
                    }
                })
                .collect();
            let report = RateReport::new(cfg.levels.clone(), aggregate)
                .with_meta("kind", "weak")
                .with_meta("drift", cfg.drift.id())
                .with_meta("theta", cfg.theta)
                .with_meta("t", t)
                .with_meta("samples", cfg.samples as u64)
                .with_meta("ref_samples", cfg.ref_samples as u64)
                .with_meta("seed", cfg.seed)
                .with_meta("n_ref", cfg.n_ref)
                .with_meta("d", cfg.d as u64)
                .with_meta(
                    "functions",
                    cfg.fset.functions.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
                );
            WeakTimeReport {
                t,
                aggregate: report,
                per_function,
                argmax,
            }
        })
        .collect();

    let time_integrated = (0..cfg.levels.len())
        .map(|l| {
            let mut total = 0.0;
            let (mut t_prev, mut y_prev) = (0.0, 0.0);
            for tr in &times {
                let y = tr.aggregate.errors[l].value.powi(2);
                total += 0.5 * (tr.t - t_prev) * (y + y_prev);
                t_prev = tr.t;
                y_prev = y;
            }
            total
        })
        .collect();
    Ok(WeakReport { times, time_integrated })
}
