//! The tamed, transport-shifted Euler-Maruyama scheme and reference solvers.
//!
//! Over a step `[t_k, t_k + h]` the drift is frozen at `Z_k` and transported
//! along the free flow, `s -> b_n(x_k + s v_k, v_k)`. With the augmented
//! increment `(dW, dI)` of the driving path the grid values are
//!
//! ```text
//! V_{k+1} = V_k + B + dW
//! X_{k+1} = X_k + h V_k + A + dI
//! B = int_0^h b_n(x_k + s v_k, v_k) ds
//! A = int_0^h (h - s) b_n(x_k + s v_k, v_k) ds
//! ```
//!
//! which is the continuous-time scheme sampled exactly at the grid, up to the
//! Gauss-Legendre quadrature of `A` and `B`.

use std::io::Write;
use std::sync::Arc;

use crate::brownian::{AugmentedPath, GridSpec};
use crate::drift::{mollify, DriftSpec, MollifiedDrift};
use crate::error::{config, Result};
use crate::quadrature::GaussRule;
use crate::rng::{derive_seed, CounterRng};
use crate::state::PhaseState;

pub const DEFAULT_QUAD_ORDER: usize = 8;
/// Default resolution of self-referenced solutions.
pub const DEFAULT_REFERENCE_LEVEL: u64 = 1 << 12;

/// Law of the initial condition.
#[derive(Clone)]
pub enum InitialCondition {
    Point(PhaseState),
    /// Draws the initial state of the sample with the given stream id.
    Sampler(Arc<dyn Fn(u64) -> PhaseState + Send + Sync>),
}

impl std::fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Point(z) => f.debug_tuple("Point").field(z).finish(),
            Self::Sampler(_) => f.write_str("Sampler(..)"),
        }
    }
}

impl InitialCondition {
    pub fn origin(d: usize) -> Self {
        Self::Point(PhaseState::zeros(d))
    }

    pub fn draw(&self, stream_id: u64) -> PhaseState {
        match self {
            Self::Point(z) => z.clone(),
            Self::Sampler(f) => f(stream_id),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub grid: GridSpec,
    pub theta: f64,
    pub quad_order: usize,
    pub initial: InitialCondition,
}

impl SchemeConfig {
    /// Unit horizon, origin start, default quadrature.
    pub fn new(grid: GridSpec, theta: f64) -> Self {
        Self {
            grid,
            theta,
            quad_order: DEFAULT_QUAD_ORDER,
            initial: InitialCondition::origin(grid.d),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.quad_order < 1 {
            return config("sub-step quadrature order must be at least 1");
        }
        if !(self.theta > 0.0) {
            return config(format!("taming parameter must be positive, got {}", self.theta));
        }
        if let InitialCondition::Point(z) = &self.initial {
            if z.dim() != self.grid.d {
                return config(format!("initial state has dimension {}, grid has {}", z.dim(), self.grid.d));
            }
        }
        Ok(())
    }

    /// Rejects `theta` at or above the admissibility bound of the drift's
    /// regularity label, when it carries one.
    pub fn check_admissible(&self, drift: &DriftSpec) -> Result<()> {
        check_theta(drift, self.theta, self.grid.d)
    }
}

/// Rejects `theta` at or above the bound implied by the regularity label of
/// `drift` in dimension `d`; unlabelled drifts pass.
pub fn check_theta(drift: &DriftSpec, theta: f64, d: usize) -> Result<()> {
    if let Some(label) = drift.regularity_label() {
        let bound = label.theta_bound(d);
        if theta >= bound {
            return config(format!("theta = {theta} violates the admissibility bound {bound} for {}", drift.id()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub n: u64,
    pub seed: u64,
    pub stream_id: u64,
    pub drift_id: String,
    pub theta: Option<f64>,
    pub quad_order: Option<usize>,
}

/// Grid values `Z_{t_k}`, `k = 0..=steps`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len() / self.grid.d
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_at(&self, k: usize) -> &[f64] {
        let d = self.grid.d;
        &self.x[k * d..(k + 1) * d]
    }

    pub fn v_at(&self, k: usize) -> &[f64] {
        let d = self.grid.d;
        &self.v[k * d..(k + 1) * d]
    }

    pub fn state(&self, k: usize) -> PhaseState {
        PhaseState {
            x: self.x_at(k).to_vec(),
            v: self.v_at(k).to_vec(),
        }
    }

    /// `max_k |Z_{t_k} - other_{t_k}|` over the grid of `self`, whose times
    /// must also be grid times of `other`.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        let (coarse, fine) = (self.grid.n, other.grid.n);
        if fine % coarse != 0 || self.grid.d != other.grid.d {
            return config("trajectories do not share the coarse grid");
        }
        let stride = (fine / coarse) as usize;
        let d = self.grid.d;
        let mut sup = 0.0f64;
        for k in 0..self.len() {
            let kf = k * stride;
            let mut sq = 0.0;
            for j in 0..d {
                sq += (self.x[k * d + j] - other.x[kf * d + j]).powi(2);
                sq += (self.v[k * d + j] - other.v[kf * d + j]).powi(2);
            }
            sup = sup.max(sq.sqrt());
        }
        Ok(sup)
    }

    /// CSV with provenance comment lines, then `t,x_1..x_d,v_1..v_d`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let p = &self.provenance;
        writeln!(out, "# seed={}", p.seed)?;
        writeln!(out, "# stream_id={}", p.stream_id)?;
        writeln!(out, "# n={}", p.n)?;
        match p.theta {
            Some(t) => writeln!(out, "# theta={t}")?,
            None => writeln!(out, "# theta=none")?,
        }
        writeln!(out, "# drift={}", p.drift_id)?;
        match p.quad_order {
            Some(q) => writeln!(out, "# quad_order={q}")?,
            None => writeln!(out, "# quad_order=none")?,
        }
        let d = self.grid.d;
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x_{i}")));
        header.extend((1..=d).map(|i| format!("v_{i}")));
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![format!("{}", self.grid.time(k))];
            row.extend(self.x_at(k).iter().map(|c| format!("{c}")));
            row.extend(self.v_at(k).iter().map(|c| format!("{c}")));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Drift contributions of one step to velocity (`b`) and position (`a`).
#[derive(Debug, Clone, PartialEq)]
pub struct SubstepIntegrals {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

/// Largest position shift covered by one sub-step panel, in units of `sigma_x`.
const PANEL_REACH: f64 = 0.5;
const MAX_PANELS: usize = 1 << 16;

/// Reusable single-step kernel of the scheme.
pub struct Stepper<'a> {
    md: &'a MollifiedDrift,
    h: f64,
    /// Gauss-Legendre nodes and weights on `[0, 1]`.
    unit: Vec<(f64, f64)>,
    /// Panel width bound along the free flow, in position units.
    reach: f64,
    frozen: bool,
    shifted: Vec<f64>,
    eval: Vec<f64>,
    b: Vec<f64>,
    a: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(md: &'a MollifiedDrift, h: f64, d: usize, quad_order: usize) -> Self {
        let rule = GaussRule::legendre(quad_order.max(1));
        let unit = rule.nodes.iter().zip(&rule.weights).map(|(u, w)| (0.5 * (u + 1.0), 0.5 * w)).collect();
        Self {
            md,
            h,
            unit,
            reach: PANEL_REACH * md.scales().0,
            frozen: !md.depends_on_position(),
            shifted: vec![0.0; d],
            eval: vec![0.0; d],
            b: vec![0.0; d],
            a: vec![0.0; d],
        }
    }

    /// Computes `B` and `A` for the state `(x, v)` at time `t`.
    pub fn substep(&mut self, t: f64, x: &[f64], v: &[f64]) -> Result<(&[f64], &[f64])> {
        if self.frozen {
            // the integrand does not move along the free flow
            self.md.eval_into(t, x, v, &mut self.eval)?;
            let h = self.h;
            for ((b, a), e) in self.b.iter_mut().zip(self.a.iter_mut()).zip(&self.eval) {
                *b = h * e;
                *a = 0.5 * h * h * e;
            }
        } else {
            self.b.fill(0.0);
            self.a.fill(0.0);
            let h = self.h;
            let speed = v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            // b_n varies on the scale sigma_x in position; split [0, h] so
            // each panel moves the position by at most `reach`
            let panels = ((h * speed / self.reach).ceil() as usize).clamp(1, MAX_PANELS);
            let width = h / panels as f64;
            for p in 0..panels {
                let left = p as f64 * width;
                for &(u, w) in &self.unit {
                    let s = left + u * width;
                    let wb = w * width;
                    for ((y, x), v) in self.shifted.iter_mut().zip(x).zip(v) {
                        *y = x + s * v;
                    }
                    self.md.eval_into(t + s, &self.shifted, v, &mut self.eval)?;
                    for ((b, a), e) in self.b.iter_mut().zip(self.a.iter_mut()).zip(&self.eval) {
                        *b += wb * e;
                        *a += wb * (h - s) * e;
                    }
                }
            }
        }
        Ok((&self.b, &self.a))
    }

    /// Advances `(x, v)` by one step driven by `(dw, di)`.
    #[inline]
    pub fn step(&mut self, t: f64, x: &mut [f64], v: &mut [f64], dw: &[f64], di: &[f64]) -> Result<()> {
        let h = self.h;
        self.substep(t, x, v)?;
        for j in 0..x.len() {
            x[j] += h * v[j] + self.a[j] + di[j];
            v[j] += self.b[j] + dw[j];
        }
        Ok(())
    }
}

/// `B` and `A` for a single state.
pub fn substep_integrals(md: &MollifiedDrift, z: &PhaseState, h: f64, quad_order: usize) -> Result<SubstepIntegrals> {
    if !(h > 0.0) {
        return config(format!("step size must be positive, got {h}"));
    }
    let mut stepper = Stepper::new(md, h, z.dim(), quad_order);
    let (b, a) = stepper.substep(0.0, &z.x, &z.v)?;
    Ok(SubstepIntegrals {
        b: b.to_vec(),
        a: a.to_vec(),
    })
}

/// Runs the scheme along `path`, handing each grid state to `observe`.
pub fn integrate_observed(
    cfg: &SchemeConfig,
    md: &MollifiedDrift,
    path: &AugmentedPath,
    mut observe: impl FnMut(usize, &[f64], &[f64]),
) -> Result<()> {
    cfg.validate()?;
    if path.grid != cfg.grid {
        return config(format!(
            "path grid (n = {}, T = {}, d = {}) does not match scheme grid (n = {}, T = {}, d = {})",
            path.grid.n, path.grid.horizon, path.grid.d, cfg.grid.n, cfg.grid.horizon, cfg.grid.d
        ));
    }
    let z0 = cfg.initial.draw(path.stream_id);
    let (mut x, mut v) = (z0.x, z0.v);
    let mut stepper = Stepper::new(md, cfg.grid.step_size(), cfg.grid.d, cfg.quad_order);
    observe(0, &x, &v);
    for k in 0..path.steps() {
        let (dw, di) = path.increment(k);
        stepper.step(cfg.grid.time(k), &mut x, &mut v, dw, di)?;
        observe(k + 1, &x, &v);
    }
    Ok(())
}

/// Runs the scheme along `path` and records every grid state.
pub fn integrate(cfg: &SchemeConfig, md: &MollifiedDrift, path: &AugmentedPath) -> Result<Trajectory> {
    let steps = cfg.grid.steps();
    let d = cfg.grid.d;
    let mut xs = Vec::with_capacity((steps + 1) * d);
    let mut vs = Vec::with_capacity((steps + 1) * d);
    integrate_observed(cfg, md, path, |_, x, v| {
        xs.extend_from_slice(x);
        vs.extend_from_slice(v);
    })?;
    Ok(Trajectory {
        grid: cfg.grid,
        x: xs,
        v: vs,
        provenance: Provenance {
            n: cfg.grid.n,
            seed: path.seed,
            stream_id: path.stream_id,
            drift_id: md.base.id(),
            theta: Some(cfg.theta),
            quad_order: Some(cfg.quad_order),
        },
    })
}

/// Checks that every level divides `n_ref` with a power-of-two ratio.
pub fn check_reference_levels(n_ref: u64, levels: &[u64]) -> Result<()> {
    for &n in levels {
        if n == 0 || !n_ref.is_multiple_of(n) || !(n_ref / n).is_power_of_two() {
            return config(format!(
                "reference level {n_ref} is not a power-of-two multiple of level {n}"
            ));
        }
    }
    Ok(())
}

/// The scheme at the resolution of `path`, mollified at that resolution, as
/// a stand-in for the exact solution. It is a reference, not an exact solve.
pub fn reference_solve(
    drift: &DriftSpec,
    theta: f64,
    levels: &[u64],
    path: &AugmentedPath,
    quad_order: usize,
    initial: InitialCondition,
) -> Result<Trajectory> {
    check_reference_levels(path.grid.n, levels)?;
    drift.validate(path.grid.d)?;
    let md = mollify(drift, path.grid.n, theta)?;
    let cfg = SchemeConfig {
        grid: path.grid,
        theta,
        quad_order,
        initial,
    };
    integrate(&cfg, &md, path)
}

const RESIDUAL_TAG: u64 = 0x6c69_6e65_6172; // "linear"

/// One-step transition of the kinetic Ornstein-Uhlenbeck system
/// `dX = V dt, dV = -gamma V dt + dW`, with the stochastic convolutions
/// split into their projection onto the path's `(dW, dI)` and an
/// independent Gaussian residual.
#[derive(Debug, Clone)]
pub struct LinearTransition {
    pub gamma: f64,
    pub h: f64,
    /// `e^{-gamma h}`.
    pub decay: f64,
    /// `(1 - e^{-gamma h}) / gamma`.
    pub lift: f64,
    /// Coefficients of `dW` and `dI` in the position / velocity noise.
    pub x_coeffs: (f64, f64),
    pub v_coeffs: (f64, f64),
    /// Lower Cholesky factor of the residual covariance, `(x, v)` ordering.
    pub residual_chol: [[f64; 2]; 2],
}

/// `(1 - e^{-gamma u}) / gamma`, continuous at `gamma = 0`.
fn relaxed(gamma: f64, u: f64) -> f64 {
    if gamma == 0.0 {
        u
    } else {
        -libm::expm1(-gamma * u) / gamma
    }
}

impl LinearTransition {
    pub fn new(gamma: f64, h: f64) -> Result<Self> {
        if !(gamma >= 0.0) {
            return config(format!("friction must be nonnegative, got {gamma}"));
        }
        if !(h > 0.0) {
            return config("step size must be positive");
        }
        let rule = GaussRule::legendre(32);
        let phi_v = |s: f64| (-gamma * (h - s)).exp();
        let phi_x = |s: f64| relaxed(gamma, h - s);
        // orthonormal basis of span{1, s} on [0, h]
        let e0 = 1.0 / h.sqrt();
        let c1 = (12.0 / h.powi(3)).sqrt();
        let e1 = |s: f64| c1 * (s - 0.5 * h);
        let project = |phi: &dyn Fn(f64) -> f64| -> (f64, f64) {
            let p0 = rule.integrate(0.0, h, |s| phi(s) * e0);
            let p1 = rule.integrate(0.0, h, |s| phi(s) * e1(s));
            // p0 e0 + p1 e1(s) = alpha + beta s
            (p0 * e0 - p1 * c1 * 0.5 * h, p1 * c1)
        };
        let (ax, bx) = project(&phi_x);
        let (av, bv) = project(&phi_v);
        let rx = |s: f64| phi_x(s) - ax - bx * s;
        let rv = |s: f64| phi_v(s) - av - bv * s;
        let cxx = rule.integrate(0.0, h, |s| rx(s) * rx(s));
        let cxv = rule.integrate(0.0, h, |s| rx(s) * rv(s));
        let cvv = rule.integrate(0.0, h, |s| rv(s) * rv(s));
        let l11 = cxx.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { cxv / l11 } else { 0.0 };
        let l22 = (cvv - l21 * l21).max(0.0).sqrt();
        // alpha dW + beta int s dW_s, with int_0^h s dW_s = h dW - dI
        Ok(Self {
            gamma,
            h,
            decay: (-gamma * h).exp(),
            lift: relaxed(gamma, h),
            x_coeffs: (ax + bx * h, -bx),
            v_coeffs: (av + bv * h, -bv),
            residual_chol: [[l11, 0.0], [l21, l22]],
        })
    }

    /// Covariance of the one-step noise `(N_x, N_v)` implied by the
    /// decomposition, `(x, v)` ordering.
    pub fn noise_covariance(&self) -> [[f64; 2]; 2] {
        let h = self.h;
        let path_cov = [[h, 0.5 * h * h], [0.5 * h * h, h * h * h / 3.0]];
        let quad = |p: (f64, f64), q: (f64, f64)| {
            p.0 * q.0 * path_cov[0][0] + (p.0 * q.1 + p.1 * q.0) * path_cov[0][1] + p.1 * q.1 * path_cov[1][1]
        };
        let l = self.residual_chol;
        let r = [
            [l[0][0] * l[0][0], l[0][0] * l[1][0]],
            [l[0][0] * l[1][0], l[1][0] * l[1][0] + l[1][1] * l[1][1]],
        ];
        [
            [quad(self.x_coeffs, self.x_coeffs) + r[0][0], quad(self.x_coeffs, self.v_coeffs) + r[0][1]],
            [quad(self.v_coeffs, self.x_coeffs) + r[1][0], quad(self.v_coeffs, self.v_coeffs) + r[1][1]],
        ]
    }
}

/// Exact strong solution of the kinetic Ornstein-Uhlenbeck system on the
/// grid of `path`, coupled to the path through its `(dW, dI)` and completed
/// by residual noise keyed by the path's `(seed, stream_id)`.
pub fn exact_linear_solve(gamma: f64, initial: &PhaseState, path: &AugmentedPath) -> Result<Trajectory> {
    let grid = path.grid;
    if initial.dim() != grid.d {
        return config("initial state dimension does not match the path");
    }
    let tr = LinearTransition::new(gamma, grid.step_size())?;
    let d = grid.d;
    let steps = path.steps();
    let mut rng = CounterRng::new(derive_seed(path.seed, RESIDUAL_TAG), path.stream_id);
    let (mut x, mut v) = (initial.x.clone(), initial.v.clone());
    let mut xs = Vec::with_capacity((steps + 1) * d);
    let mut vs = Vec::with_capacity((steps + 1) * d);
    xs.extend_from_slice(&x);
    vs.extend_from_slice(&v);
    let l = tr.residual_chol;
    for k in 0..steps {
        let (dw, di) = path.increment(k);
        for j in 0..d {
            let (e1, e2) = rng.normal_pair();
            let rx = l[0][0] * e1;
            let rv = l[1][0] * e1 + l[1][1] * e2;
            let nx = tr.x_coeffs.0 * dw[j] + tr.x_coeffs.1 * di[j] + rx;
            let nv = tr.v_coeffs.0 * dw[j] + tr.v_coeffs.1 * di[j] + rv;
            x[j] += tr.lift * v[j] + nx;
            v[j] = tr.decay * v[j] + nv;
        }
        xs.extend_from_slice(&x);
        vs.extend_from_slice(&v);
    }
    Ok(Trajectory {
        grid,
        x: xs,
        v: vs,
        provenance: Provenance {
            n: grid.n,
            seed: path.seed,
            stream_id: path.stream_id,
            drift_id: DriftSpec::LinearFriction { gamma }.id(),
            theta: None,
            quad_order: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::{integrate_path, sample_path};
    use approx::assert_relative_eq;

    #[test]
    fn zero_drift_substeps_vanish() {
        let md = mollify(&DriftSpec::Zero, 4, 0.5).unwrap();
        let s = substep_integrals(&md, &PhaseState::scalar(1.0, 2.0), 0.1, 8).unwrap();
        assert_eq!(s.b, vec![0.0]);
        assert_eq!(s.a, vec![0.0]);
    }

    #[test]
    fn constant_drift_substeps() {
        let md = mollify(&DriftSpec::Constant(vec![2.0, -1.0]), 4, 0.5).unwrap();
        let z = PhaseState::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        for q in [1, 3, 8] {
            let s = substep_integrals(&md, &z, 0.1, q).unwrap();
            assert_relative_eq!(s.b[0], 0.2, epsilon = 1e-14);
            assert_relative_eq!(s.a[1], -0.005, epsilon = 1e-14);
        }
    }

    #[test]
    fn substep_rejects_nonpositive_step() {
        let md = mollify(&DriftSpec::Zero, 4, 0.5).unwrap();
        assert!(substep_integrals(&md, &PhaseState::zeros(1), 0.0, 8).is_err());
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let md = mollify(&DriftSpec::Zero, 4, 0.5).unwrap();
        let cfg = SchemeConfig::new(GridSpec::unit(4, 1).unwrap(), 0.5);
        let path = sample_path(GridSpec::unit(8, 1).unwrap(), 0, 0).unwrap();
        assert!(integrate(&cfg, &md, &path).is_err());
    }

    #[test]
    fn zero_drift_is_free_flow() {
        let grid = GridSpec::unit(16, 2).unwrap();
        let path = sample_path(grid, 3, 1).unwrap();
        let z0 = PhaseState::new(vec![0.5, -1.0], vec![2.0, 0.25]).unwrap();
        let mut cfg = SchemeConfig::new(grid, 0.5);
        cfg.initial = InitialCondition::Point(z0.clone());
        let md = mollify(&DriftSpec::Zero, 16, 0.5).unwrap();
        let traj = integrate(&cfg, &md, &path).unwrap();
        let ip = integrate_path(&path);
        for k in 0..=16 {
            let t = grid.time(k);
            for j in 0..2 {
                assert!((traj.x_at(k)[j] - (z0.x[j] + t * z0.v[j] + ip.i_at(k)[j])).abs() < 1e-13);
                assert!((traj.v_at(k)[j] - (z0.v[j] + ip.w_at(k)[j])).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn linear_transition_matches_closed_form_variances() {
        for gamma in [0.0, 0.3, 1.0, 5.0] {
            let h = 1.0 / 16.0;
            let tr = LinearTransition::new(gamma, h).unwrap();
            let c = tr.noise_covariance();
            let var_v = if gamma == 0.0 {
                h
            } else {
                -libm::expm1(-2.0 * gamma * h) / (2.0 * gamma)
            };
            assert_relative_eq!(c[1][1], var_v, max_relative = 1e-12);
            // int_0^h relaxed(gamma, h - s)^2 ds, by dense quadrature
            let rule = GaussRule::legendre(40);
            let var_x = rule.integrate(0.0, h, |s| relaxed(gamma, h - s).powi(2));
            assert_relative_eq!(c[0][0], var_x, max_relative = 1e-12);
        }
    }

    #[test]
    fn friction_free_exact_solution_is_free_flow() {
        let grid = GridSpec::unit(32, 1).unwrap();
        let path = sample_path(grid, 9, 2).unwrap();
        let z0 = PhaseState::scalar(0.1, -0.4);
        let exact = exact_linear_solve(0.0, &z0, &path).unwrap();
        let md = mollify(&DriftSpec::Zero, 32, 0.5).unwrap();
        let mut cfg = SchemeConfig::new(grid, 0.5);
        cfg.initial = InitialCondition::Point(z0);
        let em = integrate(&cfg, &md, &path).unwrap();
        assert!(em.sup_distance(&exact).unwrap() < 1e-13);
    }

    #[test]
    fn stationary_velocity_variance() {
        // deterministic covariance recursion of the exact transition
        let gamma = 2.0;
        let tr = LinearTransition::new(gamma, 0.05).unwrap();
        let q = tr.noise_covariance()[1][1];
        let mut var = 0.0;
        for _ in 0..5000 {
            var = tr.decay * tr.decay * var + q;
        }
        assert_relative_eq!(var, 1.0 / (2.0 * gamma), max_relative = 1e-12);
    }

    #[test]
    fn reference_levels_must_divide() {
        assert!(check_reference_levels(64, &[4, 16, 64]).is_ok());
        assert!(check_reference_levels(48, &[16]).is_err());
        assert!(check_reference_levels(64, &[3]).is_err());
    }

    #[test]
    fn admissibility_bound() {
        let cfg = SchemeConfig::new(GridSpec::unit(4, 1).unwrap(), 0.5);
        assert!(cfg.check_admissible(&DriftSpec::SignVelocity).is_ok());
        let cfg = SchemeConfig::new(GridSpec::unit(4, 1).unwrap(), 3.0);
        assert!(cfg.check_admissible(&DriftSpec::SignVelocity).is_err());
        assert!(cfg.check_admissible(&DriftSpec::Zero).is_ok());
    }

    #[test]
    fn csv_export_layout() {
        let grid = GridSpec::unit(2, 1).unwrap();
        let path = sample_path(grid, 1, 0).unwrap();
        let md = mollify(&DriftSpec::Zero, 2, 0.5).unwrap();
        let traj = integrate(&SchemeConfig::new(grid, 0.5), &md, &path).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed=1");
        assert_eq!(lines[6], "t,x_1,v_1");
        assert!(lines[7].starts_with("0,0,0"));
        assert_eq!(lines.len(), 10);
        assert!(!text.contains('\r'));
    }
}
