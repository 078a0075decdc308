//! Drift catalog and Gaussian mollification `b_n = b * phi_n` with
//! `phi_n(x, v) = n^{4 d theta} phi(n^{3 theta} x, n^{theta} v)`.
//!
//! `phi` is the standard Gaussian on `R^{2d}`, so `phi_n` is a centred
//! Gaussian with standard deviation `n^{-3 theta}` in every position
//! coordinate and `n^{-theta}` in every velocity coordinate.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{config, domain, Error, Result};
use crate::quadrature::{gaussian_expectation, Adaptive};
use crate::state::PhaseState;

/// Nominal Besov regularity attached to a catalog entry. It is used for
/// report annotation and the taming-parameter bound only; nothing computes it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityLabel {
    pub beta: f64,
    pub p_x: f64,
    pub p_v: f64,
}

impl RegularityLabel {
    /// `a . d / p` with `a = (3, 1)`.
    pub fn scaling_index(&self, d: usize) -> f64 {
        let d = d as f64;
        3.0 * d / self.p_x + d / self.p_v
    }

    /// Upper bound `(2 a . d / p)^{-1}` on admissible taming parameters.
    pub fn theta_bound(&self, d: usize) -> f64 {
        let s = self.scaling_index(d);
        if s == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (2.0 * s)
        }
    }
}

/// Autonomous drift fields `b(z)`, `z = (x, v)`.
#[derive(Debug, Clone)]
pub enum DriftSpec {
    Zero,
    Constant(Vec<f64>),
    /// `b(z) = -gamma v`.
    LinearFriction { gamma: f64 },
    /// `b(z)_i = sign(v_i)`, with `sign(0) = 0`.
    SignVelocity,
    /// `b(z)_i = sign(sin(kappa x_i)) * min(|v_i|, 1)^beta`: a jump in
    /// position times a Hölder-`beta` profile in velocity, bounded by one.
    OscillatorySingular { kappa: f64, beta: f64 },
    Tabulated(Arc<TabulatedDrift>),
    /// `sum_j alpha_j b_j`.
    Combination(Vec<(f64, DriftSpec)>),
}

/// Which coordinate of `R^{2d}` a breakpoint list refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    X(usize),
    V(usize),
}

impl DriftSpec {
    /// Short identifier used in reports and file provenance.
    pub fn id(&self) -> String {
        match self {
            Self::Zero => "zero".into(),
            Self::Constant(c) => format!("constant{c:?}"),
            Self::LinearFriction { gamma } => format!("linear_friction(gamma={gamma})"),
            Self::SignVelocity => "sign_velocity".into(),
            Self::OscillatorySingular { kappa, beta } => {
                format!("oscillatory_singular(kappa={kappa},beta={beta})")
            }
            Self::Tabulated(t) => format!("tabulated(d={})", t.d),
            Self::Combination(parts) => {
                let inner: Vec<String> = parts.iter().map(|(a, b)| format!("{a}*{}", b.id())).collect();
                format!("combination({})", inner.join("+"))
            }
        }
    }

    pub fn regularity_label(&self) -> Option<RegularityLabel> {
        match self {
            Self::SignVelocity => Some(RegularityLabel {
                beta: 0.2,
                p_x: f64::INFINITY,
                p_v: 5.0,
            }),
            Self::OscillatorySingular { .. } => Some(RegularityLabel {
                beta: 0.2,
                p_x: 5.0,
                p_v: 5.0,
            }),
            _ => None,
        }
    }

    /// Checks the drift's parameters and that it accepts dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            Self::Constant(c) if c.len() != d => {
                domain(format!("constant drift has dimension {}, state has {d}", c.len()))
            }
            Self::LinearFriction { gamma } if !(*gamma >= 0.0) => {
                domain(format!("friction must be nonnegative, got {gamma}"))
            }
            Self::OscillatorySingular { kappa, beta } if !(*kappa > 0.0 && *beta >= 0.0) => {
                domain("oscillatory drift needs kappa > 0 and beta >= 0")
            }
            Self::Tabulated(t) if t.d != d => {
                domain(format!("tabulated drift has dimension {}, state has {d}", t.d))
            }
            Self::Combination(parts) => parts.iter().try_for_each(|(_, b)| b.validate(d)),
            _ => Ok(()),
        }
    }

    /// Whether `b(x, v)` can vary with `x`.
    pub fn depends_on_position(&self) -> bool {
        match self {
            Self::Zero | Self::Constant(_) | Self::LinearFriction { .. } | Self::SignVelocity => false,
            Self::OscillatorySingular { .. } | Self::Tabulated(_) => true,
            Self::Combination(parts) => parts.iter().any(|(_, b)| b.depends_on_position()),
        }
    }

    /// `sup |b|` (componentwise), infinite when unbounded.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant(c) => c.iter().fold(0.0f64, |m, c| m.max(c.abs())),
            Self::LinearFriction { gamma } => {
                if *gamma == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::SignVelocity | Self::OscillatorySingular { .. } => 1.0,
            Self::Tabulated(t) => t.values.iter().fold(0.0f64, |m, c| m.max(c.abs())),
            Self::Combination(parts) => parts.iter().map(|(a, b)| a.abs() * b.sup_norm()).sum(),
        }
    }

    pub fn evaluate(&self, z: &PhaseState) -> Result<Vec<f64>> {
        let mut out = vec![0.0; z.dim()];
        self.eval_into(&z.x, &z.v, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Self::Zero => out.fill(0.0),
            Self::Constant(c) => out.copy_from_slice(c),
            Self::LinearFriction { gamma } => {
                for (o, v) in out.iter_mut().zip(v) {
                    *o = -gamma * v;
                }
            }
            Self::SignVelocity => {
                for (o, v) in out.iter_mut().zip(v) {
                    *o = sign(*v);
                }
            }
            Self::OscillatorySingular { kappa, beta } => {
                for ((o, x), v) in out.iter_mut().zip(x).zip(v) {
                    *o = sign((kappa * x).sin()) * velocity_profile(*v, *beta);
                }
            }
            Self::Tabulated(t) => t.interpolate(x, v, out)?,
            Self::Combination(parts) => {
                out.fill(0.0);
                let mut tmp = vec![0.0; out.len()];
                for (alpha, b) in parts {
                    b.eval_into(x, v, &mut tmp)?;
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += alpha * t;
                    }
                }
            }
        }
        Ok(())
    }

    /// Points along `coord` in `[lo, hi]` where the drift may jump or kink.
    pub fn breakpoints(&self, coord: Coord, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = match (self, coord) {
            (Self::SignVelocity, Coord::V(_)) => vec![0.0],
            (Self::OscillatorySingular { kappa, .. }, Coord::X(_)) => {
                let period = PI / kappa;
                let first = (lo / period).ceil() as i64;
                let last = (hi / period).floor() as i64;
                (first..=last).map(|j| j as f64 * period).collect()
            }
            (Self::OscillatorySingular { .. }, Coord::V(_)) => vec![-1.0, 0.0, 1.0],
            (Self::Tabulated(t), Coord::X(i)) => t.axes[i].clone(),
            (Self::Tabulated(t), Coord::V(i)) => t.axes[t.d + i].clone(),
            (Self::Combination(parts), _) => parts
                .iter()
                .flat_map(|(_, b)| b.breakpoints(coord, lo, hi))
                .collect(),
            _ => Vec::new(),
        };
        pts.retain(|p| *p >= lo && *p <= hi);
        pts
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
fn velocity_profile(v: f64, beta: f64) -> f64 {
    v.abs().min(1.0).powf(beta)
}

/// Drift given on a tensor grid in `R^{2d}` and interpolated multilinearly.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDrift {
    pub d: usize,
    /// `2d` strictly increasing axes: `x_1..x_d, v_1..v_d`.
    pub axes: Vec<Vec<f64>>,
    /// `d` components per grid point; the first axis varies slowest.
    pub values: Vec<f64>,
}

impl TabulatedDrift {
    pub fn new(d: usize, axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if d == 0 || axes.len() != 2 * d {
            return domain(format!("tabulated drift needs {} axes", 2 * d));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.len() < 2 || a.windows(2).any(|w| !(w[1] > w[0])) {
                return domain(format!("axis {i} must have >= 2 strictly increasing nodes"));
            }
        }
        let points: usize = axes.iter().map(Vec::len).product();
        if values.len() != points * d {
            return domain(format!("expected {} values, got {}", points * d, values.len()));
        }
        Ok(Self { d, axes, values })
    }

    fn interpolate(&self, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let dims = 2 * self.d;
        let mut base = vec![0usize; dims];
        let mut frac = vec![0.0; dims];
        for k in 0..dims {
            let c = if k < self.d { x[k] } else { v[k - self.d] };
            let axis = &self.axes[k];
            let (lo, hi) = (axis[0], axis[axis.len() - 1]);
            if !(c >= lo && c <= hi) {
                return Err(Error::Extrapolation {
                    coord: k,
                    value: c,
                    lo,
                    hi,
                });
            }
            let cell = axis.partition_point(|&a| a <= c).clamp(1, axis.len() - 1) - 1;
            base[k] = cell;
            frac[k] = (c - axis[cell]) / (axis[cell + 1] - axis[cell]);
        }
        out.fill(0.0);
        for corner in 0..(1usize << dims) {
            let mut weight = 1.0;
            let mut flat = 0usize;
            for k in 0..dims {
                let up = (corner >> k) & 1;
                weight *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
                flat = flat * self.axes[k].len() + base[k] + up;
            }
            if weight == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += weight * self.values[flat * self.d + j];
            }
        }
        Ok(())
    }

    /// Parses the CSV grid format:
    ///
    /// ```text
    /// d,<d>,shape,<n_1>,...,<n_2d>
    /// x_1,...,x_d,v_1,...,v_d,b_1,...,b_d
    /// <one row per grid point, any order>
    /// ```
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let parse_err = |m: String| Error::Parse(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| parse_err("empty tabulated drift file".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        if header.len() < 4 || header[0] != "d" || header[2] != "shape" {
            return Err(parse_err("first row must be `d,<d>,shape,<n_1>,...`".into()));
        }
        let d: usize = header[1].parse().map_err(|_| parse_err("bad dimension".into()))?;
        let shape: Vec<usize> = header[3..]
            .iter()
            .map(|s| s.parse().map_err(|_| parse_err(format!("bad shape entry {s:?}"))))
            .collect::<Result<_>>()?;
        if shape.len() != 2 * d {
            return Err(parse_err(format!("shape must list {} axes", 2 * d)));
        }
        let names: Vec<&str> = lines
            .next()
            .ok_or_else(|| parse_err("missing column header".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        if names.len() != 3 * d {
            return Err(parse_err(format!("expected {} columns, got {}", 3 * d, names.len())));
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(format!("data row {}: {e}", lineno + 1)))?;
            if row.len() != 3 * d {
                return Err(parse_err(format!("data row {} has {} fields", lineno + 1, row.len())));
            }
            rows.push(row);
        }
        let mut axes: Vec<Vec<f64>> = (0..2 * d)
            .map(|k| {
                let mut a: Vec<f64> = rows.iter().map(|r| r[k]).collect();
                a.sort_by(f64::total_cmp);
                a.dedup();
                a
            })
            .collect();
        for (k, a) in axes.iter_mut().enumerate() {
            if a.len() != shape[k] {
                return Err(parse_err(format!(
                    "axis {k} has {} distinct nodes, header says {}",
                    a.len(),
                    shape[k]
                )));
            }
        }
        let points: usize = shape.iter().product();
        if rows.len() != points {
            return Err(parse_err(format!("expected {points} data rows, got {}", rows.len())));
        }
        let mut values = vec![f64::NAN; points * d];
        for row in &rows {
            let mut flat = 0usize;
            for k in 0..2 * d {
                let pos = axes[k].binary_search_by(|a| a.total_cmp(&row[k])).expect("node from rows");
                flat = flat * shape[k] + pos;
            }
            if !values[flat * d].is_nan() {
                return Err(parse_err("duplicate grid point".into()));
            }
            values[flat * d..(flat + 1) * d].copy_from_slice(&row[2 * d..]);
        }
        Self::new(d, axes, values)
    }

    pub fn from_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}

/// How a [`MollifiedDrift`] evaluates the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MollifyMethod {
    /// Analytic (or separable one-dimensional) formulas.
    ClosedForm,
    /// Nested adaptive Gauss-Legendre over all `2d` coordinates, split at
    /// the drift's breakpoints.
    Quadrature,
}

/// `b * phi_n` for a catalog drift.
#[derive(Debug, Clone)]
pub struct MollifiedDrift {
    pub base: DriftSpec,
    pub n: u64,
    pub theta: f64,
    pub method: MollifyMethod,
    sigma_x: f64,
    sigma_v: f64,
    quad_tol: f64,
}

/// Standard deviations `(n^{-3 theta}, n^{-theta})` of `phi_n`.
pub fn mollifier_scales(n: u64, theta: f64) -> (f64, f64) {
    let nf = n as f64;
    (nf.powf(-3.0 * theta), nf.powf(-theta))
}

/// `phi_n(z)`, computed as the product of centred normal densities with the
/// scales of [`mollifier_scales`].
pub fn mollifier_density(n: u64, theta: f64, z: &PhaseState) -> f64 {
    let (sx, sv) = mollifier_scales(n, theta);
    let normal = |y: f64, s: f64| (-0.5 * (y / s).powi(2)).exp() / (s * (2.0 * PI).sqrt());
    z.x.iter().map(|x| normal(*x, sx)).product::<f64>() * z.v.iter().map(|v| normal(*v, sv)).product::<f64>()
}

fn has_closed_form(b: &DriftSpec) -> bool {
    match b {
        DriftSpec::Tabulated(_) => false,
        DriftSpec::Combination(parts) => parts.iter().all(|(_, b)| has_closed_form(b)),
        _ => true,
    }
}

/// Mollifies `drift` at level `n` with taming parameter `theta`, using closed
/// forms where available and quadrature otherwise.
pub fn mollify(drift: &DriftSpec, n: u64, theta: f64) -> Result<MollifiedDrift> {
    if n == 0 {
        return config("mollification level must be at least 1");
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return config(format!("taming parameter must be positive, got {theta}"));
    }
    let (sigma_x, sigma_v) = mollifier_scales(n, theta);
    let method = if has_closed_form(drift) {
        MollifyMethod::ClosedForm
    } else {
        MollifyMethod::Quadrature
    };
    Ok(MollifiedDrift {
        base: drift.clone(),
        n,
        theta,
        method,
        sigma_x,
        sigma_v,
        quad_tol: 1e-12,
    })
}

const GAUSS_REACH: f64 = 12.0;

/// `P(l < xi < u)` for a standard normal, accurate in both tails.
fn normal_interval(l: f64, u: f64) -> f64 {
    let c = |a: f64| 0.5 * libm::erfc(a / SQRT_2);
    if l >= 0.0 {
        c(l) - c(u)
    } else if u <= 0.0 {
        c(-u) - c(-l)
    } else {
        1.0 - c(-l) - c(u)
    }
}

/// `E sign(sin(kappa (x + sigma xi)))`.
fn smoothed_square_wave(kappa: f64, x: f64, sigma: f64) -> f64 {
    let y = kappa * x;
    let s = kappa * sigma;
    if s == 0.0 {
        return sign(y.sin());
    }
    if s >= 0.5 {
        // Fourier series of the square wave, damped by the Gaussian.
        let mut acc = 0.0;
        let mut k = 1.0f64;
        loop {
            let damp = (-0.5 * k * k * s * s).exp();
            if damp / k < 1e-18 {
                break;
            }
            acc += damp * (k * y).sin() / k;
            k += 2.0;
        }
        return 4.0 / PI * acc;
    }
    // Sum over the half-periods within 12 standard deviations.
    let lo = y - 12.0 * s;
    let hi = y + 12.0 * s;
    let first = (lo / PI).floor() as i64;
    let last = (hi / PI).ceil() as i64;
    let mut acc = 0.0;
    for j in first..last {
        let a = ((j as f64 * PI).max(lo) - y) / s;
        let b = (((j + 1) as f64 * PI).min(hi) - y) / s;
        if b <= a {
            continue;
        }
        let sgn = if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        acc += sgn * normal_interval(a, b);
    }
    acc
}

/// `E min(|v + sigma xi|, 1)^beta`. The cusp at 0 is removed by the
/// substitution `y = w^k`, `k = 1/beta`, on each side of the origin.
fn smoothed_velocity_profile(beta: f64, v: f64, sigma: f64, integ: &Adaptive) -> f64 {
    if sigma == 0.0 {
        return velocity_profile(v, beta);
    }
    let tails = normal_interval((1.0 - v) / sigma, f64::INFINITY) + normal_interval(f64::NEG_INFINITY, (-1.0 - v) / sigma);
    let k = (1.0 / beta).max(1.0);
    let m = k * (1.0 + beta) - 1.0;
    let norm = 1.0 / (sigma * (2.0 * PI).sqrt());
    let mut inner = 0.0;
    for side in [1.0, -1.0] {
        // y in [0, 1] on this side, clipped to the window around v
        let lo = (side * v - GAUSS_REACH * sigma).max(0.0);
        let hi = (side * v + GAUSS_REACH * sigma).min(1.0);
        if hi <= lo {
            continue;
        }
        let mut g = |w: f64| {
            let y = w.powf(k);
            let z = (side * y - v) / sigma;
            k * w.powf(m) * norm * (-0.5 * z * z).exp()
        };
        inner += integ.integrate(lo.powf(1.0 / k), hi.powf(1.0 / k), &mut g);
    }
    tails + inner
}

impl MollifiedDrift {
    /// Forces the evaluation route.
    pub fn with_method(mut self, method: MollifyMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_quadrature_tolerance(mut self, tol: f64) -> Self {
        self.quad_tol = tol;
        self
    }

    pub fn scales(&self) -> (f64, f64) {
        (self.sigma_x, self.sigma_v)
    }

    pub fn depends_on_position(&self) -> bool {
        self.base.depends_on_position()
    }

    pub fn evaluate(&self, z: &PhaseState) -> Result<Vec<f64>> {
        let mut out = vec![0.0; z.dim()];
        self.eval_into(0.0, &z.x, &z.v, &mut out)?;
        Ok(out)
    }

    /// `b_n(t, x, v)`. The catalog is autonomous; `t` is threaded through
    /// for time-dependent extensions.
    pub fn eval_into(&self, _t: f64, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        match self.method {
            MollifyMethod::ClosedForm => self.closed_form(&self.base, x, v, out),
            MollifyMethod::Quadrature => self.quadrature(&self.base, x, v, out),
        }
    }

    fn closed_form(&self, b: &DriftSpec, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        match b {
            DriftSpec::Zero | DriftSpec::Constant(_) | DriftSpec::LinearFriction { .. } => b.eval_into(x, v, out),
            DriftSpec::SignVelocity => {
                let scale = 1.0 / (self.sigma_v * SQRT_2);
                for (o, v) in out.iter_mut().zip(v) {
                    *o = libm::erf(v * scale);
                }
                Ok(())
            }
            DriftSpec::OscillatorySingular { kappa, beta } => {
                let integ = Adaptive::new(self.quad_tol);
                for ((o, x), v) in out.iter_mut().zip(x).zip(v) {
                    let sx = smoothed_square_wave(*kappa, *x, self.sigma_x);
                    let pv = smoothed_velocity_profile(*beta, *v, self.sigma_v, &integ);
                    *o = sx * pv;
                }
                Ok(())
            }
            DriftSpec::Combination(parts) => {
                out.fill(0.0);
                let mut tmp = vec![0.0; out.len()];
                for (alpha, part) in parts {
                    self.closed_form(part, x, v, &mut tmp)?;
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += alpha * t;
                    }
                }
                Ok(())
            }
            DriftSpec::Tabulated(_) => self.quadrature(b, x, v, out),
        }
    }

    fn quadrature(&self, b: &DriftSpec, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let d = x.len();
        let integ = Adaptive::new(self.quad_tol);
        let mut point = [x, v].concat();
        let centre = point.clone();
        let mut scratch = vec![0.0; d];
        for (j, o) in out.iter_mut().enumerate() {
            let mut failure = None;
            *o = self.nested(b, j, 0, &centre, &mut point, &mut scratch, &integ, &mut failure);
            if let Some(e) = failure {
                return Err(e);
            }
        }
        Ok(())
    }

    /// Expectation of component `j` over coordinates `k..2d`, the earlier
    /// ones being fixed in `point`.
    #[allow(clippy::too_many_arguments)]
    fn nested(
        &self,
        b: &DriftSpec,
        j: usize,
        k: usize,
        centre: &[f64],
        point: &mut [f64],
        scratch: &mut [f64],
        integ: &Adaptive,
        failure: &mut Option<Error>,
    ) -> f64 {
        let d = scratch.len();
        if k == 2 * d {
            if failure.is_some() {
                return 0.0;
            }
            let (x, v) = point.split_at(d);
            return match b.eval_into(x, v, scratch) {
                Ok(()) => scratch[j],
                Err(e) => {
                    *failure = Some(e);
                    0.0
                }
            };
        }
        let (coord, sigma) = if k < d {
            (Coord::X(k), self.sigma_x)
        } else {
            (Coord::V(k - d), self.sigma_v)
        };
        let mu = centre[k];
        let cuts = b.breakpoints(coord, mu - 12.0 * sigma, mu + 12.0 * sigma);
        let cell = std::cell::RefCell::new((point, scratch, failure));
        gaussian_expectation(
            |y| {
                let mut guard = cell.borrow_mut();
                let (point, scratch, failure) = &mut *guard;
                point[k] = y;
                self.nested(b, j, k + 1, centre, point, scratch, integ, failure)
            },
            mu,
            sigma,
            &cuts,
            integ,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn z(x: f64, v: f64) -> PhaseState {
        PhaseState::scalar(x, v)
    }

    #[test]
    fn catalog_examples() {
        assert_eq!(DriftSpec::Zero.evaluate(&z(1.0, 2.0)).unwrap(), vec![0.0]);
        let fr = DriftSpec::LinearFriction { gamma: 1.0 };
        assert_eq!(fr.evaluate(&z(5.0, 2.0)).unwrap(), vec![-2.0]);
        assert_eq!(DriftSpec::SignVelocity.evaluate(&z(0.0, -0.3)).unwrap(), vec![-1.0]);
        assert_eq!(DriftSpec::SignVelocity.evaluate(&z(0.0, 0.0)).unwrap(), vec![0.0]);
    }

    #[test]
    fn constant_is_invariant_under_mollification() {
        let c = DriftSpec::Constant(vec![1.5, -2.0]);
        for n in [1, 7, 1024] {
            let md = mollify(&c, n, 0.5).unwrap();
            let s = PhaseState::new(vec![0.1, 0.2], vec![-3.0, 4.0]).unwrap();
            assert_eq!(md.evaluate(&s).unwrap(), vec![1.5, -2.0]);
        }
    }

    #[test]
    fn mollify_rejects_bad_parameters() {
        assert!(mollify(&DriftSpec::Zero, 0, 0.5).is_err());
        assert!(mollify(&DriftSpec::Zero, 4, 0.0).is_err());
    }

    #[test]
    fn sign_velocity_mollified_at_zero_is_zero() {
        let md = mollify(&DriftSpec::SignVelocity, 16, 0.5).unwrap();
        assert_eq!(md.evaluate(&z(0.3, 0.0)).unwrap(), vec![0.0]);
    }

    #[test]
    fn sign_velocity_approaches_one_monotonically() {
        let mut prev = 0.0;
        for n in [1u64, 2, 4, 16, 64, 256, 4096] {
            let b = mollify(&DriftSpec::SignVelocity, n, 0.5).unwrap().evaluate(&z(0.0, 0.5)).unwrap()[0];
            assert!(b > prev && b <= 1.0);
            prev = b;
        }
        assert!(1.0 - prev < 1e-12);
    }

    #[test]
    fn smoothed_square_wave_branches_agree() {
        // at s = 0.5 both the Fourier and the half-period sums are accurate
        for &x in &[0.0, 0.3, 1.7, -2.2, 10.0] {
            let kappa = 2.0;
            let sigma = 0.25;
            let y = kappa * x;
            let s = kappa * sigma;
            let mut acc = 0.0;
            let mut k = 1.0f64;
            while k < 200.0 {
                acc += (-0.5 * k * k * s * s).exp() * (k * y).sin() / k;
                k += 2.0;
            }
            let fourier = 4.0 / PI * acc;
            let intervals = smoothed_square_wave(kappa, x, sigma * 0.999_999_999);
            assert!((fourier - intervals).abs() < 1e-8, "{x}: {fourier} vs {intervals}");
        }
    }

    #[test]
    fn oscillatory_routes_agree() {
        let b = DriftSpec::OscillatorySingular { kappa: 3.0, beta: 0.4 };
        let md = mollify(&b, 4, 0.5).unwrap();
        let q = md.clone().with_method(MollifyMethod::Quadrature).with_quadrature_tolerance(1e-11);
        for s in [z(0.2, 0.1), z(-1.3, 0.9), z(0.0, -0.05)] {
            let a = md.evaluate(&s).unwrap()[0];
            let c = q.evaluate(&s).unwrap()[0];
            assert!((a - c).abs() < 1e-9, "{a} vs {c}");
        }
    }

    #[test]
    fn tabulated_interpolation_and_extrapolation() {
        let axes = vec![vec![0.0, 1.0], vec![0.0, 2.0]];
        // b(x, v) = x + v on the corners
        let t = TabulatedDrift::new(1, axes, vec![0.0, 2.0, 1.0, 3.0]).unwrap();
        let b = DriftSpec::Tabulated(Arc::new(t));
        assert_relative_eq!(b.evaluate(&z(0.5, 1.0)).unwrap()[0], 1.5, epsilon = 1e-15);
        match b.evaluate(&z(1.5, 1.0)) {
            Err(Error::Extrapolation { coord: 0, .. }) => {}
            other => panic!("expected extrapolation error, got {other:?}"),
        }
    }

    #[test]
    fn tabulated_csv_parsing() {
        let text = "d,1,shape,2,3\nx_1,v_1,b_1\n0,0,0\n0,1,1\n0,2,2\n1,2,3\n1,1,2\n1,0,1\n";
        let t = TabulatedDrift::from_csv_str(text).unwrap();
        assert_eq!(t.axes, vec![vec![0.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let b = DriftSpec::Tabulated(Arc::new(t));
        assert_relative_eq!(b.evaluate(&z(0.25, 1.5)).unwrap()[0], 1.75, epsilon = 1e-15);
        assert!(TabulatedDrift::from_csv_str("d,1,shape,2,2\nx_1,v_1,b_1\n0,0,0\n").is_err());
        assert!(TabulatedDrift::from_csv_str("x,1\n").is_err());
    }

    #[test]
    fn theta_bound_from_label() {
        let label = DriftSpec::SignVelocity.regularity_label().unwrap();
        assert_relative_eq!(label.theta_bound(1), 2.5, epsilon = 1e-12);
        assert!(DriftSpec::Zero.regularity_label().is_none());
    }
}
