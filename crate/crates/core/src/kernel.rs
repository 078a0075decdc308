//! The kinetic Gaussian kernel.
//!
//! `G_t = (int_0^t W_s ds, W_t)` is the position/velocity displacement of the
//! free kinetic flow driven by a Brownian motion. Its density `g_t`, the
//! transport shift `(x, v) -> (x + t v, v)` and the associated semigroup
//! `P_t f(z) = E f(G_t + shift_t z)` are the building blocks of the scheme.

use std::f64::consts::PI;

use crate::error::{config, domain, Result};
use crate::quadrature::GaussRule;
use crate::rng::CounterRng;
use crate::state::{norm, PhaseState};

/// Applies the transport shift `(x, v) -> (x + t v, v)`.
pub fn gamma_shift(t: f64, z: &PhaseState) -> PhaseState {
    PhaseState {
        x: z.x.iter().zip(&z.v).map(|(x, v)| x + t * v).collect(),
        v: z.v.clone(),
    }
}

/// Per-dimension covariance of `(W_t, int_0^t W_s ds)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCovariance {
    t: f64,
}

impl KernelCovariance {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return domain(format!("kernel time must be positive and finite, got {t}"));
        }
        Ok(Self { t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `[[t, t^2/2], [t^2/2, t^3/3]]` in `(dW, dI)` ordering.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let t = self.t;
        [[t, 0.5 * t * t], [0.5 * t * t, t * t * t / 3.0]]
    }

    /// `t^4 / 12`.
    pub fn determinant(&self) -> f64 {
        self.t.powi(4) / 12.0
    }

    pub fn inverse(&self) -> [[f64; 2]; 2] {
        let [[a, b], [_, c]] = self.matrix();
        let det = a * c - b * b;
        [[c / det, -b / det], [-b / det, a / det]]
    }
}

/// Density of `G_t` at `z = (x, v)`, where `x` plays the role of the
/// integrated component and `v` of the Brownian component.
pub fn kernel_density(t: f64, z: &PhaseState) -> Result<f64> {
    KernelCovariance::new(t)?;
    let d = z.dim() as i32;
    let quad: f64 = z
        .x
        .iter()
        .zip(&z.v)
        .map(|(x, v)| 3.0 * x * x + (3.0 * x - 2.0 * t * v).powi(2))
        .sum();
    // (2 pi)^{-d} (t^4 / 12)^{-d/2}
    let prefactor = (3.0f64.sqrt() / (PI * t * t)).powi(d);
    Ok(prefactor * (-quad / (2.0 * t.powi(3))).exp())
}

/// Gradient-free Mahalanobis form `z^T Sigma(t)^{-1} z` summed over
/// dimensions, with `Sigma` in `(W, I)` ordering; used to cross-check the
/// exponent of [`kernel_density`].
pub fn kernel_quadratic_form(t: f64, z: &PhaseState) -> Result<f64> {
    let inv = KernelCovariance::new(t)?.inverse();
    Ok(z
        .x
        .iter()
        .zip(&z.v)
        .map(|(i, w)| inv[0][0] * w * w + 2.0 * inv[0][1] * w * i + inv[1][1] * i * i)
        .sum())
}

/// Maps a pair of independent standard normals to one dimension of
/// `(W_t, int_0^t W_s ds)`.
#[inline]
pub fn whitened_to_kernel(t: f64, xi1: f64, xi2: f64) -> (f64, f64) {
    let dw = t.sqrt() * xi1;
    let di = t * t.sqrt() * (0.5 * xi1 + xi2 / 12f64.sqrt());
    (dw, di)
}

/// How [`semigroup_apply`] evaluates the expectation.
#[derive(Debug, Clone, Copy)]
pub enum SemigroupMethod {
    /// Tensorized Gauss-Hermite with `order` nodes per whitened coordinate.
    Quadrature { order: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupEstimate {
    pub value: f64,
    /// Zero for quadrature.
    pub std_error: f64,
}

/// `P_t f(z) = E f(x + t v + I_t, v + W_t)`.
pub fn semigroup_apply<F>(t: f64, f: F, z: &PhaseState, method: SemigroupMethod) -> Result<SemigroupEstimate>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    KernelCovariance::new(t)?;
    let d = z.dim();
    let base = gamma_shift(t, z);
    let mut x = base.x.clone();
    let mut v = base.v.clone();
    match method {
        SemigroupMethod::Quadrature { order } => {
            if order < 1 {
                return config("quadrature order must be at least 1");
            }
            let rule = GaussRule::hermite_normal(order);
            let coords = 2 * d;
            let total = order
                .checked_pow(coords as u32)
                .ok_or_else(|| crate::Error::Config("tensor grid too large".into()))?;
            let mut idx = vec![0usize; coords];
            let mut acc = 0.0;
            for _ in 0..total {
                let mut w = 1.0;
                for i in 0..d {
                    let (a, b) = (idx[2 * i], idx[2 * i + 1]);
                    w *= rule.weights[a] * rule.weights[b];
                    let (dw, di) = whitened_to_kernel(t, rule.nodes[a], rule.nodes[b]);
                    x[i] = base.x[i] + di;
                    v[i] = base.v[i] + dw;
                }
                acc += w * f(&x, &v);
                for slot in idx.iter_mut() {
                    *slot += 1;
                    if *slot < order {
                        break;
                    }
                    *slot = 0;
                }
            }
            Ok(SemigroupEstimate {
                value: acc,
                std_error: 0.0,
            })
        }
        SemigroupMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return config("Monte Carlo needs at least 2 samples");
            }
            let mut rng = CounterRng::new(seed, 0);
            let (mut mean, mut m2) = (0.0, 0.0);
            for k in 0..samples {
                for i in 0..d {
                    let (xi1, xi2) = rng.normal_pair();
                    let (dw, di) = whitened_to_kernel(t, xi1, xi2);
                    x[i] = base.x[i] + di;
                    v[i] = base.v[i] + dw;
                }
                let y = f(&x, &v);
                let delta = y - mean;
                mean += delta / (k + 1) as f64;
                m2 += delta * (y - mean);
            }
            let var = m2 / (samples - 1) as f64;
            Ok(SemigroupEstimate {
                value: mean,
                std_error: (var / samples as f64).sqrt(),
            })
        }
    }
}

/// `|x1 - x2|^{1/3} + |v1 - v2|`.
pub fn anisotropic_distance(z1: &PhaseState, z2: &PhaseState) -> Result<f64> {
    if z1.dim() != z2.dim() {
        return domain(format!("dimension mismatch: {} vs {}", z1.dim(), z2.dim()));
    }
    let dx: Vec<f64> = z1.x.iter().zip(&z2.x).map(|(a, b)| a - b).collect();
    let dv: Vec<f64> = z1.v.iter().zip(&z2.v).map(|(a, b)| a - b).collect();
    Ok(norm(&dx).cbrt() + norm(&dv))
}

/// A Lebesgue exponent in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Self::Infinite)
        } else if p >= 1.0 && p.is_finite() {
            Ok(Self::Finite(p))
        } else {
            domain(format!("Lebesgue exponent must lie in [1, inf], got {p}"))
        }
    }

    /// `1 / p`, zero for the infinite exponent.
    pub fn reciprocal(&self) -> f64 {
        match self {
            Self::Finite(p) => 1.0 / p,
            Self::Infinite => 0.0,
        }
    }
}

/// Exponent pair `(p_x, p_v)` of the mixed norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedExponent {
    pub p_x: Exponent,
    pub p_v: Exponent,
}

impl MixedExponent {
    pub fn new(p_x: f64, p_v: f64) -> Result<Self> {
        Ok(Self {
            p_x: Exponent::new(p_x)?,
            p_v: Exponent::new(p_v)?,
        })
    }

    /// `a . (d/2)(1 - 1/p)` with the anisotropic weights `a = (3, 1)`: the
    /// decay exponent of `t -> ||g_t||_p`.
    pub fn kernel_decay_exponent(&self, d: usize) -> f64 {
        let d = d as f64;
        1.5 * d * (1.0 - self.p_x.reciprocal()) + 0.5 * d * (1.0 - self.p_v.reciprocal())
    }
}

/// One axis of a tensor grid: trapezoid nodes on a symmetric interval.
#[derive(Debug, Clone)]
pub struct Axis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Axis {
    pub fn trapezoid(half_width: f64, points: usize) -> Result<Self> {
        if points < 2 || !(half_width > 0.0) {
            return domain("grid axis needs at least 2 points and positive width");
        }
        let h = 2.0 * half_width / (points - 1) as f64;
        let nodes = (0..points).map(|i| -half_width + i as f64 * h).collect();
        let mut weights = vec![h; points];
        weights[0] = 0.5 * h;
        weights[points - 1] = 0.5 * h;
        Ok(Self { nodes, weights })
    }
}

/// Tensor grid on `R^d x R^d`, the same axis for every position coordinate
/// and likewise for velocity.
#[derive(Debug, Clone)]
pub struct TensorGrid {
    pub d: usize,
    pub x_axis: Axis,
    pub v_axis: Axis,
}

/// Truncation radius, in marginal standard deviations, of kernel grids.
pub const KERNEL_GRID_RADIUS: f64 = 8.0;
pub const KERNEL_GRID_POINTS: usize = 257;

impl TensorGrid {
    pub fn new(d: usize, x_axis: Axis, v_axis: Axis) -> Result<Self> {
        if d == 0 {
            return domain("grid dimension must be at least 1");
        }
        Ok(Self { d, x_axis, v_axis })
    }

    /// Grid covering `radius` marginal standard deviations of `g_t`.
    pub fn for_kernel(t: f64, d: usize, points: usize, radius: f64) -> Result<Self> {
        KernelCovariance::new(t)?;
        let sx = (t.powi(3) / 3.0).sqrt();
        let sv = t.sqrt();
        Self::new(d, Axis::trapezoid(radius * sx, points)?, Axis::trapezoid(radius * sv, points)?)
    }

    fn block_len(&self, axis: &Axis) -> usize {
        axis.nodes.len().pow(self.d as u32)
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.block_len(&self.x_axis) * self.block_len(&self.v_axis)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Tabulates `f` on the grid, velocity index outermost.
    pub fn sample(&self, f: impl Fn(&[f64], &[f64]) -> f64) -> GridFunction {
        let nx = self.block_len(&self.x_axis);
        let nv = self.block_len(&self.v_axis);
        let mut x = vec![0.0; self.d];
        let mut v = vec![0.0; self.d];
        let mut values = Vec::with_capacity(nx * nv);
        for iv in 0..nv {
            fill_point(&self.v_axis, iv, &mut v);
            for ix in 0..nx {
                fill_point(&self.x_axis, ix, &mut x);
                values.push(f(&x, &v));
            }
        }
        GridFunction {
            grid: self.clone(),
            values,
        }
    }

    fn block_weight(&self, axis: &Axis, mut flat: usize) -> f64 {
        let n = axis.nodes.len();
        let mut w = 1.0;
        for _ in 0..self.d {
            w *= axis.weights[flat % n];
            flat /= n;
        }
        w
    }
}

fn fill_point(axis: &Axis, mut flat: usize, out: &mut [f64]) {
    let n = axis.nodes.len();
    for c in out.iter_mut() {
        *c = axis.nodes[flat % n];
        flat /= n;
    }
}

/// Values of a function on a [`TensorGrid`].
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: TensorGrid,
    pub values: Vec<f64>,
}

/// `( int ||f(., v)||_{p_x}^{p_v} dv )^{1/p_v}` by tensor quadrature;
/// infinite exponents become grid maxima.
pub fn mixed_lp_norm(f: &GridFunction, p: MixedExponent) -> Result<f64> {
    let grid = &f.grid;
    if grid.is_empty() || f.values.len() != grid.len() {
        return domain("mixed norm needs a nonempty grid matching the tabulated values");
    }
    let nx = grid.block_len(&grid.x_axis);
    let nv = grid.block_len(&grid.v_axis);
    let x_weights: Vec<f64> = (0..nx).map(|i| grid.block_weight(&grid.x_axis, i)).collect();
    let mut outer = 0.0f64;
    for iv in 0..nv {
        let row = &f.values[iv * nx..(iv + 1) * nx];
        let inner = match p.p_x {
            Exponent::Infinite => row.iter().fold(0.0f64, |m, y| m.max(y.abs())),
            Exponent::Finite(px) => row
                .iter()
                .zip(&x_weights)
                .map(|(y, w)| w * y.abs().powf(px))
                .sum::<f64>()
                .powf(1.0 / px),
        };
        match p.p_v {
            Exponent::Infinite => outer = outer.max(inner),
            Exponent::Finite(pv) => outer += grid.block_weight(&grid.v_axis, iv) * inner.powf(pv),
        }
    }
    Ok(match p.p_v {
        Exponent::Infinite => outer,
        Exponent::Finite(pv) => outer.powf(1.0 / pv),
    })
}
