//! Augmented Brownian paths: per-step increments of `W` together with the
//! increment of its running time integral.

use std::io::{Read, Write};

use crate::error::{config, Error, Result};
use crate::kernel::{whitened_to_kernel, KernelCovariance};
use crate::parallel::chunked_fold;
use crate::rng::CounterRng;

/// Uniform time grid `t_k = k / n` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: u64,
    pub horizon: f64,
    pub d: usize,
}

impl GridSpec {
    pub fn new(n: u64, horizon: f64, d: usize) -> Result<Self> {
        let grid = Self { n, horizon, d };
        grid.validate()?;
        Ok(grid)
    }

    /// Unit horizon.
    pub fn unit(n: u64, d: usize) -> Result<Self> {
        Self::new(n, 1.0, d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return config("grid needs at least one step per unit time");
        }
        if self.d == 0 {
            return config("dimension must be at least 1");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return config(format!("horizon must be positive, got {}", self.horizon));
        }
        let steps = self.n as f64 * self.horizon;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return config(format!("horizon {} is not a multiple of 1/{}", self.horizon, self.n));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.n as f64 * self.horizon).round() as usize
    }

    pub fn step_size(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    /// `floor(n t) / n`, as a grid index.
    pub fn floor_index(&self, t: f64) -> usize {
        (self.n as f64 * t).floor() as usize
    }
}

/// `(dW, dI)` over one step, where `dI = int_{t_k}^{t_{k+1}} (W_s - W_{t_k}) ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedIncrement {
    pub dw: Vec<f64>,
    pub di: Vec<f64>,
}

/// The driving noise of one sample, stored step-major, dimension-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPath {
    pub grid: GridSpec,
    pub dw: Vec<f64>,
    pub di: Vec<f64>,
    pub seed: u64,
    pub stream_id: u64,
}

impl AugmentedPath {
    /// An all-zero path, useful as a reusable buffer.
    pub fn zeros(grid: GridSpec) -> Self {
        let len = grid.steps() * grid.d;
        Self {
            grid,
            dw: vec![0.0; len],
            di: vec![0.0; len],
            seed: 0,
            stream_id: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    /// Slices `(dW_k, dI_k)` of step `k`.
    #[inline]
    pub fn increment(&self, k: usize) -> (&[f64], &[f64]) {
        let d = self.grid.d;
        (&self.dw[k * d..(k + 1) * d], &self.di[k * d..(k + 1) * d])
    }

    pub fn increments(&self) -> impl Iterator<Item = AugmentedIncrement> + '_ {
        (0..self.steps()).map(move |k| {
            let (dw, di) = self.increment(k);
            AugmentedIncrement {
                dw: dw.to_vec(),
                di: di.to_vec(),
            }
        })
    }

    /// Regenerates this buffer as the path keyed by `(seed, stream_id)`.
    pub fn resample(&mut self, seed: u64, stream_id: u64) {
        let h = self.grid.step_size();
        let mut rng = CounterRng::new(seed, stream_id);
        rng.seek(0);
        // block index = step * d + dim, consumed in order
        for (dw, di) in self.dw.iter_mut().zip(self.di.iter_mut()) {
            let (xi1, xi2) = rng.normal_pair();
            (*dw, *di) = whitened_to_kernel(h, xi1, xi2);
        }
        self.seed = seed;
        self.stream_id = stream_id;
    }
}

/// Samples the path keyed by `(seed, stream_id)`: for step `k` and dimension
/// `i`, the normal pair at block `k d + i` gives
/// `dW = sqrt(h) xi1`, `dI = h^{3/2} (xi1 / 2 + xi2 / sqrt(12))`.
pub fn sample_path(grid: GridSpec, seed: u64, stream_id: u64) -> Result<AugmentedPath> {
    grid.validate()?;
    let mut path = AugmentedPath::zeros(grid);
    path.resample(seed, stream_id);
    Ok(path)
}

/// Running values `(W_{t_k}, I_{t_k})` with `I_t = int_0^t W_s ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedPath {
    pub d: usize,
    /// `(steps + 1) * d` entries, grid-major.
    pub w: Vec<f64>,
    pub i: Vec<f64>,
}

impl IntegratedPath {
    pub fn len(&self) -> usize {
        self.w.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn w_at(&self, k: usize) -> &[f64] {
        &self.w[k * self.d..(k + 1) * self.d]
    }

    pub fn i_at(&self, k: usize) -> &[f64] {
        &self.i[k * self.d..(k + 1) * self.d]
    }
}

/// Kahan-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    pub(crate) fn add(&mut self, y: f64) {
        let y = y - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

/// Exact reconstruction of `(W, I)` at the grid points:
/// `W_{k+1} = W_k + dW_k`, `I_{k+1} = I_k + h W_k + dI_k`.
pub fn integrate_path(path: &AugmentedPath) -> IntegratedPath {
    let d = path.grid.d;
    let h = path.grid.step_size();
    let steps = path.steps();
    let mut w_acc = vec![Compensated::default(); d];
    let mut i_acc = vec![Compensated::default(); d];
    let mut w = Vec::with_capacity((steps + 1) * d);
    let mut i = Vec::with_capacity((steps + 1) * d);
    w.extend(std::iter::repeat_n(0.0, d));
    i.extend(std::iter::repeat_n(0.0, d));
    for k in 0..steps {
        let (dw, di) = path.increment(k);
        for j in 0..d {
            let w_k = w_acc[j].value();
            i_acc[j].add(h * w_k + di[j]);
            w_acc[j].add(dw[j]);
        }
        w.extend(w_acc.iter().map(Compensated::value));
        i.extend(i_acc.iter().map(Compensated::value));
    }
    IntegratedPath { d, w, i }
}

/// Aggregates blocks of `factor` fine steps into single coarse steps
/// describing the same Brownian trajectory.
pub fn coarsen(path: &AugmentedPath, factor: usize) -> Result<AugmentedPath> {
    let mut out = AugmentedPath::zeros(coarse_grid(&path.grid, factor)?);
    coarsen_into(path, factor, &mut out)?;
    Ok(out)
}

fn coarse_grid(fine: &GridSpec, factor: usize) -> Result<GridSpec> {
    if factor == 0 || !fine.n.is_multiple_of(factor as u64) || !fine.steps().is_multiple_of(factor) {
        return config(format!(
            "coarsening factor {factor} does not divide the {} steps of the grid (n = {})",
            fine.steps(),
            fine.n
        ));
    }
    Ok(GridSpec {
        n: fine.n / factor as u64,
        ..*fine
    })
}

/// As [`coarsen`], writing into an existing buffer.
pub fn coarsen_into(path: &AugmentedPath, factor: usize, out: &mut AugmentedPath) -> Result<()> {
    let grid = coarse_grid(&path.grid, factor)?;
    if out.grid != grid {
        *out = AugmentedPath::zeros(grid);
    }
    let d = grid.d;
    let h_fine = path.grid.step_size();
    for kc in 0..grid.steps() {
        for j in 0..d {
            let mut rel_w = 0.0; // W_{s_j} - W_{t_k}
            let mut dw_sum = Compensated::default();
            let mut di_sum = Compensated::default();
            for kf in kc * factor..(kc + 1) * factor {
                let idx = kf * d + j;
                di_sum.add(path.di[idx] + rel_w * h_fine);
                dw_sum.add(path.dw[idx]);
                rel_w = dw_sum.value();
            }
            out.dw[kc * d + j] = dw_sum.value();
            out.di[kc * d + j] = di_sum.value();
        }
    }
    out.seed = path.seed;
    out.stream_id = path.stream_id;
    Ok(())
}

/// Moment estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `|value - target| / std_error`; zero when both coincide exactly.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.value - target).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// Empirical covariance of paired samples with the standard error of the
/// mean of centred products.
pub fn covariance_estimate(a: &[f64], b: &[f64]) -> Estimate {
    let m = a.len() as f64;
    let ma = a.iter().sum::<f64>() / m;
    let mb = b.iter().sum::<f64>() / m;
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let mean = prods.iter().sum::<f64>() / m;
    let var = prods.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (m - 1.0);
    Estimate {
        value: mean * m / (m - 1.0),
        std_error: (var / m).sqrt(),
    }
}

/// Outcome of [`increment_identity_test`] for one dimension. Matrices are in
/// `(W, I)` ordering.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IncrementIdentityReport {
    pub dim: usize,
    pub samples: usize,
    /// Covariance of `D = (W_t - W_s, I_t - I_s - (t - s) W_s)`.
    pub covariance: [[Estimate; 2]; 2],
    /// Target covariance of `G_{t-s}` (zero matrix when `s = t`).
    pub expected: [[f64; 2]; 2],
    /// `Cov(D_a, Y_b)` for `Y = (W_s, I_s)`.
    pub cross_covariance: [[Estimate; 2]; 2],
}

impl IncrementIdentityReport {
    /// Largest standard-error multiple among covariance deviations.
    pub fn max_covariance_z(&self) -> f64 {
        let mut z = 0.0f64;
        for a in 0..2 {
            for b in 0..2 {
                z = z.max(self.covariance[a][b].z_score(self.expected[a][b]));
            }
        }
        z
    }

    pub fn max_cross_z(&self) -> f64 {
        self.cross_covariance
            .iter()
            .flatten()
            .fold(0.0f64, |z, e| z.max(e.z_score(0.0)))
    }
}

/// Checks that `(I_t, W_t) - shift_{t-s}(I_s, W_s)` has the law of
/// `G_{t-s}` and is uncorrelated with the path up to time `s`.
pub fn increment_identity_test(
    grid: GridSpec,
    s_index: usize,
    t_index: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<IncrementIdentityReport>> {
    grid.validate()?;
    if samples < 100 {
        return config("increment identity test needs at least 100 samples");
    }
    if s_index > t_index || t_index > grid.steps() {
        return config(format!(
            "need s_index <= t_index <= {} (got {s_index}, {t_index})",
            grid.steps()
        ));
    }
    let d = grid.d;
    let gap = grid.time(t_index) - grid.time(s_index);
    // per sample and dimension: (D_w, D_i, W_s, I_s)
    let cols = chunked_fold(
        samples,
        Vec::new,
        |acc: &mut Vec<[f64; 4]>, m| {
            let path = sample_path(grid, seed, m as u64).expect("validated grid");
            let ip = integrate_path(&path);
            for j in 0..d {
                let (ws, is) = (ip.w_at(s_index)[j], ip.i_at(s_index)[j]);
                let (wt, it) = (ip.w_at(t_index)[j], ip.i_at(t_index)[j]);
                acc.push([wt - ws, it - is - gap * ws, ws, is]);
            }
        },
        |acc, part| acc.extend(part),
    );
    let expected = if gap > 0.0 {
        KernelCovariance::new(gap)?.matrix()
    } else {
        [[0.0; 2]; 2]
    };
    let reports = (0..d)
        .map(|j| {
            let col = |c: usize| -> Vec<f64> { cols.iter().skip(j).step_by(d).map(|r| r[c]).collect() };
            let (dw, di, ws, is) = (col(0), col(1), col(2), col(3));
            let diff = [&dw, &di];
            let past = [&ws, &is];
            let covariance = [0, 1].map(|a| [0, 1].map(|b| covariance_estimate(diff[a], diff[b])));
            let cross_covariance = [0, 1].map(|a| [0, 1].map(|b| covariance_estimate(diff[a], past[b])));
            IncrementIdentityReport {
                dim: j,
                samples,
                covariance,
                expected,
                cross_covariance,
            }
        })
        .collect();
    Ok(reports)
}

const PATH_MAGIC: [u8; 4] = *b"KEMP";
const PATH_FORMAT_VERSION: u32 = 1;

/// Writes a path in the little-endian binary dump format:
/// `magic[4] version:u32 d:u32 n:u64 T:f64 seed:u64 stream_id:u64`, then
/// `(dW, dI)` pairs in step-major, dimension-minor order.
pub fn write_path(path: &AugmentedPath, mut out: impl Write) -> Result<()> {
    out.write_all(&PATH_MAGIC)?;
    out.write_all(&PATH_FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(path.grid.d as u32).to_le_bytes())?;
    out.write_all(&path.grid.n.to_le_bytes())?;
    out.write_all(&path.grid.horizon.to_le_bytes())?;
    out.write_all(&path.seed.to_le_bytes())?;
    out.write_all(&path.stream_id.to_le_bytes())?;
    for (dw, di) in path.dw.iter().zip(&path.di) {
        out.write_all(&dw.to_le_bytes())?;
        out.write_all(&di.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_path(mut input: impl Read) -> Result<AugmentedPath> {
    fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        r.read_exact(&mut buf)?;
        Ok(buf)
    }
    if take::<4>(&mut input)? != PATH_MAGIC {
        return Err(Error::Parse("not a path dump (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(&mut input)?);
    if version != PATH_FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported path dump version {version}")));
    }
    let d = u32::from_le_bytes(take(&mut input)?) as usize;
    let n = u64::from_le_bytes(take(&mut input)?);
    let horizon = f64::from_le_bytes(take(&mut input)?);
    let seed = u64::from_le_bytes(take(&mut input)?);
    let stream_id = u64::from_le_bytes(take(&mut input)?);
    let grid = GridSpec::new(n, horizon, d).map_err(|e| Error::Parse(e.to_string()))?;
    let mut path = AugmentedPath::zeros(grid);
    for idx in 0..path.dw.len() {
        path.dw[idx] = f64::from_le_bytes(take(&mut input)?);
        path.di[idx] = f64::from_le_bytes(take(&mut input)?);
    }
    path.seed = seed;
    path.stream_id = stream_id;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0, 1.0, 1).is_err());
        assert!(GridSpec::new(4, 0.0, 1).is_err());
        assert!(GridSpec::new(4, 0.3, 1).is_err());
        assert_eq!(GridSpec::new(4, 2.5, 1).unwrap().steps(), 10);
        assert_eq!(GridSpec::unit(8, 1).unwrap().floor_index(0.99), 7);
    }

    #[test]
    fn zero_increments_integrate_to_zero() {
        let path = AugmentedPath::zeros(GridSpec::unit(8, 2).unwrap());
        let ip = integrate_path(&path);
        assert!(ip.w.iter().chain(&ip.i).all(|&c| c == 0.0));
        assert_eq!(ip.len(), 9);
    }

    #[test]
    fn single_step_integration() {
        let mut path = AugmentedPath::zeros(GridSpec::unit(1, 1).unwrap());
        path.dw[0] = 0.7;
        path.di[0] = -0.2;
        let ip = integrate_path(&path);
        assert_eq!(ip.w_at(1), &[0.7]);
        assert_eq!(ip.i_at(1), &[-0.2]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let grid = GridSpec::unit(64, 2).unwrap();
        let a = sample_path(grid, 5, 9).unwrap();
        let b = sample_path(grid, 5, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_path(grid, 5, 10).unwrap());
    }

    #[test]
    fn coarsen_by_one_is_identity() {
        let path = sample_path(GridSpec::unit(16, 1).unwrap(), 1, 2).unwrap();
        assert_eq!(coarsen(&path, 1).unwrap(), path);
    }

    #[test]
    fn coarsen_rejects_non_divisors() {
        let path = sample_path(GridSpec::unit(12, 1).unwrap(), 1, 2).unwrap();
        assert!(coarsen(&path, 5).is_err());
        assert!(coarsen(&path, 0).is_err());
        assert!(coarsen(&path, 3).is_ok());
    }

    #[test]
    fn identity_test_rejects_small_samples() {
        let grid = GridSpec::unit(8, 1).unwrap();
        assert!(increment_identity_test(grid, 1, 4, 99, 0).is_err());
        assert!(increment_identity_test(grid, 5, 4, 200, 0).is_err());
    }

    #[test]
    fn identity_with_equal_times_is_degenerate() {
        let grid = GridSpec::unit(8, 1).unwrap();
        let r = &increment_identity_test(grid, 3, 3, 100, 0).unwrap()[0];
        assert_eq!(r.max_covariance_z(), 0.0);
        assert_eq!(r.max_cross_z(), 0.0);
    }

    #[test]
    fn binary_dump_round_trip() {
        let path = sample_path(GridSpec::new(8, 2.0, 2).unwrap(), 3, 4).unwrap();
        let mut buf = Vec::new();
        write_path(&path, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 8 + 8 + 8 + 16 * 16 * 2);
        assert_eq!(&buf[..4], b"KEMP");
        assert_eq!(read_path(buf.as_slice()).unwrap(), path);
        buf[0] = b'X';
        assert!(read_path(buf.as_slice()).is_err());
    }
}
