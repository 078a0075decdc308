//! Gauss-Legendre and Gauss-Hermite rules, plus an adaptive Gaussian
//! expectation for piecewise-smooth integrands.

use std::f64::consts::PI;

/// Nodes and weights of a one-dimensional quadrature rule.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `n`-point Gauss-Legendre rule on `[-1, 1]`.
    pub fn legendre(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be at least 1");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp;
            loop {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            dp = if d.is_finite() { d } else { dp };
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// `n`-point Gauss-Hermite rule for the standard normal weight: the
    /// weights sum to one and `sum w_i f(x_i)` approximates `E f(xi)`.
    pub fn hermite_normal(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite order must be at least 1");
        // Physicists' nodes by Newton iteration on the orthonormal recurrence.
        let pim4 = PI.powf(-0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= 1e-14 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            weights[i] = 2.0 / (pp * pp);
        }
        // Physicists' weight e^{-x^2} -> standard normal: x = sqrt(2) t, w / sqrt(pi).
        let mut out_nodes = vec![0.0; n];
        let mut out_weights = vec![0.0; n];
        for i in 0..m {
            let x = nodes[i] * std::f64::consts::SQRT_2;
            let w = weights[i] / PI.sqrt();
            out_nodes[i] = x;
            out_weights[i] = w;
            out_nodes[n - 1 - i] = -x;
            out_weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            out_nodes[m - 1] = 0.0;
        }
        Self {
            nodes: out_nodes,
            weights: out_weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over `[a, b]` with a Legendre rule.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
    }
    let d = n as f64 * (z * p1 - p2) / (z * z - 1.0);
    (p1, d)
}

/// Adaptive Gauss-Legendre integration by bisection: an interval is accepted
/// once its 10-point estimate agrees with the sum over its two halves.
pub struct Adaptive {
    rule: GaussRule,
    pub abs_tol: f64,
    pub max_depth: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self::new(1e-14)
    }
}

impl Adaptive {
    pub fn new(abs_tol: f64) -> Self {
        Self {
            rule: GaussRule::legendre(10),
            abs_tol,
            max_depth: 60,
        }
    }

    pub fn integrate(&self, a: f64, b: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let whole = self.rule.integrate(a, b, &mut *f);
        self.recurse(a, b, whole, self.abs_tol, 0, f)
    }

    fn recurse(
        &self,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
        f: &mut impl FnMut(f64) -> f64,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = self.rule.integrate(a, m, &mut *f);
        let right = self.rule.integrate(m, b, &mut *f);
        let refined = left + right;
        if (refined - whole).abs() <= tol || depth >= self.max_depth || m <= a || m >= b {
            return refined;
        }
        self.recurse(a, m, left, 0.5 * tol, depth + 1, f)
            + self.recurse(m, b, right, 0.5 * tol, depth + 1, f)
    }
}

/// Half-width, in standard deviations, of the window used for Gaussian
/// expectations; the neglected tail mass is below 1e-32.
const GAUSS_WINDOW: f64 = 12.0;

/// `E f(mu + sigma * xi)` for a standard normal `xi` and a piecewise-smooth
/// `f`, splitting the integration range at the given `breakpoints` (in the
/// coordinates of `f`) so that jumps and kinks sit on subinterval ends.
pub fn gaussian_expectation(
    mut f: impl FnMut(f64) -> f64,
    mu: f64,
    sigma: f64,
    breakpoints: &[f64],
    integrator: &Adaptive,
) -> f64 {
    if sigma == 0.0 {
        return f(mu);
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .map(|b| (b - mu) / sigma)
        .filter(|xi| xi.abs() < GAUSS_WINDOW)
        .collect();
    cuts.push(-GAUSS_WINDOW);
    cuts.push(GAUSS_WINDOW);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let norm = 1.0 / (2.0 * PI).sqrt();
    let mut g = |xi: f64| f(mu + sigma * xi) * norm * (-0.5 * xi * xi).exp();
    cuts.windows(2)
        .map(|w| integrator.integrate(w[0], w[1], &mut g))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = GaussRule::legendre(8);
        // degree 15 is the exactness limit for 8 nodes
        let exact = (2.0f64.powi(16) - 1.0) / 16.0;
        assert_relative_eq!(rule.integrate(1.0, 2.0, |x| x.powi(15)), exact, max_relative = 1e-14);
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn legendre_single_node_is_midpoint() {
        let rule = GaussRule::legendre(1);
        assert_eq!(rule.nodes, vec![0.0]);
        assert_relative_eq!(rule.weights[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn hermite_reproduces_normal_moments() {
        for n in [1usize, 2, 5, 16, 64, 100] {
            let rule = GaussRule::hermite_normal(n);
            assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
            if n >= 3 {
                let m4: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(4)).sum();
                assert_relative_eq!(m4, 3.0, max_relative = 1e-12);
            }
        }
        let rule = GaussRule::hermite_normal(40);
        let e_cos: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.cos()).sum();
        assert_relative_eq!(e_cos, (-0.5f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_jumps() {
        let a = Adaptive::new(1e-13);
        let v = a.integrate(-1.0, 2.0, &mut |x: f64| if x < 0.3 { 0.0 } else { 1.0 });
        assert!((v - 1.7).abs() < 1e-12, "{v}");
    }

    #[test]
    fn gaussian_expectation_of_step_is_normal_cdf() {
        let a = Adaptive::default();
        let mu = 0.4;
        let sigma = 0.7;
        let e = gaussian_expectation(|y| if y > 0.0 { 1.0 } else { -1.0 }, mu, sigma, &[0.0], &a);
        let exact = libm::erf(mu / (sigma * std::f64::consts::SQRT_2));
        assert!((e - exact).abs() < 1e-13, "{e} vs {exact}");
    }
}
