//! Gauss and Gauss-Lobatto rules on `[-1, 1]` and Lagrange bases on Lobatto nodes.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest Gauss-Legendre rule the Newton iteration is trusted for.
pub const MAX_GAUSS_POINTS: usize = 2048;

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        let nf = n as f64;
        x.powi(n as i32 + 1) * nf * (nf + 1.0) / 2.0
    } else {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

/// Gauss-Legendre nodes and weights, ascending, for `1 <= n <= MAX_GAUSS_POINTS`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Domain("Gauss rule needs at least one point".into()));
    }
    if n > MAX_GAUSS_POINTS {
        return Err(Error::Capacity { requested: n, max: MAX_GAUSS_POINTS });
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok((x, w))
}

/// Gauss-Lobatto-Legendre nodes and weights for degree `n` (`n + 1` points), ascending.
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Lobatto rule needs degree at least one");
    let m = n + 1;
    let mut x = vec![0.0; m];
    let nf = n as f64;
    x[0] = -1.0;
    x[n] = 1.0;
    for i in 1..n {
        // Interior nodes are the roots of P_n'.
        let mut z = -(PI * i as f64 / nf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            // d/dz [(1 - z^2) P_n'] = -n(n+1) P_n.
            let f = (1.0 - z * z) * dp;
            let df = -nf * (nf + 1.0) * p;
            let dz = f / df;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
    }
    for i in 0..m / 2 {
        let s = 0.5 * (x[n - i] - x[i]);
        x[i] = -s;
        x[n - i] = s;
    }
    if m % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let w = x
        .iter()
        .map(|&z| {
            let (p, _) = legendre(n, z);
            2.0 / (nf * (nf + 1.0) * p * p)
        })
        .collect();
    (x, w)
}

/// Lagrange basis on a fixed node set, evaluated by the barycentric formula.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    pub nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `diff[i][j] = l_j'(x_i)`.
    diff: Vec<Vec<f64>>,
}

impl LagrangeBasis {
    pub fn new(nodes: Vec<f64>) -> Self {
        let m = nodes.len();
        let mut weights = vec![1.0; m];
        for j in 0..m {
            for k in 0..m {
                if k != j {
                    weights[j] *= 2.0 * (nodes[j] - nodes[k]);
                }
            }
            weights[j] = 1.0 / weights[j];
        }
        let mut diff = vec![vec![0.0; m]; m];
        for i in 0..m {
            let mut row_sum = 0.0;
            for j in 0..m {
                if i != j {
                    let d = (weights[j] / weights[i]) / (nodes[i] - nodes[j]);
                    diff[i][j] = d;
                    row_sum += d;
                }
            }
            diff[i][i] = -row_sum;
        }
        LagrangeBasis { nodes, weights, diff }
    }

    pub fn lobatto(degree: usize) -> Self {
        Self::new(gauss_lobatto(degree).0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `l_j'(x_i)`.
    pub fn diff_matrix(&self) -> &[Vec<f64>] {
        &self.diff
    }

    /// Values of every basis function at `x`.
    pub fn values_into(&self, x: f64, out: &mut [f64]) {
        for (j, &xj) in self.nodes.iter().enumerate() {
            if x == xj {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[j] = 1.0;
                return;
            }
        }
        let mut s = 0.0;
        for (j, &xj) in self.nodes.iter().enumerate() {
            let t = self.weights[j] / (x - xj);
            out[j] = t;
            s += t;
        }
        out.iter_mut().for_each(|v| *v /= s);
    }

    pub fn values(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.values_into(x, &mut out);
        out
    }

    /// Values and derivatives of every basis function at `x`.
    ///
    /// Derivatives are interpolated from the nodal differentiation matrix, which stays
    /// accurate when `x` lies close to a node.
    pub fn values_and_derivatives(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let v = self.values(x);
        let m = self.len();
        let mut d = vec![0.0; m];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for j in 0..m {
                    d[j] += vi * self.diff[i][j];
                }
            }
        }
        (v, d)
    }

    /// Interpolant of nodal `coeffs` at `x`.
    pub fn interpolate<T>(&self, coeffs: &[T], x: f64) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        for (j, &xj) in self.nodes.iter().enumerate() {
            if x == xj {
                return coeffs[j];
            }
        }
        let mut num = T::default();
        let mut den = 0.0;
        for (j, &xj) in self.nodes.iter().enumerate() {
            let t = self.weights[j] / (x - xj);
            num = num + coeffs[j] * t;
            den += t;
        }
        num * (1.0 / den)
    }
}
