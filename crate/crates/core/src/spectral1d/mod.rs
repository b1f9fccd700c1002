//! Two-element spectral discretization of one Fourier mode in the radial variable.
//!
//! The unknown is `v = u exp(-ik(tau - a))` on `[R, a] U [a, b]`, with a
//! Lobatto nodal basis of degree `N1` on the inner interval and `N2` on the
//! layer. Writing the test function as `w phi` makes the large phase cancel,
//! and the `k^2 tau0 tau` terms cancel exactly, so every coefficient in the
//! layer is a multiple of `1/tau` or a constant.

pub mod quadrature;

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mapping::CircularMap;

pub use quadrature::{gauss_legendre, gauss_lobatto, LagrangeBasis, MAX_GAUSS_POINTS};

/// Radial mesh: `[r_inner, a]` with degree `degrees[0]` and the layer `[a, b]` with `degrees[1]`.
#[derive(Debug, Clone)]
pub struct RadialMesh {
    pub r_inner: f64,
    pub map: CircularMap,
    pub degrees: [usize; 2],
    /// Gauss points per element.
    pub quad_points: [usize; 2],
}

impl RadialMesh {
    /// Mesh with the default `2N + 16` Gauss points per element.
    pub fn new(r_inner: f64, map: CircularMap, degrees: [usize; 2]) -> Result<Self> {
        let quad = [2 * degrees[0] + 16, 2 * degrees[1] + 16];
        Self::with_quadrature(r_inner, map, degrees, quad)
    }

    pub fn with_quadrature(r_inner: f64, map: CircularMap, degrees: [usize; 2], quad_points: [usize; 2]) -> Result<Self> {
        if !(r_inner > 0.0 && r_inner < map.a) {
            return Err(Error::Geometry(format!("need 0 < R < a, got R = {r_inner}, a = {}", map.a)));
        }
        if degrees.iter().any(|&d| d < 1) {
            return Err(Error::Domain("polynomial degrees must be at least 1".into()));
        }
        for &q in &quad_points {
            if q == 0 || q > MAX_GAUSS_POINTS {
                return Err(Error::Capacity { requested: q, max: MAX_GAUSS_POINTS });
            }
        }
        Ok(RadialMesh { r_inner, map, degrees, quad_points })
    }

    pub fn dim(&self) -> usize {
        self.degrees[0] + self.degrees[1] + 1
    }

    pub fn interval(&self, e: usize) -> (f64, f64) {
        if e == 0 {
            (self.r_inner, self.map.a)
        } else {
            (self.map.a, self.map.b)
        }
    }

    fn offset(&self, e: usize) -> usize {
        if e == 0 {
            0
        } else {
            self.degrees[0]
        }
    }
}

/// Mode-independent pieces of the radial operator: `A(n) = base + n^2 angular`.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    pub k: f64,
    pub base: Mat<Complex64>,
    pub angular: Mat<f64>,
}

impl ModeOperators {
    pub fn assemble(mesh: &RadialMesh, k: f64) -> Self {
        let dim = mesh.dim();
        let mut base = Mat::<Complex64>::zeros(dim, dim);
        let mut angular = Mat::<f64>::zeros(dim, dim);
        let ik = Complex64::new(0.0, k);
        let tau0 = mesh.map.tau0;
        for e in 0..2 {
            let basis = LagrangeBasis::lobatto(mesh.degrees[e]);
            let (gx, gw) = gauss_legendre(mesh.quad_points[e]).expect("quadrature size checked by the mesh");
            let (lo, hi) = mesh.interval(e);
            let half = 0.5 * (hi - lo);
            let off = mesh.offset(e);
            let m = basis.len();
            for (&xq, &wq) in gx.iter().zip(&gw) {
                let r = lo + half * (xq + 1.0);
                let w = wq * half;
                let (phi, dphi_ref) = basis.values_and_derivatives(xq);
                let dphi: Vec<f64> = dphi_ref.iter().map(|d| d / half).collect();
                // Coefficients of v'phi', v'phi, v phi', v phi and the n^2 v phi term.
                let (c_dd, c_d0, c_0d, c_00, c_n) = if e == 0 {
                    (
                        Complex64::from(1.0),
                        Complex64::from(-1.0 / r),
                        Complex64::from(0.0),
                        Complex64::from(-k * k),
                        1.0 / (r * r),
                    )
                } else {
                    let inv_tau = mesh.map.inv_tau(r);
                    (Complex64::from(inv_tau / tau0), -inv_tau - ik, ik, -ik * tau0, tau0 * inv_tau)
                };
                for i in 0..m {
                    for j in 0..m {
                        let val = c_dd * (dphi[j] * dphi[i])
                            + c_d0 * (dphi[j] * phi[i])
                            + c_0d * (phi[j] * dphi[i])
                            + c_00 * (phi[j] * phi[i]);
                        base[(off + i, off + j)] += val * w;
                        angular[(off + i, off + j)] += c_n * phi[j] * phi[i] * w;
                    }
                }
            }
        }
        ModeOperators { k, base, angular }
    }

    /// Full operator for mode `n`.
    pub fn matrix(&self, n: i64) -> Mat<Complex64> {
        let n2 = (n * n) as f64;
        Mat::from_fn(self.base.nrows(), self.base.ncols(), |i, j| self.base[(i, j)] + self.angular[(i, j)] * n2)
    }
}

/// Linear system for one Fourier mode before the Dirichlet rows are removed.
#[derive(Debug, Clone)]
pub struct ModeSystem {
    pub mode: i64,
    pub matrix: Mat<Complex64>,
    /// Load from interior sources; zero for the scattering problem.
    pub rhs: Vec<Complex64>,
    /// Prescribed values at `r = R` (first node) and `r = b` (last node).
    pub dirichlet: [Complex64; 2],
}

/// Nodal coefficients of one mode and the relative residual of the reduced solve.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub mode: i64,
    pub coeffs: Vec<Complex64>,
    pub residual: f64,
}

/// Mode `n` with boundary value `g_n` at `r = R` and zero at `r = b`.
pub fn assemble_mode(ops: &ModeOperators, n: i64, g_n: Complex64) -> ModeSystem {
    let matrix = ops.matrix(n);
    let dim = matrix.nrows();
    ModeSystem { mode: n, matrix, rhs: vec![Complex64::new(0.0, 0.0); dim], dirichlet: [g_n, Complex64::new(0.0, 0.0)] }
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves a mode system with the boundary values imposed, using LU with partial pivoting
/// and one step of iterative refinement.
pub fn solve_mode(sys: &ModeSystem) -> Result<ModeSolution> {
    let dim = sys.matrix.nrows();
    let last = dim - 1;
    let m = dim - 2;
    let reduced = Mat::from_fn(m, m, |i, j| sys.matrix[(i + 1, j + 1)]);
    let f: Vec<Complex64> = (0..m)
        .map(|i| {
            sys.rhs[i + 1] - sys.matrix[(i + 1, 0)] * sys.dirichlet[0] - sys.matrix[(i + 1, last)] * sys.dirichlet[1]
        })
        .collect();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
    coeffs[0] = sys.dirichlet[0];
    coeffs[last] = sys.dirichlet[1];
    let fnorm = vec_norm(&f);
    if fnorm == 0.0 {
        return Ok(ModeSolution { mode: sys.mode, coeffs, residual: 0.0 });
    }

    let lu = reduced.partial_piv_lu();
    let residual_of = |x: &Mat<Complex64>| -> Vec<Complex64> {
        (0..m)
            .map(|i| {
                let mut s = f[i];
                for j in 0..m {
                    s -= reduced[(i, j)] * x[(j, 0)];
                }
                s
            })
            .collect()
    };
    let mut x = Mat::from_fn(m, 1, |i, _| f[i]);
    lu.solve_in_place(&mut x);
    let mut res = residual_of(&x);
    for _ in 0..2 {
        if vec_norm(&res) <= 1e-14 * fnorm {
            break;
        }
        let mut corr = Mat::from_fn(m, 1, |i, _| res[i]);
        lu.solve_in_place(&mut corr);
        for i in 0..m {
            x[(i, 0)] += corr[(i, 0)];
        }
        res = residual_of(&x);
    }
    let residual = vec_norm(&res) / fnorm;
    if !residual.is_finite() || (0..m).any(|i| !x[(i, 0)].is_finite()) {
        return Err(Error::SingularMode { mode: sys.mode });
    }
    for i in 0..m {
        coeffs[i + 1] = x[(i, 0)];
    }
    Ok(ModeSolution { mode: sys.mode, coeffs, residual })
}

/// Evaluates nodal data on the two-element mesh.
#[derive(Debug, Clone)]
pub struct RadialEvaluator {
    mesh: RadialMesh,
    bases: [LagrangeBasis; 2],
}

impl RadialEvaluator {
    pub fn new(mesh: &RadialMesh) -> Self {
        RadialEvaluator {
            mesh: mesh.clone(),
            bases: [LagrangeBasis::lobatto(mesh.degrees[0]), LagrangeBasis::lobatto(mesh.degrees[1])],
        }
    }

    pub fn mesh(&self) -> &RadialMesh {
        &self.mesh
    }

    /// Physical node positions, shared interface node counted once.
    pub fn node_positions(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.mesh.dim());
        for e in 0..2 {
            let (lo, hi) = self.mesh.interval(e);
            let skip = if e == 0 { 0 } else { 1 };
            for &x in &self.bases[e].nodes[skip..] {
                out.push(lo + 0.5 * (hi - lo) * (x + 1.0));
            }
        }
        out
    }

    /// Value at `r` of the function with nodal values `coeffs`.
    pub fn eval(&self, coeffs: &[Complex64], r: f64) -> Complex64 {
        let e = if r <= self.mesh.map.a { 0 } else { 1 };
        let (lo, hi) = self.mesh.interval(e);
        let x = (2.0 * (r - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
        let off = self.mesh.offset(e);
        let n = self.mesh.degrees[e];
        self.bases[e].interpolate(&coeffs[off..=off + n], x)
    }
}
