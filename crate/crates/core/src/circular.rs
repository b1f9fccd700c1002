//! Scattering from a disk through a circular compressed layer, solved mode by mode.
//!
//! The field on `R < r < b` is expanded in `e^{in theta}`; each coefficient solves a
//! two-element spectral problem in `r`. The reference solution is the exact modal
//! series of the exterior Dirichlet problem whose data are the modal coefficients
//! of the boundary trace on `r = R`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::CircularMap;
use crate::specfun::{bessel_j_sequence, hankel1_scaled_sequence, MAX_ORDER};
use crate::spectral1d::{assemble_mode, gauss_legendre, solve_mode, ModeOperators, ModeSolution, RadialEvaluator, RadialMesh};

/// Geometry, wavenumber and discretization of one circular run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularProblem {
    pub k: f64,
    /// Scatterer radius `R`.
    pub r_inner: f64,
    pub a: f64,
    pub b: f64,
    /// Layer tolerance: the layer damps outgoing waves by `eps^2`.
    pub eps: f64,
    /// Mode truncation tolerance.
    pub eps1: f64,
    pub degrees: [usize; 2],
}

impl Default for CircularProblem {
    fn default() -> Self {
        CircularProblem { k: 50.0, r_inner: 0.5, a: 1.0, b: 2.0, eps: 1e-12, eps1: 1e-12, degrees: [100, 100] }
    }
}

impl CircularProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(Error::Domain(format!("wavenumber must be positive, got {}", self.k)));
        }
        if !(self.r_inner > 0.0 && self.r_inner < self.a && self.a < self.b) {
            return Err(Error::Geometry(format!(
                "need 0 < R < a < b, got R = {}, a = {}, b = {}",
                self.r_inner, self.a, self.b
            )));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) || !(self.eps1 > 0.0) {
            return Err(Error::Domain("eps must lie in (0, 1) and eps1 must be positive".into()));
        }
        if self.degrees.iter().any(|&d| d < 1) {
            return Err(Error::Domain("polynomial degrees must be at least 1".into()));
        }
        Ok(())
    }

    pub fn map(&self) -> Result<CircularMap> {
        CircularMap::new(self.a, self.b, self.eps)
    }

    pub fn mesh(&self) -> Result<RadialMesh> {
        RadialMesh::new(self.r_inner, self.map()?, self.degrees)
    }
}

/// Number of retained modes `M`: beyond it `|J_n(kR)| <= eps1` for every order.
///
/// `J_n(x)` oscillates for `n < x`, so the first small value can be an accidental zero;
/// the cutoff is where the monotone tail starts.
pub fn mode_cutoff(k: f64, r: f64, eps1: f64) -> Result<usize> {
    let x = k * r;
    let n_max = ((x + 20.0 * x.cbrt().max(1.0) + 60.0).ceil() as usize).min(MAX_ORDER);
    let j = bessel_j_sequence(n_max, x)?;
    let mut m = n_max;
    while m > 0 && j.values[m - 1].abs() <= eps1 {
        m -= 1;
    }
    if m == n_max && j.values[n_max].abs() > eps1 {
        return Err(Error::Capacity { requested: n_max + 1, max: MAX_ORDER });
    }
    Ok(m)
}

/// Modal coefficients `-i^n J_n(kR)` of the trace of `-exp(ikx)` on `r = R`, for `n = -m ..= m`.
pub fn plane_wave_data(k: f64, r: f64, m: usize) -> Result<Vec<Complex64>> {
    let j = bessel_j_sequence(m, k * r)?;
    Ok((-(m as i64)..=m as i64)
        .map(|n| {
            let na = n.unsigned_abs() as usize;
            // J_{-n} = (-1)^n J_n and i^{-n} (-1)^n = i^n, so both signs share one formula.
            -Complex64::i().powu(na as u32) * j.values[na]
        })
        .collect())
}

/// `e^{in theta}` for `n = -m ..= m`.
fn fourier_phases(m: usize, theta: f64) -> Vec<Complex64> {
    (-(m as i64)..=m as i64).map(|n| Complex64::from_polar(1.0, n as f64 * theta)).collect()
}

/// Exact exterior solution with Dirichlet modal data `coeffs` on the circle of radius `c`:
/// `U(rho, theta) = sum_n coeffs_n H_n(k rho) / H_n(k c) e^{in theta}`.
#[derive(Debug, Clone)]
pub struct ExactSeries {
    pub k: f64,
    pub c: f64,
    pub m: usize,
    pub coeffs: Vec<Complex64>,
    /// `e^{-ikc} H_n(kc)`.
    h_at_c: Vec<Complex64>,
}

impl ExactSeries {
    pub fn new(k: f64, c: f64, coeffs: Vec<Complex64>) -> Result<Self> {
        let m = (coeffs.len() - 1) / 2;
        let h_at_c = hankel1_scaled_sequence(m, k * c)?;
        Ok(ExactSeries { k, c, m, coeffs, h_at_c })
    }

    /// Scattered field from an incident plane wave, with the data taken on the scatterer.
    pub fn plane_wave(k: f64, r_inner: f64, m: usize) -> Result<Self> {
        Self::new(k, r_inner, plane_wave_data(k, r_inner, m)?)
    }

    /// `sum_n coeffs_n (h_n(k rho) / h_n(k c)) e^{in theta}`, the field without its `e^{ik(rho - c)}` phase.
    fn reduced(&self, rho: f64, phases: &[&[Complex64]]) -> Result<Vec<Complex64>> {
        let h = hankel1_scaled_sequence(self.m, self.k * rho)?;
        let mut out = vec![Complex64::new(0.0, 0.0); phases.len()];
        for (idx, n) in (-(self.m as i64)..=self.m as i64).enumerate() {
            let na = n.unsigned_abs() as usize;
            let term = self.coeffs[idx] * (h[na] / self.h_at_c[na]);
            for (o, ph) in out.iter_mut().zip(phases) {
                *o += term * ph[idx];
            }
        }
        Ok(out)
    }

    /// Physical field `U(rho, theta)`.
    pub fn field(&self, rho: f64, theta: f64) -> Result<Complex64> {
        let ph = fourier_phases(self.m, theta);
        let s = self.reduced(rho, &[&ph])?[0];
        Ok(s * Complex64::from_polar(1.0, self.k * (rho - self.c)))
    }

    /// Transformed unknown `v = U(tau(r)) exp(-ik(tau(r) - a))` in the layer.
    ///
    /// The large phase of `U` is removed analytically, so `v` is finite up to `r = b`.
    pub fn layer_field(&self, map: &CircularMap, r: f64, theta: f64) -> Result<Complex64> {
        let ph = fourier_phases(self.m, theta);
        Ok(self.layer_fields(map, r, &[&ph])?[0])
    }

    /// Per-mode reference values at `r`: `u_n` for `r <= a`, `v_n` beyond.
    fn modal(&self, map: &CircularMap, r: f64) -> Result<Vec<Complex64>> {
        let (rho, rot) = if r <= map.a {
            (r, Complex64::from_polar(1.0, self.k * (r - self.c)))
        } else {
            (map.tau(r), Complex64::from_polar(1.0, self.k * (map.a - self.c)))
        };
        let h = hankel1_scaled_sequence(self.m, self.k * rho)?;
        Ok((-(self.m as i64)..=self.m as i64)
            .enumerate()
            .map(|(idx, n)| {
                let na = n.unsigned_abs() as usize;
                self.coeffs[idx] * (h[na] / self.h_at_c[na]) * rot
            })
            .collect())
    }

    fn layer_fields(&self, map: &CircularMap, r: f64, phases: &[&[Complex64]]) -> Result<Vec<Complex64>> {
        let rot = Complex64::from_polar(1.0, self.k * (map.a - self.c));
        Ok(self.reduced(map.tau(r), phases)?.into_iter().map(|s| s * rot).collect())
    }

    fn inner_fields(&self, r: f64, phases: &[&[Complex64]]) -> Result<Vec<Complex64>> {
        let rot = Complex64::from_polar(1.0, self.k * (r - self.c));
        Ok(self.reduced(r, phases)?.into_iter().map(|s| s * rot).collect())
    }
}

/// Which field [`CircularSolution::synthesize`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    U,
    V,
}

/// Modal solutions for `n = -M ..= M` on a common radial mesh.
#[derive(Debug, Clone)]
pub struct CircularSolution {
    pub problem: CircularProblem,
    pub m: usize,
    pub modes: Vec<ModeSolution>,
    pub max_residual: f64,
    evaluator: RadialEvaluator,
}

/// Solves the plane-wave scattering problem. Negative modes get their own solves.
pub fn solve(problem: &CircularProblem) -> Result<CircularSolution> {
    problem.validate()?;
    let mesh = problem.mesh()?;
    let m = mode_cutoff(problem.k, problem.r_inner, problem.eps1)?;
    let data = plane_wave_data(problem.k, problem.r_inner, m)?;
    solve_with_data(problem, &mesh, m, &data)
}

/// Solves every mode with boundary coefficients `data[n + m]` on `r = R`.
pub fn solve_with_data(problem: &CircularProblem, mesh: &RadialMesh, m: usize, data: &[Complex64]) -> Result<CircularSolution> {
    let ops = ModeOperators::assemble(mesh, problem.k);
    let mut modes = Vec::with_capacity(2 * m + 1);
    let mut max_residual: f64 = 0.0;
    for (idx, n) in (-(m as i64)..=m as i64).enumerate() {
        let sol = solve_mode(&assemble_mode(&ops, n, data[idx]))?;
        max_residual = max_residual.max(sol.residual);
        modes.push(sol);
    }
    Ok(CircularSolution { problem: *problem, m, modes, max_residual, evaluator: RadialEvaluator::new(mesh) })
}

impl CircularSolution {
    pub fn evaluator(&self) -> &RadialEvaluator {
        &self.evaluator
    }

    /// Nodal values of `v(., theta) = sum_n v_n e^{in theta}`.
    pub fn nodal_at_theta(&self, theta: f64) -> Vec<Complex64> {
        let dim = self.modes[0].coeffs.len();
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (sol, ph) in self.modes.iter().zip(fourier_phases(self.m, theta)) {
            for (o, c) in out.iter_mut().zip(&sol.coeffs) {
                *o += c * ph;
            }
        }
        out
    }

    /// Computed `v(r, theta)`; equals `u` for `r <= a`.
    pub fn v_at(&self, r: f64, theta: f64) -> Complex64 {
        self.evaluator.eval(&self.nodal_at_theta(theta), r)
    }

    /// `v` or `u = exp(ik(tau - a)) v` at `R <= r <= b`.
    pub fn synthesize(&self, r: f64, theta: f64, rep: Representation) -> Result<Complex64> {
        let p = &self.problem;
        if !(r >= p.r_inner && r <= p.b) {
            return Err(Error::Domain(format!("r = {r} outside [{}, {}]", p.r_inner, p.b)));
        }
        let v = self.v_at(r, theta);
        Ok(match rep {
            Representation::V => v,
            Representation::U if r <= p.a => v,
            Representation::U => v * Complex64::from_polar(1.0, p.k * (self.problem.map()?.tau(r) - p.a)),
        })
    }

    /// Physical field recovered at `a <= rho <= tau(b)` as `exp(ik(rho - a)) v(tau^{-1}(rho))`.
    pub fn far_field(&self, rho: f64, theta: f64) -> Result<Complex64> {
        let map = self.problem.map()?;
        let top = map.tau(map.b);
        if !(rho >= map.a && rho <= top) {
            return Err(Error::Domain(format!("rho = {rho} outside [{}, {top}]", map.a)));
        }
        let nodal = self.nodal_at_theta(theta);
        Ok(far_field_from_nodal(&self.evaluator, &map, self.problem.k, &nodal, rho))
    }
}

fn far_field_from_nodal(ev: &RadialEvaluator, map: &CircularMap, k: f64, nodal: &[Complex64], rho: f64) -> Complex64 {
    let r = map.inverse(rho);
    Complex64::from_polar(1.0, k * (rho - map.a)) * ev.eval(nodal, r)
}

/// Sup-norm errors of the real and imaginary parts on one ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceErrors {
    pub theta: f64,
    /// On `[R, a]`.
    pub eu_re: f64,
    pub eu_im: f64,
    /// On `[a, b]`.
    pub ev_re: f64,
    pub ev_im: f64,
}

impl SliceErrors {
    pub fn max(&self) -> f64 {
        self.eu_re.max(self.eu_im).max(self.ev_re).max(self.ev_im)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.eu_re, self.eu_im, self.ev_re, self.ev_im]
    }
}

/// Errors of a circular run against the exact series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub problem: CircularProblem,
    pub modes: usize,
    pub samples: usize,
    pub max_residual: f64,
    pub slices: Vec<SliceErrors>,
}

/// Compares against the exact series at `samples` uniform points on each interval, per angle.
pub fn error_report(sol: &CircularSolution, thetas: &[f64], samples: usize) -> Result<ErrorReport> {
    if samples < 2 {
        return Err(Error::Domain("need at least two sample points".into()));
    }
    let p = &sol.problem;
    let map = p.map()?;
    let exact = ExactSeries::plane_wave(p.k, p.r_inner, sol.m)?;
    let phases: Vec<Vec<Complex64>> = thetas.iter().map(|&t| fourier_phases(sol.m, t)).collect();
    let phase_refs: Vec<&[Complex64]> = phases.iter().map(|v| v.as_slice()).collect();
    let nodal: Vec<Vec<Complex64>> = thetas.iter().map(|&t| sol.nodal_at_theta(t)).collect();
    let mut slices: Vec<SliceErrors> =
        thetas.iter().map(|&theta| SliceErrors { theta, eu_re: 0.0, eu_im: 0.0, ev_re: 0.0, ev_im: 0.0 }).collect();

    for interval in 0..2 {
        let (lo, hi) = if interval == 0 { (p.r_inner, p.a) } else { (p.a, p.b) };
        for s in 0..samples {
            let r = lo + (hi - lo) * s as f64 / (samples - 1) as f64;
            let want = if interval == 0 {
                exact.inner_fields(r, &phase_refs)?
            } else {
                exact.layer_fields(&map, r, &phase_refs)?
            };
            for (t, slice) in slices.iter_mut().enumerate() {
                let d = sol.evaluator.eval(&nodal[t], r) - want[t];
                if !d.is_finite() {
                    return Err(Error::NonFinite(format!("error sample at r = {r}")));
                }
                if interval == 0 {
                    slice.eu_re = slice.eu_re.max(d.re.abs());
                    slice.eu_im = slice.eu_im.max(d.im.abs());
                } else {
                    slice.ev_re = slice.ev_re.max(d.re.abs());
                    slice.ev_im = slice.ev_im.max(d.im.abs());
                }
            }
        }
    }
    Ok(ErrorReport { problem: *p, modes: sol.m, samples, max_residual: sol.max_residual, slices })
}

/// Far-field comparison on `[rho_lo, rho_hi]` along one ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarFieldReport {
    pub theta: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub sup_error: f64,
    /// Least-squares slope of `log |U_N|` against `log rho` over `[a, 10a]`.
    pub decay_exponent: f64,
}

/// Recovered-field error against the exact series and the observed radial decay rate.
pub fn far_field_report(sol: &CircularSolution, theta: f64, rho_lo: f64, rho_hi: f64, samples: usize) -> Result<FarFieldReport> {
    let p = &sol.problem;
    let map = p.map()?;
    if !(rho_lo >= p.a && rho_hi > rho_lo && rho_hi <= map.tau(p.b)) {
        return Err(Error::Domain(format!("far-field range must satisfy a <= lo < hi <= tau(b), got [{rho_lo}, {rho_hi}]")));
    }
    if samples < 2 {
        return Err(Error::Domain("need at least two sample points".into()));
    }
    let exact = ExactSeries::plane_wave(p.k, p.r_inner, sol.m)?;
    let nodal = sol.nodal_at_theta(theta);
    let mut sup_error: f64 = 0.0;
    for s in 0..samples {
        let rho = rho_lo + (rho_hi - rho_lo) * s as f64 / (samples - 1) as f64;
        let got = far_field_from_nodal(&sol.evaluator, &map, p.k, &nodal, rho);
        sup_error = sup_error.max((got - exact.field(rho, theta)?).norm());
    }
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    let fit_n = samples.max(2);
    for s in 0..fit_n {
        let rho = p.a * 10f64.powf(s as f64 / (fit_n - 1) as f64);
        let x = rho.ln();
        let y = far_field_from_nodal(&sol.evaluator, &map, p.k, &nodal, rho).norm().ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let nf = fit_n as f64;
    let decay_exponent = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
    Ok(FarFieldReport { theta, rho_lo, rho_hi, sup_error, decay_exponent })
}

/// L2 norms of the error over the annulus `R < r < a` (in `u`) and the layer (in `v`).
///
/// The angular integral of a trigonometric polynomial is exact under the trapezoid rule
/// with `4M` points, which by Parseval is `2 pi sum_n |e_n(r)|^2`; that sum is used
/// directly. The radial integral uses the Gauss rule of the mesh on each element.
pub fn annulus_l2_errors(sol: &CircularSolution) -> Result<[f64; 2]> {
    let p = &sol.problem;
    let map = p.map()?;
    let exact = ExactSeries::plane_wave(p.k, p.r_inner, sol.m)?;
    let mesh = sol.evaluator.mesh();
    let mut out = [0.0; 2];
    for (e, slot) in out.iter_mut().enumerate() {
        let (lo, hi) = mesh.interval(e);
        let half = 0.5 * (hi - lo);
        let (gx, gw) = gauss_legendre(mesh.quad_points[e])?;
        let mut total = 0.0;
        for (&x, &w) in gx.iter().zip(&gw) {
            let r = lo + half * (x + 1.0);
            let want = exact.modal(&map, r)?;
            let mut s = 0.0;
            for (sol_n, ex) in sol.modes.iter().zip(&want) {
                s += (sol.evaluator.eval(&sol_n.coeffs, r) - ex).norm_sqr();
            }
            total += w * half * r * 2.0 * PI * s;
        }
        *slot = total.sqrt();
    }
    Ok(out)
}

/// One thickness of a thickness sweep; `a` stays fixed and `b = a + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessRow {
    pub d: f64,
    pub tau0: f64,
    pub report: ErrorReport,
}

/// Runs `base` once per layer thickness.
pub fn thickness_study(base: &CircularProblem, thicknesses: &[f64], thetas: &[f64], samples: usize) -> Result<Vec<ThicknessRow>> {
    thicknesses
        .iter()
        .map(|&d| {
            let problem = CircularProblem { b: base.a + d, ..*base };
            let sol = solve(&problem)?;
            let tau0 = problem.map()?.tau0;
            Ok(ThicknessRow { d, tau0, report: error_report(&sol, thetas, samples)? })
        })
        .collect()
}

/// Angles sampled when none are given.
pub const DEFAULT_THETAS: [f64; 2] = [0.0, PI / 4.0];
