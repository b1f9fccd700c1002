//! Scattering from polygonal obstacles inside a rectangular compressed layer.
//!
//! The reference field is a point source `H0(k |x - c|)` with `c` inside the
//! obstacle, so the exact solution is known everywhere and errors can be
//! measured in both regions.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem2d::{
    assemble, axis_profile, build_mesh, factor_estimate, field_export, l2_errors, monotonicity_violations, solve, FemSpace, FieldExport,
    L2Errors, MeshParams, NodeTag, Scatterer, SolveOptions,
};
use crate::mapping::{tau0_for, RectangularMap};
use crate::specfun::{hankel1, hankel1_scaled};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectProblem {
    pub k: f64,
    pub l1: f64,
    pub l2: f64,
    pub d1: f64,
    pub d2: f64,
    pub eps: f64,
    pub scatterer: Scatterer,
    /// Location of the point source generating the data; must lie inside the obstacle.
    pub source: [f64; 2],
    pub m: usize,
    /// Radial cells per layer patch; `None` means `m`.
    pub layer_cells: Option<usize>,
    pub degree: usize,
}

impl Default for RectProblem {
    fn default() -> Self {
        RectProblem {
            k: 10.0,
            l1: 1.0,
            l2: 1.0,
            d1: 0.3,
            d2: 0.3,
            eps: 1e-12,
            scatterer: Scatterer::Square { width: 0.8 },
            source: [0.0, 0.0],
            m: 32,
            layer_cells: None,
            degree: 1,
        }
    }
}

/// Default L-shaped obstacle: `[-0.4, 0.4]^2` minus its upper-right quadrant.
pub const LSHAPE: Scatterer = Scatterer::LShape { width: 0.8, notch: 0.4 };

impl RectProblem {
    pub fn lshape() -> Self {
        RectProblem { scatterer: LSHAPE, source: [-0.2, -0.2], k: 10.0, degree: 2, m: 64, ..Default::default() }
    }

    /// `tau0` with `exp(-tau0 min(d1, d2)) = eps^2`.
    pub fn map(&self) -> Result<RectangularMap> {
        RectangularMap::new(self.l1, self.l2, tau0_for(self.eps, self.d1.min(self.d2))?)
    }

    pub fn mesh_params(&self) -> MeshParams {
        MeshParams {
            l1: self.l1,
            l2: self.l2,
            d1: self.d1,
            d2: self.d2,
            scatterer: self.scatterer,
            m: self.m,
            layer_cells: self.layer_cells.unwrap_or(self.m),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(Error::Domain(format!("wavenumber must be positive, got {}", self.k)));
        }
        if self.degree == 0 {
            return Err(Error::Domain("polynomial degree must be at least 1".into()));
        }
        if !self.scatterer.contains(self.source[0], self.source[1]) {
            return Err(Error::Geometry(format!("source {:?} must lie inside the obstacle", self.source)));
        }
        let h = self.scatterer.half_width();
        let on_edge = (self.source[0].abs() - h).abs() < 1e-12 || (self.source[1].abs() - h).abs() < 1e-12;
        if on_edge {
            return Err(Error::Geometry(format!("source {:?} lies on the obstacle boundary", self.source)));
        }
        if let Scatterer::LShape { notch, .. } = self.scatterer {
            let c = h - notch;
            if notch > 0.0 && (self.source[0] >= c - 1e-12 && self.source[1] >= c - 1e-12) {
                return Err(Error::Geometry(format!("source {:?} lies on the obstacle boundary", self.source)));
            }
        }
        self.map()?;
        Ok(())
    }

    pub fn source(&self) -> PointSource {
        PointSource { k: self.k, center: self.source }
    }
}

/// Outgoing field `H0(k |X - c|)` of a point source in physical coordinates `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSource {
    pub k: f64,
    pub center: [f64; 2],
}

impl PointSource {
    pub fn physical(&self, px: f64, py: f64) -> Result<Complex64> {
        hankel1(0, self.k * (px - self.center[0]).hypot(py - self.center[1]))
    }

    /// `u(x) = U(tau(x) x / |x|)` at a computational point.
    pub fn u(&self, map: &RectangularMap, x: f64, y: f64) -> Result<Complex64> {
        let [px, py] = map.image(x, y);
        self.physical(px, py)
    }

    /// `v = u exp(-ik(tau - a(theta)))` at a layer point, without forming `exp(ik tau)`.
    pub fn v(&self, map: &RectangularMap, x: f64, y: f64) -> Result<Complex64> {
        if !map.in_layer(x, y) {
            return Err(Error::Domain(format!("({x}, {y}) is not in the layer")));
        }
        let r = x.hypot(y);
        let theta = y.atan2(x);
        let tau = map.tau(r, theta);
        let (a, _) = map.a_of_theta(theta);
        let (ex, ey) = (x / r, y / r);
        let c = self.center;
        let cc = c[0] * c[0] + c[1] * c[1];
        let rho = (tau * ex - c[0]).hypot(tau * ey - c[1]);
        // rho - tau, cancellation free.
        let gap = (cc - 2.0 * tau * (ex * c[0] + ey * c[1])) / (rho + tau);
        Ok(hankel1_scaled(0, self.k * rho)? * Complex64::from_polar(1.0, self.k * (gap + a)))
    }

    /// The unknown of the discrete problem: `u` inside the rectangle, `v` in the layer.
    pub fn unknown(&self, map: &RectangularMap, x: f64, y: f64) -> Result<Complex64> {
        if map.in_layer(x, y) {
            self.v(map, x, y)
        } else {
            self.u(map, x, y)
        }
    }
}

/// `H0(k tau(x))` for a source at the origin.
pub fn oracle_u(k: f64, map: &RectangularMap, x: f64, y: f64) -> Result<Complex64> {
    PointSource { k, center: [0.0, 0.0] }.u(map, x, y)
}

/// `H0(k tau) exp(-ik(tau - a(theta)))` for a source at the origin.
pub fn oracle_v(k: f64, map: &RectangularMap, x: f64, y: f64) -> Result<Complex64> {
    PointSource { k, center: [0.0, 0.0] }.v(map, x, y)
}

/// A solved problem with its errors against the point-source field.
#[derive(Debug, Clone)]
pub struct RectSolution {
    pub problem: RectProblem,
    pub space: FemSpace,
    pub values: Vec<Complex64>,
    pub residual: f64,
    pub errors: L2Errors,
    pub seconds: f64,
}

fn checked<'a>(f: impl Fn(f64, f64) -> Result<Complex64> + 'a) -> impl Fn(f64, f64) -> Complex64 + 'a {
    move |x, y| f(x, y).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
}

pub fn solve_problem(problem: &RectProblem, opts: &SolveOptions) -> Result<RectSolution> {
    problem.validate()?;
    let start = Instant::now();
    let map = problem.map()?;
    let space = FemSpace::new(build_mesh(&problem.mesh_params())?, problem.degree)?;
    let bytes = factor_estimate(&space)?;
    if bytes > opts.memory_limit {
        return Err(Error::Memory { dofs: space.free_count(), bytes, limit: opts.memory_limit });
    }
    let src = problem.source();
    // The scatterer lies inside the rectangle, where the unknown is u itself.
    let system = assemble(&space, &map, problem.k, checked(|x, y| src.u(&map, x, y)))?;
    if system.boundary_values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("boundary data".into()));
    }
    let sol = solve(&space, &system, opts)?;
    let errors = l2_errors(&space, &sol.values, checked(|x, y| src.unknown(&map, x, y)));
    Ok(RectSolution {
        problem: *problem,
        space,
        values: sol.values,
        residual: sol.residual,
        errors,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RowStatus {
    Solved,
    /// Factors would exceed the memory budget.
    SkippedMemory { dofs: usize, bytes: usize },
    Failed(String),
}

/// One mesh of a convergence study. Errors are `[e_u^R, e_u^I]` on the inner
/// region followed by `[e_v^R, e_v^I]` on the layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub m: usize,
    pub dofs: usize,
    pub status: RowStatus,
    pub errors: Option<[f64; 4]>,
    /// `log2(e_prev / e)`, present when this row and the previous one both solved.
    pub orders: Option<[f64; 4]>,
    pub residual: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub problem: RectProblem,
    pub rows: Vec<StudyRow>,
}

impl ErrorReport {
    /// Orders of the last pair of consecutive solved rows.
    pub fn finest_orders(&self) -> Option<[f64; 4]> {
        self.rows.iter().rev().find_map(|r| r.orders)
    }
}

/// Solves `base` on each mesh in `ms`, recording errors and observed orders.
pub fn convergence_study(base: &RectProblem, ms: &[usize], opts: &SolveOptions) -> ErrorReport {
    let mut rows: Vec<StudyRow> = Vec::with_capacity(ms.len());
    for &m in ms {
        let problem = RectProblem { m, ..*base };
        let start = Instant::now();
        let row = match solve_problem(&problem, opts) {
            Ok(sol) => {
                let e = [sol.errors.inner[0], sol.errors.inner[1], sol.errors.layer[0], sol.errors.layer[1]];
                let orders = rows.last().and_then(|p| p.errors).map(|p| {
                    let mut o = [0.0; 4];
                    for i in 0..4 {
                        o[i] = (p[i] / e[i]).log2();
                    }
                    o
                });
                StudyRow {
                    m,
                    dofs: sol.space.free_count(),
                    status: RowStatus::Solved,
                    errors: Some(e),
                    orders,
                    residual: Some(sol.residual),
                    seconds: sol.seconds,
                }
            }
            Err(Error::Memory { dofs, bytes, .. }) => StudyRow {
                m,
                dofs,
                status: RowStatus::SkippedMemory { dofs, bytes },
                errors: None,
                orders: None,
                residual: None,
                seconds: start.elapsed().as_secs_f64(),
            },
            Err(err) => StudyRow {
                m,
                dofs: 0,
                status: RowStatus::Failed(err.to_string()),
                errors: None,
                orders: None,
                residual: None,
                seconds: start.elapsed().as_secs_f64(),
            },
        };
        rows.push(row);
    }
    ErrorReport { problem: *base, rows }
}

/// Fields and diagnostics of an L-shaped obstacle run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LShapeResult {
    pub problem: RectProblem,
    pub field: FieldExport,
    pub errors: L2Errors,
    pub residual: f64,
    /// Largest nodal magnitude on the outer boundary.
    pub outer_max: f64,
    /// Outward increases of `|v|` along the positive x-axis after its first peak.
    pub axis_violations: usize,
}

pub fn lshape_demo(problem: &RectProblem, opts: &SolveOptions) -> Result<LShapeResult> {
    let sol = solve_problem(problem, opts)?;
    let outer_max = sol
        .space
        .tags
        .iter()
        .zip(&sol.values)
        .filter(|(t, _)| **t == NodeTag::Outer)
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max);
    let axis_violations = monotonicity_violations(&axis_profile(&sol.space, &sol.values));
    Ok(LShapeResult {
        problem: *problem,
        field: field_export(&sol.space, &sol.values),
        errors: sol.errors,
        residual: sol.residual,
        outer_max,
        axis_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map() -> RectangularMap {
        RectProblem::default().map().unwrap()
    }

    #[test]
    fn default_tau0() {
        assert!((map().tau0 - 184.206_807_439_523_6).abs() < 1e-9);
    }

    #[test]
    fn oracle_matches_hankel_through_the_map() {
        let m = map();
        let k = 10.0;
        let want = hankel1(0, k * m.tau(1.1, 0.0)).unwrap();
        assert!((oracle_u(k, &m, 1.1, 0.0).unwrap() - want).norm() < 1e-14 * want.norm().max(1e-300));
        let inner = oracle_u(k, &m, 0.5, 0.3).unwrap();
        assert_eq!(inner, hankel1(0, k * 0.5f64.hypot(0.3)).unwrap());
    }

    #[test]
    fn oracle_v_on_the_interface_equals_u() {
        let m = map();
        let k = 7.0;
        for &(x, y) in &[(1.0 + 1e-15, 0.2), (-0.3, 1.0 + 1e-15), (1.0 + 1e-15, 1.0 + 1e-15)] {
            let u = oracle_u(k, &m, x, y).unwrap();
            let v = oracle_v(k, &m, x, y).unwrap();
            assert!((u - v).norm() < 1e-10 * u.norm(), "{u} {v}");
        }
        assert!(oracle_v(k, &m, 0.5, 0.5).is_err());
    }

    #[test]
    fn v_times_omega_is_u() {
        let m = map();
        let src = PointSource { k: 5.0, center: [0.1, -0.15] };
        let mut seed = 99u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut checked = 0;
        while checked < 1000 {
            let (x, y) = (-1.3 + 2.6 * rnd(), -1.3 + 2.6 * rnd());
            if !m.in_layer(x, y) {
                continue;
            }
            let r = x.hypot(y);
            let th = y.atan2(x);
            // Keep tau moderate so that u itself is representable without the scaled form.
            if m.tau(r, th) > 50.0 {
                continue;
            }
            let v = src.v(&m, x, y).unwrap();
            let u = src.u(&m, x, y).unwrap();
            let w = m.substitution_factor(src.k, x, y);
            assert!((v * w - u).norm() <= 1e-13 * u.norm().max(1.0), "{x} {y}: {} vs {u}", v * w);
            assert!((v.norm() - u.norm()).abs() <= 1e-12 * u.norm().max(1.0));
            checked += 1;
        }
    }

    #[test]
    fn v_decays_like_the_hankel_envelope() {
        let m = map();
        let k = 10.0;
        for &x in &[1.01, 1.05, 1.1, 1.2, 1.29] {
            let tau = m.tau(x, 0.0);
            let v = oracle_v(k, &m, x, 0.0).unwrap().norm();
            let env = (2.0 / (std::f64::consts::PI * k * tau)).sqrt();
            assert!((v / env - 1.0).abs() < 0.02, "{x}: {v} vs {env}");
        }
    }

    #[test]
    fn source_must_be_inside() {
        let p = RectProblem { source: [0.5, 0.0], ..Default::default() };
        assert!(matches!(p.validate(), Err(Error::Geometry(_))));
        let l = RectProblem { source: [0.0, 0.0], ..RectProblem::lshape() };
        assert!(matches!(l.validate(), Err(Error::Geometry(_))));
    }

    #[test]
    fn study_orders_need_consecutive_rows() {
        let base = RectProblem { k: 5.0, degree: 1, ..Default::default() };
        let rep = convergence_study(&base, &[32, 64], &SolveOptions::default());
        assert!(rep.rows[0].orders.is_none());
        let o = rep.rows[1].orders.unwrap();
        assert!(o.iter().all(|&v| v > 1.5), "{o:?}");
        let tight = SolveOptions { memory_limit: 10, ..Default::default() };
        let rep = convergence_study(&base, &[32], &tight);
        assert!(matches!(rep.rows[0].status, RowStatus::SkippedMemory { .. }));
    }

    #[test]
    fn lshape_outer_boundary_is_zero_and_degenerate_shape_matches_square() {
        let opts = SolveOptions::default();
        let p = RectProblem { m: 32, ..RectProblem::lshape() };
        let res = lshape_demo(&p, &opts).unwrap();
        assert_eq!(res.outer_max, 0.0);
        assert!(res.axis_violations <= 2);
        let json = serde_json::to_string(&res.field).unwrap();
        let back: FieldExport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, res.field);

        let degenerate = RectProblem { scatterer: Scatterer::LShape { width: 0.8, notch: 0.0 }, ..p };
        let square = RectProblem { scatterer: Scatterer::Square { width: 0.8 }, ..p };
        let a = solve_problem(&degenerate, &opts).unwrap();
        let b = solve_problem(&square, &opts).unwrap();
        let scale = b.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() <= 1e-10 * scale);
        }
    }
}
