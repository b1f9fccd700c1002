//! High-order quadrilateral finite elements on the rectangular layer domain.
//!
//! Unknowns are nodal values of `v`, which equals `u` inside the rectangle and
//! `u exp(-ik(tau - a(theta)))` in the layer. Element matrices use tensor Gauss
//! quadrature with `N + 6` points per direction; the scatterer carries the
//! Dirichlet data and the outer boundary is homogeneous.

pub mod mesh;
pub mod multifrontal;

use std::collections::HashMap;

use faer::reborrow::ReborrowMut;
use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{fem_alpha_coefficients, AlphaCoefficients, RectangularMap};
use crate::spectral1d::quadrature::{gauss_legendre, LagrangeBasis, MAX_GAUSS_POINTS};

pub use mesh::{build_mesh, BoundaryKind, Mesh, MeshParams, Region, Scatterer};
use multifrontal::{factorize, Symbolic, CONSTRAINED};

/// Role of a global node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeTag {
    Free,
    Scatterer,
    Outer,
}

/// Tensor-product Lagrange data on the reference square `[-1, 1]^2`.
#[derive(Debug, Clone)]
struct Reference {
    degree: usize,
    basis: LagrangeBasis,
    qw: Vec<f64>,
    /// Per quadrature point `(xi, eta)`.
    qpts: Vec<[f64; 2]>,
    phi: Vec<Vec<f64>>,
    dxi: Vec<Vec<f64>>,
    deta: Vec<Vec<f64>>,
}

impl Reference {
    fn new(degree: usize) -> Self {
        let basis = LagrangeBasis::lobatto(degree);
        let (gx, gw) = gauss_legendre(degree + 6).expect("degree checked by the space");
        let tab: Vec<(Vec<f64>, Vec<f64>)> = gx.iter().map(|&x| basis.values_and_derivatives(x)).collect();
        let n1 = degree + 1;
        let (mut qpts, mut qw, mut phi, mut dxi, mut deta) = (vec![], vec![], vec![], vec![], vec![]);
        for (b, &eta) in gx.iter().enumerate() {
            for (a, &xi) in gx.iter().enumerate() {
                qpts.push([xi, eta]);
                qw.push(gw[a] * gw[b]);
                let (va, da) = &tab[a];
                let (vb, db) = &tab[b];
                let mut p = vec![0.0; n1 * n1];
                let mut px = vec![0.0; n1 * n1];
                let mut py = vec![0.0; n1 * n1];
                for j in 0..n1 {
                    for i in 0..n1 {
                        p[j * n1 + i] = va[i] * vb[j];
                        px[j * n1 + i] = da[i] * vb[j];
                        py[j * n1 + i] = va[i] * db[j];
                    }
                }
                phi.push(p);
                dxi.push(px);
                deta.push(py);
            }
        }
        Reference { degree, basis, qw, qpts, phi, dxi, deta }
    }

    fn nloc(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }
}

fn bilinear(c: &[[f64; 2]; 4], xi: f64, eta: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let n = [(1.0 - xi) * (1.0 - eta), (1.0 + xi) * (1.0 - eta), (1.0 + xi) * (1.0 + eta), (1.0 - xi) * (1.0 + eta)];
    let nxi = [-(1.0 - eta), 1.0 - eta, 1.0 + eta, -(1.0 + eta)];
    let neta = [-(1.0 - xi), -(1.0 + xi), 1.0 + xi, 1.0 - xi];
    let mut x = [0.0; 2];
    let mut jac = [[0.0; 2]; 2];
    for k in 0..4 {
        for d in 0..2 {
            x[d] += 0.25 * n[k] * c[k][d];
            jac[d][0] += 0.25 * nxi[k] * c[k][d];
            jac[d][1] += 0.25 * neta[k] * c[k][d];
        }
    }
    (x, jac)
}

/// Continuous `Q_N` space on a mesh.
#[derive(Debug, Clone)]
pub struct FemSpace {
    pub mesh: Mesh,
    pub degree: usize,
    pub nodes: Vec<[f64; 2]>,
    /// Global node of local node `j (N + 1) + i` of each element.
    pub element_dofs: Vec<Vec<usize>>,
    pub tags: Vec<NodeTag>,
    reference: Reference,
}

impl FemSpace {
    pub fn new(mesh: Mesh, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Domain("polynomial degree must be at least 1".into()));
        }
        if degree + 6 > MAX_GAUSS_POINTS {
            return Err(Error::Capacity { requested: degree, max: MAX_GAUSS_POINTS - 6 });
        }
        let n = degree;
        let n1 = n + 1;
        let nv = mesh.vertices.len();
        let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
        for el in &mesh.elements {
            for e in 0..4 {
                let (p, q) = (el[e], el[(e + 1) % 4]);
                let len = edge_id.len();
                edge_id.entry((p.min(q), p.max(q))).or_insert(len);
            }
        }
        let ne = edge_id.len();
        let interior_base = nv + ne * (n - 1);
        let total = interior_base + mesh.elements.len() * (n - 1) * (n - 1);

        let gll = LagrangeBasis::lobatto(n).nodes;
        let mut nodes = vec![[0.0; 2]; total];
        let mut element_dofs = Vec::with_capacity(mesh.elements.len());
        let edge_node = |p: usize, q: usize, l: usize| {
            let base = nv + edge_id[&(p.min(q), p.max(q))] * (n - 1);
            if p < q {
                base + l - 1
            } else {
                base + n - 1 - l
            }
        };
        for (e, el) in mesh.elements.iter().enumerate() {
            let corners = mesh.element_corners(e);
            let mut dofs = vec![0; n1 * n1];
            for j in 0..n1 {
                for i in 0..n1 {
                    let g = match (i, j) {
                        (0, 0) => el[0],
                        (i, 0) if i == n => el[1],
                        (i, j) if i == n && j == n => el[2],
                        (0, j) if j == n => el[3],
                        (i, 0) => edge_node(el[0], el[1], i),
                        (i, j) if i == n => edge_node(el[1], el[2], j),
                        (i, j) if j == n => edge_node(el[3], el[2], i),
                        (0, j) => edge_node(el[0], el[3], j),
                        (i, j) => interior_base + e * (n - 1) * (n - 1) + (j - 1) * (n - 1) + (i - 1),
                    };
                    dofs[j * n1 + i] = g;
                    nodes[g] = bilinear(&corners, gll[i], gll[j]).0;
                }
            }
            element_dofs.push(dofs);
        }
        // Exact vertex coordinates, free of bilinear round-off.
        nodes[..nv].copy_from_slice(&mesh.vertices);

        let mut tags = vec![NodeTag::Free; total];
        for &([p, q], kind) in &mesh.boundary {
            let tag = match kind {
                BoundaryKind::Scatterer => NodeTag::Scatterer,
                BoundaryKind::Outer => NodeTag::Outer,
            };
            tags[p] = tag;
            tags[q] = tag;
            for l in 1..n {
                tags[edge_node(p, q, l)] = tag;
            }
        }
        Ok(FemSpace { mesh, degree, nodes, element_dofs, tags, reference: Reference::new(degree) })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn free_count(&self) -> usize {
        self.tags.iter().filter(|&&t| t == NodeTag::Free).count()
    }

    /// Region of a node; nodes on the interface count as inner.
    pub fn node_region(&self, i: usize) -> Region {
        let p = self.mesh.params;
        let [x, y] = self.nodes[i];
        let tol = 1e-12;
        if x.abs() > p.l1 + tol || y.abs() > p.l2 + tol {
            Region::Layer
        } else {
            Region::Inner
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> c64) -> Vec<c64> {
        self.nodes.iter().map(|p| f(p[0], p[1])).collect()
    }

    fn element_matrix(&self, e: usize, coef: impl Fn(f64, f64) -> AlphaCoefficients) -> Result<Mat<c64>> {
        let r = &self.reference;
        let nloc = r.nloc();
        let nq = r.qw.len();
        let corners = self.mesh.element_corners(e);
        // K = B^T (W M) B with B stacking (d/dx, d/dy, value) rows per point.
        let mut b = Mat::<c64>::zeros(3 * nq, nloc);
        let mut wmb = Mat::<c64>::zeros(3 * nq, nloc);
        for q in 0..nq {
            let [xi, eta] = r.qpts[q];
            let (x, jac) = bilinear(&corners, xi, eta);
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if !(det > 0.0) {
                return Err(Error::Geometry(format!("element {e} is degenerate or inverted")));
            }
            // J^{-T} maps reference to physical gradients.
            let it = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
            let a = coef(x[0], x[1]);
            let finite = a.a1.iter().flatten().all(|v| v.is_finite())
                && a.a2.iter().chain(&a.a3).chain(std::iter::once(&a.a4)).all(|v| v.re.is_finite() && v.im.is_finite());
            if !finite {
                return Err(Error::NonFinite(format!("layer coefficients of element {e} at ({}, {})", x[0], x[1])));
            }
            let w = r.qw[q] * det;
            let m = [
                [c64::from(a.a1[0][0]), c64::from(a.a1[0][1]), a.a3[0]],
                [c64::from(a.a1[1][0]), c64::from(a.a1[1][1]), a.a3[1]],
                [a.a2[0], a.a2[1], a.a4],
            ];
            for l in 0..nloc {
                let (dx, dy) = (r.dxi[q][l], r.deta[q][l]);
                let row = [it[0][0] * dx + it[0][1] * dy, it[1][0] * dx + it[1][1] * dy, r.phi[q][l]];
                for s in 0..3 {
                    b[(3 * q + s, l)] = c64::from(row[s]);
                }
                for s in 0..3 {
                    wmb[(3 * q + s, l)] = (m[s][0] * row[0] + m[s][1] * row[1] + m[s][2] * row[2]) * w;
                }
            }
        }
        let mut k = Mat::<c64>::zeros(nloc, nloc);
        faer::linalg::matmul::matmul(
            k.rb_mut(),
            faer::Accum::Replace,
            b.transpose(),
            wmb.as_ref(),
            c64::new(1.0, 0.0),
            faer::Par::Seq,
        );
        Ok(k)
    }

    fn centroid(&self, e: usize) -> [f64; 2] {
        let c = self.mesh.element_corners(e);
        [0.25 * (c[0][0] + c[1][0] + c[2][0] + c[3][0]), 0.25 * (c[0][1] + c[1][1] + c[2][1] + c[3][1])]
    }

    /// Value of the finite element field `values` at reference point `(xi, eta)` of element `e`.
    pub fn eval_reference(&self, values: &[c64], e: usize, xi: f64, eta: f64) -> c64 {
        let vx = self.reference.basis.values(xi);
        let vy = self.reference.basis.values(eta);
        let n1 = self.degree + 1;
        let dofs = &self.element_dofs[e];
        let mut s = c64::new(0.0, 0.0);
        for j in 0..n1 {
            for i in 0..n1 {
                s += values[dofs[j * n1 + i]] * (vx[i] * vy[j]);
            }
        }
        s
    }
}

/// Element matrices, with shared storage for identical interior rectangles.
#[derive(Debug, Clone)]
pub struct ElementMatrices {
    mats: Vec<Mat<c64>>,
    of: Vec<usize>,
}

impl ElementMatrices {
    pub fn get(&self, e: usize) -> &Mat<c64> {
        &self.mats[self.of[e]]
    }

    pub fn stored(&self) -> usize {
        self.mats.len()
    }
}

/// Assembled system for the free nodes, with the boundary values eliminated.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub k: f64,
    pub matrices: ElementMatrices,
    /// Free index of each node, or [`multifrontal::CONSTRAINED`].
    pub free_of: Vec<usize>,
    pub free_nodes: Vec<usize>,
    /// Element dof lists in free numbering.
    pub local_free: Vec<Vec<usize>>,
    pub rhs: Vec<c64>,
    /// Prescribed nodal values (zero at free nodes).
    pub boundary_values: Vec<c64>,
}

/// Assembles the layer form for boundary data `g` on the scatterer. The outer
/// boundary is homogeneous.
/// Free index of every node (`CONSTRAINED` for Dirichlet nodes), the free nodes in
/// order, and the free index of each element's local nodes.
fn free_numbering(space: &FemSpace) -> (Vec<usize>, Vec<usize>, Vec<Vec<usize>>) {
    let mut free_of = vec![CONSTRAINED; space.dim()];
    let mut free_nodes = Vec::new();
    for (i, &t) in space.tags.iter().enumerate() {
        if t == NodeTag::Free {
            free_of[i] = free_nodes.len();
            free_nodes.push(i);
        }
    }
    let local_free = space.element_dofs.iter().map(|d| d.iter().map(|&g| free_of[g]).collect()).collect();
    (free_of, free_nodes, local_free)
}

pub fn assemble(space: &FemSpace, map: &RectangularMap, k: f64, g: impl Fn(f64, f64) -> c64) -> Result<FemSystem> {
    let p = space.mesh.params;
    if (map.l1 - p.l1).abs() > 1e-12 * p.l1 || (map.l2 - p.l2).abs() > 1e-12 * p.l2 {
        return Err(Error::Geometry(format!(
            "map rectangle {} x {} differs from mesh rectangle {} x {}",
            map.l1, map.l2, p.l1, p.l2
        )));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    let nel = space.mesh.elements.len();
    let mut mats = Vec::new();
    let mut of = Vec::with_capacity(nel);
    let mut cache: HashMap<(i64, i64), usize> = HashMap::new();
    for e in 0..nel {
        let c = space.mesh.element_corners(e);
        let axis_aligned = c[0][1] == c[1][1] && c[1][0] == c[2][0] && c[2][1] == c[3][1] && c[3][0] == c[0][0];
        if space.mesh.regions[e] == Region::Inner && axis_aligned {
            let key = (((c[1][0] - c[0][0]) * 1e12).round() as i64, ((c[3][1] - c[0][1]) * 1e12).round() as i64);
            if let Some(&i) = cache.get(&key) {
                of.push(i);
                continue;
            }
            mats.push(space.element_matrix(e, |_, _| AlphaCoefficients::interior(k))?);
            cache.insert(key, mats.len() - 1);
        } else if space.mesh.regions[e] == Region::Inner {
            mats.push(space.element_matrix(e, |_, _| AlphaCoefficients::interior(k))?);
        } else {
            mats.push(space.element_matrix(e, |x, y| fem_alpha_coefficients(map, k, x, y))?);
        }
        of.push(mats.len() - 1);
    }
    let matrices = ElementMatrices { mats, of };

    let (free_of, free_nodes, local_free) = free_numbering(space);
    let mut boundary_values = vec![c64::new(0.0, 0.0); space.dim()];
    for (i, &t) in space.tags.iter().enumerate() {
        if t == NodeTag::Scatterer {
            let [x, y] = space.nodes[i];
            boundary_values[i] = g(x, y);
        }
    }
    let mut system = FemSystem {
        k,
        matrices,
        free_of,
        free_nodes,
        local_free,
        rhs: Vec::new(),
        boundary_values,
    };
    let zero = vec![c64::new(0.0, 0.0); system.free_nodes.len()];
    system.rhs = system.galerkin_residual(space, &system.full_values(&zero)).into_iter().map(|v| -v).collect();
    Ok(system)
}

impl FemSystem {
    pub fn dim(&self) -> usize {
        self.free_nodes.len()
    }

    /// Nodal vector with free entries `x` and the prescribed boundary values.
    pub fn full_values(&self, x: &[c64]) -> Vec<c64> {
        let mut v = self.boundary_values.clone();
        for (f, &node) in self.free_nodes.iter().enumerate() {
            v[node] = x[f];
        }
        v
    }

    /// Rows of the free nodes applied to a full nodal vector, `A_ff x_f + A_fd x_d`.
    pub fn galerkin_residual(&self, space: &FemSpace, values: &[c64]) -> Vec<c64> {
        let mut out = vec![c64::new(0.0, 0.0); self.dim()];
        for (e, dofs) in space.element_dofs.iter().enumerate() {
            let m = self.matrices.get(e);
            let lf = &self.local_free[e];
            for (j, &dj) in dofs.iter().enumerate() {
                let v = values[dj];
                if v == c64::new(0.0, 0.0) {
                    continue;
                }
                for (i, &fi) in lf.iter().enumerate() {
                    if fi != CONSTRAINED {
                        out[fi] += m[(i, j)] * v;
                    }
                }
            }
        }
        out
    }

    /// `A_ff x`.
    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        let mut out = vec![c64::new(0.0, 0.0); self.dim()];
        for (e, lf) in self.local_free.iter().enumerate() {
            let m = self.matrices.get(e);
            for (j, &fj) in lf.iter().enumerate() {
                if fj == CONSTRAINED {
                    continue;
                }
                let v = x[fj];
                for (i, &fi) in lf.iter().enumerate() {
                    if fi != CONSTRAINED {
                        out[fi] += m[(i, j)] * v;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Bound on the stored factors, in bytes.
    pub memory_limit: usize,
    /// Relative residual every accepted solve must meet.
    pub tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { memory_limit: 3 << 30, tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct FemSolution {
    /// Nodal values including the prescribed ones.
    pub values: Vec<c64>,
    /// `|A x - b| / |b|` in the Euclidean norm.
    pub residual: f64,
    pub refinements: usize,
    pub factor_bytes: usize,
}

fn norm2(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Bytes the factors of any system on `space` would occupy. Needs no assembly.
pub fn factor_estimate(space: &FemSpace) -> Result<usize> {
    let (_, free_nodes, local_free) = free_numbering(space);
    let cent: Vec<[f64; 2]> = (0..space.mesh.elements.len()).map(|e| space.centroid(e)).collect();
    Ok(Symbolic::analyze(free_nodes.len(), &local_free, &cent)?.factor_bytes())
}

/// Direct solve with iterative refinement against the element-assembled operator.
pub fn solve(space: &FemSpace, system: &FemSystem, opts: &SolveOptions) -> Result<FemSolution> {
    let n = system.dim();
    let bnorm = norm2(&system.rhs);
    if bnorm == 0.0 || n == 0 {
        return Ok(FemSolution { values: system.full_values(&vec![c64::new(0.0, 0.0); n]), residual: 0.0, refinements: 0, factor_bytes: 0 });
    }
    let cent: Vec<[f64; 2]> = (0..space.mesh.elements.len()).map(|e| space.centroid(e)).collect();
    let symbolic = Symbolic::analyze(n, &system.local_free, &cent)?;
    let bytes = symbolic.factor_bytes();
    if bytes > opts.memory_limit {
        return Err(Error::Memory { dofs: n, bytes, limit: opts.memory_limit });
    }
    let fac = factorize(symbolic, &system.local_free, |e| system.matrices.get(e).as_ref())?;
    let mut x = system.rhs.clone();
    fac.solve_in_place(&mut x);
    let mut residual = f64::INFINITY;
    let mut refinements = 0;
    for step in 0..=3 {
        let ax = system.apply(&x);
        let mut r: Vec<c64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let rel = norm2(&r) / bnorm;
        if !rel.is_finite() {
            return Err(Error::NonFinite("finite element solution".into()));
        }
        residual = rel;
        if rel <= 1e-3 * opts.tolerance || step == 3 {
            break;
        }
        fac.solve_in_place(&mut r);
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += di;
        }
        refinements += 1;
    }
    if residual > opts.tolerance {
        return Err(Error::Solver(format!("relative residual {residual:.3e} above {:.1e}", opts.tolerance)));
    }
    Ok(FemSolution { values: system.full_values(&x), residual, refinements, factor_bytes: bytes })
}

/// L2 norms of the real and imaginary parts of the error, per region and in total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Errors {
    pub inner: [f64; 2],
    pub layer: [f64; 2],
    pub total: [f64; 2],
}

/// Which part of a complex error to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Re,
    Im,
}

/// Quadrature of `|part(v_h - oracle)|^2`, accumulated per region and over the whole mesh.
pub fn l2_errors(space: &FemSpace, values: &[c64], oracle: impl Fn(f64, f64) -> c64) -> L2Errors {
    let r = &space.reference;
    let nloc = r.nloc();
    let mut acc = [[0.0f64; 2]; 2];
    let mut total = [0.0f64; 2];
    for (e, dofs) in space.element_dofs.iter().enumerate() {
        let corners = space.mesh.element_corners(e);
        let slot = if space.mesh.regions[e] == Region::Inner { 0 } else { 1 };
        for q in 0..r.qw.len() {
            let [xi, eta] = r.qpts[q];
            let (x, jac) = bilinear(&corners, xi, eta);
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            let mut vh = c64::new(0.0, 0.0);
            for l in 0..nloc {
                vh += values[dofs[l]] * r.phi[q][l];
            }
            let d = vh - oracle(x[0], x[1]);
            let w = r.qw[q] * det;
            let parts = [d.re * d.re * w, d.im * d.im * w];
            for s in 0..2 {
                acc[slot][s] += parts[s];
                total[s] += parts[s];
            }
        }
    }
    L2Errors {
        inner: [acc[0][0].sqrt(), acc[0][1].sqrt()],
        layer: [acc[1][0].sqrt(), acc[1][1].sqrt()],
        total: [total[0].sqrt(), total[1].sqrt()],
    }
}

/// One entry of [`l2_errors`].
pub fn l2_error(space: &FemSpace, values: &[c64], oracle: impl Fn(f64, f64) -> c64, region: Region, part: Part) -> f64 {
    let e = l2_errors(space, values, oracle);
    let pair = match region {
        Region::Inner => e.inner,
        Region::Layer => e.layer,
    };
    match part {
        Part::Re => pair[0],
        Part::Im => pair[1],
    }
}

/// Nodal field dump: coordinates, real and imaginary parts, and region (1 inner, 2 layer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldExport {
    pub points: Vec<[f64; 2]>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub region: Vec<u8>,
}

pub fn field_export(space: &FemSpace, values: &[c64]) -> FieldExport {
    FieldExport {
        points: space.nodes.clone(),
        re: values.iter().map(|v| v.re).collect(),
        im: values.iter().map(|v| v.im).collect(),
        region: (0..space.dim())
            .map(|i| match space.node_region(i) {
                Region::Inner => 1,
                Region::Layer => 2,
            })
            .collect(),
    }
}

/// `(x, |v|)` at the nodes on the positive x-axis inside the layer, ordered outward.
pub fn axis_profile(space: &FemSpace, values: &[c64]) -> Vec<(f64, f64)> {
    let l1 = space.mesh.params.l1;
    let mut out: Vec<(f64, f64)> = space
        .nodes
        .iter()
        .zip(values)
        .filter(|(p, _)| p[1].abs() < 1e-12 && p[0] >= l1 - 1e-12)
        .map(|(p, v)| (p[0], v.norm()))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Number of outward increases of `|v|` after its first interior maximum.
pub fn monotonicity_violations(profile: &[(f64, f64)]) -> usize {
    let vals: Vec<f64> = profile.iter().map(|p| p.1).collect();
    let Some(peak) = (1..vals.len().saturating_sub(1)).find(|&i| vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1]) else {
        return 0;
    };
    vals[peak..].windows(2).filter(|w| w[1] > w[0]).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::tau0_for;
    use crate::specfun::hankel1_scaled;

    fn setup(m: usize, degree: usize) -> (FemSpace, RectangularMap) {
        let params = MeshParams::square(m);
        let space = FemSpace::new(build_mesh(&params).unwrap(), degree).unwrap();
        let map = RectangularMap::new(1.0, 1.0, tau0_for(1e-12, 0.3).unwrap()).unwrap();
        (space, map)
    }

    fn exact_v(map: &RectangularMap, k: f64) -> impl Fn(f64, f64) -> c64 + '_ {
        move |x, y| {
            let r = x.hypot(y);
            let th = y.atan2(x);
            let tau = map.tau(r, th);
            let (a, _) = map.a_of_theta(th);
            let shift = if map.in_layer(x, y) { a } else { tau };
            hankel1_scaled(0, k * tau).unwrap() * c64::from_polar(1.0, k * shift)
        }
    }

    #[test]
    fn dof_count_and_tags() {
        let (space, _) = setup(32, 2);
        let nv = space.mesh.vertices.len();
        let nel = space.mesh.elements.len();
        // Euler: V - E + F = 0 for an annulus.
        let ne = nv + nel;
        assert_eq!(space.dim(), nv + ne + nel);
        let outer = space.tags.iter().filter(|&&t| t == NodeTag::Outer).count();
        let inner = space.tags.iter().filter(|&&t| t == NodeTag::Scatterer).count();
        assert_eq!(outer, 4 * 32 * 2);
        assert_eq!(inner, 4 * 12 * 2);
    }

    #[test]
    fn shared_nodes_coincide() {
        let (space, _) = setup(32, 3);
        let mut seen: HashMap<usize, [f64; 2]> = HashMap::new();
        let gll = LagrangeBasis::lobatto(3).nodes;
        for (e, dofs) in space.element_dofs.iter().enumerate() {
            let c = space.mesh.element_corners(e);
            for j in 0..4 {
                for i in 0..4 {
                    let p = bilinear(&c, gll[i], gll[j]).0;
                    let prev = *seen.entry(dofs[j * 4 + i]).or_insert(p);
                    assert!((prev[0] - p[0]).abs() < 1e-13 && (prev[1] - p[1]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn interior_element_is_standard_helmholtz() {
        let (space, map) = setup(32, 1);
        let e = (0..space.mesh.elements.len()).find(|&e| space.mesh.regions[e] == Region::Inner).unwrap();
        let k = 3.0;
        let kmat = space.element_matrix(e, |x, y| fem_alpha_coefficients(&map, k, x, y)).unwrap();
        let c = space.mesh.element_corners(e);
        let (hx, hy) = (c[1][0] - c[0][0], c[3][1] - c[0][1]);
        // Bilinear stiffness and mass on a rectangle, local order (0,0), (1,0), (0,1), (1,1).
        let sx = [[1.0, -1.0], [-1.0, 1.0]].map(|r: [f64; 2]| r.map(|v| v / hx));
        let mx = [[2.0, 1.0], [1.0, 2.0]].map(|r: [f64; 2]| r.map(|v| v * hx / 6.0));
        let sy = [[1.0, -1.0], [-1.0, 1.0]].map(|r: [f64; 2]| r.map(|v| v / hy));
        let my = [[2.0, 1.0], [1.0, 2.0]].map(|r: [f64; 2]| r.map(|v| v * hy / 6.0));
        for a in 0..4 {
            for b in 0..4 {
                let (ia, ja, ib, jb) = (a % 2, a / 2, b % 2, b / 2);
                let want = sx[ia][ib] * my[ja][jb] + mx[ia][ib] * sy[ja][jb] - k * k * mx[ia][ib] * my[ja][jb];
                assert!((kmat[(a, b)] - c64::from(want)).norm() < 1e-13, "{a} {b}");
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let (space, map) = setup(32, 2);
        let sys = assemble(&space, &map, 10.0, |_, _| c64::new(0.0, 0.0)).unwrap();
        let sol = solve(&space, &sys, &SolveOptions::default()).unwrap();
        assert!(sol.values.iter().all(|v| *v == c64::new(0.0, 0.0)));
    }

    #[test]
    fn residual_contract_and_linearity() {
        let (space, map) = setup(32, 1);
        let k = 10.0;
        let g = |x: f64, y: f64| crate::specfun::hankel1(0, k * x.hypot(y)).unwrap();
        let sys = assemble(&space, &map, k, g).unwrap();
        let sol = solve(&space, &sys, &SolveOptions::default()).unwrap();
        assert!(sol.residual <= 1e-10, "{}", sol.residual);
        let sys2 = assemble(&space, &map, k, |x, y| g(x, y) * 2.0).unwrap();
        let sol2 = solve(&space, &sys2, &SolveOptions::default()).unwrap();
        for (a, b) in sol.values.iter().zip(&sol2.values) {
            assert!((a * 2.0 - b).norm() <= 1e-10 * (1.0 + b.norm()));
        }
        for (i, t) in space.tags.iter().enumerate() {
            if *t == NodeTag::Outer {
                assert_eq!(sol.values[i], c64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn manufactured_residual_decays() {
        let k = 10.0;
        let mut prev: Option<f64> = None;
        for m in [32, 64] {
            let (space, map) = setup(m, 2);
            let v = exact_v(&map, k);
            let sys = assemble(&space, &map, k, &v).unwrap();
            let vals = space.interpolate(&v);
            let r = sys.galerkin_residual(&space, &vals);
            let rmax = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if let Some(p) = prev {
                // Energy-norm rate of quadratics.
                let order = (p / rmax).log2();
                assert!(order > 2.0, "residual order {order}: {p:e} -> {rmax:e}");
            }
            prev = Some(rmax);
        }
    }

    #[test]
    fn region_split_matches_single_pass() {
        let (space, map) = setup(32, 2);
        let k = 10.0;
        let v = exact_v(&map, k);
        let vals: Vec<c64> = space.interpolate(&v).iter().map(|z| z * 1.01).collect();
        let e = l2_errors(&space, &vals, &v);
        for s in 0..2 {
            let split = (e.inner[s].powi(2) + e.layer[s].powi(2)).sqrt();
            assert!((split - e.total[s]).abs() <= 1e-12 * e.total[s], "{split} {}", e.total[s]);
        }
        let own = l2_errors(&space, &vals, |x, y| {
            let (e, xi, eta) = locate(&space, x, y);
            space.eval_reference(&vals, e, xi, eta)
        });
        assert!(own.total[0] < 1e-12 && own.total[1] < 1e-12, "{own:?}");
    }

    /// Element and reference coordinates of a point, by Newton on the bilinear map.
    fn locate(space: &FemSpace, x: f64, y: f64) -> (usize, f64, f64) {
        for e in 0..space.mesh.elements.len() {
            let c = space.mesh.element_corners(e);
            let (mut xi, mut eta) = (0.0, 0.0);
            for _ in 0..20 {
                let (p, j) = bilinear(&c, xi, eta);
                let (rx, ry) = (p[0] - x, p[1] - y);
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                xi -= (j[1][1] * rx - j[0][1] * ry) / det;
                eta -= (-j[1][0] * rx + j[0][0] * ry) / det;
            }
            if xi.abs() <= 1.0 + 1e-9 && eta.abs() <= 1.0 + 1e-9 {
                return (e, xi, eta);
            }
        }
        panic!("point outside mesh");
    }

    #[test]
    fn layer_solution_is_tame() {
        let (space, map) = setup(32, 2);
        let k = 10.0;
        let g = |x: f64, y: f64| crate::specfun::hankel1(0, k * x.hypot(y)).unwrap();
        let sys = assemble(&space, &map, k, g).unwrap();
        let sol = solve(&space, &sys, &SolveOptions::default()).unwrap();
        let prof = axis_profile(&space, &sol.values);
        assert!(prof.len() > 5);
        assert!(monotonicity_violations(&prof) <= 2, "{prof:?}");
    }

    #[test]
    fn mismatched_map_is_rejected() {
        let (space, _) = setup(32, 1);
        let map = RectangularMap::new(1.2, 1.0, 100.0).unwrap();
        assert!(matches!(assemble(&space, &map, 1.0, |_, _| c64::new(1.0, 0.0)), Err(Error::Geometry(_))));
    }

    #[test]
    fn memory_limit_is_enforced() {
        let (space, map) = setup(32, 2);
        let sys = assemble(&space, &map, 5.0, |_, _| c64::new(1.0, 0.0)).unwrap();
        let opts = SolveOptions { memory_limit: 1000, ..Default::default() };
        match solve(&space, &sys, &opts) {
            Err(Error::Memory { dofs, bytes, .. }) => {
                assert_eq!(dofs, sys.dim());
                assert_eq!(bytes, factor_estimate(&space).unwrap());
            }
            other => panic!("{other:?}"),
        }
    }
}
