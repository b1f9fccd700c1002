//! Structured quadrilateral meshes of the rectangular layer domain.
//!
//! The inner rectangle `R1 = [-L1, L1] x [-L2, L2]` carries an `m x m` tensor
//! grid whose lines pass through every edge of the scatterer. The layer
//! `R2 \ R1` is covered by four trapezoidal patches, each continuing the grid
//! lines of its side of `R1` outward along rays through the origin and split
//! into `layer_cells` uniform radial steps. Element edges therefore lie on the
//! corner diagonals where `a'(theta)` jumps. This needs `d1 / L1 = d2 / L2`: the
//! outer boundary is then the scaled rectangle `(1 + d1/L1) R1`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Obstacle removed from the inner rectangle, centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scatterer {
    /// Square `[-w/2, w/2]^2`.
    Square { width: f64 },
    /// Square `[-w/2, w/2]^2` minus its upper-right corner block `[w/2 - notch, w/2]^2`.
    /// `notch = w/2` gives the usual L shape; `notch = 0` degenerates to the square.
    LShape { width: f64, notch: f64 },
}

impl Scatterer {
    pub fn half_width(&self) -> f64 {
        match *self {
            Scatterer::Square { width } | Scatterer::LShape { width, .. } => 0.5 * width,
        }
    }

    /// Whether `(x, y)` lies in the closed obstacle.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let h = self.half_width();
        let in_square = x.abs() <= h && y.abs() <= h;
        match *self {
            Scatterer::Square { .. } => in_square,
            Scatterer::LShape { notch, .. } => {
                let c = h - notch;
                in_square && !(notch > 0.0 && x > c && y > c)
            }
        }
    }

    /// Coordinates every grid must contain, per axis.
    fn breakpoints(&self) -> Vec<f64> {
        let h = self.half_width();
        match *self {
            Scatterer::Square { .. } => vec![-h, h],
            Scatterer::LShape { notch, .. } if notch > 0.0 => vec![-h, h - notch, h],
            Scatterer::LShape { .. } => vec![-h, h],
        }
    }
}

/// Region of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// Inside the inner rectangle, outside the scatterer.
    Inner,
    /// The compressed layer.
    Layer,
}

/// Kind of a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    /// On the scatterer.
    Scatterer,
    /// Outer boundary of the layer.
    Outer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    pub l1: f64,
    pub l2: f64,
    pub d1: f64,
    pub d2: f64,
    pub scatterer: Scatterer,
    /// Cells across the inner rectangle in each direction, before hole removal.
    pub m: usize,
    /// Radial cells across each layer patch.
    pub layer_cells: usize,
}

impl MeshParams {
    /// The `m x m` mesh: `m` cells across the inner rectangle and `m` across the layer.
    pub fn square(m: usize) -> Self {
        MeshParams { m, layer_cells: m, ..Default::default() }
    }
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams { l1: 1.0, l2: 1.0, d1: 0.3, d2: 0.3, scatterer: Scatterer::Square { width: 0.8 }, m: 32, layer_cells: 32 }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub params: MeshParams,
    pub vertices: Vec<[f64; 2]>,
    /// Corner vertex indices, counter-clockwise.
    pub elements: Vec<[usize; 4]>,
    pub regions: Vec<Region>,
    /// Boundary edges as vertex pairs with their kind.
    pub boundary: Vec<([usize; 2], BoundaryKind)>,
    /// Grid lines of the inner rectangle.
    pub x_lines: Vec<f64>,
    pub y_lines: Vec<f64>,
    /// Cells across the layer.
    pub layer_cells: usize,
}

/// Cells per band, proportional to band length with largest remainder.
fn allocate(lengths: &[f64], m0: usize) -> Vec<usize> {
    let total: f64 = lengths.iter().sum();
    let exact: Vec<f64> = lengths.iter().map(|l| l / total * m0 as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = m0 - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    // Largest remainder first; ties go to the lower index for determinism.
    order.sort_by(|&i, &j| {
        let ri = exact[i] - exact[i].floor();
        let rj = exact[j] - exact[j].floor();
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    for &i in &order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Cells per band between consecutive `points`, computed at the coarsest level
/// `m0 = m / 2^j >= 32` and scaled up so refinements are nested. Axes symmetric
/// about zero get mirror-symmetric counts.
fn allocate_axis(points: &[f64], m: usize) -> Vec<usize> {
    let mut m0 = m;
    while m0 % 2 == 0 && m0 / 2 >= 32 {
        m0 /= 2;
    }
    let scale = m / m0;
    let n = points.len();
    let symmetric = m0 % 2 == 0 && (0..n).all(|i| (points[i] + points[n - 1 - i]).abs() < 1e-14);
    let counts = if symmetric {
        let mut half: Vec<f64> = vec![0.0];
        half.extend(points.iter().copied().filter(|&p| p > 1e-14));
        let lengths: Vec<f64> = half.windows(2).map(|w| w[1] - w[0]).collect();
        let hc = allocate(&lengths, m0 / 2);
        let mut full: Vec<usize> = hc.iter().rev().copied().collect();
        let has_zero = points.iter().any(|p| p.abs() < 1e-14);
        if has_zero {
            full.extend(&hc);
        } else {
            // The band straddling zero gets both halves.
            let last = full.len() - 1;
            full[last] += hc[0];
            full.extend(&hc[1..]);
        }
        full
    } else {
        let lengths: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
        allocate(&lengths, m0)
    };
    counts.iter().map(|c| c * scale).collect()
}

fn band_lines(points: &[f64], counts: &[usize]) -> Vec<f64> {
    let mut out = vec![points[0]];
    for (w, &n) in points.windows(2).zip(counts) {
        for i in 1..=n {
            out.push(if i == n { w[1] } else { w[0] + (w[1] - w[0]) * i as f64 / n as f64 });
        }
    }
    out
}

fn key(p: [f64; 2]) -> (i64, i64) {
    ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64)
}

struct Builder {
    vertices: Vec<[f64; 2]>,
    index: HashMap<(i64, i64), usize>,
    elements: Vec<[usize; 4]>,
    regions: Vec<Region>,
}

impl Builder {
    fn vertex(&mut self, p: [f64; 2]) -> usize {
        let k = key(p);
        if let Some(&i) = self.index.get(&k) {
            return i;
        }
        self.vertices.push(p);
        self.index.insert(k, self.vertices.len() - 1);
        self.vertices.len() - 1
    }

    /// Adds a cell given in grid order `p00, p10, p11, p01`, fixing orientation.
    fn cell(&mut self, p: [[f64; 2]; 4], region: Region) {
        let area2 = (p[1][0] - p[0][0]) * (p[3][1] - p[0][1]) - (p[3][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let q = if area2 > 0.0 { p } else { [p[1], p[0], p[3], p[2]] };
        let ids = [self.vertex(q[0]), self.vertex(q[1]), self.vertex(q[2]), self.vertex(q[3])];
        self.elements.push(ids);
        self.regions.push(region);
    }
}

pub fn build_mesh(params: &MeshParams) -> Result<Mesh> {
    let MeshParams { l1, l2, d1, d2, scatterer, m, layer_cells } = *params;
    if !(l1 > 0.0 && l2 > 0.0 && d1 > 0.0 && d2 > 0.0) {
        return Err(Error::Geometry("L1, L2, d1, d2 must be positive".into()));
    }
    let delta = d1 / l1;
    if ((d2 / l2) - delta).abs() > 1e-12 * delta {
        return Err(Error::Geometry(format!(
            "layer patches need d1/L1 = d2/L2 so that element edges follow the corner rays, got {} and {}",
            d1 / l1,
            d2 / l2
        )));
    }
    let h = scatterer.half_width();
    if !(h > 0.0 && h < l1 && h < l2) {
        return Err(Error::Geometry(format!("scatterer half-width {h} must lie strictly inside the inner rectangle")));
    }
    if let Scatterer::LShape { notch, .. } = scatterer {
        if !(0.0..2.0 * h).contains(&notch) {
            return Err(Error::Geometry(format!("L-shape notch {notch} must lie in [0, width)")));
        }
    }

    let axis = |l: f64| -> Vec<f64> {
        let mut pts = vec![-l];
        pts.extend(scatterer.breakpoints());
        pts.push(l);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        pts
    };
    let px = axis(l1);
    let py = axis(l2);
    let cx = allocate_axis(&px, m);
    let cy = allocate_axis(&py, m);
    if cx.iter().chain(&cy).any(|&c| c < 2) || layer_cells < 2 {
        return Err(Error::Geometry(format!(
            "m = {m} with {layer_cells} layer cells leaves fewer than 2 cells across some band"
        )));
    }
    let x_lines = band_lines(&px, &cx);
    let y_lines = band_lines(&py, &cy);

    let mut b = Builder { vertices: Vec::new(), index: HashMap::new(), elements: Vec::new(), regions: Vec::new() };
    for j in 0..y_lines.len() - 1 {
        for i in 0..x_lines.len() - 1 {
            let (x0, x1, y0, y1) = (x_lines[i], x_lines[i + 1], y_lines[j], y_lines[j + 1]);
            if scatterer.contains(0.5 * (x0 + x1), 0.5 * (y0 + y1)) {
                continue;
            }
            b.cell([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], Region::Inner);
        }
    }

    // Layer patches: points (1 + delta s) * q for q on the edge of R1.
    let s: Vec<f64> = (0..=layer_cells).map(|i| i as f64 / layer_cells as f64).collect();
    let scale = |q: [f64; 2], si: f64| {
        if si == 0.0 {
            q
        } else {
            [q[0] * (1.0 + delta * si), q[1] * (1.0 + delta * si)]
        }
    };
    let edges: [Vec<[f64; 2]>; 4] = [
        y_lines.iter().map(|&y| [l1, y]).collect(),
        x_lines.iter().map(|&x| [x, l2]).collect(),
        y_lines.iter().map(|&y| [-l1, y]).collect(),
        x_lines.iter().map(|&x| [x, -l2]).collect(),
    ];
    for edge in &edges {
        for t in 0..edge.len() - 1 {
            for si in 0..layer_cells {
                let p = [
                    scale(edge[t], s[si]),
                    scale(edge[t], s[si + 1]),
                    scale(edge[t + 1], s[si + 1]),
                    scale(edge[t + 1], s[si]),
                ];
                b.cell(p, Region::Layer);
            }
        }
    }

    let Builder { vertices, elements, regions, .. } = b;
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for el in &elements {
        for e in 0..4 {
            let (p, q) = (el[e], el[(e + 1) % 4]);
            *edge_count.entry((p.min(q), p.max(q))).or_insert(0) += 1;
        }
    }
    let (ox, oy) = (l1 + d1, l2 + d2);
    let mut boundary: Vec<([usize; 2], BoundaryKind)> = edge_count
        .into_iter()
        .filter(|&(_, c)| c == 1)
        .map(|((p, q), _)| {
            let mx = 0.5 * (vertices[p][0] + vertices[q][0]);
            let my = 0.5 * (vertices[p][1] + vertices[q][1]);
            let outer = (mx.abs() - ox).abs() < 1e-9 || (my.abs() - oy).abs() < 1e-9;
            ([p, q], if outer { BoundaryKind::Outer } else { BoundaryKind::Scatterer })
        })
        .collect();
    boundary.sort_by_key(|&(e, _)| e);

    Ok(Mesh { params: *params, vertices, elements, regions, boundary, x_lines, y_lines, layer_cells })
}

impl Mesh {
    pub fn element_corners(&self, e: usize) -> [[f64; 2]; 4] {
        let el = self.elements[e];
        [self.vertices[el[0]], self.vertices[el[1]], self.vertices[el[2]], self.vertices[el[3]]]
    }

    /// Area of quadrilateral `e` (shoelace formula).
    pub fn element_area(&self, e: usize) -> f64 {
        let p = self.element_corners(e);
        let mut s = 0.0;
        for i in 0..4 {
            let (a, b) = (p[i], p[(i + 1) % 4]);
            s += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * s
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.elements.len()).filter(|&e| self.regions[e] == region).map(|e| self.element_area(e)).sum()
    }
}
