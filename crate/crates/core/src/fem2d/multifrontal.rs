//! Multifrontal LU for element-assembled systems, ordered by nested dissection.
//!
//! Elements are split recursively at the median centroid along the longer side of
//! their bounding box. Every unknown is eliminated at the smallest subtree that
//! contains all elements touching it, so element interiors go first, then the
//! separators between halves. Fronts are dense and factored with partial pivoting
//! restricted to their fully summed rows.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::factor::{lu_in_place, lu_in_place_scratch};
use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_unit_lower_triangular_in_place, solve_upper_triangular_in_place,
};
use faer::reborrow::{Reborrow, ReborrowMut};
use faer::{c64, Accum, Mat, MatRef, Par};

use crate::error::{Error, Result};

/// Marks a constrained local unknown in an element's dof list.
pub const CONSTRAINED: usize = usize::MAX;

#[derive(Debug, Clone)]
struct FrontStructure {
    children: Vec<usize>,
    element: Option<usize>,
    /// Pivots first, then the update rows, each part sorted.
    idx: Vec<usize>,
    npiv: usize,
}

/// Elimination tree and front index sets.
#[derive(Debug, Clone)]
pub struct Symbolic {
    n: usize,
    fronts: Vec<FrontStructure>,
}

fn bisect(elems: &mut [usize], centroids: &[[f64; 2]], fronts: &mut Vec<FrontStructure>) -> usize {
    if elems.len() == 1 {
        fronts.push(FrontStructure { children: vec![], element: Some(elems[0]), idx: vec![], npiv: 0 });
        return fronts.len() - 1;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &e in elems.iter() {
        for d in 0..2 {
            lo[d] = lo[d].min(centroids[e][d]);
            hi[d] = hi[d].max(centroids[e][d]);
        }
    }
    let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
    let mid = elems.len() / 2;
    elems.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis]).then(centroids[a][1 - axis].total_cmp(&centroids[b][1 - axis]))
    });
    let (left, right) = elems.split_at_mut(mid);
    let l = bisect(left, centroids, fronts);
    let r = bisect(right, centroids, fronts);
    fronts.push(FrontStructure { children: vec![l, r], element: None, idx: vec![], npiv: 0 });
    fronts.len() - 1
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl Symbolic {
    /// Builds the elimination structure for `n` unknowns. `dofs[e]` lists the unknowns of
    /// element `e`, with [`CONSTRAINED`] for eliminated entries.
    pub fn analyze(n: usize, dofs: &[Vec<usize>], centroids: &[[f64; 2]]) -> Result<Self> {
        if dofs.is_empty() {
            return Err(Error::Solver("no elements".into()));
        }
        let mut elems: Vec<usize> = (0..dofs.len()).collect();
        let mut fronts = Vec::with_capacity(2 * dofs.len());
        let root = bisect(&mut elems, centroids, &mut fronts);
        debug_assert_eq!(root, fronts.len() - 1);

        let mut parent = vec![usize::MAX; fronts.len()];
        for (t, f) in fronts.iter().enumerate() {
            for &c in &f.children {
                parent[c] = t;
            }
        }
        // Postorder numbering means every ancestor has a larger index.
        let lca = |mut a: usize, mut b: usize| {
            while a != b {
                if a < b {
                    a = parent[a];
                } else {
                    b = parent[b];
                }
            }
            a
        };
        let mut leaf = vec![0; dofs.len()];
        for (t, f) in fronts.iter().enumerate() {
            if let Some(e) = f.element {
                leaf[e] = t;
            }
        }
        let mut owner = vec![usize::MAX; n];
        for (e, list) in dofs.iter().enumerate() {
            for &d in list {
                if d == CONSTRAINED {
                    continue;
                }
                owner[d] = if owner[d] == usize::MAX { leaf[e] } else { lca(owner[d], leaf[e]) };
            }
        }
        if let Some(d) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::Solver(format!("unknown {d} belongs to no element")));
        }
        let mut pivots: Vec<Vec<usize>> = vec![Vec::new(); fronts.len()];
        for (d, &o) in owner.iter().enumerate() {
            pivots[o].push(d);
        }

        let mut update: Vec<Vec<usize>> = vec![Vec::new(); fronts.len()];
        for t in 0..fronts.len() {
            let mut all = match fronts[t].element {
                Some(e) => {
                    let mut v: Vec<usize> = dofs[e].iter().copied().filter(|&d| d != CONSTRAINED).collect();
                    v.sort_unstable();
                    v.dedup();
                    v
                }
                None => {
                    let c = &fronts[t].children;
                    let merged = merge_sorted(&update[c[0]], &update[c[1]]);
                    update[c[0]] = Vec::new();
                    update[c[1]] = Vec::new();
                    merged
                }
            };
            let piv = std::mem::take(&mut pivots[t]);
            all.retain(|d| owner[*d] != t);
            let npiv = piv.len();
            let mut idx = piv;
            idx.extend_from_slice(&all);
            update[t] = all;
            fronts[t].idx = idx;
            fronts[t].npiv = npiv;
        }
        Ok(Symbolic { n, fronts })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Bytes held by the stored factors.
    pub fn factor_bytes(&self) -> usize {
        let entries: usize = self
            .fronts
            .iter()
            .map(|f| {
                let (nf, p) = (f.idx.len(), f.npiv);
                nf * p + p * (nf - p)
            })
            .sum();
        entries * std::mem::size_of::<c64>()
    }

    /// Largest front dimension.
    pub fn max_front(&self) -> usize {
        self.fronts.iter().map(|f| f.idx.len()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
struct FrontFactor {
    /// `nf x p`: unit-lower `L11` and `U11` on top, `L21` below.
    panel: Mat<c64>,
    /// `p x (nf - p)`.
    u12: Mat<c64>,
    /// Row `i` of the permuted pivot block is local row `perm[i]`.
    perm: Vec<usize>,
}

/// Numeric factors of a system analysed by [`Symbolic::analyze`].
#[derive(Debug, Clone)]
pub struct Factorization {
    symbolic: Symbolic,
    factors: Vec<FrontFactor>,
}

/// Factors `A = sum_e A_e`. `element(e)` returns the local matrix of element `e`,
/// rows being test functions and columns trial functions in `dofs[e]` order.
pub fn factorize<'m>(
    symbolic: Symbolic,
    dofs: &[Vec<usize>],
    element: impl Fn(usize) -> MatRef<'m, c64>,
) -> Result<Factorization> {
    let mut pos = vec![usize::MAX; symbolic.n];
    let mut stack: Vec<Mat<c64>> = Vec::new();
    let mut factors = Vec::with_capacity(symbolic.fronts.len());
    for (t, front) in symbolic.fronts.iter().enumerate() {
        let nf = front.idx.len();
        let p = front.npiv;
        for (l, &d) in front.idx.iter().enumerate() {
            pos[d] = l;
        }
        let mut f = Mat::<c64>::zeros(nf, nf);
        if let Some(e) = front.element {
            let ke = element(e);
            let list = &dofs[e];
            for (jl, &dj) in list.iter().enumerate() {
                if dj == CONSTRAINED {
                    continue;
                }
                let cj = pos[dj];
                for (il, &di) in list.iter().enumerate() {
                    if di != CONSTRAINED {
                        f[(pos[di], cj)] += ke[(il, jl)];
                    }
                }
            }
        } else {
            // Children were pushed in order, so the right child is on top.
            for &c in front.children.iter().rev() {
                let cb = stack.pop().expect("child contribution");
                let cidx = &symbolic.fronts[c].idx[symbolic.fronts[c].npiv..];
                for (jl, &dj) in cidx.iter().enumerate() {
                    let cj = pos[dj];
                    for (il, &di) in cidx.iter().enumerate() {
                        f[(pos[di], cj)] += cb[(il, jl)];
                    }
                }
            }
        }
        for &d in &front.idx {
            pos[d] = usize::MAX;
        }

        let mut perm = vec![0usize; p];
        if p > 0 {
            let mut perm_inv = vec![0usize; p];
            let mut buf = MemBuffer::new(lu_in_place_scratch::<usize, c64>(p, p, Par::Seq, Default::default()));
            let (mut f11, mut f12, mut f21, f22) = f.as_mut().split_at_mut(p, p);
            lu_in_place(f11.rb_mut(), &mut perm, &mut perm_inv, Par::Seq, MemStack::new(&mut buf), Default::default());
            for i in 0..p {
                let u = f11[(i, i)];
                if !(u.norm() > 0.0) || !u.re.is_finite() || !u.im.is_finite() {
                    return Err(Error::Solver(format!("zero or non-finite pivot in front {t} of dimension {nf}")));
                }
            }
            if nf > p {
                let rows = f12.to_owned();
                for i in 0..p {
                    for j in 0..nf - p {
                        f12[(i, j)] = rows[(perm[i], j)];
                    }
                }
                solve_unit_lower_triangular_in_place(f11.rb(), f12.rb_mut(), Par::Seq);
                solve_lower_triangular_in_place(f11.rb().transpose(), f21.rb_mut().transpose_mut(), Par::Seq);
                matmul(f22, Accum::Add, f21.rb(), f12.rb(), c64::new(-1.0, 0.0), Par::Seq);
            }
        }
        let fr = f.as_ref();
        stack.push(fr.submatrix(p, p, nf - p, nf - p).to_owned());
        factors.push(FrontFactor {
            panel: fr.subcols(0, p).to_owned(),
            u12: fr.submatrix(0, p, p, nf - p).to_owned(),
            perm,
        });
    }
    Ok(Factorization { symbolic, factors })
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.symbolic.n
    }

    pub fn symbolic(&self) -> &Symbolic {
        &self.symbolic
    }

    /// Overwrites `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [c64]) {
        assert_eq!(b.len(), self.symbolic.n);
        for (front, fac) in self.symbolic.fronts.iter().zip(&self.factors) {
            let (p, nf) = (front.npiv, front.idx.len());
            if p == 0 {
                continue;
            }
            let mut z = Mat::<c64>::from_fn(p, 1, |i, _| b[front.idx[fac.perm[i]]]);
            solve_unit_lower_triangular_in_place(fac.panel.as_ref().submatrix(0, 0, p, p), z.as_mut(), Par::Seq);
            for i in 0..p {
                b[front.idx[i]] = z[(i, 0)];
            }
            if nf > p {
                let mut upd = Mat::<c64>::zeros(nf - p, 1);
                matmul(upd.as_mut(), Accum::Replace, fac.panel.as_ref().subrows(p, nf - p), z.as_ref(), c64::new(1.0, 0.0), Par::Seq);
                for r in 0..nf - p {
                    b[front.idx[p + r]] -= upd[(r, 0)];
                }
            }
        }
        for (front, fac) in self.symbolic.fronts.iter().zip(&self.factors).rev() {
            let (p, nf) = (front.npiv, front.idx.len());
            if p == 0 {
                continue;
            }
            let mut c = Mat::<c64>::from_fn(p, 1, |i, _| b[front.idx[i]]);
            if nf > p {
                let xr = Mat::<c64>::from_fn(nf - p, 1, |r, _| b[front.idx[p + r]]);
                matmul(c.as_mut(), Accum::Add, fac.u12.as_ref(), xr.as_ref(), c64::new(-1.0, 0.0), Par::Seq);
            }
            solve_upper_triangular_in_place(fac.panel.as_ref().submatrix(0, 0, p, p), c.as_mut(), Par::Seq);
            for i in 0..p {
                b[front.idx[i]] = c[(i, 0)];
            }
        }
    }
}
