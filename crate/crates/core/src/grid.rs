//! Uniform tensor-product grids over axis-aligned boxes.
//!
//! Nodes are addressed either by per-axis indices (`NodeIndex`) or by a flat
//! index in row-major order with the last axis fastest. That ordering is fixed
//! globally so assembled matrices and field dumps are reproducible.

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Per-axis integer node coordinates. Axes beyond `dim` are zero.
pub type NodeIndex = [usize; MAX_DIM];

/// Uniform structured grid on a box in 2-D or 3-D.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
    n: [usize; MAX_DIM],
    h: [f64; MAX_DIM],
}

impl Grid {
    /// Build a grid with `n[a]` nodes (boundary included) on each axis.
    ///
    /// Requires ordered finite bounds and at least 5 nodes per axis so the
    /// fourth-order stencils have two interior neighbors.
    pub fn new(lo: &[f64], hi: &[f64], n: &[usize]) -> Result<Self> {
        let dim = n.len();
        if dim < 2 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::InvalidGrid("lo/hi/n length mismatch".into()));
        }
        let mut g = Grid {
            dim,
            lo: [0.0; MAX_DIM],
            hi: [0.0; MAX_DIM],
            n: [1; MAX_DIM],
            h: [0.0; MAX_DIM],
        };
        for a in 0..dim {
            if !lo[a].is_finite() || !hi[a].is_finite() {
                return Err(Error::InvalidGrid(format!("non-finite bounds on axis {a}")));
            }
            if hi[a] <= lo[a] {
                return Err(Error::InvalidGrid(format!(
                    "bounds not ordered on axis {a}: {} >= {}",
                    lo[a], hi[a]
                )));
            }
            if n[a] < 5 {
                return Err(Error::InvalidGrid(format!(
                    "need at least 5 nodes per axis, got {} on axis {a}",
                    n[a]
                )));
            }
            g.lo[a] = lo[a];
            g.hi[a] = hi[a];
            g.n[a] = n[a];
            g.h[a] = (hi[a] - lo[a]) / (n[a] - 1) as f64;
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim]
    }

    pub fn num_nodes_axis(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    pub fn node_count(&self) -> usize {
        self.n[..self.dim].iter().product()
    }

    /// Flat index in row-major order, last axis fastest.
    #[inline]
    pub fn flat(&self, idx: NodeIndex) -> usize {
        let mut k = 0;
        for a in 0..self.dim {
            debug_assert!(idx[a] < self.n[a]);
            k = k * self.n[a] + idx[a];
        }
        k
    }

    /// Inverse of [`Grid::flat`].
    #[inline]
    pub fn unflat(&self, mut k: usize) -> NodeIndex {
        let mut idx = [0usize; MAX_DIM];
        for a in (0..self.dim).rev() {
            idx[a] = k % self.n[a];
            k /= self.n[a];
        }
        idx
    }

    /// Physical coordinates of a node: `lo[a] + i[a] * h[a]`.
    #[inline]
    pub fn coords(&self, idx: NodeIndex) -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.lo[a] + idx[a] as f64 * self.h[a];
        }
        x
    }

    #[inline]
    pub fn is_boundary(&self, idx: NodeIndex) -> bool {
        (0..self.dim).any(|a| idx[a] == 0 || idx[a] == self.n[a] - 1)
    }

    #[inline]
    pub fn is_interior(&self, idx: NodeIndex) -> bool {
        !self.is_boundary(idx)
    }

    /// Iterate all nodes in flat order.
    pub fn iter_nodes(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        (0..self.node_count()).map(move |k| self.unflat(k))
    }

    /// Neighbor shifted by `offset` steps along `axis`; `None` if it leaves the grid.
    #[inline]
    pub fn neighbor(&self, idx: NodeIndex, axis: usize, offset: isize) -> Option<NodeIndex> {
        let i = idx[axis] as isize + offset;
        if i < 0 || i >= self.n[axis] as isize {
            return None;
        }
        let mut out = idx;
        out[axis] = i as usize;
        Some(out)
    }
}

/// Interior/boundary partition of a grid, in flat-index ascending order.
#[derive(Debug, Clone)]
pub struct NodeSets {
    pub interior: Vec<NodeIndex>,
    pub boundary: Vec<NodeIndex>,
    /// flat index -> position in `interior`, or usize::MAX for boundary nodes.
    interior_rank: Vec<usize>,
}

impl NodeSets {
    /// Position of an interior node in the unknown ordering.
    #[inline]
    pub fn interior_rank(&self, flat: usize) -> Option<usize> {
        match self.interior_rank[flat] {
            usize::MAX => None,
            r => Some(r),
        }
    }
}

/// Partition the nodes of `grid` into interior and boundary sets.
pub fn classify_nodes(grid: &Grid) -> NodeSets {
    let count = grid.node_count();
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    let mut interior_rank = vec![usize::MAX; count];
    for k in 0..count {
        let idx = grid.unflat(k);
        if grid.is_interior(idx) {
            interior_rank[k] = interior.len();
            interior.push(idx);
        } else {
            boundary.push(idx);
        }
    }
    NodeSets {
        interior,
        boundary,
        interior_rank,
    }
}

/// Nodes with `k <= i[a] <= n[a]-1-k` on every axis, flat order.
pub fn deep_interior(grid: &Grid, k: usize) -> Vec<NodeIndex> {
    grid.iter_nodes()
        .filter(|idx| (0..grid.dim()).all(|a| idx[a] >= k && idx[a] + k <= grid.num_nodes_axis(a) - 1))
        .collect()
}

/// Node-indexed real values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::DimMismatch(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: grid.unflat(k),
                context: "field values".into(),
            });
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, idx: NodeIndex) -> f64 {
        self.values[self.grid.flat(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: NodeIndex, v: f64) {
        let k = self.grid.flat(idx);
        self.values[k] = v;
    }
}

/// Sample a pointwise function at every node. Errors on the first node where
/// the function is not finite.
pub fn sample_function<F>(grid: &Grid, f: F) -> Result<ScalarField>
where
    F: Fn(&[f64]) -> f64,
{
    let mut values = vec![0.0; grid.node_count()];
    for k in 0..grid.node_count() {
        let idx = grid.unflat(k);
        let x = grid.coords(idx);
        let v = f(&x[..grid.dim()]);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                node: idx,
                context: "sample_function".into(),
            });
        }
        values[k] = v;
    }
    Ok(ScalarField {
        grid: grid.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spacing_unit_square() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[5, 5]).unwrap();
        assert_eq!(g.spacing(0), 0.25);
        assert_eq!(g.spacing(1), 0.25);
        assert_eq!(g.node_count(), 25);
    }

    #[test]
    fn spacing_gauss_domain() {
        // (hi-lo)/(n-1) exactly as computed: 1.14/32 at n=33, 1.14/64 at n=65.
        let g = Grid::new(&[-0.57, -0.57], &[0.57, 0.57], &[33, 33]).unwrap();
        assert_eq!(g.spacing(0), (0.57f64 - (-0.57)) / 32.0);
        assert_eq!(g.spacing(0), 0.035625);
        let g = Grid::new(&[-0.57, -0.57], &[0.57, 0.57], &[65, 65]).unwrap();
        assert_eq!(g.spacing(0), 0.0178125);
    }

    #[test]
    fn cube_counts() {
        let g = Grid::new(&[0.0; 3], &[1.0; 3], &[5, 5, 5]).unwrap();
        assert_eq!(g.node_count(), 125);
        let sets = classify_nodes(&g);
        assert_eq!(sets.interior.len(), 27);
        assert_eq!(sets.boundary.len(), 98);
    }

    #[test]
    fn square_counts() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[5, 5]).unwrap();
        let sets = classify_nodes(&g);
        assert_eq!(sets.interior.len(), 9);
        assert_eq!(sets.boundary.len(), 16);
        // partition: no overlap, covers everything
        assert_eq!(sets.interior.len() + sets.boundary.len(), g.node_count());
    }

    #[test]
    fn deep_interior_counts() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[7, 7]).unwrap();
        assert_eq!(deep_interior(&g, 2).len(), 9);
        // deep_interior(1) == interior
        let sets = classify_nodes(&g);
        assert_eq!(deep_interior(&g, 1), sets.interior);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[4, 5]).is_err());
        assert!(Grid::new(&[0.0, 0.0], &[0.0, 1.0], &[5, 5]).is_err());
        assert!(Grid::new(&[f64::NAN, 0.0], &[1.0, 1.0], &[5, 5]).is_err());
    }

    #[test]
    fn sample_constant_and_quadratic() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[5, 5]).unwrap();
        let ones = sample_function(&g, |_| 1.0).unwrap();
        assert!(ones.values().iter().all(|&v| v == 1.0));
        let q = sample_function(&g, |x| x[0] * x[0] + x[1] * x[1]).unwrap();
        assert_eq!(q.at([2, 2, 0]), 0.5);
    }

    #[test]
    fn sample_rejects_non_finite() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[5, 5]).unwrap();
        let err = sample_function(&g, |x| 1.0 / (x[0] + x[1])).unwrap_err();
        match err {
            Error::NonFinite { node, .. } => assert_eq!(node, [0, 0, 0]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn constant_sampling_is_reproducible() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[9, 9]).unwrap();
        let a = sample_function(&g, |_| 0.3).unwrap();
        let b = sample_function(&g, |_| 0.3).unwrap();
        assert_eq!(a.values(), b.values());
    }

    proptest! {
        #[test]
        fn flat_unflat_round_trip(n0 in 5usize..12, n1 in 5usize..12, n2 in 5usize..9, three_d: bool) {
            let g = if three_d {
                Grid::new(&[0.0;3], &[1.0;3], &[n0, n1, n2]).unwrap()
            } else {
                Grid::new(&[0.0;2], &[1.0;2], &[n0, n1]).unwrap()
            };
            for k in 0..g.node_count() {
                prop_assert_eq!(g.flat(g.unflat(k)), k);
            }
        }
    }
}
