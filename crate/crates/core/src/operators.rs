//! Second-order centered finite-difference realizations of the differential
//! objects the models need: gradient, Hessian, Laplacian, biharmonic,
//! Hessian determinant and eigenvalues, and the infinity Laplacian.
//!
//! All stencils are centered; boundary-adjacent fourth-order stencils consume
//! ghost values supplied by the assembly module's boundary closure
//! ([`GhostLayer`]). Diagonal Hessian entries use the 3-point second
//! difference, mixed entries the 4-point cross stencil, so every operator is
//! exact on quadratics (the biharmonic on per-axis quartics).

use crate::error::{Error, Result};
use crate::grid::{Grid, NodeIndex, ScalarField, MAX_DIM};

/// Per-node gradient vector. Entries are meaningful at interior nodes.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Grid,
    values: Vec<[f64; MAX_DIM]>,
}

impl VectorField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn at(&self, idx: NodeIndex) -> [f64; MAX_DIM] {
        self.values[self.grid.flat(idx)]
    }
}

/// Per-node symmetric matrix, upper triangle stored row-major:
/// 2-D `(xx, xy, yy)`, 3-D `(xx, xy, xz, yy, yz, zz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    dim: usize,
    entries: [f64; 6],
}

impl SymMat {
    pub fn zero(dim: usize) -> Self {
        SymMat {
            dim,
            entries: [0.0; 6],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zero(dim);
        for a in 0..dim {
            m.set(a, a, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn tri_index(&self, a: usize, b: usize) -> usize {
        let (r, c) = if a <= b { (a, b) } else { (b, a) };
        // row-major upper triangle offset
        r * self.dim - r * (r + 1) / 2 + c
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[self.tri_index(a, b)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        let k = self.tri_index(a, b);
        self.entries[k] = v;
    }

    pub fn from_rows_2d(rows: [[f64; 2]; 2]) -> Self {
        let mut m = Self::zero(2);
        m.set(0, 0, rows[0][0]);
        m.set(0, 1, 0.5 * (rows[0][1] + rows[1][0]));
        m.set(1, 1, rows[1][1]);
        m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|a| self.get(a, a)).sum()
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            2 => self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(0, 1),
            3 => {
                let (a, b, c) = (self.get(0, 0), self.get(0, 1), self.get(0, 2));
                let (d, e) = (self.get(1, 1), self.get(1, 2));
                let f = self.get(2, 2);
                a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c)
            }
            _ => unreachable!("dim is 2 or 3"),
        }
    }

    /// Adjugate: `det(A + tB)' = tr(adj(A) B)`. Symmetric for symmetric input.
    pub fn adjugate(&self) -> SymMat {
        let mut out = Self::zero(self.dim);
        match self.dim {
            2 => {
                out.set(0, 0, self.get(1, 1));
                out.set(1, 1, self.get(0, 0));
                out.set(0, 1, -self.get(0, 1));
            }
            3 => {
                let (a, b, c) = (self.get(0, 0), self.get(0, 1), self.get(0, 2));
                let (d, e) = (self.get(1, 1), self.get(1, 2));
                let f = self.get(2, 2);
                out.set(0, 0, d * f - e * e);
                out.set(0, 1, c * e - b * f);
                out.set(0, 2, b * e - c * d);
                out.set(1, 1, a * f - c * c);
                out.set(1, 2, b * c - a * e);
                out.set(2, 2, a * d - b * b);
            }
            _ => unreachable!(),
        }
        out
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64; MAX_DIM]) -> [f64; MAX_DIM] {
        let mut y = [0.0; MAX_DIM];
        for a in 0..self.dim {
            for b in 0..self.dim {
                y[a] += self.get(a, b) * x[b];
            }
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for a in 0..self.dim {
            for b in a..self.dim {
                m = m.max(self.get(a, b).abs());
            }
        }
        m
    }

    /// Ascending eigenvalues by closed form: quadratic formula in 2-D,
    /// shifted trigonometric Cardano in 3-D. The matrix is scaled by its
    /// max-abs entry first; near-scalar matrices (off-diagonal norm below
    /// `1e-14 * scale`) return the sorted diagonal.
    pub fn eigenvalues(&self) -> [f64; MAX_DIM] {
        let scale = self.max_abs();
        if scale == 0.0 {
            return [0.0; MAX_DIM];
        }
        let mut out = [0.0; MAX_DIM];
        match self.dim {
            2 => {
                let a = self.get(0, 0) / scale;
                let b = self.get(0, 1) / scale;
                let d = self.get(1, 1) / scale;
                let mean = 0.5 * (a + d);
                let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
                out[0] = (mean - disc) * scale;
                out[1] = (mean + disc) * scale;
            }
            3 => {
                let m = self.scaled(1.0 / scale);
                let p1 = m.get(0, 1).powi(2) + m.get(0, 2).powi(2) + m.get(1, 2).powi(2);
                if p1.sqrt() < 1e-14 {
                    let mut d = [m.get(0, 0), m.get(1, 1), m.get(2, 2)];
                    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
                    for (o, v) in out.iter_mut().zip(d) {
                        *o = v * scale;
                    }
                    return out;
                }
                let q = m.trace() / 3.0;
                let p2 = (m.get(0, 0) - q).powi(2)
                    + (m.get(1, 1) - q).powi(2)
                    + (m.get(2, 2) - q).powi(2)
                    + 2.0 * p1;
                let p = (p2 / 6.0).sqrt();
                let mut c = m;
                for a in 0..3 {
                    c.set(a, a, c.get(a, a) - q);
                }
                let c = c.scaled(1.0 / p);
                let r = (c.det() / 2.0).clamp(-1.0, 1.0);
                let phi = r.acos() / 3.0;
                let e_max = q + 2.0 * p * phi.cos();
                let e_min = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
                let e_mid = 3.0 * q - e_max - e_min;
                out[0] = e_min * scale;
                out[1] = e_mid * scale;
                out[2] = e_max * scale;
            }
            _ => unreachable!(),
        }
        out
    }

    fn scaled(&self, s: f64) -> SymMat {
        let mut m = *self;
        for e in &mut m.entries {
            *e *= s;
        }
        m
    }

    /// Unit eigenvector for the eigenvalue `lambda` (one of `eigenvalues()`),
    /// chosen deterministically; the sign makes the largest-magnitude
    /// component positive.
    pub fn eigenvector(&self, lambda: f64) -> [f64; MAX_DIM] {
        let scale = self.max_abs();
        let mut v = [0.0; MAX_DIM];
        if scale == 0.0 {
            v[0] = 1.0;
            return v;
        }
        match self.dim {
            2 => {
                let a = self.get(0, 0);
                let b = self.get(0, 1);
                let d = self.get(1, 1);
                // candidate null vectors of A - lambda I
                let c1 = [b, lambda - a, 0.0];
                let c2 = [lambda - d, b, 0.0];
                let n1 = c1[0] * c1[0] + c1[1] * c1[1];
                let n2 = c2[0] * c2[0] + c2[1] * c2[1];
                let c = if n1 >= n2 { c1 } else { c2 };
                let n = (c[0] * c[0] + c[1] * c[1]).sqrt();
                if n < 1e-14 * scale {
                    // near-diagonal: pick the matching axis, lowest index on ties
                    let axis = if (a - lambda).abs() <= (d - lambda).abs() { 0 } else { 1 };
                    v[axis] = 1.0;
                } else {
                    v = [c[0] / n, c[1] / n, 0.0];
                }
            }
            3 => {
                let mut rows = [[0.0f64; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        rows[a][b] = self.get(a, b) / scale;
                    }
                    rows[a][a] -= lambda / scale;
                }
                let crosses = [
                    cross(&rows[0], &rows[1]),
                    cross(&rows[0], &rows[2]),
                    cross(&rows[1], &rows[2]),
                ];
                let mut best = 0;
                for k in 1..3 {
                    if norm3(&crosses[k]) > norm3(&crosses[best]) {
                        best = k;
                    }
                }
                let c = crosses[best];
                let n = norm3(&c);
                if n > 1e-12 {
                    v = [c[0] / n, c[1] / n, c[2] / n];
                } else {
                    // repeated eigenvalue: null space is the orthogonal
                    // complement of the dominant row (or everything)
                    let mut r = rows[0];
                    for row in &rows[1..] {
                        if norm3(row) > norm3(&r) {
                            r = *row;
                        }
                    }
                    let rn = norm3(&r);
                    if rn < 1e-12 {
                        let mut axis = 0;
                        let mut bestd = f64::INFINITY;
                        for a in 0..3 {
                            let d = (self.get(a, a) - lambda).abs();
                            if d < bestd {
                                bestd = d;
                                axis = a;
                            }
                        }
                        v[axis] = 1.0;
                    } else {
                        let mut axis = 0;
                        for a in 1..3 {
                            if r[a].abs() < r[axis].abs() {
                                axis = a;
                            }
                        }
                        let mut e = [0.0; 3];
                        e[axis] = 1.0;
                        let proj = r[axis] / (rn * rn);
                        for a in 0..3 {
                            v[a] = e[a] - proj * r[a];
                        }
                        let n = norm3(&[v[0], v[1], v[2]]);
                        for a in 0..3 {
                            v[a] /= n;
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        // deterministic sign: largest-magnitude component positive
        let mut j = 0;
        for a in 1..self.dim {
            if v[a].abs() > v[j].abs() {
                j = a;
            }
        }
        if v[j] < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        v
    }
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Per-node symmetric Hessian. Entries meaningful at interior nodes.
#[derive(Debug, Clone)]
pub struct HessianField {
    grid: Grid,
    values: Vec<SymMat>,
}

impl HessianField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn at(&self, idx: NodeIndex) -> SymMat {
        self.values[self.grid.flat(idx)]
    }
}

/// Per-node ascending eigenvalues of a [`HessianField`].
#[derive(Debug, Clone)]
pub struct EigenField {
    grid: Grid,
    values: Vec<[f64; MAX_DIM]>,
}

impl EigenField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Ascending eigenvalues; only the first `dim` entries are meaningful.
    #[inline]
    pub fn at(&self, idx: NodeIndex) -> [f64; MAX_DIM] {
        self.values[self.grid.flat(idx)]
    }
}

/// Centered gradient at a single interior node.
#[inline]
pub fn gradient_at(u: &ScalarField, idx: NodeIndex) -> [f64; MAX_DIM] {
    let g = u.grid();
    let mut out = [0.0; MAX_DIM];
    for a in 0..g.dim() {
        let mut up = idx;
        up[a] += 1;
        let mut dn = idx;
        dn[a] -= 1;
        out[a] = (u.at(up) - u.at(dn)) / (2.0 * g.spacing(a));
    }
    out
}

/// Centered second differences (diagonal) and 4-point cross stencil (mixed)
/// at a single interior node.
pub fn hessian_at(u: &ScalarField, idx: NodeIndex) -> SymMat {
    let g = u.grid();
    let dim = g.dim();
    let mut m = SymMat::zero(dim);
    for a in 0..dim {
        let h = g.spacing(a);
        let mut up = idx;
        up[a] += 1;
        let mut dn = idx;
        dn[a] -= 1;
        m.set(a, a, (u.at(up) - 2.0 * u.at(idx) + u.at(dn)) / (h * h));
        for b in (a + 1)..dim {
            let hb = g.spacing(b);
            let mut pp = idx;
            pp[a] += 1;
            pp[b] += 1;
            let mut pm = idx;
            pm[a] += 1;
            pm[b] -= 1;
            let mut mp = idx;
            mp[a] -= 1;
            mp[b] += 1;
            let mut mm = idx;
            mm[a] -= 1;
            mm[b] -= 1;
            m.set(
                a,
                b,
                (u.at(pp) - u.at(pm) - u.at(mp) + u.at(mm)) / (4.0 * h * hb),
            );
        }
    }
    m
}

/// Centered gradient over all interior nodes.
pub fn gradient_fd(u: &ScalarField) -> VectorField {
    let g = u.grid();
    let mut values = vec![[0.0; MAX_DIM]; g.node_count()];
    for k in 0..g.node_count() {
        let idx = g.unflat(k);
        if g.is_interior(idx) {
            values[k] = gradient_at(u, idx);
        }
    }
    VectorField {
        grid: g.clone(),
        values,
    }
}

/// Centered Hessian over all interior nodes.
pub fn hessian_fd(u: &ScalarField) -> HessianField {
    let g = u.grid();
    let mut values = vec![SymMat::zero(g.dim()); g.node_count()];
    for k in 0..g.node_count() {
        let idx = g.unflat(k);
        if g.is_interior(idx) {
            values[k] = hessian_at(u, idx);
        }
    }
    HessianField {
        grid: g.clone(),
        values,
    }
}

/// Trace of the Hessian stencil over all interior nodes.
pub fn laplacian_fd(u: &ScalarField) -> ScalarField {
    let g = u.grid();
    let mut out = ScalarField::zeros(g);
    for k in 0..g.node_count() {
        let idx = g.unflat(k);
        if g.is_interior(idx) {
            out.values_mut()[k] = laplacian_at(u, idx);
        }
    }
    out
}

#[inline]
pub fn laplacian_at(u: &ScalarField, idx: NodeIndex) -> f64 {
    let g = u.grid();
    let mut s = 0.0;
    for a in 0..g.dim() {
        let h = g.spacing(a);
        let mut up = idx;
        up[a] += 1;
        let mut dn = idx;
        dn[a] -= 1;
        s += (u.at(up) - 2.0 * u.at(idx) + u.at(dn)) / (h * h);
    }
    s
}

/// Ghost values one layer outside the boundary faces, produced by the
/// assembly module's boundary-condition closure. Only face ghosts whose
/// tangential coordinates are interior are ever defined; the 13/25-point
/// stencil never references edge or corner ghosts.
#[derive(Debug, Clone)]
pub struct GhostLayer {
    grid: Grid,
    /// indexed `[axis][side]`, each a full-face array (NaN where undefined)
    faces: Vec<Vec<f64>>,
}

impl GhostLayer {
    pub fn new(grid: &Grid) -> Self {
        let dim = grid.dim();
        let mut faces = Vec::with_capacity(2 * dim);
        for a in 0..dim {
            let face_len: usize = (0..dim)
                .filter(|&b| b != a)
                .map(|b| grid.num_nodes_axis(b))
                .product();
            faces.push(vec![f64::NAN; face_len]); // low side
            faces.push(vec![f64::NAN; face_len]); // high side
        }
        GhostLayer {
            grid: grid.clone(),
            faces,
        }
    }

    fn face_slot(&self, axis: usize, high: bool) -> usize {
        2 * axis + usize::from(high)
    }

    fn face_index(&self, axis: usize, idx: NodeIndex) -> usize {
        let mut k = 0;
        for b in 0..self.grid.dim() {
            if b == axis {
                continue;
            }
            k = k * self.grid.num_nodes_axis(b) + idx[b];
        }
        k
    }

    /// Set the ghost across boundary node `idx` on the face `(axis, high)`.
    pub fn set(&mut self, axis: usize, high: bool, idx: NodeIndex, value: f64) {
        let slot = self.face_slot(axis, high);
        let k = self.face_index(axis, idx);
        self.faces[slot][k] = value;
    }

    /// Ghost across boundary node `idx` on face `(axis, high)`, if defined.
    pub fn get(&self, axis: usize, high: bool, idx: NodeIndex) -> Option<f64> {
        let slot = self.face_slot(axis, high);
        let v = self.faces[slot][self.face_index(axis, idx)];
        if v.is_nan() {
            None
        } else {
            Some(v)
        }
    }
}

/// Laplacian at a face boundary node, using the ghost across it for the
/// normal second difference. Errors if the ghost is missing.
fn laplacian_at_face(u: &ScalarField, idx: NodeIndex, ghosts: Option<&GhostLayer>) -> Result<f64> {
    let g = u.grid();
    let mut s = 0.0;
    for a in 0..g.dim() {
        let h = g.spacing(a);
        let h2 = h * h;
        if idx[a] == 0 || idx[a] == g.num_nodes_axis(a) - 1 {
            let high = idx[a] != 0;
            let ghost = ghosts
                .and_then(|gl| gl.get(a, high, idx))
                .ok_or(Error::MissingGhost { node: idx })?;
            let mut inward = idx;
            if high {
                inward[a] -= 1;
            } else {
                inward[a] += 1;
            }
            s += (ghost - 2.0 * u.at(idx) + u.at(inward)) / h2;
        } else {
            let mut up = idx;
            up[a] += 1;
            let mut dn = idx;
            dn[a] -= 1;
            s += (u.at(up) - 2.0 * u.at(idx) + u.at(dn)) / h2;
        }
    }
    Ok(s)
}

/// Iterated discrete Laplacian `Δ_h(Δ_h u)` over all interior nodes: the
/// 13-point stencil in 2-D, 25-point in 3-D. Nodes adjacent to the boundary
/// need ghost values from `ghosts`; pass `None` only when probing the error
/// path.
pub fn biharmonic_fd(u: &ScalarField, ghosts: Option<&GhostLayer>) -> Result<ScalarField> {
    let g = u.grid();
    let dim = g.dim();
    // inner Laplacian on interior nodes and on face-boundary nodes (edge and
    // corner values are never referenced by the outer pass)
    let mut lap = vec![f64::NAN; g.node_count()];
    for k in 0..g.node_count() {
        let idx = g.unflat(k);
        let extreme_axes = (0..dim)
            .filter(|&a| idx[a] == 0 || idx[a] == g.num_nodes_axis(a) - 1)
            .count();
        if extreme_axes == 0 {
            lap[k] = laplacian_at(u, idx);
        } else if extreme_axes == 1 {
            lap[k] = laplacian_at_face(u, idx, ghosts)?;
        }
    }
    let mut out = ScalarField::zeros(g);
    for k in 0..g.node_count() {
        let idx = g.unflat(k);
        if !g.is_interior(idx) {
            continue;
        }
        let mut s = 0.0;
        for a in 0..dim {
            let h2 = g.spacing(a) * g.spacing(a);
            let mut up = idx;
            up[a] += 1;
            let mut dn = idx;
            dn[a] -= 1;
            s += (lap[g.flat(up)] - 2.0 * lap[k] + lap[g.flat(dn)]) / h2;
        }
        out.values_mut()[k] = s;
    }
    Ok(out)
}

/// Pointwise determinant of a Hessian field (interior nodes).
pub fn det_hessian(h: &HessianField) -> ScalarField {
    let g = h.grid();
    let mut out = ScalarField::zeros(g);
    for k in 0..g.node_count() {
        let idx = g.unflat(k);
        if g.is_interior(idx) {
            out.values_mut()[k] = h.values[k].det();
        }
    }
    out
}

/// Closed-form ascending eigenvalues of a Hessian field (interior nodes).
pub fn hessian_eigs(h: &HessianField) -> EigenField {
    let g = h.grid();
    let mut values = vec![[0.0; MAX_DIM]; g.node_count()];
    for k in 0..g.node_count() {
        let idx = g.unflat(k);
        if g.is_interior(idx) {
            values[k] = h.values[k].eigenvalues();
        }
    }
    EigenField {
        grid: g.clone(),
        values,
    }
}

/// Pointwise `D²u ∇u · ∇u` from the centered stencils (interior nodes).
pub fn infinity_laplacian(u: &ScalarField) -> ScalarField {
    let g = u.grid();
    let mut out = ScalarField::zeros(g);
    for k in 0..g.node_count() {
        let idx = g.unflat(k);
        if g.is_interior(idx) {
            let grad = gradient_at(u, idx);
            let hess = hessian_at(u, idx);
            let hg = hess.mul_vec(&grad);
            let mut s = 0.0;
            for a in 0..g.dim() {
                s += hg[a] * grad[a];
            }
            out.values_mut()[k] = s;
        }
    }
    out
}
