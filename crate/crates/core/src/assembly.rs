//! Discrete nonlinear system for the regularized problem
//! `-ε Δ²_h u + F_h(u) - f = 0` on interior nodes, with `u = g` on the
//! boundary and the auxiliary condition `Δ_h u = aux_value` on the boundary
//! realized by ghost-node elimination.
//!
//! Dirichlet nodes are eliminated from the unknown set, not kept as identity
//! rows. The Jacobian is the exact derivative of the implemented discrete
//! residual (discretize-then-linearize), so it is testable against central
//! finite differences of `residual_vector`.

use crate::error::{Error, Result};
use crate::grid::{classify_nodes, Grid, NodeSets, ScalarField};
use crate::linalg::CsrMatrix;
use crate::models::{derivative_point, residual_point, ModelSpec, PointState};
use crate::operators::{biharmonic_fd, gradient_at, hessian_at, GhostLayer};

/// Signed regularization parameter; the sign selects the convex (`ε > 0`) or
/// concave (`ε < 0`) branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonParam(f64);

impl EpsilonParam {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value == 0.0 || value.abs() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be nonzero with |eps| <= 1, got {value}"
            )));
        }
        Ok(EpsilonParam(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// The three auxiliary boundary conditions; only the Laplacian form
/// (`Δu = aux_value` on the boundary) is implemented, matching the paper's
/// experiments. The other two are declared interface variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxKind {
    Laplacian,
    NormalLaplacianDerivative,
    SecondNormalMoment,
}

/// Dirichlet data plus the auxiliary condition closing the fourth-order
/// stencil. `aux_value` defaults to `ε²`.
#[derive(Debug, Clone)]
pub struct BoundaryConditions {
    /// One value per boundary node, in boundary flat order.
    pub dirichlet: Vec<f64>,
    pub aux_kind: AuxKind,
    pub aux_value: f64,
}

impl BoundaryConditions {
    /// Sample `g` from the model on the boundary nodes; `aux_value = ε²`.
    pub fn from_model(grid: &Grid, sets: &NodeSets, model: &ModelSpec, eps: f64) -> Result<Self> {
        Self::with_aux_value(grid, sets, model, eps * eps)
    }

    pub fn with_aux_value(
        grid: &Grid,
        sets: &NodeSets,
        model: &ModelSpec,
        aux_value: f64,
    ) -> Result<Self> {
        if !aux_value.is_finite() {
            return Err(Error::InvalidParameter("aux_value must be finite".into()));
        }
        let mut dirichlet = Vec::with_capacity(sets.boundary.len());
        for &idx in &sets.boundary {
            let x = grid.coords(idx);
            let v = model.boundary_value(&x[..grid.dim()]);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    node: idx,
                    context: "boundary data".into(),
                });
            }
            dirichlet.push(v);
        }
        Ok(BoundaryConditions {
            dirichlet,
            aux_kind: AuxKind::Laplacian,
            aux_value,
        })
    }
}

/// Ghost values across every face boundary node, chosen so the centered
/// discrete identity `Δ_h u = aux_value` holds at that node:
/// `ghost = 2 u(b) - u(inward) + h² (aux_value - tangential second differences)`.
/// Corner and edge ghosts are never referenced by the 13/25-point stencil and
/// are not defined.
pub fn ghost_closure(u: &ScalarField, bcs: &BoundaryConditions) -> Result<GhostLayer> {
    if bcs.aux_kind != AuxKind::Laplacian {
        return Err(Error::Unimplemented(
            "auxiliary boundary conditions other than the Laplacian form",
        ));
    }
    let g = u.grid();
    let dim = g.dim();
    let mut ghosts = GhostLayer::new(g);
    for k in 0..g.node_count() {
        let idx = g.unflat(k);
        let extremes: Vec<usize> = (0..dim)
            .filter(|&a| idx[a] == 0 || idx[a] == g.num_nodes_axis(a) - 1)
            .collect();
        if extremes.len() != 1 {
            continue;
        }
        let a = extremes[0];
        let high = idx[a] != 0;
        let mut inward = idx;
        if high {
            inward[a] -= 1;
        } else {
            inward[a] += 1;
        }
        let mut tangential = 0.0;
        for t in 0..dim {
            if t == a {
                continue;
            }
            let ht = g.spacing(t);
            let mut up = idx;
            up[t] += 1;
            let mut dn = idx;
            dn[t] -= 1;
            tangential += (u.at(up) - 2.0 * u.at(idx) + u.at(dn)) / (ht * ht);
        }
        let ha = g.spacing(a);
        let ghost = 2.0 * u.at(idx) - u.at(inward) + ha * ha * (bcs.aux_value - tangential);
        ghosts.set(a, high, idx, ghost);
    }
    Ok(ghosts)
}

/// Optional time coupling for implicit stepping: the per-node residual is
/// `scale * spatial(u, t) + shift * u + constant`.
#[derive(Debug, Clone)]
pub struct TimeTerm {
    pub scale: f64,
    pub shift: f64,
    pub constant: Vec<f64>,
    pub t: f64,
}

/// Counters accumulated while evaluating a nonlinear system.
#[derive(Debug, Clone, Copy, Default)]
pub struct AssemblyFlags {
    /// Pucci evaluations that fell back to the subgradient eigenvector.
    pub nonsmooth_points: usize,
}

/// The discrete nonlinear system: unknowns are the interior node values in
/// flat ascending order.
pub struct DiscreteSystem {
    grid: Grid,
    sets: NodeSets,
    model: ModelSpec,
    eps: f64,
    bcs: BoundaryConditions,
    time: Option<TimeTerm>,
}

impl DiscreteSystem {
    /// `eps` may be zero here (diagnostic use); solver schedules go through
    /// [`EpsilonParam`], which rejects zero.
    pub fn new(grid: &Grid, model: ModelSpec, eps: f64, bcs: BoundaryConditions) -> Result<Self> {
        if !eps.is_finite() || eps.abs() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "|eps| must be <= 1 and finite, got {eps}"
            )));
        }
        model.validate_for_dim(grid.dim())?;
        let sets = classify_nodes(grid);
        if bcs.dirichlet.len() != sets.boundary.len() {
            return Err(Error::DimMismatch(format!(
                "dirichlet data has {} values, boundary has {} nodes",
                bcs.dirichlet.len(),
                sets.boundary.len()
            )));
        }
        Ok(DiscreteSystem {
            grid: grid.clone(),
            sets,
            model,
            eps,
            bcs,
            time: None,
        })
    }

    pub fn with_time_term(mut self, time: TimeTerm) -> Result<Self> {
        if time.constant.len() != self.unknown_count() {
            return Err(Error::DimMismatch(
                "time-term constant length != unknown count".into(),
            ));
        }
        self.time = Some(time);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sets(&self) -> &NodeSets {
        &self.sets
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn bcs(&self) -> &BoundaryConditions {
        &self.bcs
    }

    pub fn unknown_count(&self) -> usize {
        self.sets.interior.len()
    }

    fn eval_time(&self) -> f64 {
        self.time.as_ref().map_or(0.0, |t| t.t)
    }

    /// Scatter interior unknowns and Dirichlet data into a full field.
    pub fn full_field(&self, u_interior: &[f64]) -> Result<ScalarField> {
        if u_interior.len() != self.unknown_count() {
            return Err(Error::DimMismatch(format!(
                "expected {} interior values, got {}",
                self.unknown_count(),
                u_interior.len()
            )));
        }
        let mut field = ScalarField::zeros(&self.grid);
        for (r, &idx) in self.sets.interior.iter().enumerate() {
            field.set(idx, u_interior[r]);
        }
        for (b, &idx) in self.sets.boundary.iter().enumerate() {
            field.set(idx, self.bcs.dirichlet[b]);
        }
        Ok(field)
    }

    /// Extract the interior values of a full field in unknown order.
    pub fn interior_of(&self, field: &ScalarField) -> Vec<f64> {
        self.sets.interior.iter().map(|&idx| field.at(idx)).collect()
    }

    fn point_state(&self, full: &ScalarField, idx: crate::grid::NodeIndex) -> PointState {
        PointState {
            x: self.grid.coords(idx),
            u: full.at(idx),
            grad: gradient_at(full, idx),
            hess: hessian_at(full, idx),
            t: self.eval_time(),
        }
    }

    /// Residual vector over interior nodes, deterministic ordering.
    pub fn residual(&self, u_interior: &[f64]) -> Result<Vec<f64>> {
        let full = self.full_field(u_interior)?;
        let ghosts = ghost_closure(&full, &self.bcs)?;
        let bih = biharmonic_fd(&full, Some(&ghosts))?;
        let (scale, shift) = match &self.time {
            Some(t) => (t.scale, t.shift),
            None => (1.0, 0.0),
        };
        let mut out = Vec::with_capacity(self.unknown_count());
        for (r, &idx) in self.sets.interior.iter().enumerate() {
            let s = self.point_state(&full, idx);
            let spatial = -self.eps * bih.at(idx) + residual_point(&self.model, &s);
            let mut v = scale * spatial + shift * s.u;
            if let Some(t) = &self.time {
                v += t.constant[r];
            }
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    node: idx,
                    context: "residual".into(),
                });
            }
            out.push(v);
        }
        Ok(out)
    }

    /// CSR Jacobian of [`DiscreteSystem::residual`] at `u_interior`.
    pub fn jacobian(&self, u_interior: &[f64]) -> Result<(CsrMatrix, AssemblyFlags)> {
        let full = self.full_field(u_interior)?;
        let n = self.unknown_count();
        let dim = self.grid.dim();
        let (scale, shift) = match &self.time {
            Some(t) => (t.scale, t.shift),
            None => (1.0, 0.0),
        };
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(32); n];
        let mut flags = AssemblyFlags::default();

        for (r, &p) in self.sets.interior.iter().enumerate() {
            let row = &mut rows[r];
            // -eps * Δ²_h: composition of the outer and inner Laplacian
            // stencils. The inner Laplacian at a boundary node equals
            // aux_value by the ghost closure, so it carries no coupling.
            if self.eps != 0.0 {
                let c = -self.eps * scale;
                for a in 0..dim {
                    let ha2 = self.grid.spacing(a) * self.grid.spacing(a);
                    for (off, w_outer) in [(-1isize, 1.0), (0, -2.0), (1, 1.0)] {
                        let q = self.grid.neighbor(p, a, off).expect("outer point in grid");
                        if self.grid.is_boundary(q) {
                            continue;
                        }
                        let w = c * w_outer / ha2;
                        for b in 0..dim {
                            let hb2 = self.grid.spacing(b) * self.grid.spacing(b);
                            for (off2, w_inner) in [(-1isize, 1.0), (0, -2.0), (1, 1.0)] {
                                let m = self.grid.neighbor(q, b, off2).expect("inner point in grid");
                                if let Some(col) = self.sets.interior_rank(self.grid.flat(m)) {
                                    row.push((col, w * w_inner / hb2));
                                }
                            }
                        }
                    }
                }
            }
            // model linearization through the second-order stencils
            let s = self.point_state(&full, p);
            let (d, nonsmooth) = derivative_point(&self.model, &s);
            if nonsmooth {
                flags.nonsmooth_points += 1;
            }
            let mut push = |idx: crate::grid::NodeIndex, v: f64| {
                if let Some(col) = self.sets.interior_rank(self.grid.flat(idx)) {
                    row.push((col, v));
                }
            };
            for a in 0..dim {
                let ha = self.grid.spacing(a);
                let waa = scale * d.d_hess.get(a, a) / (ha * ha);
                let up = self.grid.neighbor(p, a, 1).unwrap();
                let dn = self.grid.neighbor(p, a, -1).unwrap();
                push(up, waa);
                push(dn, waa);
                push(p, -2.0 * waa);
                let ga = scale * d.d_grad[a] / (2.0 * ha);
                push(up, ga);
                push(dn, -ga);
                for b in (a + 1)..dim {
                    let hb = self.grid.spacing(b);
                    let wab = scale * d.d_hess.get(a, b) / (2.0 * ha * hb);
                    let pp = self.grid.neighbor(up, b, 1).unwrap();
                    let pm = self.grid.neighbor(up, b, -1).unwrap();
                    let mp = self.grid.neighbor(dn, b, 1).unwrap();
                    let mm = self.grid.neighbor(dn, b, -1).unwrap();
                    push(pp, wab);
                    push(mm, wab);
                    push(pm, -wab);
                    push(mp, -wab);
                }
            }
            push(p, scale * d.d_u + shift);
        }
        let mat = CsrMatrix::from_rows(n, rows)?;
        Ok((mat, flags))
    }
}

/// Ghost-eliminated discrete biharmonic matrix over interior unknowns
/// (coefficients of `Δ²_h`; boundary and aux data only shift the constant
/// part, never the matrix).
pub fn biharmonic_matrix(grid: &Grid, sets: &NodeSets) -> Result<CsrMatrix> {
    let n = sets.interior.len();
    let dim = grid.dim();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(16); n];
    for (r, &p) in sets.interior.iter().enumerate() {
        for a in 0..dim {
            let ha2 = grid.spacing(a) * grid.spacing(a);
            for (off, w_outer) in [(-1isize, 1.0), (0, -2.0), (1, 1.0)] {
                let q = grid.neighbor(p, a, off).expect("outer point in grid");
                if grid.is_boundary(q) {
                    continue;
                }
                for b in 0..dim {
                    let hb2 = grid.spacing(b) * grid.spacing(b);
                    for (off2, w_inner) in [(-1isize, 1.0), (0, -2.0), (1, 1.0)] {
                        let m = grid.neighbor(q, b, off2).expect("inner point in grid");
                        if let Some(col) = sets.interior_rank(grid.flat(m)) {
                            rows[r].push((col, w_outer * w_inner / (ha2 * hb2)));
                        }
                    }
                }
            }
        }
    }
    CsrMatrix::from_rows(n, rows)
}

/// Standard 5/7-point discrete Laplacian over interior unknowns plus the
/// boundary contribution folded into a right-hand-side shift: the system
/// `Δ_h u = source` with `u = dirichlet` on the boundary reads
/// `L u_int = source - shift`.
pub fn laplacian_system(
    grid: &Grid,
    sets: &NodeSets,
    dirichlet: &[f64],
) -> Result<(CsrMatrix, Vec<f64>)> {
    let n = sets.interior.len();
    let dim = grid.dim();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(2 * dim + 1); n];
    let mut shift = vec![0.0; n];
    let mut bmap = vec![usize::MAX; grid.node_count()];
    for (b, &idx) in sets.boundary.iter().enumerate() {
        bmap[grid.flat(idx)] = b;
    }
    for (r, &p) in sets.interior.iter().enumerate() {
        let mut diag = 0.0;
        for a in 0..dim {
            let ha2 = grid.spacing(a) * grid.spacing(a);
            diag -= 2.0 / ha2;
            for off in [-1isize, 1] {
                let q = grid.neighbor(p, a, off).expect("neighbor in grid");
                let qf = grid.flat(q);
                match sets.interior_rank(qf) {
                    Some(col) => rows[r].push((col, 1.0 / ha2)),
                    None => shift[r] += dirichlet[bmap[qf]] / ha2,
                }
            }
        }
        rows[r].push((r, diag));
    }
    Ok((CsrMatrix::from_rows(n, rows)?, shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_function, Grid};
    use crate::operators::laplacian_at;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square(n: usize) -> Grid {
        Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[n, n]).unwrap()
    }

    fn face_nodes(grid: &Grid) -> Vec<crate::grid::NodeIndex> {
        grid.iter_nodes()
            .filter(|idx| {
                (0..grid.dim())
                    .filter(|&a| idx[a] == 0 || idx[a] == grid.num_nodes_axis(a) - 1)
                    .count()
                    == 1
            })
            .collect()
    }

    /// Laplacian at a face node evaluated with an explicit ghost value.
    fn laplacian_with_ghost(u: &ScalarField, idx: crate::grid::NodeIndex, ghost: f64) -> f64 {
        let g = u.grid();
        let mut s = 0.0;
        for a in 0..g.dim() {
            let h2 = g.spacing(a) * g.spacing(a);
            if idx[a] == 0 || idx[a] == g.num_nodes_axis(a) - 1 {
                let mut inward = idx;
                if idx[a] == 0 {
                    inward[a] += 1;
                } else {
                    inward[a] -= 1;
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
        s
    }

    #[test]
    fn ghost_reflection_when_face_is_zero() {
        let g = unit_square(9);
        // u vanishes on the whole boundary, nontrivial inside
        let u = sample_function(&g, |x| {
            x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])
        })
        .unwrap();
        let model = ModelSpec::monge_ampere(|_| 1.0, |_| 0.0);
        let sets = classify_nodes(&g);
        let bcs = BoundaryConditions::with_aux_value(&g, &sets, &model, 0.0).unwrap();
        let ghosts = ghost_closure(&u, &bcs).unwrap();
        for idx in face_nodes(&g) {
            let a = (0..2).find(|&a| idx[a] == 0 || idx[a] == 8).unwrap();
            let high = idx[a] != 0;
            let mut inward = idx;
            if high {
                inward[a] -= 1;
            } else {
                inward[a] += 1;
            }
            let ghost = ghosts.get(a, high, idx).unwrap();
            assert!((ghost + u.at(inward)).abs() < 1e-15, "reflection expected");
        }
    }

    #[test]
    fn ghost_closure_is_exact_for_quadratics() {
        let g = unit_square(9);
        let u = sample_function(&g, |x| x[0] * x[0]).unwrap();
        let model = ModelSpec::monge_ampere(|_| 1.0, |x| x[0] * x[0]);
        let sets = classify_nodes(&g);
        let bcs = BoundaryConditions::with_aux_value(&g, &sets, &model, 2.0).unwrap();
        let ghosts = ghost_closure(&u, &bcs).unwrap();
        for idx in face_nodes(&g) {
            let a = (0..2).find(|&a| idx[a] == 0 || idx[a] == 8).unwrap();
            let ghost = ghosts.get(a, idx[a] != 0, idx).unwrap();
            assert_eq!(laplacian_with_ghost(&u, idx, ghost), 2.0);
        }
    }

    #[test]
    fn ghost_closure_enforces_aux_value_for_test1() {
        let g = unit_square(17);
        let eps = 1e-3;
        let model = ModelSpec::monge_ampere(|_| 1.0, |_| 0.0);
        let sets = classify_nodes(&g);
        let bcs = BoundaryConditions::from_model(&g, &sets, &model, eps).unwrap();
        assert_eq!(bcs.aux_value, 1e-6);
        // arbitrary interior values
        let u = sample_function(&g, |x| {
            (x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])).sin()
        })
        .unwrap();
        let ghosts = ghost_closure(&u, &bcs).unwrap();
        let mut worst = 0.0f64;
        for idx in face_nodes(&g) {
            let a = (0..2).find(|&a| idx[a] == 0 || idx[a] == 16).unwrap();
            let ghost = ghosts.get(a, idx[a] != 0, idx).unwrap();
            worst = worst.max((laplacian_with_ghost(&u, idx, ghost) - 1e-6).abs());
        }
        assert!(worst <= 1e-12, "max |Δ_h u - eps²| = {worst}");
    }

    #[test]
    fn non_laplacian_aux_kinds_unimplemented() {
        let g = unit_square(5);
        let model = ModelSpec::monge_ampere(|_| 1.0, |_| 0.0);
        let sets = classify_nodes(&g);
        let mut bcs = BoundaryConditions::from_model(&g, &sets, &model, 1e-3).unwrap();
        bcs.aux_kind = AuxKind::NormalLaplacianDerivative;
        let u = ScalarField::zeros(&g);
        match ghost_closure(&u, &bcs) {
            Err(Error::Unimplemented(_)) => {}
            other => panic!("expected Unimplemented, got {other:?}"),
        }
    }

    #[test]
    fn residual_zero_field_test1_with_zero_aux() {
        // with aux = 0 the zero field has Δ²_h 0 = 0, so each entry is
        // det(0) - 1 = -1 exactly
        let g = unit_square(9);
        let model = ModelSpec::monge_ampere(|_| 1.0, |_| 0.0);
        let sets = classify_nodes(&g);
        let bcs = BoundaryConditions::with_aux_value(&g, &sets, &model, 0.0).unwrap();
        let sys = DiscreteSystem::new(&g, model, 1e-3, bcs).unwrap();
        let r = sys.residual(&vec![0.0; sys.unknown_count()]).unwrap();
        assert!(r.iter().all(|&v| v == -1.0));
        // with the default aux = eps² the boundary layer contributes
        // O(eps³/h²) at boundary-adjacent entries
        let model = ModelSpec::monge_ampere(|_| 1.0, |_| 0.0);
        let sets = classify_nodes(&g);
        let bcs = BoundaryConditions::from_model(&g, &sets, &model, 1e-3).unwrap();
        let sys = DiscreteSystem::new(&g, model, 1e-3, bcs).unwrap();
        let r = sys.residual(&vec![0.0; sys.unknown_count()]).unwrap();
        assert!(r.iter().all(|&v| (v + 1.0).abs() < 1e-5));
    }

    #[test]
    fn residual_exact_zero_for_matched_quadratic() {
        // u = (x² + y²)/2 with f = det(D²u) = 1 and aux matching Δu = 2:
        // the biharmonic of a quadratic vanishes and the residual is 0 exactly
        let g = unit_square(9);
        let model = ModelSpec::monge_ampere(|_| 1.0, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let sets = classify_nodes(&g);
        let bcs = BoundaryConditions::with_aux_value(&g, &sets, &model, 2.0).unwrap();
        let sys = DiscreteSystem::new(&g, model, 0.25, bcs).unwrap();
        let u = sample_function(&g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let r = sys.residual(&sys.interior_of(&u)).unwrap();
        assert!(r.iter().all(|&v| v == 0.0), "max {:?}", r.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }

    /// Truncation oracle: residual of exact Test-2 samples with eps = 0 is
    /// the Hessian-stencil consistency error, bounded by C h². C was
    /// measured on this 33² fixture and frozen.
    #[test]
    fn residual_truncation_on_test2_samples() {
        let g = unit_square(33);
        let exact = |x: &[f64]| ((x[0] * x[0] + x[1] * x[1]) / 2.0).exp();
        let f = |x: &[f64]| (1.0 + x[0] * x[0] + x[1] * x[1]) * (x[0] * x[0] + x[1] * x[1]).exp();
        let model = ModelSpec::monge_ampere(f, exact);
        let sets = classify_nodes(&g);
        let bcs = BoundaryConditions::with_aux_value(&g, &sets, &model, 0.0).unwrap();
        let sys = DiscreteSystem::new(&g, model, 0.0, bcs).unwrap();
        let u = sample_function(&g, exact).unwrap();
        let r = sys.residual(&sys.interior_of(&u)).unwrap();
        let maxres = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h2 = g.spacing(0) * g.spacing(0);
        // measured 0.0160/h² = 16.4 on the first verified run; frozen bound
        let c = 18.0;
        assert!(maxres <= c * h2, "max residual {maxres} vs C h² = {}", c * h2);
        assert!(maxres >= 0.1 * h2, "suspiciously small truncation error");
    }

    #[test]
    fn residual_consistency_rate_under_h_halving() {
        // smooth u with g and aux matching: u = sin(pi x) sin(pi y) has
        // u = 0 and Δu = 0 on the boundary, so g = 0, aux = 0 match exactly
        use std::f64::consts::PI;
        let run = |n: usize| -> f64 {
            let g = unit_square(n);
            let exact = move |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
            let eps = 1e-2;
            let model = ModelSpec::monge_ampere(|_| 0.0, exact);
            let sets = classify_nodes(&g);
            let bcs = BoundaryConditions::with_aux_value(&g, &sets, &model, 0.0).unwrap();
            let sys = DiscreteSystem::new(&g, model, eps, bcs).unwrap();
            let u = sample_function(&g, exact).unwrap();
            let r = sys.residual(&sys.interior_of(&u)).unwrap();
            // analytic residual: -eps Δ²u + det(D²u) - 0
            let mut worst = 0.0f64;
            for (k, &idx) in sys.sets().interior.iter().enumerate() {
                let x = g.coords(idx);
                let (sx, cx) = (PI * x[0]).sin_cos();
                let (sy, cy) = (PI * x[1]).sin_cos();
                let uxx = -PI * PI * sx * sy;
                let uyy = uxx;
                let uxy = PI * PI * cx * cy;
                let det = uxx * uyy - uxy * uxy;
                let bih = 4.0 * PI.powi(4) * sx * sy;
                let analytic = -eps * bih + det;
                worst = worst.max((r[k] - analytic).abs());
            }
            worst
        };
        let ratio = run(17) / run(33);
        assert!((3.5..=4.5).contains(&ratio), "consistency rate ratio {ratio}");
    }

    #[test]
    fn biharmonic_matrix_matches_operator_oracle() {
        // independent route: columns of the matrix from biharmonic_fd on
        // unit vectors with the zero-aux closure
        let g = unit_square(9);
        let sets = classify_nodes(&g);
        let b = biharmonic_matrix(&g, &sets).unwrap();
        let n = sets.interior.len();
        let model = ModelSpec::monge_ampere(|_| 0.0, |_| 0.0);
        let bcs = BoundaryConditions::with_aux_value(&g, &sets, &model, 0.0).unwrap();
        let mut dense = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut full = ScalarField::zeros(&g);
            full.set(sets.interior[j], 1.0);
            let ghosts = ghost_closure(&full, &bcs).unwrap();
            let bih = biharmonic_fd(&full, Some(&ghosts)).unwrap();
            for (i, &idx) in sets.interior.iter().enumerate() {
                dense[i][j] = bih.at(idx);
            }
        }
        let scale = b.max_abs();
        for i in 0..n {
            let (cols, vals) = b.row(i);
            let mut row = vec![0.0; n];
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
            for j in 0..n {
                assert!(
                    (row[j] - dense[i][j]).abs() <= 1e-12 * scale,
                    "entry ({i},{j}): {} vs {}",
                    row[j],
                    dense[i][j]
                );
            }
        }
        // row sparsity stays within the declared 13-point union
        for i in 0..n {
            assert!(b.row(i).0.len() <= 13);
        }
    }

    fn random_system(n: usize, model: ModelSpec, eps: f64) -> (DiscreteSystem, Vec<f64>, Vec<f64>) {
        let g = unit_square(n);
        let sets = classify_nodes(&g);
        let bcs = BoundaryConditions::from_model(&g, &sets, &model, eps).unwrap();
        let sys = DiscreteSystem::new(&g, model, eps, bcs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let u: Vec<f64> = (0..sys.unknown_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let d: Vec<f64> = (0..sys.unknown_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        (sys, u, d)
    }

    #[test]
    fn jacobian_matvec_matches_finite_differences() {
        let model = ModelSpec::monge_ampere(|x| 1.0 + x[0], |_| 0.0);
        let (sys, u, d) = random_system(17, model, 1e-3);
        let (jac, _) = sys.jacobian(&u).unwrap();
        let jd = jac.matvec(&d);
        let t = 1e-6;
        let up: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + t * b).collect();
        let dn: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - t * b).collect();
        let rup = sys.residual(&up).unwrap();
        let rdn = sys.residual(&dn).unwrap();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..jd.len() {
            let fd = (rup[i] - rdn[i]) / (2.0 * t);
            worst = worst.max((jd[i] - fd).abs());
            scale = scale.max(fd.abs());
        }
        assert!(worst / scale.max(1.0) <= 1e-6, "relative {}", worst / scale);
    }

    #[test]
    fn jacobian_of_linear_model_is_state_independent() {
        let g = unit_square(9);
        let model = ModelSpec::linear_laplace(|_| 1.0, |_| 0.0);
        let sets = classify_nodes(&g);
        let bcs = BoundaryConditions::from_model(&g, &sets, &model, 1e-2).unwrap();
        let sys = DiscreteSystem::new(&g, model, 1e-2, bcs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u1: Vec<f64> = (0..sys.unknown_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u2: Vec<f64> = (0..sys.unknown_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (j1, _) = sys.jacobian(&u1).unwrap();
        let (j2, _) = sys.jacobian(&u2).unwrap();
        assert_eq!(j1, j2);
    }

    #[test]
    fn jacobian_sparsity_within_declared_union() {
        let model = ModelSpec::monge_ampere(|_| 1.0, |_| 0.0);
        let (sys, u, _) = random_system(9, model, 1e-3);
        let (jac, _) = sys.jacobian(&u).unwrap();
        for i in 0..jac.n() {
            // 13-point biharmonic plus 9-point nonlinear coupling, merged
            assert!(jac.row(i).0.len() <= 13 + 9);
        }
    }

    #[test]
    fn sign_branch_symmetry_of_residual() {
        // 2-D, g = 0, aux = 0: residual_{-eps}(-u) == residual_{+eps}(u)
        let g = unit_square(9);
        let sets = classify_nodes(&g);
        let mk = || ModelSpec::monge_ampere(|x| x[0] * x[0] - x[1] * x[1], |_| 0.0);
        let bcs_p = BoundaryConditions::with_aux_value(&g, &sets, &mk(), 0.0).unwrap();
        let bcs_m = BoundaryConditions::with_aux_value(&g, &sets, &mk(), 0.0).unwrap();
        let sys_p = DiscreteSystem::new(&g, mk(), 1e-3, bcs_p).unwrap();
        let sys_m = DiscreteSystem::new(&g, mk(), -1e-3, bcs_m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u: Vec<f64> = (0..sys_p.unknown_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let rp = sys_p.residual(&u).unwrap();
        let rm = sys_m.residual(&neg).unwrap();
        for (a, b) in rp.iter().zip(&rm) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn laplacian_system_solves_affine_exactly() {
        let g = unit_square(9);
        let sets = classify_nodes(&g);
        let gfun = |x: &[f64]| 1.0 + 2.0 * x[0] - x[1];
        let dirichlet: Vec<f64> = sets
            .boundary
            .iter()
            .map(|&idx| {
                let x = g.coords(idx);
                gfun(&x[..2])
            })
            .collect();
        let (l, shift) = laplacian_system(&g, &sets, &dirichlet).unwrap();
        // affine data: Δu = 0, so L u = -shift reproduces the interpolant
        let rhs: Vec<f64> = shift.iter().map(|s| -s).collect();
        let sol = crate::linalg::gmres_solve(&l, &rhs, None, &crate::linalg::KrylovOptions::default())
            .unwrap();
        assert!(sol.converged);
        for (r, &idx) in sets.interior.iter().enumerate() {
            let x = g.coords(idx);
            assert!((sol.x[r] - gfun(&x[..2])).abs() < 1e-9);
        }
        // sanity: applying the stencil to the solution reproduces zero
        let mut full = ScalarField::zeros(&g);
        for (r, &idx) in sets.interior.iter().enumerate() {
            full.set(idx, sol.x[r]);
        }
        for (b, &idx) in sets.boundary.iter().enumerate() {
            full.set(idx, dirichlet[b]);
        }
        for &idx in &sets.interior {
            assert!(laplacian_at(&full, idx).abs() < 1e-8);
        }
    }

    #[test]
    fn epsilon_param_validation() {
        assert!(EpsilonParam::new(0.0).is_err());
        assert!(EpsilonParam::new(1.5).is_err());
        assert!(EpsilonParam::new(f64::NAN).is_err());
        assert_eq!(EpsilonParam::new(-1e-3).unwrap().value(), -1e-3);
    }
}
