//! The PDE family catalogue. Each model evaluates the fully nonlinear
//! residual `F(D²u, ∇u, u, x) - f` and its analytic linearization pointwise.
//!
//! Variants:
//! - Monge-Ampère, classical (`det(D²u) - f(x)`) and general
//!   (`det(D²u) - f(∇u, u, x)`),
//! - Gauss curvature (`det(D²u) - K (1 + |∇u|²)^{(n+2)/2}`),
//! - Pucci extremal operators (`α Δu + (1 - nα) λ_extreme(D²u) - f`),
//! - infinity Laplacian (`D²u ∇u · ∇u - f`),
//! - parabolic Monge-Ampère (spatial part; the time term lives in the
//!   stepper),
//! - a linear Laplace mode (`Δu - f`) used for exactness checks.
//!
//! The time-dependent source signature is shared by all variants; elliptic
//! problems are evaluated at `t = 0`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, MAX_DIM};
use crate::operators::SymMat;

pub type PositionFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type BoundaryFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type StateSourceFn = Arc<dyn Fn(&[f64], f64, &[f64], f64) -> f64 + Send + Sync>;
pub type StateSourceGradFn =
    Arc<dyn Fn(&[f64], f64, &[f64], f64) -> [f64; MAX_DIM] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    MongeAmpereClassical,
    MongeAmpereGeneral,
    GaussCurvature,
    PucciMax,
    PucciMin,
    InfinityLaplace,
    ParabolicMongeAmpere,
    LinearLaplace,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::MongeAmpereClassical => "monge-ampere",
            Variant::MongeAmpereGeneral => "monge-ampere-general",
            Variant::GaussCurvature => "gauss-curvature",
            Variant::PucciMax => "pucci-max",
            Variant::PucciMin => "pucci-min",
            Variant::InfinityLaplace => "infinity-laplace",
            Variant::ParabolicMongeAmpere => "parabolic-monge-ampere",
            Variant::LinearLaplace => "linear-laplace",
        }
    }

    /// Monge-Ampère family: the initial guess uses the AM-GM Poisson ansatz.
    pub fn is_monge_ampere_family(&self) -> bool {
        matches!(
            self,
            Variant::MongeAmpereClassical
                | Variant::MongeAmpereGeneral
                | Variant::GaussCurvature
                | Variant::ParabolicMongeAmpere
        )
    }
}

/// Source term. Position sources depend on `(x, t)` only; state sources
/// (general Monge-Ampère) also see `(∇u, u)` and must supply their partial
/// derivatives for the Newton linearization.
#[derive(Clone)]
pub enum Source {
    Position(PositionFn),
    State {
        f: StateSourceFn,
        df_dgrad: StateSourceGradFn,
        df_du: StateSourceFn,
    },
}

/// Arguments of the pointwise residual.
#[derive(Debug, Clone, Copy)]
pub struct PointState {
    pub x: [f64; MAX_DIM],
    pub u: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: SymMat,
    pub t: f64,
}

/// Perturbation direction for [`linearize_point`].
#[derive(Debug, Clone, Copy)]
pub struct StateDelta {
    pub u: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: SymMat,
}

/// Gradient of the residual with respect to the state: `dR[δ] =
/// Σ_ab d_hess[a][b] δH[a][b] + d_grad · δg + d_u δu`.
#[derive(Debug, Clone, Copy)]
pub struct PointDerivative {
    pub d_hess: SymMat,
    pub d_grad: [f64; MAX_DIM],
    pub d_u: f64,
}

/// A PDE family instance: variant tag, coefficient callables, boundary data,
/// and an optional exact solution for diagnostics.
#[derive(Clone)]
pub struct ModelSpec {
    variant: Variant,
    source: Source,
    boundary: BoundaryFn,
    gauss_k: f64,
    pucci_alpha: f64,
    exact: Option<PositionFn>,
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpec")
            .field("variant", &self.variant)
            .field("gauss_k", &self.gauss_k)
            .field("pucci_alpha", &self.pucci_alpha)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

fn position_source(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Source {
    Source::Position(Arc::new(move |x, _t| f(x)))
}

impl ModelSpec {
    pub fn monge_ampere(
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ModelSpec {
            variant: Variant::MongeAmpereClassical,
            source: position_source(f),
            boundary: Arc::new(g),
            gauss_k: 0.0,
            pucci_alpha: 0.0,
            exact: None,
        }
    }

    pub fn monge_ampere_general(
        f: impl Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync + 'static,
        df_dgrad: impl Fn(&[f64], f64, &[f64]) -> [f64; MAX_DIM] + Send + Sync + 'static,
        df_du: impl Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ModelSpec {
            variant: Variant::MongeAmpereGeneral,
            source: Source::State {
                f: Arc::new(move |grad, u, x, _t| f(grad, u, x)),
                df_dgrad: Arc::new(move |grad, u, x, _t| df_dgrad(grad, u, x)),
                df_du: Arc::new(move |grad, u, x, _t| df_du(grad, u, x)),
            },
            boundary: Arc::new(g),
            gauss_k: 0.0,
            pucci_alpha: 0.0,
            exact: None,
        }
    }

    pub fn gauss_curvature(k: f64, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "Gauss curvature K must be finite and >= 0, got {k}"
            )));
        }
        Ok(ModelSpec {
            variant: Variant::GaussCurvature,
            source: position_source(|_| 0.0),
            boundary: Arc::new(g),
            gauss_k: k,
            pucci_alpha: 0.0,
            exact: None,
        })
    }

    pub fn pucci_max(
        alpha: f64,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::pucci(Variant::PucciMax, alpha, f, g)
    }

    pub fn pucci_min(
        alpha: f64,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::pucci(Variant::PucciMin, alpha, f, g)
    }

    fn pucci(
        variant: Variant,
        alpha: f64,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::InvalidModel(format!(
                "Pucci alpha must lie in (0, 1/n], got {alpha}"
            )));
        }
        Ok(ModelSpec {
            variant,
            source: position_source(f),
            boundary: Arc::new(g),
            gauss_k: 0.0,
            pucci_alpha: alpha,
            exact: None,
        })
    }

    pub fn infinity_laplace(
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ModelSpec {
            variant: Variant::InfinityLaplace,
            source: position_source(f),
            boundary: Arc::new(g),
            gauss_k: 0.0,
            pucci_alpha: 0.0,
            exact: None,
        }
    }

    pub fn parabolic_monge_ampere(
        f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ModelSpec {
            variant: Variant::ParabolicMongeAmpere,
            source: Source::Position(Arc::new(f)),
            boundary: Arc::new(g),
            gauss_k: 0.0,
            pucci_alpha: 0.0,
            exact: None,
        }
    }

    pub fn linear_laplace(
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ModelSpec {
            variant: Variant::LinearLaplace,
            source: position_source(f),
            boundary: Arc::new(g),
            gauss_k: 0.0,
            pucci_alpha: 0.0,
            exact: None,
        }
    }

    pub fn with_exact(mut self, exact: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(move |x, _t| exact(x)));
        self
    }

    pub fn with_exact_time(mut self, exact: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn gauss_k(&self) -> f64 {
        self.gauss_k
    }

    /// Clone with a different Gauss curvature (used by K sweeps).
    pub fn with_gauss_k(&self, k: f64) -> Result<Self> {
        if self.variant != Variant::GaussCurvature {
            return Err(Error::InvalidModel(
                "with_gauss_k only applies to the Gauss curvature variant".into(),
            ));
        }
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidModel(format!("invalid Gauss K {k}")));
        }
        let mut out = self.clone();
        out.gauss_k = k;
        Ok(out)
    }

    pub fn pucci_alpha(&self) -> f64 {
        self.pucci_alpha
    }

    pub fn boundary_value(&self, x: &[f64]) -> f64 {
        (self.boundary)(x)
    }

    pub fn exact(&self) -> Option<&PositionFn> {
        self.exact.as_ref()
    }

    /// Dimension-aware parameter validation.
    pub fn validate_for_dim(&self, dim: usize) -> Result<()> {
        match self.variant {
            Variant::PucciMax | Variant::PucciMin => {
                let bound = 1.0 / dim as f64;
                if !(self.pucci_alpha > 0.0 && self.pucci_alpha <= bound) {
                    return Err(Error::InvalidModel(format!(
                        "Pucci alpha {} outside (0, 1/{dim}]",
                        self.pucci_alpha
                    )));
                }
            }
            Variant::MongeAmpereGeneral => {
                if !matches!(self.source, Source::State { .. }) {
                    return Err(Error::InvalidModel(
                        "general Monge-Ampère needs a state-dependent source".into(),
                    ));
                }
            }
            _ => {}
        }
        if !matches!(self.variant, Variant::MongeAmpereGeneral) {
            if matches!(self.source, Source::State { .. }) {
                return Err(Error::InvalidModel(format!(
                    "variant {} takes a position source",
                    self.variant.name()
                )));
            }
        }
        Ok(())
    }

    fn position_f(&self, x: &[f64], t: f64) -> f64 {
        match &self.source {
            Source::Position(f) => f(x, t),
            Source::State { .. } => 0.0,
        }
    }
}

fn dot(a: &[f64; MAX_DIM], b: &[f64; MAX_DIM], dim: usize) -> f64 {
    (0..dim).map(|i| a[i] * b[i]).sum()
}

/// `F(s) - f(s)` for the model's variant.
pub fn residual_point(model: &ModelSpec, s: &PointState) -> f64 {
    let dim = s.hess.dim();
    match model.variant {
        Variant::MongeAmpereClassical | Variant::ParabolicMongeAmpere => {
            s.hess.det() - model.position_f(&s.x[..dim], s.t)
        }
        Variant::MongeAmpereGeneral => {
            let f = match &model.source {
                Source::State { f, .. } => f(&s.grad[..dim], s.u, &s.x[..dim], s.t),
                Source::Position(f) => f(&s.x[..dim], s.t),
            };
            s.hess.det() - f
        }
        Variant::GaussCurvature => {
            let g2 = dot(&s.grad, &s.grad, dim);
            let p = (dim as f64 + 2.0) / 2.0;
            s.hess.det() - model.gauss_k * (1.0 + g2).powf(p)
        }
        Variant::PucciMax | Variant::PucciMin => {
            let eigs = s.hess.eigenvalues();
            let lam = if model.variant == Variant::PucciMax {
                eigs[dim - 1]
            } else {
                eigs[0]
            };
            let alpha = model.pucci_alpha;
            alpha * s.hess.trace() + (1.0 - dim as f64 * alpha) * lam
                - model.position_f(&s.x[..dim], s.t)
        }
        Variant::InfinityLaplace => {
            let hg = s.hess.mul_vec(&s.grad);
            dot(&hg, &s.grad, dim) - model.position_f(&s.x[..dim], s.t)
        }
        Variant::LinearLaplace => s.hess.trace() - model.position_f(&s.x[..dim], s.t),
    }
}

/// State gradient of the residual at `s`, plus a nonsmoothness flag (Pucci
/// with a (near-)repeated relevant eigenvalue; the deterministic eigenvector
/// of the closed-form solver is used as a subgradient there).
pub fn derivative_point(model: &ModelSpec, s: &PointState) -> (PointDerivative, bool) {
    let dim = s.hess.dim();
    let zero = PointDerivative {
        d_hess: SymMat::zero(dim),
        d_grad: [0.0; MAX_DIM],
        d_u: 0.0,
    };
    match model.variant {
        Variant::MongeAmpereClassical | Variant::ParabolicMongeAmpere => (
            PointDerivative {
                d_hess: s.hess.adjugate(),
                ..zero
            },
            false,
        ),
        Variant::MongeAmpereGeneral => {
            let (dg, du) = match &model.source {
                Source::State {
                    df_dgrad, df_du, ..
                } => (
                    df_dgrad(&s.grad[..dim], s.u, &s.x[..dim], s.t),
                    df_du(&s.grad[..dim], s.u, &s.x[..dim], s.t),
                ),
                Source::Position(_) => ([0.0; MAX_DIM], 0.0),
            };
            let mut d_grad = [0.0; MAX_DIM];
            for a in 0..dim {
                d_grad[a] = -dg[a];
            }
            (
                PointDerivative {
                    d_hess: s.hess.adjugate(),
                    d_grad,
                    d_u: -du,
                },
                false,
            )
        }
        Variant::GaussCurvature => {
            let g2 = dot(&s.grad, &s.grad, dim);
            let n = dim as f64;
            let coeff = -model.gauss_k * (n + 2.0) * (1.0 + g2).powf(n / 2.0);
            let mut d_grad = [0.0; MAX_DIM];
            for a in 0..dim {
                d_grad[a] = coeff * s.grad[a];
            }
            (
                PointDerivative {
                    d_hess: s.hess.adjugate(),
                    d_grad,
                    ..zero
                },
                false,
            )
        }
        Variant::PucciMax | Variant::PucciMin => {
            let eigs = s.hess.eigenvalues();
            let (lam, gap) = if model.variant == Variant::PucciMax {
                (eigs[dim - 1], eigs[dim - 1] - eigs[dim - 2])
            } else {
                (eigs[0], eigs[1] - eigs[0])
            };
            let nonsmooth = gap < 1e-10 * s.hess.max_abs();
            let q = s.hess.eigenvector(lam);
            let alpha = model.pucci_alpha;
            let extremal = 1.0 - dim as f64 * alpha;
            let mut w = SymMat::zero(dim);
            for a in 0..dim {
                for b in a..dim {
                    let mut v = extremal * q[a] * q[b];
                    if a == b {
                        v += alpha;
                    }
                    w.set(a, b, v);
                }
            }
            (PointDerivative { d_hess: w, ..zero }, nonsmooth)
        }
        Variant::InfinityLaplace => {
            let mut w = SymMat::zero(dim);
            for a in 0..dim {
                for b in a..dim {
                    w.set(a, b, s.grad[a] * s.grad[b]);
                }
            }
            let hg = s.hess.mul_vec(&s.grad);
            let mut d_grad = [0.0; MAX_DIM];
            for a in 0..dim {
                d_grad[a] = 2.0 * hg[a];
            }
            (
                PointDerivative {
                    d_hess: w,
                    d_grad,
                    ..zero
                },
                false,
            )
        }
        Variant::LinearLaplace => (
            PointDerivative {
                d_hess: SymMat::identity(dim),
                ..zero
            },
            false,
        ),
    }
}

/// Directional derivative of [`residual_point`] at `s` in direction `delta`.
pub fn linearize_point(model: &ModelSpec, s: &PointState, delta: &StateDelta) -> f64 {
    let (d, _) = derivative_point(model, s);
    contract_derivative(&d, delta, s.hess.dim())
}

pub fn contract_derivative(d: &PointDerivative, delta: &StateDelta, dim: usize) -> f64 {
    let mut out = d.d_u * delta.u;
    for a in 0..dim {
        out += d.d_grad[a] * delta.grad[a];
        out += d.d_hess.get(a, a) * delta.hess.get(a, a);
        for b in (a + 1)..dim {
            out += 2.0 * d.d_hess.get(a, b) * delta.hess.get(a, b);
        }
    }
    out
}

/// Sample the position-dependent part of the source at interior nodes.
/// State-dependent sources (general Monge-Ampère, Gauss) are evaluated with
/// the state coupling removed (`∇u = 0`, `u = 0`); the full coupling lives in
/// [`residual_point`]. Singular sample points are reported, not clamped.
pub fn forcing_field(model: &ModelSpec, grid: &Grid, t: f64) -> Result<ScalarField> {
    let mut out = ScalarField::zeros(grid);
    for k in 0..grid.node_count() {
        let idx = grid.unflat(k);
        if !grid.is_interior(idx) {
            continue;
        }
        let x = grid.coords(idx);
        let v = match (&model.source, model.variant) {
            (_, Variant::GaussCurvature) => model.gauss_k,
            (Source::Position(f), _) => f(&x[..grid.dim()], t),
            (Source::State { f, .. }, _) => f(&[0.0; MAX_DIM][..grid.dim()], 0.0, &x[..grid.dim()], t),
        };
        if !v.is_finite() {
            return Err(Error::NonFinite {
                node: idx,
                context: "forcing_field".into(),
            });
        }
        out.values_mut()[k] = v;
    }
    Ok(out)
}
