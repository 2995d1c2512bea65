//! Outer nonlinear machinery: the Poisson-ansatz initial guess, fixed-point
//! warm-up, damped Newton with an ILU(0)-preconditioned GMRES inner solver,
//! ε-continuation (solve at a large ε, warm-start the next smaller one), and
//! implicit time stepping for the parabolic models.
//!
//! The control norm is the residual max-norm throughout: it matches
//! pointwise PDE satisfaction and is insensitive to grid size.

use crate::assembly::{
    laplacian_system, BoundaryConditions, DiscreteSystem, EpsilonParam, TimeTerm,
};
use crate::error::{Error, Result};
use crate::grid::{classify_nodes, Grid, ScalarField};
use crate::linalg::{gmres_solve, ilu0_factor, KrylovOptions};
use crate::models::{forcing_field, ModelSpec, Variant};

/// Damped-Newton controls.
#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Residual max-norm target.
    pub abs_tol: f64,
    /// Relative target against the initial residual max-norm.
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Backtracking factor per halving.
    pub damping_factor: f64,
    pub max_halvings: usize,
    /// Armijo constant: accept when `|R(u+λδ)| <= (1 - c λ) |R(u)|`.
    pub armijo_c: f64,
    pub warmup_fixed_point_iters: usize,
    pub krylov: KrylovOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            abs_tol: 1e-8,
            rel_tol: 1e-10,
            max_iters: 50,
            damping_factor: 0.5,
            max_halvings: 20,
            armijo_c: 1e-4,
            warmup_fixed_point_iters: 0,
            krylov: KrylovOptions::default(),
        }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("newton tolerances must be positive".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidParameter("newton max_iters must be >= 1".into()));
        }
        self.krylov.validate()
    }
}

/// Finite schedule of nonzero ε values, strictly decreasing in magnitude
/// with constant sign.
#[derive(Debug, Clone)]
pub struct EpsilonSchedule {
    values: Vec<f64>,
}

impl EpsilonSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty epsilon schedule".into()));
        }
        for &v in &values {
            EpsilonParam::new(v)?;
        }
        let sign = values[0].signum();
        for w in values.windows(2) {
            if w[1].signum() != sign {
                return Err(Error::InvalidParameter(
                    "epsilon schedule must keep a constant sign".into(),
                ));
            }
            if w[1].abs() >= w[0].abs() {
                return Err(Error::InvalidParameter(
                    "epsilon schedule must strictly decrease in magnitude".into(),
                ));
            }
        }
        Ok(EpsilonSchedule { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn negated(&self) -> Self {
        EpsilonSchedule {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

/// Per-iteration linear-solver statistics.
#[derive(Debug, Clone)]
pub struct LinearStats {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct DampingEvent {
    pub iteration: usize,
    pub halvings: usize,
}

/// Convergence history of one Newton solve.
#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Residual max-norms, length `iterations + 1`.
    pub residual_history: Vec<f64>,
    pub damping_events: Vec<DampingEvent>,
    pub linear_stats: Vec<LinearStats>,
    /// Pucci subgradient fallbacks encountered during Jacobian assembly.
    pub nonsmooth_flags: usize,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Poisson-ansatz initial guess.
///
/// For the Monge-Ampère family with `f >= 0` this solves
/// `Δ_h u0 = n (max(f,0))^{1/n}` with `u0 = g` on the boundary (AM-GM:
/// `det(D²u) <= (Δu/n)^n`, equality for scalar Hessians). Pucci and
/// infinity-Laplace solve `Δ_h u0 = f`. A negative ε flips the source sign:
/// the concave branch seeks `Δu <= 0`.
pub fn initial_guess(sys: &DiscreteSystem) -> Result<Vec<f64>> {
    let grid = sys.grid();
    let dim = grid.dim() as f64;
    let f = forcing_field(sys.model(), grid, 0.0)?;
    let mut source = Vec::with_capacity(sys.unknown_count());
    for &idx in &sys.sets().interior {
        let fv = f.at(idx);
        let s = if sys.model().variant().is_monge_ampere_family() {
            dim * fv.max(0.0).powf(1.0 / dim)
        } else {
            fv
        };
        source.push(if sys.eps() < 0.0 { -s } else { s });
    }
    let (l, shift) = laplacian_system(grid, sys.sets(), &sys.bcs().dirichlet)?;
    let rhs: Vec<f64> = source.iter().zip(&shift).map(|(s, sh)| s - sh).collect();
    let pre = ilu0_factor(&l)?;
    let sol = gmres_solve(&l, &rhs, Some(&pre), &KrylovOptions::default())?;
    if !sol.converged {
        return Err(Error::LinearSolve {
            context: "initial guess Poisson solve".into(),
            residual: sol.rel_residual,
            iterations: sol.iterations,
        });
    }
    Ok(sol.x)
}

/// ILU(0) of an ill-conditioned row pattern can produce a near-singular
/// factorization that poisons GMRES; probe it on the all-ones vector.
fn usable_ilu(jac: &crate::linalg::CsrMatrix) -> Option<crate::linalg::Ilu0Factors> {
    let pre = ilu0_factor(jac).ok()?;
    let probe = pre.apply(&vec![1.0; jac.n()]);
    let worst = probe.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if worst.is_finite() && worst < 1e12 {
        Some(pre)
    } else {
        None
    }
}

/// Preconditioned solve with a single unpreconditioned retry if the
/// preconditioned run fails to converge; the better residual wins.
pub(crate) fn robust_linear_solve(
    jac: &crate::linalg::CsrMatrix,
    rhs: &[f64],
    krylov: &KrylovOptions,
) -> Result<crate::linalg::GmresResult> {
    let pre = usable_ilu(jac);
    let lin = gmres_solve(jac, rhs, pre.as_ref(), krylov)?;
    if lin.converged || pre.is_none() {
        return Ok(lin);
    }
    let retry = gmres_solve(jac, rhs, None, krylov)?;
    Ok(if retry.rel_residual < lin.rel_residual {
        retry
    } else {
        lin
    })
}

fn newton_direction(
    sys: &DiscreteSystem,
    u: &[f64],
    r: &[f64],
    opts: &NewtonOptions,
    report: &mut SolveReport,
) -> Result<(Vec<f64>, bool)> {
    let (jac, flags) = sys.jacobian(u)?;
    report.nonsmooth_flags += flags.nonsmooth_points;
    let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
    let lin = robust_linear_solve(&jac, &neg_r, &opts.krylov)?;
    report.linear_stats.push(LinearStats {
        iterations: lin.iterations,
        rel_residual: lin.rel_residual,
        converged: lin.converged,
    });
    Ok((lin.x, lin.converged))
}

/// Damped Newton iteration on the discrete system, starting from `u0`.
///
/// Non-convergence returns the best iterate with `converged = false`; a
/// failed inner linear solve is recorded, its best iterate is used as the
/// search direction, and the line search decides.
pub fn newton_solve(
    sys: &DiscreteSystem,
    u0: &[f64],
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    opts.validate()?;
    let mut report = SolveReport::default();
    let mut u = u0.to_vec();
    let mut r = sys.residual(&u)?;
    let mut rnorm = max_norm(&r);
    let r0norm = rnorm;
    report.residual_history.push(rnorm);

    for iter in 1..=opts.max_iters {
        if rnorm <= opts.abs_tol || rnorm <= opts.rel_tol * r0norm {
            report.converged = true;
            return Ok((u, report));
        }
        let (delta, _lin_ok) = newton_direction(sys, &u, &r, opts, &mut report)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for halvings in 0..=opts.max_halvings {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(ui, di)| ui + lambda * di).collect();
            match sys.residual(&trial) {
                Ok(rt) => {
                    let tnorm = max_norm(&rt);
                    if tnorm <= (1.0 - opts.armijo_c * lambda) * rnorm {
                        u = trial;
                        r = rt;
                        rnorm = tnorm;
                        report.iterations = iter;
                        report.residual_history.push(rnorm);
                        if halvings > 0 {
                            report.damping_events.push(DampingEvent { iteration: iter, halvings });
                        }
                        accepted = true;
                        break;
                    }
                }
                // an overflowing trial step is just a rejected step
                Err(Error::NonFinite { .. }) => {}
                Err(e) => return Err(e),
            }
            lambda *= opts.damping_factor;
        }
        if !accepted {
            report.converged = false;
            return Ok((u, report));
        }
    }
    report.converged = rnorm <= opts.abs_tol || rnorm <= opts.rel_tol * r0norm;
    Ok((u, report))
}

/// `k` iterations of the frozen-coefficient map: each is one undamped Newton
/// step with the Jacobian used as a lagged linear operator. `k = 0` returns
/// the input unchanged.
pub fn fixed_point_warmup(sys: &DiscreteSystem, u: &[f64], k: usize) -> Result<Vec<f64>> {
    fixed_point_warmup_with(sys, u, k, &KrylovOptions::default())
}

pub fn fixed_point_warmup_with(
    sys: &DiscreteSystem,
    u: &[f64],
    k: usize,
    krylov: &KrylovOptions,
) -> Result<Vec<f64>> {
    let mut u = u.to_vec();
    for step in 0..k {
        let r = sys.residual(&u)?;
        let (jac, _) = sys.jacobian(&u)?;
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let lin = robust_linear_solve(&jac, &neg_r, krylov)?;
        if !lin.converged {
            return Err(Error::LinearSolve {
                context: format!("fixed-point warmup iteration {step}"),
                residual: lin.rel_residual,
                iterations: lin.iterations,
            });
        }
        for (ui, di) in u.iter_mut().zip(&lin.x) {
            *ui += di;
        }
    }
    Ok(u)
}

/// Multilinear interpolation of a field onto another grid over the same box
/// (used to warm-start a fine-grid solve from a coarse solution).
pub fn interpolate_field(src: &ScalarField, target: &Grid) -> Result<ScalarField> {
    let sg = src.grid();
    if sg.dim() != target.dim() {
        return Err(Error::DimMismatch("interpolate_field: dimension".into()));
    }
    let dim = sg.dim();
    let mut out = ScalarField::zeros(target);
    for k in 0..target.node_count() {
        let idx = target.unflat(k);
        let x = target.coords(idx);
        // locate the containing cell and local weights on the source grid
        let mut base = [0usize; crate::grid::MAX_DIM];
        let mut w = [0.0f64; crate::grid::MAX_DIM];
        for a in 0..dim {
            let t = (x[a] - sg.lo()[a]) / sg.spacing(a);
            let i = (t.floor() as isize).clamp(0, sg.num_nodes_axis(a) as isize - 2) as usize;
            base[a] = i;
            w[a] = (t - i as f64).clamp(0.0, 1.0);
        }
        let corners = 1usize << dim;
        let mut v = 0.0;
        for c in 0..corners {
            let mut node = base;
            let mut weight = 1.0;
            for a in 0..dim {
                if c & (1 << a) != 0 {
                    node[a] += 1;
                    weight *= w[a];
                } else {
                    weight *= 1.0 - w[a];
                }
            }
            v += weight * src.at(node);
        }
        out.values_mut()[k] = v;
    }
    Ok(out)
}

/// One stage of an ε-continuation.
#[derive(Debug, Clone)]
pub struct ContinuationStage {
    pub eps: f64,
    pub aux_value: f64,
    /// Full field including boundary values.
    pub field: ScalarField,
    pub report: SolveReport,
}

/// All stages attempted, plus the index of the first failed stage if the
/// sweep aborted (that stage's best iterate is included).
#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub stages: Vec<ContinuationStage>,
    pub failed_stage: Option<usize>,
}

impl ContinuationResult {
    pub fn converged(&self) -> bool {
        self.failed_stage.is_none()
    }

    pub fn final_field(&self) -> Option<&ScalarField> {
        match self.failed_stage {
            None => self.stages.last().map(|s| &s.field),
            Some(i) if i > 0 => Some(&self.stages[i - 1].field),
            Some(_) => None,
        }
    }
}

/// Solve along an ε schedule. The first stage starts from the Poisson-ansatz
/// guess plus optional fixed-point warmup; each later stage warm-starts from
/// the previous converged field with `aux_value` rescaled to the new ε²
/// unless `aux_override` pins it.
pub fn continuation_solve(
    model: &ModelSpec,
    grid: &Grid,
    schedule: &EpsilonSchedule,
    aux_override: Option<f64>,
    opts: &NewtonOptions,
) -> Result<ContinuationResult> {
    let sets = classify_nodes(grid);
    let mut stages: Vec<ContinuationStage> = Vec::new();
    let mut prev: Option<Vec<f64>> = None;

    for (k, &eps) in schedule.values().iter().enumerate() {
        let aux = aux_override.unwrap_or(eps * eps);
        let bcs = BoundaryConditions::with_aux_value(grid, &sets, model, aux)?;
        let sys = DiscreteSystem::new(grid, model.clone(), eps, bcs)?;
        let start = match &prev {
            Some(u) => u.clone(),
            None => {
                let mut u = initial_guess(&sys)?;
                if opts.warmup_fixed_point_iters > 0 {
                    u = fixed_point_warmup_with(&sys, &u, opts.warmup_fixed_point_iters, &opts.krylov)?;
                }
                u
            }
        };
        let (u, report) = newton_solve(&sys, &start, opts)?;
        let ok = report.converged;
        stages.push(ContinuationStage {
            eps,
            aux_value: aux,
            field: sys.full_field(&u)?,
            report,
        });
        if !ok {
            return Ok(ContinuationResult {
                stages,
                failed_stage: Some(k),
            });
        }
        prev = Some(u);
    }
    Ok(ContinuationResult {
        stages,
        failed_stage: None,
    })
}

/// One stage of a Gauss-curvature sweep.
#[derive(Debug, Clone)]
pub struct SweepStage {
    pub k: f64,
    pub converged: bool,
    pub field: Option<ScalarField>,
    pub report: SolveReport,
}

/// Warm-started sweep over Gauss curvatures at a fixed ε (the last entry of
/// `schedule`). The first K is solved by the full ε-continuation; each later
/// K warm-starts from the previous converged field. Stops at the first K
/// that fails to converge (the qualitative K* barrier).
pub fn gauss_curvature_sweep(
    model: &ModelSpec,
    grid: &Grid,
    ks: &[f64],
    schedule: &EpsilonSchedule,
    opts: &NewtonOptions,
) -> Result<Vec<SweepStage>> {
    if model.variant() != Variant::GaussCurvature {
        return Err(Error::InvalidModel("K sweep needs the Gauss curvature variant".into()));
    }
    if ks.is_empty() {
        return Err(Error::InvalidParameter("empty K sweep".into()));
    }
    let eps = *schedule.values().last().unwrap();
    let sets = classify_nodes(grid);
    let mut out = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    for &k in ks {
        let m = model.with_gauss_k(k)?;
        let (field_int, report) = match &prev {
            Some(u) => {
                let bcs = BoundaryConditions::from_model(grid, &sets, &m, eps)?;
                let sys = DiscreteSystem::new(grid, m.clone(), eps, bcs)?;
                let (u, report) = newton_solve(&sys, u, opts)?;
                (u, report)
            }
            None => {
                let cont = continuation_solve(&m, grid, schedule, None, opts)?;
                let last = cont.stages.last().expect("at least one stage").clone();
                let sys_like_interior: Vec<f64> = sets
                    .interior
                    .iter()
                    .map(|&idx| last.field.at(idx))
                    .collect();
                (sys_like_interior, last.report)
            }
        };
        let converged = report.converged;
        let field = if converged {
            let bcs = BoundaryConditions::from_model(grid, &sets, &m, eps)?;
            let sys = DiscreteSystem::new(grid, m.clone(), eps, bcs)?;
            Some(sys.full_field(&field_int)?)
        } else {
            None
        };
        out.push(SweepStage { k, converged, field, report });
        if !converged {
            break;
        }
        prev = Some(field_int);
    }
    Ok(out)
}

/// Implicit time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    BackwardEuler,
    /// Averages the spatial operator between levels; experimental.
    CrankNicolson,
}

#[derive(Debug, Clone)]
pub struct TimeStepOptions {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub newton: NewtonOptions,
    /// Keep every `sample_stride`-th step in the trajectory (the final step
    /// is always kept).
    pub sample_stride: usize,
    /// Auxiliary boundary value override; `None` keeps the default `ε²`.
    pub aux_value: Option<f64>,
}

impl TimeStepOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if self.t_end < self.dt {
            return Err(Error::InvalidParameter("t_end must be >= dt".into()));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidParameter("sample_stride must be >= 1".into()));
        }
        self.newton.validate()
    }
}

#[derive(Debug, Clone)]
pub struct TimeSample {
    pub t: f64,
    pub field: ScalarField,
}

/// Trajectory of an implicit parabolic run. A per-step Newton failure halts
/// the march; the completed samples and the failing step index are returned.
#[derive(Debug, Clone)]
pub struct ParabolicTrajectory {
    pub samples: Vec<TimeSample>,
    pub reports: Vec<SolveReport>,
    pub failed_step: Option<usize>,
}

/// March `-ε Δ²_h u + F(u) - f - u_t = 0` with backward Euler (default) or
/// Crank-Nicolson, each step solved by Newton warm-started from the previous
/// level. `u_init` must match the boundary data at `t = 0`.
pub fn evolve_parabolic(
    model: &ModelSpec,
    grid: &Grid,
    u_init: &ScalarField,
    eps: f64,
    tsopts: &TimeStepOptions,
) -> Result<ParabolicTrajectory> {
    tsopts.validate()?;
    EpsilonParam::new(eps)?;
    let sets = classify_nodes(grid);
    let bcs = match tsopts.aux_value {
        Some(aux) => BoundaryConditions::with_aux_value(grid, &sets, model, aux)?,
        None => BoundaryConditions::from_model(grid, &sets, model, eps)?,
    };
    for (b, &idx) in sets.boundary.iter().enumerate() {
        let want = bcs.dirichlet[b];
        let got = u_init.at(idx);
        if (want - got).abs() > 1e-12 * want.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "u_init does not match g on the boundary at node {idx:?}: {got} vs {want}"
            )));
        }
    }

    let n_steps = ((tsopts.t_end / tsopts.dt) - 1e-12).ceil() as usize;
    let base_sys = DiscreteSystem::new(grid, model.clone(), eps, bcs.clone())?;
    let mut u_prev = base_sys.interior_of(u_init);
    let mut samples = vec![TimeSample { t: 0.0, field: u_init.clone() }];
    let mut reports = Vec::new();

    for step in 0..n_steps {
        let t_old = step as f64 * tsopts.dt;
        let t_new = t_old + tsopts.dt;
        let inv_dt = 1.0 / tsopts.dt;
        let time = match tsopts.scheme {
            Scheme::BackwardEuler => TimeTerm {
                scale: 1.0,
                shift: -inv_dt,
                constant: u_prev.iter().map(|v| v * inv_dt).collect(),
                t: t_new,
            },
            Scheme::CrankNicolson => {
                let old_sys = DiscreteSystem::new(grid, model.clone(), eps, bcs.clone())?
                    .with_time_term(TimeTerm {
                        scale: 1.0,
                        shift: 0.0,
                        constant: vec![0.0; u_prev.len()],
                        t: t_old,
                    })?;
                let s_old = old_sys.residual(&u_prev)?;
                TimeTerm {
                    scale: 0.5,
                    shift: -inv_dt,
                    constant: u_prev
                        .iter()
                        .zip(&s_old)
                        .map(|(v, s)| v * inv_dt + 0.5 * s)
                        .collect(),
                    t: t_new,
                }
            }
        };
        let sys = DiscreteSystem::new(grid, model.clone(), eps, bcs.clone())?.with_time_term(time)?;
        let (u, report) = newton_solve(&sys, &u_prev, &tsopts.newton)?;
        let ok = report.converged;
        reports.push(report);
        if !ok {
            return Ok(ParabolicTrajectory {
                samples,
                reports,
                failed_step: Some(step),
            });
        }
        u_prev = u;
        if (step + 1) % tsopts.sample_stride == 0 || step + 1 == n_steps {
            samples.push(TimeSample {
                t: t_new,
                field: sys.full_field(&u_prev)?,
            });
        }
    }
    Ok(ParabolicTrajectory {
        samples,
        reports,
        failed_step: None,
    })
}
