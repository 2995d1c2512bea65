//! The registered benchmark cases: eleven model problems on boxes, each with
//! its data, default resolution, and (where known) the exact solution with
//! analytic derivatives for pre-solve consistency checks.

use crate::error::{Error, Result};
use crate::grid::MAX_DIM;
use crate::models::{ModelSpec, PointState};
use crate::operators::SymMat;

/// Analytic state (value, gradient, Hessian) of an exact solution at a point.
pub type ExactStateFn = fn(&[f64]) -> PointState;

pub struct CaseSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub dim: usize,
    pub lo: [f64; MAX_DIM],
    pub hi: [f64; MAX_DIM],
    pub default_n: usize,
    /// Target regularization of the experiments.
    pub default_eps: f64,
    /// The branch matching the case's known solution: negative for concave
    /// exact solutions (test9's hemisphere dome), positive otherwise.
    pub default_branch_negative: bool,
    /// Default Gauss curvature (Gauss variant only).
    pub gauss_k: Option<f64>,
    build: fn(f64) -> ModelSpec,
    build_parabolic: Option<fn() -> ModelSpec>,
    pub exact_state: Option<ExactStateFn>,
    /// Points too close to these axis hyperplanes are skipped when sampling
    /// the exact state (nonsmooth exact solutions).
    pub exact_singular_axes: bool,
}

impl CaseSpec {
    /// Instantiate the model; `k` overrides the Gauss curvature when given.
    pub fn model(&self, k: Option<f64>) -> ModelSpec {
        (self.build)(k.or(self.gauss_k).unwrap_or(0.0))
    }

    pub fn parabolic_model(&self) -> Option<ModelSpec> {
        self.build_parabolic.map(|f| f())
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim]
    }
}

fn s2(x: &[f64]) -> f64 {
    x[0] * x[0] + x[1] * x[1]
}

fn s3(x: &[f64]) -> f64 {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
}

// ---- test 2: u0 = exp((x²+y²)/2), f = det D²u0 = (1+s) e^s

fn test2_exact(x: &[f64]) -> f64 {
    (s2(x) / 2.0).exp()
}

fn test2_state(x: &[f64]) -> PointState {
    let e = test2_exact(x);
    let mut hess = SymMat::zero(2);
    for a in 0..2 {
        for b in a..2 {
            let kron = if a == b { 1.0 } else { 0.0 };
            hess.set(a, b, e * (kron + x[a] * x[b]));
        }
    }
    PointState {
        x: [x[0], x[1], 0.0],
        u: e,
        grad: [x[0] * e, x[1] * e, 0.0],
        hess,
        t: 0.0,
    }
}

// ---- test 3: u0 = (2√2/3) s^{3/4}, f = det D²u0 = s^{-1/2}

fn test3_coeff() -> f64 {
    2.0 * std::f64::consts::SQRT_2 / 3.0
}

fn test3_exact(x: &[f64]) -> f64 {
    test3_coeff() * s2(x).powf(0.75)
}

fn test3_state(x: &[f64]) -> PointState {
    let s = s2(x);
    let c = 1.5 * test3_coeff();
    let mut hess = SymMat::zero(2);
    for a in 0..2 {
        for b in a..2 {
            let kron = if a == b { 1.0 } else { 0.0 };
            hess.set(
                a,
                b,
                c * (kron * s.powf(-0.25) - 0.5 * x[a] * x[b] * s.powf(-1.25)),
            );
        }
    }
    PointState {
        x: [x[0], x[1], 0.0],
        u: test3_exact(x),
        grad: [c * x[0] * s.powf(-0.25), c * x[1] * s.powf(-0.25), 0.0],
        hess,
        t: 0.0,
    }
}

// ---- test 7: u0 = x^{4/3} - y^{4/3} (real cube roots), infinity-harmonic

fn test7_exact(x: &[f64]) -> f64 {
    x[0].cbrt().powi(4) - x[1].cbrt().powi(4)
}

fn test7_state(x: &[f64]) -> PointState {
    let mut hess = SymMat::zero(2);
    hess.set(0, 0, 4.0 / 9.0 * x[0].cbrt().powi(-2));
    hess.set(1, 1, -4.0 / 9.0 * x[1].cbrt().powi(-2));
    PointState {
        x: [x[0], x[1], 0.0],
        u: test7_exact(x),
        grad: [
            4.0 / 3.0 * x[0].cbrt(),
            -4.0 / 3.0 * x[1].cbrt(),
            0.0,
        ],
        hess,
        t: 0.0,
    }
}

// ---- test 9: u0 = sqrt(4 - x² - y²), f = 4 / (4 - s)²

fn test9_exact(x: &[f64]) -> f64 {
    (4.0 - s2(x)).sqrt()
}

fn test9_state(x: &[f64]) -> PointState {
    let u = test9_exact(x);
    let mut hess = SymMat::zero(2);
    for a in 0..2 {
        for b in a..2 {
            let kron = if a == b { 1.0 } else { 0.0 };
            hess.set(a, b, -kron / u - x[a] * x[b] / (u * u * u));
        }
    }
    PointState {
        x: [x[0], x[1], 0.0],
        u,
        grad: [-x[0] / u, -x[1] / u, 0.0],
        hess,
        t: 0.0,
    }
}

// ---- test 10: u0 = exp(s/2) in 3-D, f = det D²u0 = (1+s) e^{3s/2}

fn test10_exact(x: &[f64]) -> f64 {
    (s3(x) / 2.0).exp()
}

fn test10_state(x: &[f64]) -> PointState {
    let e = test10_exact(x);
    let mut hess = SymMat::zero(3);
    for a in 0..3 {
        for b in a..3 {
            let kron = if a == b { 1.0 } else { 0.0 };
            hess.set(a, b, e * (kron + x[a] * x[b]));
        }
    }
    PointState {
        x: [x[0], x[1], x[2]],
        u: e,
        grad: [x[0] * e, x[1] * e, x[2] * e],
        hess,
        t: 0.0,
    }
}

/// The eleven registered cases.
pub fn registry() -> Vec<CaseSpec> {
    vec![
        CaseSpec {
            name: "test1",
            description: "Monge-Ampere on the unit square, f = 1, g = 0 (no classical solution)",
            dim: 2,
            lo: [0.0; MAX_DIM],
            hi: [1.0, 1.0, 0.0],
            default_n: 33,
            default_eps: 1e-3,
            default_branch_negative: false,
            gauss_k: None,
            build: |_| ModelSpec::monge_ampere(|_| 1.0, |_| 0.0),
            build_parabolic: Some(|| ModelSpec::parabolic_monge_ampere(|_, _t| 1.0, |_| 0.0)),
            exact_state: None,
            exact_singular_axes: false,
        },
        CaseSpec {
            name: "test2",
            description: "Monge-Ampere with exact solution exp((x^2+y^2)/2)",
            dim: 2,
            lo: [0.0; MAX_DIM],
            hi: [1.0, 1.0, 0.0],
            default_n: 33,
            default_eps: 1e-3,
            default_branch_negative: false,
            gauss_k: None,
            build: |_| {
                ModelSpec::monge_ampere(|x| (1.0 + s2(x)) * s2(x).exp(), test2_exact)
                    .with_exact(test2_exact)
            },
            build_parabolic: Some(|| {
                ModelSpec::parabolic_monge_ampere(|x, _t| (1.0 + s2(x)) * s2(x).exp(), test2_exact)
                    .with_exact(test2_exact)
            }),
            exact_state: Some(test2_state),
            exact_singular_axes: false,
        },
        CaseSpec {
            name: "test3",
            description: "Monge-Ampere with the (x^2+y^2)^{3/4} cone-like exact solution and a corner-singular source",
            dim: 2,
            lo: [0.0; MAX_DIM],
            hi: [1.0, 1.0, 0.0],
            default_n: 33,
            default_eps: 1e-3,
            default_branch_negative: false,
            gauss_k: None,
            build: |_| {
                ModelSpec::monge_ampere(|x| 1.0 / s2(x).sqrt(), test3_exact).with_exact(test3_exact)
            },
            build_parabolic: None,
            exact_state: Some(test3_state),
            exact_singular_axes: false,
        },
        CaseSpec {
            name: "test4",
            description: "degenerate Monge-Ampere: f = (1-x-y)^2 vanishes on a line",
            dim: 2,
            lo: [0.0; MAX_DIM],
            hi: [1.0, 1.0, 0.0],
            default_n: 33,
            default_eps: 1e-3,
            default_branch_negative: false,
            gauss_k: None,
            build: |_| ModelSpec::monge_ampere(|x| (1.0 - x[0] - x[1]).powi(2), |_| 0.0),
            build_parabolic: None,
            exact_state: None,
            exact_singular_axes: false,
        },
        CaseSpec {
            name: "test5",
            description: "sign-changing Monge-Ampere: f = x^2 - y^2 (PDE changes type)",
            dim: 2,
            lo: [0.0; MAX_DIM],
            hi: [1.0, 1.0, 0.0],
            default_n: 33,
            default_eps: 1e-3,
            default_branch_negative: false,
            gauss_k: None,
            build: |_| ModelSpec::monge_ampere(|x| x[0] * x[0] - x[1] * x[1], |_| 0.0),
            build_parabolic: None,
            exact_state: None,
            exact_singular_axes: false,
        },
        CaseSpec {
            name: "test6",
            description: "Gauss curvature equation on (-0.57,0.57)^2, g = x^2+y^2-1, parameter K",
            dim: 2,
            lo: [-0.57, -0.57, 0.0],
            hi: [0.57, 0.57, 0.0],
            default_n: 33,
            default_eps: 1e-3,
            default_branch_negative: false,
            gauss_k: Some(1.0),
            build: |k| {
                ModelSpec::gauss_curvature(k, |x| x[0] * x[0] + x[1] * x[1] - 1.0)
                    .expect("registry Gauss data is valid")
            },
            build_parabolic: None,
            exact_state: None,
            exact_singular_axes: false,
        },
        CaseSpec {
            name: "test7",
            description: "infinity Laplacian on (-1/2,1/2)^2 with exact x^{4/3} - y^{4/3}",
            dim: 2,
            lo: [-0.5, -0.5, 0.0],
            hi: [0.5, 0.5, 0.0],
            default_n: 33,
            default_eps: 1e-3,
            default_branch_negative: false,
            gauss_k: None,
            build: |_| {
                ModelSpec::infinity_laplace(|_| 0.0, test7_exact).with_exact(test7_exact)
            },
            build_parabolic: None,
            exact_state: Some(test7_state),
            exact_singular_axes: true,
        },
        CaseSpec {
            name: "test8",
            description: "re-run of test1 (the paper varies the discretization, the continuous problem is identical)",
            dim: 2,
            lo: [0.0; MAX_DIM],
            hi: [1.0, 1.0, 0.0],
            default_n: 33,
            default_eps: 1e-3,
            default_branch_negative: false,
            gauss_k: None,
            build: |_| ModelSpec::monge_ampere(|_| 1.0, |_| 0.0),
            build_parabolic: Some(|| ModelSpec::parabolic_monge_ampere(|_, _t| 1.0, |_| 0.0)),
            exact_state: None,
            exact_singular_axes: false,
        },
        CaseSpec {
            name: "test9",
            description: "Monge-Ampere with exact concave solution sqrt(4 - x^2 - y^2) (the dome branch)",
            dim: 2,
            lo: [0.0; MAX_DIM],
            hi: [1.0, 1.0, 0.0],
            default_n: 33,
            default_eps: 1e-3,
            default_branch_negative: true,
            gauss_k: None,
            build: |_| {
                ModelSpec::monge_ampere(|x| 4.0 / (4.0 - s2(x)).powi(2), test9_exact)
                    .with_exact(test9_exact)
            },
            build_parabolic: Some(|| {
                ModelSpec::parabolic_monge_ampere(|x, _t| 4.0 / (4.0 - s2(x)).powi(2), test9_exact)
                    .with_exact(test9_exact)
            }),
            exact_state: Some(test9_state),
            exact_singular_axes: false,
        },
        CaseSpec {
            name: "test10",
            description: "3-D Monge-Ampere on the unit cube with exact exp((x^2+y^2+z^2)/2)",
            dim: 3,
            lo: [0.0; MAX_DIM],
            hi: [1.0, 1.0, 1.0],
            default_n: 17,
            default_eps: 1e-3,
            default_branch_negative: false,
            gauss_k: None,
            build: |_| {
                ModelSpec::monge_ampere(
                    |x| (1.0 + s3(x)) * (1.5 * s3(x)).exp(),
                    test10_exact,
                )
                .with_exact(test10_exact)
            },
            build_parabolic: None,
            exact_state: Some(test10_state),
            exact_singular_axes: false,
        },
        CaseSpec {
            name: "test11",
            description: "3-D Monge-Ampere on the unit cube, f = 1, g = 0",
            dim: 3,
            lo: [0.0; MAX_DIM],
            hi: [1.0, 1.0, 1.0],
            default_n: 17,
            default_eps: 1e-3,
            default_branch_negative: false,
            gauss_k: None,
            build: |_| ModelSpec::monge_ampere(|_| 1.0, |_| 0.0),
            build_parabolic: Some(|| ModelSpec::parabolic_monge_ampere(|_, _t| 1.0, |_| 0.0)),
            exact_state: None,
            exact_singular_axes: false,
        },
    ]
}

pub fn lookup(name: &str) -> Result<CaseSpec> {
    registry()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::Config(format!("unknown case '{name}' (see `list`)")))
}

/// SplitMix64; deterministic sample points for consistency checks.
pub(crate) fn splitmix_next(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z = z ^ (z >> 31);
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Verify `residual_point` on the analytic state of the exact solution at
/// `count` seeded interior points; guards against transcription bugs in the
/// case data before any solve.
pub fn check_exact_consistency(case: &CaseSpec, count: usize) -> Result<()> {
    let Some(state_fn) = case.exact_state else {
        return Ok(());
    };
    let model = case.model(None);
    let mut rng_state: u64 = 0x5EED_0000 ^ case.name.len() as u64;
    let mut checked = 0;
    let mut attempts = 0;
    while checked < count {
        attempts += 1;
        if attempts > 100 * count {
            return Err(Error::Config(format!(
                "could not sample {count} admissible interior points for {}",
                case.name
            )));
        }
        let mut x = [0.0f64; MAX_DIM];
        for a in 0..case.dim {
            let r = splitmix_next(&mut rng_state);
            x[a] = case.lo[a] + (0.05 + 0.9 * r) * (case.hi[a] - case.lo[a]);
        }
        if case.exact_singular_axes && (0..case.dim).any(|a| x[a].abs() < 0.05) {
            continue;
        }
        let s = state_fn(&x[..case.dim]);
        let r = crate::models::residual_point(&model, &s);
        if r.abs() > 1e-10 {
            return Err(Error::Config(format!(
                "exact-solution consistency failed for {} at {:?}: residual {r:.3e}",
                case.name,
                &x[..case.dim]
            )));
        }
        checked += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_eleven_cases() {
        let r = registry();
        assert_eq!(r.len(), 11);
        assert!(lookup("test1").is_ok());
        assert!(lookup("nope").is_err());
    }

    #[test]
    fn test1_entry_shape() {
        let c = lookup("test1").unwrap();
        assert_eq!(c.dim, 2);
        assert_eq!(c.lo(), &[0.0, 0.0]);
        assert_eq!(c.hi(), &[1.0, 1.0]);
        assert!(c.exact_state.is_none());
        assert_eq!(c.default_eps, 1e-3);
    }

    #[test]
    fn test6_entry_shape() {
        let c = lookup("test6").unwrap();
        assert_eq!(c.lo(), &[-0.57, -0.57]);
        assert_eq!(c.hi(), &[0.57, 0.57]);
        assert_eq!(c.gauss_k, Some(1.0));
        let m = c.model(Some(2.0));
        assert_eq!(m.gauss_k(), 2.0);
        // boundary datum g = x^2 + y^2 - 1
        assert!((m.boundary_value(&[0.57, 0.57]) - (2.0 * 0.57 * 0.57 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn test10_entry_is_3d_with_exact() {
        let c = lookup("test10").unwrap();
        assert_eq!(c.dim, 3);
        let m = c.model(None);
        assert!(m.exact().is_some());
        let e = m.exact().unwrap();
        assert!((e(&[0.0, 0.0, 0.0], 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_exact_cases_pass_consistency() {
        for case in registry() {
            check_exact_consistency(&case, 20)
                .unwrap_or_else(|e| panic!("{}: {e}", case.name));
        }
    }
}
