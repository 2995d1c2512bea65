//! Case execution: resolve a [`RunConfig`] against the registry, run the
//! continuation (or the parabolic stepper, or a Gauss K sweep), emit field
//! dumps, cross-sections, diagnostics, and the manifest.
//!
//! All validation happens before any output file is created, so a malformed
//! config leaves no partial artifacts. Wall times go to a separate
//! `.timings` file; the manifest itself is byte-reproducible.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::diagnostics::{
    boundary_layer_offset, convexity_report, cross_section, error_norms, stage_differences,
};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::harness::config::RunConfig;
use crate::harness::dump::{format_cross_section, parse_field_dump, write_field_dump, RunManifest};
use crate::harness::registry::{check_exact_consistency, lookup, CaseSpec};
use crate::models::{ModelSpec, Variant};
use crate::solver::{
    continuation_solve, evolve_parabolic, gauss_curvature_sweep, initial_guess,
    ContinuationResult, EpsilonSchedule, NewtonOptions, Scheme, TimeStepOptions,
};
use crate::assembly::{BoundaryConditions, DiscreteSystem};
use crate::grid::classify_nodes;

/// Section fractions matching the figures: positions `lo + frac (hi - lo)`.
pub const SECTION_FRACTIONS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    Partial,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub out_dir: PathBuf,
}

struct ResolvedRun {
    case: CaseSpec,
    grid: Grid,
    model: ModelSpec,
    schedule: EpsilonSchedule,
    opts: NewtonOptions,
    out_dir: PathBuf,
}

fn resolve(config: &RunConfig) -> Result<ResolvedRun> {
    let case = lookup(&config.problem)?;
    let n: Vec<usize> = match &config.n {
        None => vec![case.default_n; case.dim],
        Some(v) if v.len() == 1 => vec![v[0]; case.dim],
        Some(v) if v.len() == case.dim => v.clone(),
        Some(v) => {
            return Err(Error::Config(format!(
                "n has {} entries for a {}-d case",
                v.len(),
                case.dim
            )))
        }
    };
    let grid = Grid::new(case.lo(), case.hi(), &n)?;
    let schedule = EpsilonSchedule::new(config.eps_schedule.clone().unwrap_or_else(|| {
        let sign = if case.default_branch_negative { -1.0 } else { 1.0 };
        vec![sign * 1e-1, sign * 1e-2, sign * case.default_eps]
    }))?;
    let model = case.model(config.gauss_k);
    if model.variant() == Variant::GaussCurvature && schedule.values()[0] < 0.0 {
        return Err(Error::Config(
            "Gauss curvature runs are restricted to the convex branch (eps > 0)".into(),
        ));
    }
    check_exact_consistency(&case, 20)?;
    let mut opts = NewtonOptions::default();
    if let Some(v) = config.abs_tol {
        opts.abs_tol = v;
    }
    if let Some(v) = config.rel_tol {
        opts.rel_tol = v;
    }
    if let Some(v) = config.max_iters {
        opts.max_iters = v;
    }
    if let Some(v) = config.warmup {
        opts.warmup_fixed_point_iters = v;
    }
    opts.validate()?;
    let out_dir = config
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(case.name));
    Ok(ResolvedRun {
        case,
        grid,
        model,
        schedule,
        opts,
        out_dir,
    })
}

fn axis_name(a: usize) -> &'static str {
    ["x", "y", "z"][a]
}

fn push_config_echo(m: &mut RunManifest, r: &ResolvedRun, config: &RunConfig) {
    m.push("format_version", 1);
    m.push("case", r.case.name);
    m.push("dim", r.grid.dim());
    m.push(
        "n",
        (0..r.grid.dim())
            .map(|a| r.grid.num_nodes_axis(a).to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    m.push(
        "bounds",
        (0..r.grid.dim())
            .map(|a| format!("{} {}", r.grid.lo()[a], r.grid.hi()[a]))
            .collect::<Vec<_>>()
            .join(" "),
    );
    m.push(
        "eps_schedule",
        r.schedule
            .values()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    m.push(
        "branch",
        if r.schedule.values()[0] > 0.0 {
            "convex"
        } else {
            "concave"
        },
    );
    match config.aux_value {
        Some(v) => m.push("aux_value", v),
        None => m.push("aux_value", "per-stage eps^2"),
    }
    m.push("abs_tol", r.opts.abs_tol);
    m.push("rel_tol", r.opts.rel_tol);
    m.push("max_iters", r.opts.max_iters);
    m.push("warmup", r.opts.warmup_fixed_point_iters);
    if let Some(k) = config.gauss_k {
        m.push("gauss_k", k);
    }
}

fn push_stage_reports(
    m: &mut RunManifest,
    cont: &ContinuationResult,
    exact: Option<&dyn Fn(&[f64]) -> f64>,
) -> Result<()> {
    for (k, stage) in cont.stages.iter().enumerate() {
        let p = format!("stage{k}");
        m.push(format!("{p}_eps"), stage.eps);
        m.push(format!("{p}_aux_value"), stage.aux_value);
        m.push(format!("{p}_converged"), stage.report.converged);
        m.push(format!("{p}_iterations"), stage.report.iterations);
        m.push(
            format!("{p}_final_residual"),
            stage.report.residual_history.last().copied().unwrap_or(f64::NAN),
        );
        m.push(
            format!("{p}_linear_iters"),
            stage
                .report
                .linear_stats
                .iter()
                .map(|s| s.iterations)
                .sum::<usize>(),
        );
        m.push(format!("{p}_damping_events"), stage.report.damping_events.len());
        m.push(format!("{p}_nonsmooth_flags"), stage.report.nonsmooth_flags);
        if let Some(f) = exact {
            let e = error_norms(&stage.field, f)?;
            m.push(format!("{p}_linf_error"), e.linf);
            m.push(format!("{p}_l2_error"), e.l2_discrete);
            m.push(format!("{p}_h1_error"), e.h1_discrete);
            m.push(format!("{p}_h2_error"), e.h2_discrete);
        }
    }
    if cont.stages.len() >= 2 {
        let study = stage_differences(&cont.stages, None)?;
        for (k, d) in study.consecutive.iter().enumerate() {
            m.push(format!("diff{k}{}_linf", k + 1), d.linf);
        }
    }
    Ok(())
}

fn emit_field(
    dir: &Path,
    name: &str,
    field: &ScalarField,
    manifest: &mut RunManifest,
) -> Result<()> {
    let file = format!("{name}.field");
    write_field_dump(field, &dir.join(&file))?;
    manifest.push_file(file);
    Ok(())
}

fn emit_sections(
    dir: &Path,
    name: &str,
    field: &ScalarField,
    manifest: &mut RunManifest,
) -> Result<()> {
    let g = field.grid();
    for a in 0..g.dim() {
        for frac in SECTION_FRACTIONS {
            let coord = g.lo()[a] + frac * (g.hi()[a] - g.lo()[a]);
            let section = cross_section(field, a, coord)?;
            let file = format!("{name}_{}{frac}.csv", axis_name(a));
            std::fs::write(dir.join(&file), format_cross_section(&section))
                .map_err(|e| Error::io(file.clone(), e))?;
            manifest.push_file(file);
        }
    }
    Ok(())
}

fn verify_artifacts(dir: &Path, manifest: &RunManifest) -> Result<()> {
    for f in manifest.files() {
        let path = dir.join(f);
        if !path.exists() {
            return Err(Error::Config(format!("manifest lists missing file {f}")));
        }
        if f.ends_with(".field") {
            parse_field_dump(&path)?;
        }
    }
    Ok(())
}

/// Execute a configured run. Returns `Partial` when a continuation stage, a
/// sweep K, or a time step failed to converge; errors abort before any
/// output exists.
pub fn run_case(config: &RunConfig) -> Result<RunOutcome> {
    let r = resolve(config)?;
    if config.is_parabolic() {
        return run_parabolic(config, r);
    }
    if config.k_sweep.is_some() {
        return run_k_sweep(config, r);
    }
    let t0 = Instant::now();
    let cont = continuation_solve(&r.model, &r.grid, &r.schedule, config.aux_value, &r.opts)?;
    let solve_seconds = t0.elapsed().as_secs_f64();

    let mut manifest = RunManifest::default();
    push_config_echo(&mut manifest, &r, config);
    manifest.push("mode", "elliptic");
    let exact_fn = r.model.exact().cloned();
    let exact_closure = exact_fn.map(|f| move |x: &[f64]| f(x, 0.0));
    push_stage_reports(
        &mut manifest,
        &cont,
        exact_closure.as_ref().map(|f| f as &dyn Fn(&[f64]) -> f64),
    )?;
    if let Some(field) = cont.final_field() {
        let margin = 2.min((r.grid.num_nodes_axis(0) - 3) / 2).max(1);
        let conv = convexity_report(field, margin)?;
        manifest.push("convexity_set", &conv.node_set);
        manifest.push("convexity_min_lambda1", conv.min_lambda1);
        manifest.push("convexity_min_det", conv.min_det);
        manifest.push("convexity_min_laplacian", conv.min_laplacian);
        match boundary_layer_offset(field, r.grid.num_nodes_axis(0) / 2) {
            Some(k) => manifest.push("boundary_layer_offset", k),
            None => manifest.push("boundary_layer_offset", "none"),
        }
    }
    let status = if cont.converged() {
        RunStatus::Converged
    } else {
        manifest.push("failed_stage", cont.failed_stage.unwrap());
        RunStatus::Partial
    };
    manifest.push(
        "status",
        match status {
            RunStatus::Converged => "converged",
            RunStatus::Partial => "partial",
        },
    );

    std::fs::create_dir_all(&r.out_dir).map_err(|e| Error::io(r.out_dir.display().to_string(), e))?;
    if let Some(field) = cont.final_field() {
        if config.emit_fields {
            emit_field(&r.out_dir, r.case.name, field, &mut manifest)?;
        }
        if config.emit_cross_sections {
            emit_sections(&r.out_dir, r.case.name, field, &mut manifest)?;
        }
    }
    finish(r, manifest, status, solve_seconds)
}

fn run_k_sweep(config: &RunConfig, r: ResolvedRun) -> Result<RunOutcome> {
    let ks = config.k_sweep.clone().unwrap();
    if r.model.variant() != Variant::GaussCurvature {
        return Err(Error::Config("k_sweep only applies to the Gauss curvature case".into()));
    }
    let eps = *r.schedule.values().last().unwrap();
    let t0 = Instant::now();
    let sweep = gauss_curvature_sweep(&r.model, &r.grid, &ks, eps, &r.opts)?;
    let solve_seconds = t0.elapsed().as_secs_f64();

    let mut manifest = RunManifest::default();
    push_config_echo(&mut manifest, &r, config);
    manifest.push("mode", "k-sweep");
    manifest.push("sweep_eps", eps);
    let mut failed_at: Option<f64> = None;
    for (i, s) in sweep.iter().enumerate() {
        manifest.push(format!("sweep{i}_k"), s.k);
        manifest.push(format!("sweep{i}_converged"), s.converged);
        manifest.push(format!("sweep{i}_iterations"), s.report.iterations);
        if !s.converged {
            failed_at = Some(s.k);
        }
    }
    match failed_at {
        Some(k) => manifest.push("sweep_failed_at_k", k),
        None => manifest.push("sweep_failed_at_k", "none"),
    }
    let status = if failed_at.is_none() {
        RunStatus::Converged
    } else {
        RunStatus::Partial
    };
    manifest.push(
        "status",
        match status {
            RunStatus::Converged => "converged",
            RunStatus::Partial => "partial",
        },
    );
    std::fs::create_dir_all(&r.out_dir).map_err(|e| Error::io(r.out_dir.display().to_string(), e))?;
    if let Some(last) = sweep.iter().rev().find_map(|s| s.field.as_ref()) {
        if config.emit_fields {
            emit_field(&r.out_dir, r.case.name, last, &mut manifest)?;
        }
    }
    finish(r, manifest, status, solve_seconds)
}

fn run_parabolic(config: &RunConfig, r: ResolvedRun) -> Result<RunOutcome> {
    let model = r.case.parabolic_model().ok_or_else(|| {
        Error::Config(format!("case {} has no parabolic form", r.case.name))
    })?;
    let tsopts = TimeStepOptions {
        scheme: config.scheme.unwrap_or(Scheme::BackwardEuler),
        dt: config
            .dt
            .ok_or_else(|| Error::Config("parabolic run needs dt".into()))?,
        t_end: config
            .t_end
            .ok_or_else(|| Error::Config("parabolic run needs t_end".into()))?,
        newton: r.opts.clone(),
        sample_stride: config.sample_stride.unwrap_or(1),
        aux_value: config.aux_value,
    };
    tsopts.validate()?;
    let eps = *r.schedule.values().last().unwrap();
    // initial data: the elliptic Poisson-ansatz guess (matches g on the boundary)
    let sets = classify_nodes(&r.grid);
    let bcs = BoundaryConditions::from_model(&r.grid, &sets, &r.model, eps)?;
    let sys = DiscreteSystem::new(&r.grid, r.model.clone(), eps, bcs)?;
    let u0 = initial_guess(&sys)?;
    let init = sys.full_field(&u0)?;

    let t0 = Instant::now();
    let traj = evolve_parabolic(&model, &r.grid, &init, eps, &tsopts)?;
    let solve_seconds = t0.elapsed().as_secs_f64();

    let mut manifest = RunManifest::default();
    push_config_echo(&mut manifest, &r, config);
    manifest.push("mode", "parabolic");
    manifest.push(
        "scheme",
        match tsopts.scheme {
            Scheme::BackwardEuler => "backward_euler",
            Scheme::CrankNicolson => "crank_nicolson",
        },
    );
    manifest.push("dt", tsopts.dt);
    manifest.push("t_end", tsopts.t_end);
    manifest.push("eps", eps);
    manifest.push("samples", traj.samples.len());
    match traj.failed_step {
        Some(s) => manifest.push("failed_step", s),
        None => manifest.push("failed_step", "none"),
    }
    let status = if traj.failed_step.is_none() {
        RunStatus::Converged
    } else {
        RunStatus::Partial
    };
    manifest.push(
        "status",
        match status {
            RunStatus::Converged => "converged",
            RunStatus::Partial => "partial",
        },
    );
    std::fs::create_dir_all(&r.out_dir).map_err(|e| Error::io(r.out_dir.display().to_string(), e))?;
    if let Some(last) = traj.samples.last() {
        manifest.push("final_time", last.t);
        if config.emit_fields {
            emit_field(&r.out_dir, r.case.name, &last.field, &mut manifest)?;
        }
    }
    finish(r, manifest, status, solve_seconds)
}

fn finish(
    r: ResolvedRun,
    manifest: RunManifest,
    status: RunStatus,
    solve_seconds: f64,
) -> Result<RunOutcome> {
    verify_artifacts(&r.out_dir, &manifest)?;
    let manifest_path = r.out_dir.join(format!("{}.manifest", r.case.name));
    manifest.write(&manifest_path)?;
    let timings = format!(
        "solve_seconds = {solve_seconds}\ntimestamp_unix = {}\n",
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    );
    let timings_path = r.out_dir.join(format!("{}.timings", r.case.name));
    std::fs::write(&timings_path, timings)
        .map_err(|e| Error::io(timings_path.display().to_string(), e))?;
    Ok(RunOutcome {
        status,
        manifest,
        manifest_path,
        out_dir: r.out_dir,
    })
}

/// Desk-scale acceptance checks for one registered case. Returns one line
/// per check plus an overall flag.
pub fn verify_case(name: &str) -> Result<(bool, Vec<String>)> {
    let case = lookup(name)?;
    let mut lines = Vec::new();
    let mut ok = true;
    let check = |lines: &mut Vec<String>, ok: &mut bool, what: &str, pass: bool| {
        lines.push(format!("{} {name}: {what}", if pass { "PASS" } else { "FAIL" }));
        *ok &= pass;
    };

    match check_exact_consistency(&case, 20) {
        Ok(()) => {
            if case.exact_state.is_some() {
                check(&mut lines, &mut ok, "exact-solution consistency at 20 seeded points", true);
            }
        }
        Err(e) => {
            check(&mut lines, &mut ok, &format!("exact-solution consistency ({e})"), false);
        }
    }

    let grid = Grid::new(case.lo(), case.hi(), &vec![case.default_n; case.dim])?;
    let model = case.model(None);
    let sign = if case.default_branch_negative { -1.0 } else { 1.0 };
    let schedule = EpsilonSchedule::new(vec![sign * 1e-1, sign * 1e-2, sign * case.default_eps])?;
    let opts = NewtonOptions::default();
    let cont = continuation_solve(&model, &grid, &schedule, None, &opts)?;
    check(
        &mut lines,
        &mut ok,
        "all continuation stages converged (residual <= 1e-8)",
        cont.converged(),
    );

    if let Some(exact) = model.exact().cloned() {
        if cont.converged() {
            let errs: Vec<f64> = cont
                .stages
                .iter()
                .map(|s| error_norms(&s.field, &|x: &[f64]| exact(x, 0.0)).map(|e| e.linf))
                .collect::<Result<_>>()?;
            let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
            check(
                &mut lines,
                &mut ok,
                &format!("linf error decreases across eps stages ({errs:?})"),
                decreasing,
            );
        }
    }

    if matches!(name, "test1" | "test8" | "test11") {
        if let Some(field) = cont.final_field() {
            let conv = convexity_report(field, 2)?;
            check(
                &mut lines,
                &mut ok,
                &format!(
                    "discrete convexity on deep_interior(2): min lambda1 = {:.3e}, min laplacian = {:.3e}",
                    conv.min_lambda1, conv.min_laplacian
                ),
                conv.min_lambda1 >= -1e-6 && conv.min_laplacian > 0.0,
            );
            let mut center = [0usize; crate::grid::MAX_DIM];
            for a in 0..grid.dim() {
                center[a] = grid.num_nodes_axis(a) / 2;
            }
            check(&mut lines, &mut ok, "center value negative", field.at(center) < 0.0);
        }
    }
    Ok((ok, lines))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_config_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let mut cfg = RunConfig::new("test1");
        cfg.n = Some(vec![3]);
        cfg.out_dir = Some(out.clone());
        assert!(run_case(&cfg).is_err());
        assert!(!out.exists(), "no partial files on validation failure");
    }

    #[test]
    fn unknown_problem_is_a_config_error() {
        let cfg = RunConfig::new("test99");
        match run_case(&cfg) {
            Err(Error::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn gauss_rejects_concave_branch() {
        let mut cfg = RunConfig::new("test6");
        cfg.eps_schedule = Some(vec![-1e-2, -1e-3]);
        assert!(run_case(&cfg).is_err());
    }

    #[test]
    fn run_case_test1_small_grid() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new("test1");
        cfg.n = Some(vec![17]);
        cfg.eps_schedule = Some(vec![1e-2, 1e-3]);
        cfg.out_dir = Some(dir.path().join("t1"));
        let out = run_case(&cfg).unwrap();
        assert_eq!(out.status, RunStatus::Converged);
        assert!(out.manifest_path.exists());
        // field dump + 10 cross-section files
        assert_eq!(out.manifest.files().len(), 11);
        for f in out.manifest.files() {
            assert!(out.out_dir.join(f).exists());
        }
        assert_eq!(out.manifest.get("branch"), Some("convex"));
        assert_eq!(out.manifest.get("status"), Some("converged"));
    }

    #[test]
    fn negated_schedule_flags_concave_branch() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new("test1");
        cfg.n = Some(vec![9]);
        cfg.eps_schedule = Some(vec![-1e-2]);
        cfg.out_dir = Some(dir.path().join("t1neg"));
        cfg.emit_cross_sections = false;
        let out = run_case(&cfg).unwrap();
        assert_eq!(out.manifest.get("branch"), Some("concave"));
    }
}
