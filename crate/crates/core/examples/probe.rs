//! One-off measurement probe used to pin the acceptance regression values.

use std::time::Instant;

use moment_core::assembly::{BoundaryConditions, DiscreteSystem};
use moment_core::diagnostics::error_norms;
use moment_core::grid::{classify_nodes, sample_function, Grid};
use moment_core::harness::lookup;
use moment_core::models::ModelSpec;
use moment_core::solver::{
    continuation_solve, gauss_curvature_sweep, initial_guess, newton_solve, EpsilonSchedule,
    NewtonOptions,
};

fn main() {
    let t_all = Instant::now();

    // 1. truncation constant (criterion: residual of exact samples, eps=0)
    {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[33, 33]).unwrap();
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
        println!("truncation test2 33²: maxres={maxres:.6e} C=maxres/h²={:.4}", maxres / h2);
    }

    // 2-4. continuation error pins
    for name in ["test2", "test9", "test7"] {
        let t = Instant::now();
        let case = lookup(name).unwrap();
        let g = Grid::new(case.lo(), case.hi(), &vec![33; 2]).unwrap();
        let model = case.model(None);
        let schedule = EpsilonSchedule::new(vec![1e-1, 1e-2, 1e-3]).unwrap();
        let cont = continuation_solve(&model, &g, &schedule, None, &NewtonOptions::default()).unwrap();
        let exact = model.exact().cloned().unwrap();
        print!("{name} 33²: converged={} errors=[", cont.converged());
        for s in &cont.stages {
            let e = error_norms(&s.field, &|x: &[f64]| exact(x, 0.0)).unwrap();
            print!("{:.6e}, ", e.linf);
        }
        let iters: Vec<usize> = cont.stages.iter().map(|s| s.report.iterations).collect();
        println!("] iters={iters:?} ({:.2}s)", t.elapsed().as_secs_f64());
    }

    // test10 3-D
    {
        let t = Instant::now();
        let case = lookup("test10").unwrap();
        let g = Grid::new(case.lo(), case.hi(), &vec![17; 3]).unwrap();
        let model = case.model(None);
        let schedule = EpsilonSchedule::new(vec![1e-2, 1e-3]).unwrap();
        let cont = continuation_solve(&model, &g, &schedule, None, &NewtonOptions::default()).unwrap();
        let exact = model.exact().cloned().unwrap();
        print!("test10 17³: converged={} errors=[", cont.converged());
        for s in &cont.stages {
            let e = error_norms(&s.field, &|x: &[f64]| exact(x, 0.0)).unwrap();
            print!("{:.6e}, ", e.linf);
        }
        let iters: Vec<usize> = cont.stages.iter().map(|s| s.report.iterations).collect();
        println!("] iters={iters:?} ({:.2}s)", t.elapsed().as_secs_f64());
    }

    // test1 65² convexity + cross-sections
    {
        let t = Instant::now();
        let case = lookup("test1").unwrap();
        let g = Grid::new(case.lo(), case.hi(), &vec![65; 2]).unwrap();
        let model = case.model(None);
        let schedule = EpsilonSchedule::new(vec![1e-1, 1e-2, 1e-3]).unwrap();
        let cont = continuation_solve(&model, &g, &schedule, None, &NewtonOptions::default()).unwrap();
        let field = cont.final_field().unwrap();
        let conv = moment_core::diagnostics::convexity_report(field, 2).unwrap();
        let center = field.at([32, 32, 0]);
        println!(
            "test1 65²: converged={} min_l1={:.3e} min_lap={:.3e} center={:.6} ({:.2}s)",
            cont.converged(),
            conv.min_lambda1,
            conv.min_laplacian,
            center,
            t.elapsed().as_secs_f64()
        );
        for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let sec = moment_core::diagnostics::cross_section(field, 0, frac).unwrap();
            let vals: Vec<f64> = sec.iter().map(|(_, v)| *v).collect();
            let mins = count_interior_minima(&vals);
            println!("  x={frac}: interior minima={mins} endpoints=({:.2e},{:.2e})", vals[0], vals[vals.len()-1]);
        }
    }

    // branch symmetry
    for name in ["test1", "test5"] {
        let t = Instant::now();
        let case = lookup(name).unwrap();
        let g = Grid::new(case.lo(), case.hi(), &vec![33; 2]).unwrap();
        let model = case.model(None);
        let sp = EpsilonSchedule::new(vec![1e-3]).unwrap();
        let cp = continuation_solve(&model, &g, &sp, Some(0.0), &NewtonOptions::default()).unwrap();
        let cm = continuation_solve(&model, &g, &sp.negated(), Some(0.0), &NewtonOptions::default()).unwrap();
        let up = cp.final_field().unwrap();
        let um = cm.final_field().unwrap();
        let mismatch = up
            .values()
            .iter()
            .zip(um.values())
            .fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
        println!(
            "branch symmetry {name}: conv=({},{}) ||u+ + u-||={mismatch:.3e} ({:.2}s)",
            cp.converged(),
            cm.converged(),
            t.elapsed().as_secs_f64()
        );
    }

    // Gauss sweep
    {
        let t = Instant::now();
        let case = lookup("test6").unwrap();
        let g = Grid::new(case.lo(), case.hi(), &vec![33; 2]).unwrap();
        let model = case.model(None);
        let ks = [0.1, 1.0, 2.0, 2.1, 2.2, 2.3, 2.4];
        let sweep = gauss_curvature_sweep(&model, &g, &ks, 1e-3, &NewtonOptions::default()).unwrap();
        for s in &sweep {
            println!("  K={}: converged={} iters={}", s.k, s.converged, s.report.iterations);
        }
        println!("gauss sweep done ({:.2}s)", t.elapsed().as_secs_f64());
    }

    // criterion 3: 9² biharmonic ILU+GMRES vs dense, and precondition benefit
    {
        use moment_core::linalg::{gmres_solve, ilu0_factor, KrylovOptions};
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[9, 9]).unwrap();
        let sets = classify_nodes(&g);
        let b = moment_core::assembly::biharmonic_matrix(&g, &sets).unwrap();
        let n = b.n();
        let rhs: Vec<f64> = (0..n).map(|i| ((i * 7919 + 13) % 101) as f64 / 101.0 - 0.5).collect();
        let pre = ilu0_factor(&b).unwrap();
        let with = gmres_solve(&b, &rhs, Some(&pre), &KrylovOptions::default()).unwrap();
        let without = gmres_solve(&b, &rhs, None, &KrylovOptions::default()).unwrap();
        println!(
            "9² biharmonic: gmres iters with ILU={} without={} (factor {:.1})",
            with.iterations,
            without.iterations,
            without.iterations as f64 / with.iterations as f64
        );
    }

    // warm vs cold comparisons (tests 1, 2, 9 at 33²)
    for name in ["test1", "test2", "test9"] {
        let case = lookup(name).unwrap();
        let g = Grid::new(case.lo(), case.hi(), &vec![33; 2]).unwrap();
        let model = case.model(None);
        let schedule = EpsilonSchedule::new(vec![1e-1, 1e-2, 1e-3]).unwrap();
        let warm = continuation_solve(&model, &g, &schedule, None, &NewtonOptions::default()).unwrap();
        let warm_last = warm.stages.last().unwrap().report.iterations;
        // cold: direct solve at 1e-3 from the Poisson guess
        let sets = classify_nodes(&g);
        let bcs = BoundaryConditions::from_model(&g, &sets, &model, 1e-3).unwrap();
        let sys = DiscreteSystem::new(&g, model.clone(), 1e-3, bcs).unwrap();
        let u0 = initial_guess(&sys).unwrap();
        let (_, cold) = newton_solve(&sys, &u0, &NewtonOptions::default()).unwrap();
        println!(
            "{name}: warm last-stage iters={warm_last} cold iters={} (cold converged={})",
            cold.iterations, cold.converged
        );
    }

    println!("total {:.2}s", t_all.elapsed().as_secs_f64());
}

fn count_interior_minima(vals: &[f64]) -> usize {
    // count strict sign changes of the forward difference from - to +
    let mut count = 0;
    let mut prev_dir = 0i8;
    for w in vals.windows(2) {
        let d = w[1] - w[0];
        let dir = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        };
        if prev_dir < 0 && dir > 0 {
            count += 1;
        }
        if dir != 0 {
            prev_dir = dir;
        }
    }
    count
}
