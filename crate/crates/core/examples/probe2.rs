//! criterion 10 long-time march + criterion 2 timing probe

use moment_core::assembly::{BoundaryConditions, DiscreteSystem};
use moment_core::grid::{classify_nodes, Grid};
use moment_core::harness::lookup;
use moment_core::linalg::KrylovOptions;
use moment_core::solver::*;
use std::time::Instant;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let o = NewtonOptions {
        krylov: KrylovOptions { tol: 1e-10, restart: 200, max_iters: 20000 },
        ..Default::default()
    };
    // criterion 10: test2-data parabolic long-time run approaches the elliptic solution
    {
        let t = Instant::now();
        let case = lookup("test2").unwrap();
        let g = Grid::new(case.lo(), case.hi(), &vec![17; 2]).unwrap();
        let model = case.model(None);
        let eps = 1e-3;
        // elliptic target
        let sched = EpsilonSchedule::new(vec![1e-2, 1e-3]).unwrap();
        let cont = continuation_solve(&model, &g, &sched, None, &o).unwrap();
        let target = cont.final_field().unwrap().clone();
        // parabolic from the Poisson ansatz
        let pmodel = case.parabolic_model().unwrap();
        let sets = classify_nodes(&g);
        let bcs = BoundaryConditions::from_model(&g, &sets, &model, eps).unwrap();
        let sys = DiscreteSystem::new(&g, model.clone(), eps, bcs).unwrap();
        let u0 = initial_guess(&sys).unwrap();
        let init = sys.full_field(&u0).unwrap();
        let ts = TimeStepOptions {
            scheme: Scheme::BackwardEuler,
            dt: 0.05,
            t_end: 2.0,
            newton: o.clone(),
            sample_stride: 5,
            aux_value: None,
        };
        let traj = evolve_parabolic(&pmodel, &g, &init, eps, &ts).unwrap();
        println!("test2 parabolic: failed={:?} samples={} ({:.1}s)", traj.failed_step, traj.samples.len(), t.elapsed().as_secs_f64());
        for s in &traj.samples {
            let d = s.field.values().iter().zip(target.values()).fold(0.0f64, |m,(a,b)| m.max((a-b).abs()));
            println!("  t={:.2}: ||u - u_ell|| = {d:.4e}", s.t);
        }
    }
    // criterion 2 timing: 3-D 9³ jacobian FD oracle across variants
    {
        use moment_core::models::ModelSpec;
        let t = Instant::now();
        let g = Grid::new(&[0.0;3], &[1.0;3], &[9,9,9]).unwrap();
        let models: Vec<(&str, ModelSpec)> = vec![
            ("ma", ModelSpec::monge_ampere(|_| 1.0, |_| 0.0)),
            ("gauss", ModelSpec::gauss_curvature(0.7, |_| 0.0).unwrap()),
            ("pucci-max", ModelSpec::pucci_max(0.2, |_| 0.0, |_| 0.0).unwrap()),
            ("inf", ModelSpec::infinity_laplace(|_| 0.0, |_| 0.0)),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for (name, m) in models {
            let sets = classify_nodes(&g);
            let bcs = BoundaryConditions::from_model(&g, &sets, &m, 1e-3).unwrap();
            let sys = DiscreteSystem::new(&g, m, 1e-3, bcs).unwrap();
            let mut worst_rel = 0.0f64;
            for _ in 0..20 {
                let u: Vec<f64> = (0..sys.unknown_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let d: Vec<f64> = (0..sys.unknown_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let (jac, _) = sys.jacobian(&u).unwrap();
                let jd = jac.matvec(&d);
                let tstep = 1e-6;
                let up: Vec<f64> = u.iter().zip(&d).map(|(a,b)| a + tstep*b).collect();
                let dn: Vec<f64> = u.iter().zip(&d).map(|(a,b)| a - tstep*b).collect();
                let rup = sys.residual(&up).unwrap();
                let rdn = sys.residual(&dn).unwrap();
                let mut diff = 0.0f64; let mut scale = 0.0f64;
                for i in 0..jd.len() {
                    let fd = (rup[i]-rdn[i])/(2.0*tstep);
                    diff = diff.max((jd[i]-fd).abs());
                    scale = scale.max(fd.abs());
                }
                worst_rel = worst_rel.max(diff/scale.max(1.0));
            }
            println!("9³ {name}: worst rel = {worst_rel:.3e}");
        }
        println!("criterion-2 3-D block ({:.1}s)", t.elapsed().as_secs_f64());
    }
}
