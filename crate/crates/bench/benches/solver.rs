use criterion::{criterion_group, criterion_main, Criterion};
use moment_bench::test1_system;
use moment_core::linalg::{gmres_solve, ilu0_factor, KrylovOptions};
use moment_core::solver::{initial_guess, newton_solve, NewtonOptions};

fn bench_residual(c: &mut Criterion) {
    let sys = test1_system(33, 1e-3);
    let u = initial_guess(&sys).expect("initial guess");
    c.bench_function("residual 33x33", |b| {
        b.iter(|| sys.residual(std::hint::black_box(&u)).unwrap())
    });
}

fn bench_jacobian(c: &mut Criterion) {
    let sys = test1_system(33, 1e-3);
    let u = initial_guess(&sys).expect("initial guess");
    c.bench_function("jacobian 33x33", |b| {
        b.iter(|| sys.jacobian(std::hint::black_box(&u)).unwrap())
    });
}

fn bench_linear_solve(c: &mut Criterion) {
    let sys = test1_system(33, 1e-3);
    let u = initial_guess(&sys).expect("initial guess");
    let (jac, _) = sys.jacobian(&u).expect("jacobian");
    let r = sys.residual(&u).expect("residual");
    let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
    c.bench_function("ilu0+gmres 33x33", |b| {
        b.iter(|| {
            let pre = ilu0_factor(&jac).unwrap();
            gmres_solve(&jac, &rhs, Some(&pre), &KrylovOptions::default()).unwrap()
        })
    });
}

fn bench_newton(c: &mut Criterion) {
    let sys = test1_system(17, 1e-2);
    let u0 = initial_guess(&sys).expect("initial guess");
    c.bench_function("newton test1 17x17", |b| {
        b.iter(|| newton_solve(&sys, std::hint::black_box(&u0), &NewtonOptions::default()).unwrap())
    });
}

criterion_group!(benches, bench_residual, bench_jacobian, bench_linear_solve, bench_newton);
criterion_main!(benches);
