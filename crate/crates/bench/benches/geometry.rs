//! Criterion benchmarks for the hot geometric kernels: curvature assembly,
//! the closed-form Lie derivative of the connection, the deviation RHS, and
//! geodesic stepping.

use criterion::{criterion_group, criterion_main, Criterion};
use lndev_core::builtin::Builtin;
use lndev_core::curvature::curvature;
use lndev_core::deviation::{
    generalized_deviation_rhs, integrate_geodesic, ConditionVariant, DeviationAux, DeviationState,
};
use lndev_core::lie::{lie_derivative_connection, LieGammaSource};
use lndev_core::manifold::{ConnectionField, ConnectionSpace, FrameField, TensorField};
use lndev_core::numerics::IntegratorSettings;
use lndev_core::point::ChartPoint;
use lndev_core::poly::{poly_array_field, MultiPoly};
use ndarray::arr1;
use std::hint::black_box;

fn poly_space(n: usize) -> (ConnectionSpace, TensorField) {
    let mut a_polys = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let mut terms = vec![(if i == j { 1.0 } else { 0.0 }, vec![0u32; n])];
            let mut e = vec![0u32; n];
            e[(i + j) % n] = 1;
            terms.push((0.05 + 0.01 * (i as f64 - j as f64), e));
            a_polys.push(MultiPoly::new(n, terms));
        }
    }
    let frame = FrameField::new(n, poly_array_field(n, vec![n, n], a_polys)).unwrap();
    let mut g_polys = Vec::new();
    for idx in 0..n * n * n {
        let mut e = vec![0u32; n];
        e[idx % n] = 2;
        g_polys.push(MultiPoly::new(
            n,
            vec![(0.1 + 0.013 * (idx % 7) as f64, e), (0.05, vec![0; n])],
        ));
    }
    let conn = ConnectionField::new(n, poly_array_field(n, vec![n, n, n], g_polys)).unwrap();
    let space = ConnectionSpace::new(frame, conn).unwrap();
    let xi = TensorField::vector(poly_array_field(
        n,
        vec![n],
        (0..n)
            .map(|i| {
                let mut e = vec![0u32; n];
                e[i] = 1;
                MultiPoly::new(n, vec![(0.3, e), (0.1, vec![0; n])])
            })
            .collect(),
    ));
    (space, xi)
}

fn bench_curvature(c: &mut Criterion) {
    let (space, _) = poly_space(3);
    let x = ChartPoint::new(vec![0.2, -0.1, 0.3]).unwrap();
    c.bench_function("curvature n=3 poly frame", |b| {
        b.iter(|| curvature(black_box(&space), black_box(&x)).unwrap())
    });
}

fn bench_lie_gamma(c: &mut Criterion) {
    let (space, xi) = poly_space(3);
    let x = ChartPoint::new(vec![0.15, 0.25, -0.2]).unwrap();
    c.bench_function("lie_gamma closed form n=3", |b| {
        b.iter(|| {
            lie_derivative_connection(
                black_box(&space),
                black_box(&xi),
                black_box(&x),
                LieGammaSource::ClosedForm,
            )
            .unwrap()
        })
    });
    c.bench_function("lie_gamma identity route n=3", |b| {
        b.iter(|| {
            lie_derivative_connection(
                black_box(&space),
                black_box(&xi),
                black_box(&x),
                LieGammaSource::Identity,
            )
            .unwrap()
        })
    });
}

fn bench_deviation_rhs(c: &mut Criterion) {
    let space = Builtin::Sphere { a: 1.0, dim: 2 }.build().unwrap();
    let state = DeviationState {
        s: 0.0,
        x: ChartPoint::new(vec![std::f64::consts::FRAC_PI_2, 0.3]).unwrap(),
        u: arr1(&[0.0, 1.0]),
        xi: arr1(&[0.01, 0.0]),
        v: arr1(&[0.0, 0.0]),
    };
    let aux = DeviationAux::new();
    c.bench_function("deviation rhs free-particles sphere", |b| {
        b.iter(|| {
            generalized_deviation_rhs(
                black_box(&space),
                black_box(&state),
                &ConditionVariant::FreeParticles,
                &aux,
            )
            .unwrap()
        })
    });
}

fn bench_geodesic(c: &mut Criterion) {
    let space = Builtin::Schwarzschild { mass: 1.0 }.build().unwrap();
    let x0 = ChartPoint::new(vec![0.0, 10.0, std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
    let ut = 1.0 / (1.0f64 - 0.3).sqrt();
    let u0 = arr1(&[ut, 0.0, 0.0, (1.0f64 / 1000.0).sqrt() * ut]);
    c.bench_function("schwarzschild geodesic segment", |b| {
        b.iter(|| {
            integrate_geodesic(
                black_box(&space),
                &x0,
                &u0,
                (0.0, 5.0),
                &IntegratorSettings::rk4(0.01),
                &[5.0],
            )
            .unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_curvature,
    bench_lie_gamma,
    bench_deviation_rhs,
    bench_geodesic
);
criterion_main!(benches);
