//! Shared randomized-instance machinery for the integration test suites.

use lndev_core::manifold::{ConnectionField, ConnectionSpace, FrameField, TensorField};
use lndev_core::point::ChartPoint;
use lndev_core::poly::{poly_array_field, MultiPoly};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Degree ≤ 2 polynomial with coefficients in ±scale.
pub fn random_poly(r: &mut ChaCha8Rng, n: usize, scale: f64) -> MultiPoly {
    let mut terms = vec![(r.random_range(-scale..scale), vec![0u32; n])];
    for a in 0..n {
        let mut e = vec![0u32; n];
        e[a] = 1;
        terms.push((r.random_range(-scale..scale), e.clone()));
        e[a] = 2;
        terms.push((r.random_range(-scale..scale), e));
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let mut e = vec![0u32; n];
            e[a] = 1;
            e[b] = 1;
            terms.push((r.random_range(-scale..scale), e));
        }
    }
    MultiPoly::new(n, terms)
}

/// Random space: polynomial frame near the identity, polynomial Γ of degree
/// ≤ 2 with torsion. Valid (frame invertible) inside the unit box.
pub fn random_space(r: &mut ChaCha8Rng, n: usize) -> ConnectionSpace {
    let mut a_polys = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut p = random_poly(r, n, 0.08);
            if i == j {
                p = p.add(&MultiPoly::constant(n, 1.0));
            }
            a_polys.push(p);
        }
    }
    let frame = FrameField::new(n, poly_array_field(n, vec![n, n], a_polys)).unwrap();
    let g_polys: Vec<MultiPoly> = (0..n * n * n).map(|_| random_poly(r, n, 0.3)).collect();
    let conn = ConnectionField::new(n, poly_array_field(n, vec![n, n, n], g_polys)).unwrap();
    ConnectionSpace::new(frame, conn).unwrap()
}

/// Random coordinate-frame space (identity frame).
pub fn random_coordinate_space(r: &mut ChaCha8Rng, n: usize) -> ConnectionSpace {
    let g_polys: Vec<MultiPoly> = (0..n * n * n).map(|_| random_poly(r, n, 0.3)).collect();
    ConnectionSpace::coordinate(n, poly_array_field(n, vec![n, n, n], g_polys)).unwrap()
}

pub fn random_vector_field(r: &mut ChaCha8Rng, n: usize, scale: f64) -> TensorField {
    let polys: Vec<MultiPoly> = (0..n).map(|_| random_poly(r, n, scale)).collect();
    TensorField::vector(poly_array_field(n, vec![n], polys))
}

pub fn random_point(r: &mut ChaCha8Rng, n: usize) -> ChartPoint {
    ChartPoint::new((0..n).map(|_| r.random_range(-0.5..0.5)).collect()).unwrap()
}

pub fn max_abs<'a, I: IntoIterator<Item = &'a f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Relative max-norm difference used by the oracles: |a − b| / (1 + |a|_max).
pub fn rel_residual<'a, I, J>(a: I, b: J) -> f64
where
    I: IntoIterator<Item = &'a f64>,
    J: IntoIterator<Item = &'a f64>,
{
    let av: Vec<f64> = a.into_iter().copied().collect();
    let bv: Vec<f64> = b.into_iter().copied().collect();
    let scale = 1.0 + max_abs(av.iter());
    av.iter()
        .zip(&bv)
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}
