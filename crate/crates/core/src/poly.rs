//! Multivariate polynomials with exact partial derivatives, used to define
//! spaces and vector fields in analytic-derivative mode.

use crate::field::ArrayField;
use ndarray::{ArrayD, IxDyn};

/// Sparse multivariate polynomial: sum of coef * Π x_a^{exps[a]}.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPoly {
    n: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl MultiPoly {
    pub fn new(n: usize, terms: Vec<(f64, Vec<u32>)>) -> Self {
        assert!(terms.iter().all(|(_, e)| e.len() == n));
        Self { n, terms }
    }

    pub fn zero(n: usize) -> Self {
        Self { n, terms: vec![] }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            n,
            terms: vec![(c, vec![0; n])],
        }
    }

    /// The bare coordinate x_alpha.
    pub fn coordinate(n: usize, alpha: usize) -> Self {
        let mut e = vec![0; n];
        e[alpha] = 1;
        Self {
            n,
            terms: vec![(1.0, e)],
        }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                c * e
                    .iter()
                    .enumerate()
                    .map(|(a, &p)| x[a].powi(p as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn partial(&self, alpha: usize) -> MultiPoly {
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[alpha] > 0)
            .map(|(c, e)| {
                let mut e2 = e.clone();
                e2[alpha] -= 1;
                (c * e[alpha] as f64, e2)
            })
            .collect();
        MultiPoly { n: self.n, terms }
    }

    pub fn add(&self, other: &MultiPoly) -> MultiPoly {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        MultiPoly { n: self.n, terms }
    }

    pub fn scale(&self, s: f64) -> MultiPoly {
        MultiPoly {
            n: self.n,
            terms: self.terms.iter().map(|(c, e)| (c * s, e.clone())).collect(),
        }
    }
}

/// Array field backed by one polynomial per component, with analytic partials.
pub fn poly_array_field(n: usize, shape: Vec<usize>, polys: Vec<MultiPoly>) -> ArrayField {
    let count: usize = shape.iter().product();
    assert_eq!(polys.len(), count);
    assert!(polys.iter().all(|p| p.nvars() == n));
    let partials: Vec<Vec<MultiPoly>> = (0..n)
        .map(|alpha| polys.iter().map(|p| p.partial(alpha)).collect())
        .collect();
    let shape_eval = shape.clone();
    let polys_eval = polys;
    let field = ArrayField::new(shape.clone(), move |x| {
        let xv = x.to_vec();
        let data: Vec<f64> = polys_eval.iter().map(|p| p.eval(&xv)).collect();
        Ok(ArrayD::from_shape_vec(IxDyn(&shape_eval), data).expect("shape"))
    });
    let shape_d = shape;
    field.with_partials(move |x, alpha| {
        let xv = x.to_vec();
        let data: Vec<f64> = partials[alpha].iter().map(|p| p.eval(&xv)).collect();
        Ok(ArrayD::from_shape_vec(IxDyn(&shape_d), data).expect("shape"))
    })
}
