//! Array-valued fields over the chart, with analytic or finite-difference
//! coordinate partials. Every geometric field (frame, connection, metric,
//! vector fields) is carried by [`ArrayField`].

use crate::error::{GeomError, Result};
use crate::numerics::fd::{fd_partial_array, FdScheme};
use crate::point::ChartPoint;
use ndarray::{ArrayD, IxDyn};
use std::sync::Arc;

pub type EvalFn = dyn Fn(&ChartPoint) -> Result<ArrayD<f64>> + Send + Sync;
pub type PartialFn = dyn Fn(&ChartPoint, usize) -> Result<ArrayD<f64>> + Send + Sync;

/// A function of the chart point with a fixed array shape.
///
/// `partial` holds the analytic coordinate-partial callback when the caller
/// has one; otherwise partials fall back to central differences with one
/// Richardson level.
#[derive(Clone)]
pub struct ArrayField {
    shape: Vec<usize>,
    eval: Arc<EvalFn>,
    partial: Option<Arc<PartialFn>>,
    fd: FdScheme,
}

impl ArrayField {
    pub fn new<F>(shape: Vec<usize>, f: F) -> Self
    where
        F: Fn(&ChartPoint) -> Result<ArrayD<f64>> + Send + Sync + 'static,
    {
        Self {
            shape,
            eval: Arc::new(f),
            partial: None,
            fd: FdScheme::default(),
        }
    }

    /// Position-independent field; its partials are exactly zero.
    pub fn constant(values: ArrayD<f64>) -> Self {
        let shape = values.shape().to_vec();
        let zeros = ArrayD::zeros(IxDyn(&shape));
        Self::new(shape, move |_| Ok(values.clone()))
            .with_partials(move |_, _| Ok(zeros.clone()))
    }

    pub fn with_partials<F>(mut self, df: F) -> Self
    where
        F: Fn(&ChartPoint, usize) -> Result<ArrayD<f64>> + Send + Sync + 'static,
    {
        self.partial = Some(Arc::new(df));
        self
    }

    pub fn with_fd(mut self, fd: FdScheme) -> Self {
        self.fd = fd;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partial.is_some()
    }

    pub fn eval(&self, x: &ChartPoint) -> Result<ArrayD<f64>> {
        let v = (self.eval)(x)?;
        if v.shape() != self.shape.as_slice() {
            return Err(GeomError::SlotMismatch(format!(
                "field returned shape {:?}, declared {:?}",
                v.shape(),
                self.shape
            )));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(GeomError::NonFinite {
                what: "field value".into(),
                point: x.to_vec(),
            });
        }
        Ok(v)
    }

    /// Coordinate partial ∂_alpha of every component.
    pub fn coord_partial(&self, x: &ChartPoint, alpha: usize) -> Result<ArrayD<f64>> {
        match &self.partial {
            Some(df) => {
                let v = df(x, alpha)?;
                if v.shape() != self.shape.as_slice() {
                    return Err(GeomError::SlotMismatch(format!(
                        "partial returned shape {:?}, declared {:?}",
                        v.shape(),
                        self.shape
                    )));
                }
                Ok(v)
            }
            None => {
                let f = self.eval.clone();
                fd_partial_array(&move |p: &ChartPoint| f(p), x, alpha, &self.fd)
            }
        }
    }

    pub fn fd_scheme(&self) -> &FdScheme {
        &self.fd
    }
}

impl std::fmt::Debug for ArrayField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ArrayField")
            .field("shape", &self.shape)
            .field("analytic_partials", &self.partial.is_some())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr1;

    #[test]
    fn fd_fallback_matches_analytic() {
        let f = ArrayField::new(vec![2], |p: &ChartPoint| {
            Ok(arr1(&[p[0] * p[0], p[0] * p[1]]).into_dyn())
        });
        let x = ChartPoint::new(vec![1.3, -0.4]).unwrap();
        let d = f.coord_partial(&x, 0).unwrap();
        assert_abs_diff_eq!(d[[0]], 2.6, epsilon = 1e-9);
        assert_abs_diff_eq!(d[[1]], -0.4, epsilon = 1e-9);
    }

    #[test]
    fn shape_mismatch_detected() {
        let f = ArrayField::new(vec![3], |_| Ok(arr1(&[1.0, 2.0]).into_dyn()));
        let x = ChartPoint::new(vec![0.0, 0.0]).unwrap();
        assert!(f.eval(&x).is_err());
    }
}
