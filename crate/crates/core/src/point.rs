use crate::error::{GeomError, Result};
use ndarray::Array1;

/// A point of the single global chart, held as coordinate values.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    coords: Array1<f64>,
}

impl ChartPoint {
    /// Builds a point, rejecting dimension < 2 and non-finite entries.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(GeomError::DimensionMismatch {
                expected: 2,
                got: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeomError::NonFinite {
                what: "chart point".into(),
                point: coords,
            });
        }
        Ok(Self {
            coords: Array1::from(coords),
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &Array1<f64> {
        &self.coords
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.to_vec()
    }

    /// Same point with one coordinate shifted; used by difference stencils.
    pub fn shifted(&self, alpha: usize, delta: f64) -> Self {
        let mut c = self.coords.clone();
        c[alpha] += delta;
        Self { coords: c }
    }

    /// Point displaced by a full coordinate vector.
    pub fn displaced(&self, delta: &Array1<f64>) -> Self {
        Self {
            coords: &self.coords + delta,
        }
    }
}

impl std::ops::Index<usize> for ChartPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_low_dimension_and_nan() {
        assert!(ChartPoint::new(vec![1.0]).is_err());
        assert!(ChartPoint::new(vec![1.0, f64::NAN]).is_err());
        assert!(ChartPoint::new(vec![0.0, 1.0, 2.0]).is_ok());
    }

    #[test]
    fn shift_moves_one_coordinate() {
        let p = ChartPoint::new(vec![1.0, 2.0]).unwrap();
        let q = p.shifted(1, 0.5);
        assert_eq!(q[0], 1.0);
        assert_eq!(q[1], 2.5);
    }
}
