//! Dense LU helpers for the small (n ≤ a few) matrices this crate works with.

use crate::error::{GeomError, Result};
use ndarray::Array2;

/// Determinant by LU with partial pivoting.
pub fn det(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut d = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[(r, col)].abs() > a[(piv, col)].abs() {
                piv = r;
            }
        }
        if a[(piv, col)] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..n {
                a.swap((piv, c), (col, c));
            }
            d = -d;
        }
        d *= a[(col, col)];
        for r in col + 1..n {
            let f = a[(r, col)] / a[(col, col)];
            for c in col..n {
                a[(r, c)] -= f * a[(col, c)];
            }
        }
    }
    d
}

/// Inverse by Gauss-Jordan with partial pivoting; fails below `eps_det`.
pub fn inverse(m: &Array2<f64>, eps_det: f64) -> Result<Array2<f64>> {
    let n = m.nrows();
    let d = det(m);
    if !d.is_finite() || d.abs() < eps_det {
        return Err(GeomError::SingularFrame {
            point: vec![],
            det: d,
        });
    }
    let mut a = m.clone();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[(r, col)].abs() > a[(piv, col)].abs() {
                piv = r;
            }
        }
        if piv != col {
            for c in 0..n {
                a.swap((piv, c), (col, c));
                inv.swap((piv, c), (col, c));
            }
        }
        let p = a[(col, col)];
        for c in 0..n {
            a[(col, c)] /= p;
            inv[(col, c)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[(r, col)];
            if f != 0.0 {
                for c in 0..n {
                    a[(r, c)] -= f * a[(col, c)];
                    inv[(r, c)] -= f * inv[(col, c)];
                }
            }
        }
    }
    Ok(inv)
}

/// Least-squares fit of `lhs ≈ coef * rhs` over matching entries.
pub fn scalar_fit(lhs: &[f64], rhs: &[f64]) -> f64 {
    let num: f64 = lhs.iter().zip(rhs).map(|(a, b)| a * b).sum();
    let den: f64 = rhs.iter().map(|b| b * b).sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
