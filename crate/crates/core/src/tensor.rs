//! Dense tensor values with declared valence and the contraction operator.

use crate::error::{GeomError, Result};
use crate::numerics::linalg;
use ndarray::{Array2, ArrayD, IxDyn};

/// A multi-index array at a point: `valence.0` contravariant slots followed by
/// `valence.1` covariant slots, each of extent n. `frame_tag` records which
/// frame the components refer to.
#[derive(Debug, Clone)]
pub struct TensorValue {
    pub valence: (usize, usize),
    pub data: ArrayD<f64>,
    pub frame_tag: String,
}

impl TensorValue {
    pub fn new(valence: (usize, usize), data: ArrayD<f64>, n: usize) -> Result<Self> {
        let rank = valence.0 + valence.1;
        if data.ndim() != rank || data.shape().iter().any(|&e| e != n) {
            return Err(GeomError::SlotMismatch(format!(
                "valence {:?} needs {} slots of extent {}, got shape {:?}",
                valence,
                rank,
                n,
                data.shape()
            )));
        }
        Ok(Self {
            valence,
            data,
            frame_tag: "E".into(),
        })
    }

    pub fn tagged(mut self, tag: &str) -> Self {
        self.frame_tag = tag.into();
        self
    }

    pub fn n(&self) -> usize {
        if self.data.ndim() == 0 {
            0
        } else {
            self.data.shape()[0]
        }
    }

    /// Contracts contravariant slot `upper` with covariant slot `lower`
    /// (indices count within each variance group).
    pub fn contract(&self, upper: usize, lower: usize) -> Result<TensorValue> {
        let (p, q) = self.valence;
        if upper >= p || lower >= q {
            return Err(GeomError::SlotMismatch(format!(
                "contraction ({upper}, {lower}) out of range for valence ({p}, {q})"
            )));
        }
        let n = self.n();
        let ax_u = upper;
        let ax_l = p + lower;
        let mut out_shape: Vec<usize> = Vec::new();
        for (ax, &e) in self.data.shape().iter().enumerate() {
            if ax != ax_u && ax != ax_l {
                out_shape.push(e);
            }
        }
        let mut out = ArrayD::<f64>::zeros(IxDyn(&out_shape));
        for (out_idx, slot) in out.indexed_iter_mut() {
            let mut full = Vec::with_capacity(self.data.ndim());
            let mut oi = 0usize;
            for ax in 0..self.data.ndim() {
                if ax == ax_u || ax == ax_l {
                    full.push(0);
                } else {
                    full.push(out_idx[oi]);
                    oi += 1;
                }
            }
            let mut sum = 0.0;
            for d in 0..n {
                full[ax_u] = d;
                full[ax_l] = d;
                sum += self.data[IxDyn(&full)];
            }
            *slot = sum;
        }
        Ok(TensorValue {
            valence: (p - 1, q - 1),
            data: out,
            frame_tag: self.frame_tag.clone(),
        })
    }
}

/// Transforms tensor components under a frame change `E_{i'} = P[i'][i] E_i`.
/// Upper slots pick up the inverse matrix, lower slots pick up P.
pub fn transform_tensor(t: &TensorValue, p_new_old: &Array2<f64>, eps_det: f64) -> Result<TensorValue> {
    let n = p_new_old.nrows();
    let q_inv = linalg::inverse(p_new_old, eps_det)?; // rows: old, cols: new with P*Q = I
    let (pc, qc) = t.valence;
    let rank = pc + qc;
    let mut out = ArrayD::<f64>::zeros(IxDyn(t.data.shape()));
    for (idx, slot) in out.indexed_iter_mut() {
        let mut sum = 0.0;
        let mut src = vec![0usize; rank];
        // iterate all source indices
        let total = n.pow(rank as u32);
        for flat in 0..total {
            let mut rem = flat;
            for ax in (0..rank).rev() {
                src[ax] = rem % n;
                rem /= n;
            }
            let mut w = 1.0;
            for ax in 0..rank {
                let (new_i, old_i) = (idx[ax], src[ax]);
                // upper: A^{i'}_i = (P^{-1})[old][new]; lower: A^j_{j'} = P[new][old]
                w *= if ax < pc {
                    q_inv[(old_i, new_i)]
                } else {
                    p_new_old[(new_i, old_i)]
                };
                if w == 0.0 {
                    break;
                }
            }
            if w != 0.0 {
                sum += w * t.data[IxDyn(&src)];
            }
        }
        *slot = sum;
    }
    Ok(TensorValue {
        valence: t.valence,
        data: out,
        frame_tag: format!("{}'", t.frame_tag),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr2, Array};

    #[test]
    fn kronecker_trace_is_n() {
        let n = 3;
        let eye = Array2::<f64>::eye(n).into_dyn();
        let t = TensorValue::new((1, 1), eye, n).unwrap();
        let c = t.contract(0, 0).unwrap();
        assert_eq!(c.valence, (0, 0));
        assert_abs_diff_eq!(c.data[IxDyn(&[])], 3.0);
    }

    #[test]
    fn contract_slot_bounds() {
        let n = 2;
        let t = TensorValue::new((1, 1), Array2::<f64>::eye(n).into_dyn(), n).unwrap();
        assert!(t.contract(1, 0).is_err());
    }

    #[test]
    fn vector_round_trip_under_frame_change() {
        let n = 2;
        let v = Array::from_vec(vec![1.0, 2.0]).into_dyn();
        let t = TensorValue::new((1, 0), v.clone(), n).unwrap();
        let p = arr2(&[[2.0, 1.0], [0.0, 1.0]]);
        let fwd = transform_tensor(&t, &p, 1e-12).unwrap();
        let pinv = linalg::inverse(&p, 1e-12).unwrap();
        let back = transform_tensor(&fwd, &pinv, 1e-12).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(back.data[IxDyn(&[i])], v[IxDyn(&[i])], epsilon = 1e-12);
        }
    }
}
