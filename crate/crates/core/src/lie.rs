//! Lie brackets and Lie derivatives of tensors, metrics, and connection
//! coefficients.
//!
//! Brackets and tensor Lie derivatives are computed by mapping components to
//! the coordinate frame, applying the coordinate formula, and mapping back;
//! this removes any sign ambiguity from anholonomy corrections.

use crate::error::{GeomError, Result};
use crate::field::ArrayField;
use crate::manifold::{frame_partial, ConnectionSpace, TensorField};
use crate::numerics::dragging::{dragging_oracle, DraggingProbe};
use crate::point::ChartPoint;
use crate::tensor::TensorValue;
use ndarray::{Array1, Array2, Array3, ArrayD, Dimension, Ix1, IxDyn};

/// Which construction produced a Lie derivative of the connection.
#[derive(Debug, Clone, PartialEq)]
pub enum LieGammaSource {
    /// Algebraic closed form in Σ^j_k = ξ^j_{,k} + C^j_{kl} ξ^l.
    ClosedForm,
    /// Assembled from ξ^k_{|i|j} − R^k_{ijl}ξ^l − (T^k_{il}ξ^l)_{|j}.
    Identity,
    /// Finite-ε dragging with Richardson extrapolation.
    Dragging(DraggingProbe),
}

#[derive(Debug, Clone)]
pub struct LieConnectionValue {
    pub l: Array3<f64>,
    pub point: ChartPoint,
    pub source: LieGammaSource,
}

/// Contract all slots of `v` with frame factors: upper slots with `a`
/// (A_i^alpha), lower slots with `inv` (A^i_alpha). When `d_ax` is set, that
/// slot's factor is replaced by the corresponding entry of (da, dinv) — the
/// product-rule helper for analytic partials.
#[allow(clippy::too_many_arguments)]
fn map_components(
    v: &ArrayD<f64>,
    p: usize,
    rank: usize,
    n: usize,
    a: &Array2<f64>,
    inv: &Array2<f64>,
    d_ax: Option<usize>,
    da: Option<(&Array2<f64>, &Array2<f64>)>,
) -> ArrayD<f64> {
    let mut out = ArrayD::<f64>::zeros(IxDyn(v.shape()));
    for (idx, slot) in out.indexed_iter_mut() {
        let mut sum = 0.0;
        let total = n.pow(rank as u32);
        let mut src = vec![0usize; rank];
        for flat in 0..total {
            let mut rem = flat;
            for ax in (0..rank).rev() {
                src[ax] = rem % n;
                rem /= n;
            }
            let mut w = 1.0;
            for ax in 0..rank {
                let use_d = d_ax == Some(ax);
                let (mat_a, mat_inv) = if use_d {
                    let (da_m, dinv_m) = da.expect("derivative matrices required");
                    (da_m, dinv_m)
                } else {
                    (a, inv)
                };
                // upper: v^alpha = A_i^alpha v^i ; lower: w_alpha = A^i_alpha w_i
                w *= if ax < p {
                    mat_a[(src[ax], idx[ax])]
                } else {
                    mat_inv[(src[ax], idx[ax])]
                };
                if w == 0.0 {
                    break;
                }
            }
            if w != 0.0 {
                sum += w * v[IxDyn(&src)];
            }
        }
        *slot = sum;
    }
    out
}

/// Maps the components of a tensor field to the coordinate frame as a new
/// composite field. When both the frame and the field carry analytic
/// partials, the mapped field does too (product rule, with
/// d(A^{-1}) = −A^{-1} dA A^{-1} for the lower-slot factors); otherwise its
/// partials fall back to finite differences.
pub fn coordinate_components_field(space: &ConnectionSpace, t: &TensorField) -> TensorField {
    if space.frame().is_identity() {
        return t.clone();
    }
    let (p, q) = t.valence;
    let rank = p + q;
    let shape = t.field.shape().to_vec();
    let field = {
        let space = space.clone();
        let inner = t.clone();
        ArrayField::new(shape, move |x| {
            let v = inner.field.eval(x)?;
            let a = space.frame_matrix(x)?;
            let inv = space.frame_inverse(x)?;
            Ok(map_components(&v, p, rank, space.dim(), &a, &inv, None, None))
        })
    };
    let analytic =
        space.frame().field().has_analytic_partials() && t.field.has_analytic_partials();
    let field = if analytic {
        let space = space.clone();
        let inner = t.clone();
        field.with_partials(move |x, beta| {
            let n = space.dim();
            let v = inner.field.eval(x)?;
            let dv = inner.field.coord_partial(x, beta)?;
            let a = space.frame_matrix(x)?;
            let inv = space.frame_inverse(x)?;
            let da = space.frame().partial(x, beta)?;
            // inv = (M^{-1})^T with M = a; d(M^{-1}) = −M^{-1} dM M^{-1}
            let m_inv = inv.t().to_owned();
            let dinv = -m_inv.dot(&da).dot(&m_inv);
            let dinv_layout = dinv.t().to_owned();
            let mut out = map_components(&dv, p, rank, n, &a, &inv, None, None);
            for ax in 0..rank {
                out = out
                    + map_components(&v, p, rank, n, &a, &inv, Some(ax), Some((&da, &dinv_layout)));
            }
            Ok(out)
        })
    } else {
        field
    };
    TensorField {
        valence: t.valence,
        field,
        frame_tag: "coord".into(),
    }
}

fn frame_components_of(space: &ConnectionSpace, x: &ChartPoint, t: &TensorValue) -> Result<TensorValue> {
    if space.frame().is_identity() {
        return Ok(t.clone());
    }
    let a = space.frame_matrix(x)?;
    let inv = space.frame_inverse(x)?;
    let (p, q) = t.valence;
    let rank = p + q;
    let n = space.dim();
    let mut out = ArrayD::<f64>::zeros(IxDyn(t.data.shape()));
    for (idx, slot) in out.indexed_iter_mut() {
        let mut sum = 0.0;
        let total = n.pow(rank as u32);
        let mut src = vec![0usize; rank];
        for flat in 0..total {
            let mut rem = flat;
            for ax in (0..rank).rev() {
                src[ax] = rem % n;
                rem /= n;
            }
            let mut w = 1.0;
            for ax in 0..rank {
                // back to frame: upper picks A^i_alpha, lower picks A_i^alpha
                w *= if ax < p {
                    inv[(idx[ax], src[ax])]
                } else {
                    a[(idx[ax], src[ax])]
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
    TensorValue::new(t.valence, out, n)
}

/// Lie derivative of a tensor field along ξ, returned in frame components.
pub fn lie_derivative_tensor(
    space: &ConnectionSpace,
    t: &TensorField,
    xi: &TensorField,
    x: &ChartPoint,
) -> Result<TensorValue> {
    if xi.valence != (1, 0) {
        return Err(GeomError::SlotMismatch("ξ must be a (1,0) field".into()));
    }
    let n = space.dim();
    let (p, q) = t.valence;
    let rank = p + q;
    let tc = coordinate_components_field(space, t);
    let xc = coordinate_components_field(space, xi);
    let xi_val = xc
        .field
        .eval(x)?
        .into_dimensionality::<Ix1>()
        .expect("vector shape");
    let mut dxi = Array2::<f64>::zeros((n, n)); // dxi[(mu, alpha)] = d_alpha xi^mu
    for alpha in 0..n {
        let d = xc.field.coord_partial(x, alpha)?;
        for mu in 0..n {
            dxi[(mu, alpha)] = d[IxDyn(&[mu])];
        }
    }
    let tv = tc.field.eval(x)?;
    let mut dt = Vec::with_capacity(n); // dt[mu] = d_mu T
    for mu in 0..n {
        dt.push(tc.field.coord_partial(x, mu)?);
    }
    let mut out = ArrayD::<f64>::zeros(IxDyn(tv.shape()));
    for (idx, slot) in out.indexed_iter_mut() {
        let mut s = 0.0;
        for mu in 0..n {
            s += xi_val[mu] * dt[mu][idx.clone()];
        }
        let base: Vec<usize> = idx.slice().to_vec();
        for ax in 0..rank {
            let orig = base[ax];
            let mut src = base.clone();
            for mu in 0..n {
                src[ax] = mu;
                let tcomp = tv[IxDyn(&src)];
                if tcomp == 0.0 {
                    continue;
                }
                if ax < p {
                    s -= tcomp * dxi[(orig, mu)];
                } else {
                    s += tcomp * dxi[(mu, orig)];
                }
            }
        }
        *slot = s;
    }
    let coord_val = TensorValue::new(t.valence, out, n)?;
    frame_components_of(space, x, &coord_val)
}

/// Frame components of [ξ, u].
pub fn lie_bracket(
    space: &ConnectionSpace,
    xi: &TensorField,
    u: &TensorField,
    x: &ChartPoint,
) -> Result<Array1<f64>> {
    let v = lie_derivative_tensor(space, u, xi, x)?;
    Ok(v.data.into_dimensionality::<Ix1>().expect("vector shape"))
}

/// (£_ξ g)_{ij} in frame components; errors without a metric.
pub fn lie_derivative_metric(
    space: &ConnectionSpace,
    xi: &TensorField,
    x: &ChartPoint,
) -> Result<Array2<f64>> {
    let metric = space.metric_required()?;
    let gf = TensorField::new((0, 2), metric.field().clone());
    let v = lie_derivative_tensor(space, &gf, xi, x)?;
    Ok(v.data.into_dimensionality::<ndarray::Ix2>().expect("matrix shape"))
}

/// £_ξ(|g|^{−1/n} g_{ij}) via the chain rule:
/// |g|^{−1/n} (£_ξ g_{ij} − g_{ij} g^{kl} (£_ξ g)_{kl} / n).
/// Vanishes exactly for conformal ξ; requires det g != 0.
pub fn lie_metric_weight_normalized(
    space: &ConnectionSpace,
    xi: &TensorField,
    x: &ChartPoint,
) -> Result<Array2<f64>> {
    let metric = space.metric_required()?;
    let g = metric.value(x)?;
    let ginv = metric.inverse(x, space.eps_det)?;
    let detg = metric.det(x)?;
    let lg = lie_derivative_metric(space, xi, x)?;
    let n = space.dim() as f64;
    let trace: f64 = ginv
        .iter()
        .zip(lg.t().iter())
        .map(|(a, b)| a * b)
        .sum();
    let weight = detg.abs().powf(-1.0 / n);
    Ok((lg - &g * (trace / n)) * weight)
}

/// The composite field Σ^j_k = ξ^j_{,k} + C^j_{kl} ξ^l housing the dragging
/// matrix; shape [j][k].
pub fn sigma_field(space: &ConnectionSpace, xi: &TensorField) -> ArrayField {
    let space = space.clone();
    let xi = xi.clone();
    let n = space.dim();
    ArrayField::new(vec![n, n], move |x| {
        let mut out = Array2::<f64>::zeros((n, n));
        for k in 0..n {
            let d = frame_partial(space.frame(), &xi.field, x, k)?;
            for j in 0..n {
                out[(j, k)] = d[IxDyn(&[j])];
            }
        }
        if !space.frame().is_identity() {
            let c = crate::curvature::anholonomy(&space, x)?;
            let xv = xi.eval_vector(x)?;
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += c[(j, k, l)] * xv[l];
                    }
                    out[(j, k)] += s;
                }
            }
        }
        Ok(out.into_dyn())
    })
}

/// Closed-form Lie derivative of the connection:
/// £_ξ Γ^i_{jk} = −Γ^n_{jk} Σ^i_n + Γ^i_{nk} Σ^n_j + Γ^i_{jn} Σ^n_k
///              + Σ^i_{j,k} + Γ^i_{jk,n} ξ^n.
fn lie_gamma_closed_form(
    space: &ConnectionSpace,
    xi: &TensorField,
    x: &ChartPoint,
) -> Result<Array3<f64>> {
    let n = space.dim();
    let g = space.gamma(x)?;
    let sf = sigma_field(space, xi);
    let sig = sf
        .eval(x)?
        .into_dimensionality::<ndarray::Ix2>()
        .expect("sigma shape");
    let mut dsig = Vec::with_capacity(n); // dsig[k][(i, j)] = E_k(Σ^i_j)
    for k in 0..n {
        dsig.push(
            frame_partial(space.frame(), &sf, x, k)?
                .into_dimensionality::<ndarray::Ix2>()
                .expect("sigma shape"),
        );
    }
    let mut dg = Vec::with_capacity(n);
    for m in 0..n {
        dg.push(space.gamma_frame_partial(x, m)?);
    }
    let xv = xi.eval_vector(x)?;
    let mut out = Array3::<f64>::zeros((n, n, n));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = dsig[k][(i, j)];
                for m in 0..n {
                    s += -g[(m, j, k)] * sig[(i, m)]
                        + g[(i, m, k)] * sig[(m, j)]
                        + g[(i, j, m)] * sig[(m, k)]
                        + dg[m][(i, j, k)] * xv[m];
                }
                out[(i, j, k)] = s;
            }
        }
    }
    Ok(out)
}

/// Lie derivative assembled from the curvature/torsion identity:
/// £_ξ Γ^k_{ij} = ξ^k_{|i|j} − R^k_{ijl} ξ^l − (T^k_{il} ξ^l)_{|j}.
fn lie_gamma_identity(
    space: &ConnectionSpace,
    xi: &TensorField,
    x: &ChartPoint,
) -> Result<Array3<f64>> {
    let n = space.dim();
    let w2 = crate::manifold::second_covariant_derivative(space, xi, x)?;
    let r = crate::curvature::curvature(space, x)?;
    let xv = xi.eval_vector(x)?;
    // y^k_i = T^k_{il} ξ^l as a composite (1,1) field
    let sp = space.clone();
    let xf = xi.clone();
    let y_field = TensorField::new(
        (1, 1),
        ArrayField::new(vec![n, n], move |p| {
            let t = crate::curvature::torsion(&sp, p)?;
            let xiv = xf.eval_vector(p)?;
            let mut out = Array2::<f64>::zeros((n, n));
            for k in 0..n {
                for i in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += t.t[(k, i, l)] * xiv[l];
                    }
                    out[(k, i)] = s;
                }
            }
            Ok(out.into_dyn())
        }),
    );
    let ycov = y_field.covariant_derivative(space).eval(x, n)?;
    let mut out = Array3::<f64>::zeros((n, n, n));
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = w2.data[IxDyn(&[k, i, j])] - ycov.data[IxDyn(&[k, i, j])];
                for l in 0..n {
                    s -= r.r[(k, i, j, l)] * xv[l];
                }
                out[(k, i, j)] = s;
            }
        }
    }
    Ok(out)
}

/// Lie derivative of the connection coefficients along ξ, by the requested
/// construction. All sources agree within their tolerance regimes; the
/// cross-checks live in the test suites.
pub fn lie_derivative_connection(
    space: &ConnectionSpace,
    xi: &TensorField,
    x: &ChartPoint,
    source: LieGammaSource,
) -> Result<LieConnectionValue> {
    let l = match &source {
        LieGammaSource::ClosedForm => lie_gamma_closed_form(space, xi, x)?,
        LieGammaSource::Identity => lie_gamma_identity(space, xi, x)?,
        LieGammaSource::Dragging(probe) => dragging_oracle(space, xi, x, probe)?.extrapolated,
    };
    Ok(LieConnectionValue {
        l,
        point: x.clone(),
        source,
    })
}

/// £_ξ of the Thomas projective parameters, obtained algebraically from
/// £_ξ Γ (the Thomas combination is linear in Γ with constant coefficients).
pub fn lie_thomas_projective(
    space: &ConnectionSpace,
    xi: &TensorField,
    x: &ChartPoint,
) -> Result<Array3<f64>> {
    let lg = lie_gamma_closed_form(space, xi, x)?;
    Ok(crate::curvature::thomas_from_gamma(&lg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ArrayField;
    use crate::manifold::{ConnectionField, ConnectionSpace, FrameField};
    use crate::poly::{poly_array_field, MultiPoly};
    use approx::assert_abs_diff_eq;
    use ndarray::arr1;

    fn pt(c: &[f64]) -> ChartPoint {
        ChartPoint::new(c.to_vec()).unwrap()
    }

    /// Deterministic degree-2 polynomial instance with an anholonomic frame.
    fn poly_instance() -> (ConnectionSpace, TensorField) {
        let n = 2;
        // A = I + small polynomial perturbation
        let a_polys = vec![
            MultiPoly::new(n, vec![(1.0, vec![0, 0]), (0.1, vec![1, 0])]),
            MultiPoly::new(n, vec![(0.2, vec![0, 1])]),
            MultiPoly::new(n, vec![(-0.1, vec![1, 1])]),
            MultiPoly::new(n, vec![(1.0, vec![0, 0]), (0.2, vec![1, 0])]),
        ];
        let frame = FrameField::new(n, poly_array_field(n, vec![n, n], a_polys)).unwrap();
        let coefs = [
            0.2, -0.25, 0.33, 0.14, -0.28, 0.11, 0.22, -0.16, 0.05, -0.31, 0.27, 0.09, -0.12,
            0.18, -0.07, 0.21, 0.13, -0.22, 0.08, 0.25, -0.19, 0.06, 0.17, -0.11,
        ];
        let mut g_polys = Vec::new();
        for (i, chunk) in coefs.chunks(3).enumerate() {
            let _ = i;
            g_polys.push(MultiPoly::new(
                n,
                vec![
                    (chunk[0], vec![1, 0]),
                    (chunk[1], vec![0, 2]),
                    (chunk[2], vec![0, 0]),
                ],
            ));
        }
        let conn = ConnectionField::new(n, poly_array_field(n, vec![n, n, n], g_polys)).unwrap();
        let space = ConnectionSpace::new(frame, conn).unwrap();
        let xi = TensorField::vector(poly_array_field(
            n,
            vec![n],
            vec![
                MultiPoly::new(n, vec![(0.333, vec![2, 0]), (-0.5, vec![0, 1]), (1.0, vec![0, 0])]),
                MultiPoly::new(n, vec![(0.25, vec![1, 1]), (0.2, vec![0, 0])]),
            ],
        ));
        (space, xi)
    }

    #[test]
    fn closed_form_matches_identity_on_anholonomic_instance() {
        let (space, xi) = poly_instance();
        for x in [pt(&[0.3, -0.2]), pt(&[-0.15, 0.4]), pt(&[0.05, 0.1])] {
            let cf = lie_derivative_connection(&space, &xi, &x, LieGammaSource::ClosedForm).unwrap();
            let id = lie_derivative_connection(&space, &xi, &x, LieGammaSource::Identity).unwrap();
            let scale = 1.0 + cf.l.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in cf.l.iter().zip(id.l.iter()) {
                assert!(
                    ((a - b) / scale).abs() < 1e-6,
                    "closed form {a} vs identity {b}"
                );
            }
        }
    }

    #[test]
    fn dragging_oracle_matches_closed_form() {
        let (space, xi) = poly_instance();
        let x = pt(&[0.2, -0.1]);
        let cf = lie_derivative_connection(&space, &xi, &x, LieGammaSource::ClosedForm).unwrap();
        let probe = DraggingProbe::default();
        let drag =
            lie_derivative_connection(&space, &xi, &x, LieGammaSource::Dragging(probe)).unwrap();
        let scale = 1.0 + cf.l.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in cf.l.iter().zip(drag.l.iter()) {
            assert!(((a - b) / scale).abs() < 1e-5, "closed {a} vs dragged {b}");
        }
    }

    #[test]
    fn bracket_is_antisymmetric_and_matches_textbook_case() {
        let space = ConnectionSpace::flat(2);
        // ξ = ∂_1, u = x1 ∂_2 → [ξ, u] = ∂_2
        let xi = TensorField::vector(poly_array_field(
            2,
            vec![2],
            vec![MultiPoly::constant(2, 1.0), MultiPoly::zero(2)],
        ));
        let u = TensorField::vector(poly_array_field(
            2,
            vec![2],
            vec![MultiPoly::zero(2), MultiPoly::coordinate(2, 0)],
        ));
        let x = pt(&[1.7, -0.4]);
        let b = lie_bracket(&space, &xi, &u, &x).unwrap();
        assert_abs_diff_eq!(b[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], 1.0, epsilon = 1e-12);
        let b2 = lie_bracket(&space, &u, &xi, &x).unwrap();
        assert_abs_diff_eq!(b[0], -b2[0], epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], -b2[1], epsilon = 1e-12);
        // ξ = u → 0
        let self_b = lie_bracket(&space, &u, &u, &x).unwrap();
        assert_abs_diff_eq!(self_b[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(self_b[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn euclidean_killing_and_conformal_fields() {
        let space = crate::builtin::Builtin::FlatCartesian { n: 2 }
            .build()
            .unwrap();
        let x = pt(&[0.7, -0.3]);
        // rotation field (−x2, x1): Killing
        let rot = TensorField::vector(poly_array_field(
            2,
            vec![2],
            vec![
                MultiPoly::coordinate(2, 1).scale(-1.0),
                MultiPoly::coordinate(2, 0),
            ],
        ));
        let lg = lie_derivative_metric(&space, &rot, &x).unwrap();
        for v in lg.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
        // dilation field (x1, x2): £_ξ g = 2g, weight-normalized form zero
        let dil = TensorField::vector(poly_array_field(
            2,
            vec![2],
            vec![MultiPoly::coordinate(2, 0), MultiPoly::coordinate(2, 1)],
        ));
        let lg = lie_derivative_metric(&space, &dil, &x).unwrap();
        assert_abs_diff_eq!(lg[(0, 0)], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lg[(1, 1)], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lg[(0, 1)], 0.0, epsilon = 1e-12);
        let wn = lie_metric_weight_normalized(&space, &dil, &x).unwrap();
        for v in wn.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_xi_flat_space_lie_gamma_vanishes() {
        let space = ConnectionSpace::flat(2);
        let xi = TensorField::vector(ArrayField::constant(arr1(&[0.3, -0.7]).into_dyn()));
        let x = pt(&[0.1, 0.9]);
        for source in [LieGammaSource::ClosedForm, LieGammaSource::Identity] {
            let lg = lie_derivative_connection(&space, &xi, &x, source).unwrap();
            for v in lg.l.iter() {
                assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn linear_xi_flat_space_is_affine_collineation() {
        let space = ConnectionSpace::flat(2);
        let xi = TensorField::vector(poly_array_field(
            2,
            vec![2],
            vec![
                MultiPoly::new(2, vec![(0.4, vec![1, 0]), (-0.2, vec![0, 1])]),
                MultiPoly::new(2, vec![(0.9, vec![1, 0]), (0.3, vec![0, 1])]),
            ],
        ));
        let x = pt(&[0.2, 0.5]);
        let lg = lie_derivative_connection(&space, &xi, &x, LieGammaSource::ClosedForm).unwrap();
        for v in lg.l.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
        let drag = lie_derivative_connection(
            &space,
            &xi,
            &x,
            LieGammaSource::Dragging(DraggingProbe::default()),
        )
        .unwrap();
        for v in drag.l.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-10);
        }
    }
}
