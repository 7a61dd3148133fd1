//! Anholonomy, torsion, curvature, Ricci, and Thomas projective parameters.

use crate::error::Result;
use crate::manifold::{frame_partial, ConnectionSpace};
use crate::point::ChartPoint;
use ndarray::{Array2, Array3, Array4, Ix2};

/// Curvature components R^i_{jkl}, slots [i][j][k][l]; antisymmetric in the
/// last two slots by construction.
#[derive(Debug, Clone)]
pub struct CurvatureValue {
    pub r: Array4<f64>,
    pub point: ChartPoint,
}

/// Torsion components T^i_{jk}; exactly antisymmetric in the lower slots.
#[derive(Debug, Clone)]
pub struct TorsionValue {
    pub t: Array3<f64>,
    pub point: ChartPoint,
}

/// Anholonomy object C^i_{jk} = −2 A^i_alpha A^alpha_{[j,k]}, i.e.
/// C^i_{jk} = A^i_alpha (E_j(A_k^alpha) − E_k(A_j^alpha)); zero for
/// coordinate frames.
pub fn anholonomy(space: &ConnectionSpace, x: &ChartPoint) -> Result<Array3<f64>> {
    let n = space.dim();
    if space.frame().is_identity() {
        return Ok(Array3::zeros((n, n, n)));
    }
    let inv = space.frame_inverse(x)?; // A^i_alpha, [i][alpha]
    let mut da = Vec::with_capacity(n);
    for j in 0..n {
        da.push(
            frame_partial(space.frame(), space.frame().field(), x, j)?
                .into_dimensionality::<Ix2>()
                .expect("frame shape"),
        ); // da[j][(k, alpha)] = E_j(A_k^alpha)
    }
    let mut c = Array3::<f64>::zeros((n, n, n));
    for i in 0..n {
        for j in 0..n {
            for k in (j + 1)..n {
                let mut v = 0.0;
                for alpha in 0..n {
                    v += inv[(i, alpha)] * (da[j][(k, alpha)] - da[k][(j, alpha)]);
                }
                c[(i, j, k)] = v;
                c[(i, k, j)] = -v;
            }
        }
    }
    Ok(c)
}

/// T^i_{jk} = −2 Γ^i_{[jk]} − C^i_{jk}.
pub fn torsion(space: &ConnectionSpace, x: &ChartPoint) -> Result<TorsionValue> {
    let n = space.dim();
    let g = space.gamma(x)?;
    let c = anholonomy(space, x)?;
    let mut t = Array3::<f64>::zeros((n, n, n));
    for i in 0..n {
        for j in 0..n {
            for k in (j + 1)..n {
                let v = g[(i, k, j)] - g[(i, j, k)] - c[(i, j, k)];
                t[(i, j, k)] = v;
                t[(i, k, j)] = -v;
            }
        }
    }
    Ok(TorsionValue {
        t,
        point: x.clone(),
    })
}

/// R^i_{jkl} = −2Γ^i_{j[k,l]} − 2Γ^n_{j[k} Γ^i_{|n|l]} − Γ^i_{jn} C^n_{kl},
/// expanded as E_k Γ^i_{jl} − E_l Γ^i_{jk} + Γ^n_{jl}Γ^i_{nk} − Γ^n_{jk}Γ^i_{nl}
/// − Γ^i_{jn}C^n_{kl}; the [kl] antisymmetry is built in.
pub fn curvature(space: &ConnectionSpace, x: &ChartPoint) -> Result<CurvatureValue> {
    let n = space.dim();
    let g = space.gamma(x)?;
    let c = anholonomy(space, x)?;
    let mut dg = Vec::with_capacity(n);
    for l in 0..n {
        dg.push(space.gamma_frame_partial(x, l)?);
    }
    let mut r = Array4::<f64>::zeros((n, n, n, n));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in (k + 1)..n {
                    let mut v = dg[k][(i, j, l)] - dg[l][(i, j, k)];
                    for m in 0..n {
                        v += g[(m, j, l)] * g[(i, m, k)] - g[(m, j, k)] * g[(i, m, l)];
                        v -= g[(i, j, m)] * c[(m, k, l)];
                    }
                    r[(i, j, k, l)] = v;
                    r[(i, j, l, k)] = -v;
                }
            }
        }
    }
    Ok(CurvatureValue {
        r,
        point: x.clone(),
    })
}

/// Ricci contraction R_{ij} = R^k_{ijk} (upper index with the last lower slot).
pub fn ricci(r: &CurvatureValue) -> Array2<f64> {
    let n = r.r.shape()[0];
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += r.r[(k, i, j, k)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// Thomas projective parameters
/// Π^i_{jk} = Γ^i_{(jk)} − (δ^i_j γ_k + δ^i_k γ_j)/(n+1) with γ_k = Γ^l_{(lk)};
/// symmetric in (j,k) and trace-free.
pub fn thomas_projective(space: &ConnectionSpace, x: &ChartPoint) -> Result<Array3<f64>> {
    let g = space.gamma(x)?;
    Ok(thomas_from_gamma(&g))
}

/// The same algebraic combination applied to any [k][i][j] array; also used to
/// push Lie derivatives of Γ through to Lie derivatives of Π.
pub fn thomas_from_gamma(g: &Array3<f64>) -> Array3<f64> {
    let n = g.shape()[0];
    let mut sym = Array3::<f64>::zeros((n, n, n));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                sym[(i, j, k)] = 0.5 * (g[(i, j, k)] + g[(i, k, j)]);
            }
        }
    }
    let mut trace = vec![0.0; n];
    for k in 0..n {
        for l in 0..n {
            trace[k] += sym[(l, l, k)];
        }
    }
    let w = 1.0 / (n as f64 + 1.0);
    let mut out = Array3::<f64>::zeros((n, n, n));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = sym[(i, j, k)];
                if i == j {
                    v -= w * trace[k];
                }
                if i == k {
                    v -= w * trace[j];
                }
                out[(i, j, k)] = v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ArrayField;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr2, Array3 as A3};

    fn pt(c: &[f64]) -> ChartPoint {
        ChartPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn coordinate_frame_has_no_anholonomy() {
        let space = ConnectionSpace::flat(3);
        let c = anholonomy(&space, &pt(&[0.3, -0.2, 1.0])).unwrap();
        assert_eq!(c.iter().filter(|v| **v != 0.0).count(), 0);
    }

    #[test]
    fn constant_frame_has_no_anholonomy() {
        let a = ArrayField::constant(arr2(&[[1.0, 0.5], [-0.25, 2.0]]).into_dyn());
        let frame = crate::manifold::FrameField::new(2, a).unwrap();
        let space =
            ConnectionSpace::new(frame, crate::manifold::ConnectionField::zero(2)).unwrap();
        let c = anholonomy(&space, &pt(&[1.0, 2.0])).unwrap();
        for v in c.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sheared_frame_anholonomy_matches_hand_value() {
        // A_0 = (1, 0), A_1 = (0, x1): C^1_{01} = 1/x1, evaluated at x = (2, 1).
        let a = ArrayField::new(vec![2, 2], |p: &ChartPoint| {
            Ok(arr2(&[[1.0, 0.0], [0.0, p[0]]]).into_dyn())
        });
        let frame = crate::manifold::FrameField::new(2, a).unwrap();
        let space =
            ConnectionSpace::new(frame, crate::manifold::ConnectionField::zero(2)).unwrap();
        let c = anholonomy(&space, &pt(&[2.0, 1.0])).unwrap();
        assert_abs_diff_eq!(c[(1, 0, 1)], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(c[(1, 1, 0)], -0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(c[(0, 0, 1)], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn antisymmetric_gamma_torsion() {
        // Γ^1_{12} = c, Γ^1_{21} = −c → T^1_{12} = −2c.
        let c = 0.7;
        let mut g = A3::<f64>::zeros((2, 2, 2));
        g[(0, 0, 1)] = c;
        g[(0, 1, 0)] = -c;
        let space =
            ConnectionSpace::coordinate(2, ArrayField::constant(g.into_dyn())).unwrap();
        let t = torsion(&space, &pt(&[0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(t.t[(0, 0, 1)], -2.0 * c, epsilon = 1e-14);
        assert_abs_diff_eq!(t.t[(0, 1, 0)], 2.0 * c, epsilon = 1e-14);
    }

    #[test]
    fn symmetric_gamma_is_torsion_free() {
        let mut g = A3::<f64>::zeros((2, 2, 2));
        g[(0, 0, 1)] = 0.4;
        g[(0, 1, 0)] = 0.4;
        g[(1, 1, 1)] = -0.3;
        let space =
            ConnectionSpace::coordinate(2, ArrayField::constant(g.into_dyn())).unwrap();
        let t = torsion(&space, &pt(&[0.1, 0.2])).unwrap();
        for v in t.t.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn flat_space_curvature_vanishes() {
        let space = ConnectionSpace::flat(2);
        let r = curvature(&space, &pt(&[0.5, 0.5])).unwrap();
        for v in r.r.iter() {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn thomas_traces_vanish() {
        let mut g = A3::<f64>::zeros((3, 3, 3));
        for (idx, v) in g.indexed_iter_mut() {
            let (i, j, k) = idx;
            *v = 0.1 * (i as f64 + 1.0) - 0.07 * (j as f64) * (k as f64 + 0.5);
        }
        let pi = thomas_from_gamma(&g);
        for j in 0..3 {
            let mut tr1 = 0.0;
            let mut tr2 = 0.0;
            for l in 0..3 {
                tr1 += pi[(l, l, j)];
                tr2 += pi[(l, j, l)];
            }
            assert_abs_diff_eq!(tr1, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(tr2, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(tr1 + tr2, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn thomas_projective_invariance() {
        // Γ and Γ + δ^i_j ψ_k + δ^i_k ψ_j share Π.
        let mut g = A3::<f64>::zeros((3, 3, 3));
        for (idx, v) in g.indexed_iter_mut() {
            let (i, j, k) = idx;
            *v = 0.2 * (i as f64) - 0.13 * (j as f64 + 1.0) + 0.31 * (k as f64);
        }
        let psi = [0.17, -0.41, 0.23];
        let mut g2 = g.clone();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    if i == j {
                        g2[(i, j, k)] += psi[k];
                    }
                    if i == k {
                        g2[(i, j, k)] += psi[j];
                    }
                }
            }
        }
        let p1 = thomas_from_gamma(&g);
        let p2 = thomas_from_gamma(&g2);
        for (a, b) in p1.iter().zip(p2.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
    }
}
