//! Catalog of built-in spaces used by the CLI and the test suites, each with
//! its expected classification truth table.

use crate::curvature::curvature;
use crate::deviation::geodesic_torsion_tensor;
use crate::error::{GeomError, Result};
use crate::field::ArrayField;
use crate::manifold::{ConnectionField, ConnectionSpace, FrameField, MetricField};
use crate::numerics::linalg;
use crate::point::ChartPoint;
use ndarray::{Array1, Array2, Array3, Ix2};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    FlatCartesian { n: usize },
    FlatPolarFrame,
    ConstantTorsion { c: f64 },
    Sphere { a: f64, dim: usize },
    Schwarzschild { mass: f64 },
    WeylExample { sigma_slope: f64, w: [f64; 3] },
    Compensation,
}

impl Builtin {
    /// Resolves a scenario (name, params) pair.
    pub fn parse(name: &str, params: &BTreeMap<String, f64>) -> Result<Builtin> {
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let b = match name {
            "flat-cartesian" => Builtin::FlatCartesian {
                n: get("n", 2.0) as usize,
            },
            "flat-polar-frame" => Builtin::FlatPolarFrame,
            "constant-torsion" => Builtin::ConstantTorsion { c: get("c", 0.5) },
            "sphere" => Builtin::Sphere {
                a: get("a", 1.0),
                dim: get("n", 2.0) as usize,
            },
            "schwarzschild" => Builtin::Schwarzschild {
                mass: get("m", 1.0),
            },
            "weyl-example" => Builtin::WeylExample {
                sigma_slope: get("sigma", 0.3),
                w: [get("w1", 0.4), get("w2", -0.3), get("w3", 0.2)],
            },
            "compensation" => Builtin::Compensation,
            _ => {
                return Err(GeomError::InvalidArgument(format!(
                    "unknown builtin space `{name}`"
                )))
            }
        };
        Ok(b)
    }

    pub fn build(&self) -> Result<ConnectionSpace> {
        match self {
            Builtin::FlatCartesian { n } => flat_cartesian(*n),
            Builtin::FlatPolarFrame => flat_polar_frame(),
            Builtin::ConstantTorsion { c } => constant_torsion(*c),
            Builtin::Sphere { a, dim } => match dim {
                2 => sphere2(*a),
                3 => sphere3(*a),
                _ => Err(GeomError::InvalidArgument(
                    "sphere builtin supports n = 2 or 3".into(),
                )),
            },
            Builtin::Schwarzschild { mass } => schwarzschild(*mass),
            Builtin::WeylExample { sigma_slope, w } => weyl_example(*sigma_slope, *w),
            Builtin::Compensation => Ok(compensation_setup()?.space),
        }
    }

    /// Ground-truth classification booleans for this space.
    pub fn expected_classes(&self) -> Vec<(&'static str, bool)> {
        match self {
            Builtin::FlatCartesian { .. } => vec![
                ("torsion-free", true),
                ("flat", true),
                ("equiaffine", true),
                ("1-recurrent", true),
                ("semi-metric", true),
                ("metric-transport", true),
                ("einstein", true),
            ],
            Builtin::FlatPolarFrame => vec![
                ("torsion-free", true),
                ("flat", true),
                ("equiaffine", true),
                ("semi-metric", true),
                ("metric-transport", true),
                ("einstein", true),
            ],
            Builtin::ConstantTorsion { .. } => vec![
                ("torsion-free", false),
                ("flat", true),
                ("equiaffine", true),
            ],
            Builtin::Sphere { .. } => vec![
                ("torsion-free", true),
                ("flat", false),
                ("equiaffine", true),
                ("1-recurrent", true),
                ("metric-transport", true),
                ("semi-metric", true),
                ("einstein", true),
            ],
            Builtin::Schwarzschild { .. } => vec![
                ("torsion-free", true),
                ("flat", false),
                ("equiaffine", true),
                ("metric-transport", true),
                ("einstein", true),
            ],
            Builtin::WeylExample { .. } => vec![
                ("torsion-free", true),
                ("semi-metric", true),
                ("metric-transport", false),
            ],
            Builtin::Compensation => vec![("torsion-free", false), ("flat", false)],
        }
    }

    /// A coordinate box where the space is regular, for sampling.
    pub fn sample_box(&self) -> Vec<(f64, f64)> {
        match self {
            Builtin::FlatCartesian { n } => vec![(-1.0, 1.0); *n],
            Builtin::FlatPolarFrame => vec![(0.5, 2.0), (0.4, 1.8)],
            Builtin::ConstantTorsion { .. } | Builtin::Compensation => vec![(-1.0, 1.0); 2],
            Builtin::Sphere { dim, .. } => {
                let mut b = vec![(0.4, std::f64::consts::PI - 0.4); dim - 1];
                b.push((0.0, 2.0));
                b
            }
            Builtin::Schwarzschild { mass } => vec![
                (0.0, 10.0),
                (8.0 * mass, 20.0 * mass),
                (0.7, std::f64::consts::PI - 0.7),
                (0.0, 2.0),
            ],
            Builtin::WeylExample { .. } => vec![(-0.8, 0.8); 3],
        }
    }
}

fn euclidean_metric(n: usize) -> Result<MetricField> {
    MetricField::new(n, ArrayField::constant(Array2::<f64>::eye(n).into_dyn()))
}

fn flat_cartesian(n: usize) -> Result<ConnectionSpace> {
    if n < 2 {
        return Err(GeomError::DimensionMismatch { expected: 2, got: n });
    }
    ConnectionSpace::flat(n).with_metric(euclidean_metric(n)?)
}

/// Flat 2-space in the anholonomic {radial-unit, azimuthal} frame over the
/// Cartesian chart; Γ comes from transporting the zero connection into that
/// frame, so its curvature and torsion must vanish in frame components too.
fn flat_polar_frame() -> Result<ConnectionSpace> {
    let a_field = ArrayField::new(vec![2, 2], |p: &ChartPoint| {
        let (x, y) = (p[0], p[1]);
        let r = (x * x + y * y).sqrt();
        if r < 1e-12 {
            return Err(GeomError::SingularFrame {
                point: p.to_vec(),
                det: 0.0,
            });
        }
        Ok(ndarray::arr2(&[[x / r, y / r], [-y, x]]).into_dyn())
    })
    .with_partials(|p: &ChartPoint, alpha| {
        let (x, y) = (p[0], p[1]);
        let r3 = (x * x + y * y).powf(1.5);
        let d = match alpha {
            0 => ndarray::arr2(&[[y * y / r3, -x * y / r3], [0.0, 1.0]]),
            _ => ndarray::arr2(&[[-x * y / r3, x * x / r3], [-1.0, 0.0]]),
        };
        Ok(d.into_dyn())
    });
    let frame = FrameField::new(2, a_field.clone())?;

    // Γ^{i'}_{j'k'} = A^{i'}_alpha E_{k'}(A^alpha_{j'}) with the coordinate
    // connection zero; E_{k'} = A_{k'}^beta d_beta.
    let gamma = ArrayField::new(vec![2, 2, 2], move |p: &ChartPoint| {
        let a = a_field.eval(p)?.into_dimensionality::<Ix2>().expect("2x2");
        let d = linalg::det(&a);
        if !d.is_finite() || d.abs() < 1e-12 {
            return Err(GeomError::SingularFrame {
                point: p.to_vec(),
                det: d,
            });
        }
        let inv = linalg::inverse(&a, 1e-12)?; // inv[(alpha, i)] = A^i_alpha
        let da: Vec<Array2<f64>> = (0..2)
            .map(|beta| {
                a_field
                    .coord_partial(p, beta)
                    .map(|m| m.into_dimensionality::<Ix2>().expect("2x2"))
            })
            .collect::<Result<_>>()?;
        let mut g = Array3::<f64>::zeros((2, 2, 2));
        for ip in 0..2 {
            for jp in 0..2 {
                for kp in 0..2 {
                    let mut s = 0.0;
                    for alpha in 0..2 {
                        let mut e_kp = 0.0;
                        for beta in 0..2 {
                            e_kp += a[(kp, beta)] * da[beta][(jp, alpha)];
                        }
                        s += inv[(alpha, ip)] * e_kp;
                    }
                    g[(ip, jp, kp)] = s;
                }
            }
        }
        Ok(g.into_dyn())
    });
    // Euclidean metric in this frame: E_r is unit, E_phi has length r.
    let metric = MetricField::new(
        2,
        ArrayField::new(vec![2, 2], |p: &ChartPoint| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            Ok(ndarray::arr2(&[[1.0, 0.0], [0.0, r2]]).into_dyn())
        })
        .with_partials(|p: &ChartPoint, alpha| {
            let d = match alpha {
                0 => ndarray::arr2(&[[0.0, 0.0], [0.0, 2.0 * p[0]]]),
                _ => ndarray::arr2(&[[0.0, 0.0], [0.0, 2.0 * p[1]]]),
            };
            Ok(d.into_dyn())
        }),
    )?;
    ConnectionSpace::new(frame, ConnectionField::new(2, gamma)?)?.with_metric(metric)
}

/// Flat 2-space with constant torsion: Γ^1_{21} = c is the only nonzero
/// component, so the Γ-matrices commute (curvature vanishes) while
/// T^1_{12} = c.
fn constant_torsion(c: f64) -> Result<ConnectionSpace> {
    let mut g = Array3::<f64>::zeros((2, 2, 2));
    g[(0, 1, 0)] = c;
    ConnectionSpace::coordinate(2, ArrayField::constant(g.into_dyn()))
}

fn sphere2(a: f64) -> Result<ConnectionSpace> {
    let gamma = ArrayField::new(vec![2, 2, 2], |p: &ChartPoint| {
        let th = p[0];
        let mut g = Array3::<f64>::zeros((2, 2, 2));
        g[(0, 1, 1)] = -th.sin() * th.cos();
        let cot = th.cos() / th.sin();
        g[(1, 0, 1)] = cot;
        g[(1, 1, 0)] = cot;
        Ok(g.into_dyn())
    })
    .with_partials(|p: &ChartPoint, alpha| {
        let th = p[0];
        let mut d = Array3::<f64>::zeros((2, 2, 2));
        if alpha == 0 {
            d[(0, 1, 1)] = th.sin().powi(2) - th.cos().powi(2);
            let dcot = -1.0 / th.sin().powi(2);
            d[(1, 0, 1)] = dcot;
            d[(1, 1, 0)] = dcot;
        }
        Ok(d.into_dyn())
    });
    let a2 = a * a;
    let metric = MetricField::new(
        2,
        ArrayField::new(vec![2, 2], move |p: &ChartPoint| {
            let th = p[0];
            Ok(ndarray::arr2(&[[a2, 0.0], [0.0, a2 * th.sin().powi(2)]]).into_dyn())
        })
        .with_partials(move |p: &ChartPoint, alpha| {
            let th = p[0];
            let mut d = Array2::<f64>::zeros((2, 2));
            if alpha == 0 {
                d[(1, 1)] = 2.0 * a2 * th.sin() * th.cos();
            }
            Ok(d.into_dyn())
        }),
    )?;
    ConnectionSpace::coordinate(2, gamma)?.with_metric(metric)
}

fn sphere3(a: f64) -> Result<ConnectionSpace> {
    let gamma = ArrayField::new(vec![3, 3, 3], |p: &ChartPoint| {
        let (ch, th) = (p[0], p[1]);
        let mut g = Array3::<f64>::zeros((3, 3, 3));
        let cotch = ch.cos() / ch.sin();
        let cotth = th.cos() / th.sin();
        g[(0, 1, 1)] = -ch.sin() * ch.cos();
        g[(0, 2, 2)] = -ch.sin() * ch.cos() * th.sin().powi(2);
        g[(1, 0, 1)] = cotch;
        g[(1, 1, 0)] = cotch;
        g[(1, 2, 2)] = -th.sin() * th.cos();
        g[(2, 0, 2)] = cotch;
        g[(2, 2, 0)] = cotch;
        g[(2, 1, 2)] = cotth;
        g[(2, 2, 1)] = cotth;
        Ok(g.into_dyn())
    })
    .with_partials(|p: &ChartPoint, alpha| {
        let (ch, th) = (p[0], p[1]);
        let mut d = Array3::<f64>::zeros((3, 3, 3));
        match alpha {
            0 => {
                let dcotch = -1.0 / ch.sin().powi(2);
                d[(0, 1, 1)] = ch.sin().powi(2) - ch.cos().powi(2);
                d[(0, 2, 2)] = (ch.sin().powi(2) - ch.cos().powi(2)) * th.sin().powi(2);
                d[(1, 0, 1)] = dcotch;
                d[(1, 1, 0)] = dcotch;
                d[(2, 0, 2)] = dcotch;
                d[(2, 2, 0)] = dcotch;
            }
            1 => {
                let dcotth = -1.0 / th.sin().powi(2);
                d[(0, 2, 2)] = -2.0 * ch.sin() * ch.cos() * th.sin() * th.cos();
                d[(1, 2, 2)] = th.sin().powi(2) - th.cos().powi(2);
                d[(2, 1, 2)] = dcotth;
                d[(2, 2, 1)] = dcotth;
            }
            _ => {}
        }
        Ok(d.into_dyn())
    });
    let a2 = a * a;
    let metric = MetricField::new(
        3,
        ArrayField::new(vec![3, 3], move |p: &ChartPoint| {
            let (ch, th) = (p[0], p[1]);
            let mut g = Array2::<f64>::zeros((3, 3));
            g[(0, 0)] = a2;
            g[(1, 1)] = a2 * ch.sin().powi(2);
            g[(2, 2)] = a2 * ch.sin().powi(2) * th.sin().powi(2);
            Ok(g.into_dyn())
        })
        .with_partials(move |p: &ChartPoint, alpha| {
            let (ch, th) = (p[0], p[1]);
            let mut d = Array2::<f64>::zeros((3, 3));
            match alpha {
                0 => {
                    d[(1, 1)] = 2.0 * a2 * ch.sin() * ch.cos();
                    d[(2, 2)] = 2.0 * a2 * ch.sin() * ch.cos() * th.sin().powi(2);
                }
                1 => {
                    d[(2, 2)] = 2.0 * a2 * ch.sin().powi(2) * th.sin() * th.cos();
                }
                _ => {}
            }
            Ok(d.into_dyn())
        }),
    )?;
    ConnectionSpace::coordinate(3, gamma)?.with_metric(metric)
}

/// Schwarzschild exterior in (t, r, θ, φ), Levi-Civita connection, G = c = 1.
fn schwarzschild(mass: f64) -> Result<ConnectionSpace> {
    let m = mass;
    let gamma = ArrayField::new(vec![4, 4, 4], move |p: &ChartPoint| {
        let (r, th) = (p[1], p[2]);
        let f = 1.0 - 2.0 * m / r;
        if r <= 2.0 * m {
            return Err(GeomError::NonFinite {
                what: "Schwarzschild connection inside the horizon".into(),
                point: p.to_vec(),
            });
        }
        let mut g = Array3::<f64>::zeros((4, 4, 4));
        g[(0, 0, 1)] = m / (r * r * f);
        g[(0, 1, 0)] = g[(0, 0, 1)];
        g[(1, 0, 0)] = m * f / (r * r);
        g[(1, 1, 1)] = -m / (r * r * f);
        g[(1, 2, 2)] = -r * f;
        g[(1, 3, 3)] = -r * f * th.sin().powi(2);
        g[(2, 1, 2)] = 1.0 / r;
        g[(2, 2, 1)] = 1.0 / r;
        g[(2, 3, 3)] = -th.sin() * th.cos();
        g[(3, 1, 3)] = 1.0 / r;
        g[(3, 3, 1)] = 1.0 / r;
        g[(3, 2, 3)] = th.cos() / th.sin();
        g[(3, 3, 2)] = g[(3, 2, 3)];
        Ok(g.into_dyn())
    });
    let metric = MetricField::new(
        4,
        ArrayField::new(vec![4, 4], move |p: &ChartPoint| {
            let (r, th) = (p[1], p[2]);
            let f = 1.0 - 2.0 * m / r;
            let mut g = Array2::<f64>::zeros((4, 4));
            g[(0, 0)] = -f;
            g[(1, 1)] = 1.0 / f;
            g[(2, 2)] = r * r;
            g[(3, 3)] = r * r * th.sin().powi(2);
            Ok(g.into_dyn())
        }),
    )?
    .with_signature(vec![-1, 1, 1, 1]);
    ConnectionSpace::coordinate(4, gamma)?.with_metric(metric)
}

/// Conformally flat metric g = e^{2σ}δ with a Weyl connection adjusted so
/// that g_{ij|k} = w_k g_{ij} for the chosen constant covector w:
/// Γ^k_{ij} = LC^k_{ij} − (δ^k_i w_j + δ^k_j w_i − g_{ij} w^k)/2.
fn weyl_example(sigma_slope: f64, w: [f64; 3]) -> Result<ConnectionSpace> {
    let n = 3;
    let k = sigma_slope;
    // σ = k x1 → LC^k_{ij} = δ^k_i σ_j + δ^k_j σ_i − δ_{ij} σ^k is constant,
    // and g_{ij} w^k = δ_{ij} δ^{km} w_m is position-independent, so Γ is a
    // constant connection.
    let mut g = Array3::<f64>::zeros((n, n, n));
    let sig = [k, 0.0, 0.0];
    for kk in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                if kk == i {
                    v += sig[j];
                }
                if kk == j {
                    v += sig[i];
                }
                if i == j {
                    v -= sig[kk];
                }
                // Weyl part
                let mut dw = 0.0;
                if kk == i {
                    dw += w[j];
                }
                if kk == j {
                    dw += w[i];
                }
                if i == j {
                    dw -= w[kk];
                }
                g[(kk, i, j)] = v - 0.5 * dw;
            }
        }
    }
    let metric = MetricField::new(
        n,
        ArrayField::new(vec![n, n], move |p: &ChartPoint| {
            let e = (2.0 * k * p[0]).exp();
            Ok((Array2::<f64>::eye(n) * e).into_dyn())
        })
        .with_partials(move |p: &ChartPoint, alpha| {
            let mut d = Array2::<f64>::zeros((n, n));
            if alpha == 0 {
                let e = (2.0 * k * p[0]).exp();
                for i in 0..n {
                    d[(i, i)] = 2.0 * k * e;
                }
            }
            Ok(d.into_dyn())
        }),
    )?;
    ConnectionSpace::coordinate(n, ArrayField::constant(g.into_dyn()))?.with_metric(metric)
}

/// The compensation builtin together with the geodesic data that realizes the
/// curvature/torsion cancellation.
#[derive(Debug, Clone)]
pub struct CompensationSetup {
    pub space: ConnectionSpace,
    pub x0: ChartPoint,
    pub u0: Array1<f64>,
    pub xi: Array1<f64>,
}

fn compensation_candidate(b1: f64, b2: f64) -> Result<ConnectionSpace> {
    let mut s = Array3::<f64>::zeros((2, 2, 2));
    s[(0, 0, 1)] = 0.3;
    s[(0, 1, 0)] = 0.3;
    s[(0, 1, 1)] = 0.4;
    s[(1, 0, 1)] = -0.2;
    s[(1, 1, 0)] = -0.2;
    s[(1, 1, 1)] = 0.5;
    let b = [b1, b2];
    for k in 0..2 {
        s[(k, 0, 1)] += b[k];
        s[(k, 1, 0)] -= b[k];
    }
    ConnectionSpace::coordinate(2, ArrayField::constant(s.into_dyn()))
}

/// Column of the tidal operator M = Mc + Mt acting on e2, see `tidal` tests:
/// the compensated direction must be a null vector of M.
fn compensation_column(space: &ConnectionSpace, x: &ChartPoint) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = 2;
    let u = Array1::from(vec![1.0, 0.0]);
    let r = curvature(space, x)?;
    let g = space.gamma(x)?;
    let mut ucov = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for l in 0..n {
            ucov[(i, l)] = g[(i, 0, l)];
        }
    }
    let tk = geodesic_torsion_tensor(space, x, &u, &ucov)?;
    let mut mc = Array1::<f64>::zeros(n);
    let mut mt = Array1::<f64>::zeros(n);
    for k in 0..n {
        mc[k] = r.r[(k, 0, 0, 1)];
        mt[k] = tk[(k, 1)];
    }
    Ok((mc, mt))
}

/// Builds the compensation space: the symmetric part of Γ is fixed, the
/// torsion strength b1 is chosen, and b2 is solved by bisection so that the
/// tidal operator annihilates ξ = e2 while the curvature part stays finite.
pub fn compensation_setup() -> Result<CompensationSetup> {
    let x0 = ChartPoint::new(vec![0.0, 0.0])?;
    let b1 = -0.2;
    let m01 = |b2: f64| -> Result<f64> {
        let sp = compensation_candidate(b1, b2)?;
        let (mc, mt) = compensation_column(&sp, &x0)?;
        Ok(mc[0] + mt[0])
    };
    let (mut lo, mut hi) = (-1.0, 0.5);
    let (flo, fhi) = (m01(lo)?, m01(hi)?);
    if flo * fhi > 0.0 {
        return Err(GeomError::InvalidArgument(
            "compensation construction: no sign change in the bracket".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = m01(mid)?;
        if flo * fm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo).abs() < 1e-15 {
            break;
        }
    }
    let b2 = 0.5 * (lo + hi);
    let space = compensation_candidate(b1, b2)?;
    let (mc, mt) = compensation_column(&space, &x0)?;
    let sum = [(mc[0] + mt[0]).abs(), (mc[1] + mt[1]).abs()];
    if sum[0].max(sum[1]) > 1e-9 {
        return Err(GeomError::InvalidArgument(format!(
            "compensation construction did not cancel: residual {:?}",
            sum
        )));
    }
    Ok(CompensationSetup {
        space,
        x0,
        u0: Array1::from(vec![1.0, 0.0]),
        xi: Array1::from(vec![0.0, 1.0]),
    })
}

/// All builtin names the scenario format accepts.
pub fn builtin_names() -> &'static [&'static str] {
    &[
        "flat-cartesian",
        "flat-polar-frame",
        "constant-torsion",
        "sphere",
        "schwarzschild",
        "weyl-example",
        "compensation",
    ]
}
