//! Right-hand-side assembly for the generalized deviation equation, its
//! condition variants, and the geodesic/deviation integrators.
//!
//! The assembly convention throughout: the engine returns D̄V^k/ds, the second
//! covariant s-derivative of the deviation vector in frame components. Along
//! the base trajectory D̄w^k/ds = dw^k/ds + Γ^k_{li} w^l u^i.

use crate::curvature::{curvature, torsion};
use crate::error::{GeomError, Result};
use crate::field::ArrayField;
use crate::lie::{lie_bracket, lie_derivative_connection, lie_derivative_tensor, LieGammaSource};
use crate::manifold::{ConnectionSpace, Rank3Fn, TensorField, VecFn};
use crate::numerics::fd::FdScheme;
use crate::numerics::ode::{ode_integrate, IntegratorSettings};
use crate::point::ChartPoint;
use ndarray::{Array1, Array2, Array3, Ix1, IxDyn};
use std::sync::Arc;

/// One stored node of a base trajectory.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub s: f64,
    pub x: ChartPoint,
    pub u_coord: Array1<f64>,
    pub u_frame: Array1<f64>,
}

/// A trajectory as a sampled time series; Eq-(1.3)-style tangent consistency
/// between stored positions and tangents is checkable after the fact.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub s_range: (f64, f64),
}

impl Trajectory {
    /// Max residual of u^alpha against the centered difference of stored
    /// positions; a consistency diagnostic for densely sampled trajectories.
    pub fn tangent_consistency_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.samples.windows(3) {
            let ds = w[2].s - w[0].s;
            if ds.abs() < 1e-300 {
                continue;
            }
            for a in 0..w[1].u_coord.len() {
                let fd = (w[2].x[a] - w[0].x[a]) / ds;
                worst = worst.max((fd - w[1].u_coord[a]).abs());
            }
        }
        worst
    }
}

/// Observer state along the base trajectory: parameter, position, tangent,
/// deviation vector, relative velocity (all vectors in frame components).
#[derive(Debug, Clone)]
pub struct DeviationState {
    pub s: f64,
    pub x: ChartPoint,
    pub u: Array1<f64>,
    pub xi: Array1<f64>,
    pub v: Array1<f64>,
}

/// Force term F^k = D̄u^k/ds = u^k_{|i} u^i.
#[derive(Debug, Clone)]
pub struct ForceTerm(pub Array1<f64>);

/// The additional condition closing the deviation equation.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionVariant {
    /// Eq. (1.4) as it stands; £_ξΓ from a callback or from the ξ-field.
    Generalized,
    /// F = 0 (geodesic base).
    GeodesicForceFree,
    /// £_ξ u = 0.
    LieUZero,
    /// u^i_{|k} = 0 (parallel tangent field).
    ParallelU,
    /// £_ξ F = −F.
    LieFMinusF,
    /// u = ξ.
    UEqualsXi,
    /// u^i u^j £_ξΓ^k_{ij} = −(F^k + ξ^k_{|j} F^j) absorbed into the left side.
    AbsorbedLieGamma,
    /// Two-parameter family of curves (first integral £_ξ u = 0).
    Family,
    /// Free particles: geodesic base and £_ξ u = 0.
    FreeParticles,
    /// Dragged-structure condition with w = dr1/dr.
    Dragged,
}

impl ConditionVariant {
    pub fn tag(&self) -> &'static str {
        match self {
            ConditionVariant::Generalized => "generalized",
            ConditionVariant::GeodesicForceFree => "geodesic",
            ConditionVariant::LieUZero => "lie-u-zero",
            ConditionVariant::ParallelU => "parallel-u",
            ConditionVariant::LieFMinusF => "lie-f-minus-f",
            ConditionVariant::UEqualsXi => "u-equals-xi",
            ConditionVariant::AbsorbedLieGamma => "absorbed-lie-gamma",
            ConditionVariant::Family => "family",
            ConditionVariant::FreeParticles => "free-particles",
            ConditionVariant::Dragged => "dragged",
        }
    }
}

/// Scalar callbacks of the curve parameter for the dragged condition.
#[derive(Clone)]
pub struct DragData {
    pub w: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub dlnw_ds: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

/// Condition-specific auxiliary inputs. Field extensions are needed wherever
/// the condition's terms involve derivatives transverse to the trajectory.
#[derive(Clone, Default)]
pub struct DeviationAux {
    pub u_field: Option<TensorField>,
    pub xi_field: Option<TensorField>,
    /// Overrides the closed-form £_ξΓ (generalized/dragged tags).
    pub lie_gamma: Option<Rank3Fn>,
    /// £_ξF along the trajectory (dragged tag).
    pub lie_force: Option<VecFn>,
    pub drag: Option<DragData>,
    /// Asserts the base family consists of geodesics (F ≡ 0 off-trajectory
    /// as well); lets the family/free tags run without a u-field when the
    /// space is torsion-free.
    pub geodesic_base: bool,
    /// Tolerance for hypothesis/contract validation.
    pub contract_tol: f64,
}

impl DeviationAux {
    pub fn new() -> Self {
        Self {
            contract_tol: 1e-6,
            ..Default::default()
        }
    }

    pub fn with_u_field(mut self, u: TensorField) -> Self {
        self.u_field = Some(u);
        self
    }

    pub fn with_xi_field(mut self, xi: TensorField) -> Self {
        self.xi_field = Some(xi);
        self
    }

    fn u_field_required(&self, condition: &ConditionVariant) -> Result<&TensorField> {
        self.u_field.as_ref().ok_or_else(|| GeomError::MissingAux {
            condition: condition.tag().into(),
            what: "a u-field extension of the tangent".into(),
        })
    }

    fn xi_field_required(&self, condition: &ConditionVariant) -> Result<&TensorField> {
        self.xi_field.as_ref().ok_or_else(|| GeomError::MissingAux {
            condition: condition.tag().into(),
            what: "a ξ-field extension of the deviation vector".into(),
        })
    }
}

fn max_abs(a: &Array1<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn max_abs3(a: &Array3<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// R^k_{ijl} u^i u^j ξ^l — the curvature term of Eq. (1.4), equal to the
/// frame components of R̂(u,ξ)u.
pub fn curvature_term(
    space: &ConnectionSpace,
    x: &ChartPoint,
    u: &Array1<f64>,
    xi: &Array1<f64>,
) -> Result<Array1<f64>> {
    let n = space.dim();
    let r = curvature(space, x)?;
    let mut out = Array1::<f64>::zeros(n);
    for k in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if u[j] == 0.0 {
                    continue;
                }
                for l in 0..n {
                    s += r.r[(k, i, j, l)] * u[i] * u[j] * xi[l];
                }
            }
        }
        out[k] = s;
    }
    Ok(out)
}

/// T̂(a,b)^k = T^k_{ij} a^i b^j.
pub fn torsion_contract(t: &Array3<f64>, a: &Array1<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = a.len();
    let mut out = Array1::<f64>::zeros(n);
    for k in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += t[(k, i, j)] * a[i] * b[j];
            }
        }
        out[k] = s;
    }
    out
}

/// Torsion components as a (1,2) tensor field of the space.
pub fn torsion_field(space: &ConnectionSpace) -> TensorField {
    let sp = space.clone();
    let n = space.dim();
    TensorField::new(
        (1, 2),
        ArrayField::new(vec![n, n, n], move |x| Ok(torsion(&sp, x)?.t.into_dyn())),
    )
}

/// u^i_{|l} of a u-field, as a matrix [(i, l)].
fn u_cov_matrix(space: &ConnectionSpace, u_field: &TensorField, x: &ChartPoint) -> Result<Array2<f64>> {
    let n = space.dim();
    let w = u_field.covariant_derivative(space).eval(x, n)?;
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for l in 0..n {
            out[(i, l)] = w.data[IxDyn(&[i, l])];
        }
    }
    Ok(out)
}

/// F^k = u^k_{|i} u^i from a surrounding u-field.
pub fn force_term_from_field(
    space: &ConnectionSpace,
    x: &ChartPoint,
    u_field: &TensorField,
) -> Result<ForceTerm> {
    let ucov = u_cov_matrix(space, u_field, x)?;
    let u = u_field.eval_vector(x)?;
    Ok(ForceTerm(ucov.dot(&u)))
}

/// F along a parametrized curve from its second derivative:
/// F^k = A^k_alpha (du^alpha/ds + Γc^alpha_{βγ} u^β u^γ), with Γc the
/// coordinate-frame connection.
pub fn force_term_from_curve(
    space: &ConnectionSpace,
    curve_x: &(dyn Fn(f64) -> Result<ChartPoint> + Sync),
    curve_u: &(dyn Fn(f64) -> Result<Array1<f64>> + Sync),
    s: f64,
) -> Result<ForceTerm> {
    let n = space.dim();
    let x = curve_x(s)?;
    let u = curve_u(s)?;
    // du/ds by Richardson-extrapolated central differences in s
    let fd = FdScheme::default();
    let h = fd.step_at(s);
    let d = |hh: f64| -> Result<Array1<f64>> { Ok((curve_u(s + hh)? - curve_u(s - hh)?) / (2.0 * hh)) };
    let d1 = d(h)?;
    let d2 = d(0.5 * h)?;
    let dudt = &d2 + &((&d2 - &d1) / 3.0);
    let gc = crate::manifold::coordinate_connection(space, &x)?;
    let mut acc = Array1::<f64>::zeros(n);
    for a in 0..n {
        let mut s_val = dudt[a];
        for b in 0..n {
            for g in 0..n {
                s_val += gc[(a, b, g)] * u[b] * u[g];
            }
        }
        acc[a] = s_val;
    }
    Ok(ForceTerm(space.to_frame_components(&x, &acc)?))
}

/// The force field F^k(x) = u^k_{|i}u^i as a composite vector field.
pub fn force_field(space: &ConnectionSpace, u_field: &TensorField) -> TensorField {
    let sp = space.clone();
    let uf = u_field.clone();
    let n = space.dim();
    TensorField::vector(ArrayField::new(vec![n], move |x| {
        Ok(force_term_from_field(&sp, x, &uf)?.0.into_dyn())
    }))
}

/// Mixed tensor of Eq. (4.6a):
/// T^k_l = −u^n ∇̄_n (T^k_{lj} u^j) + u^j T^k_{ji} (u^i_{|l} − T^i_{lm} u^m).
pub fn family_torsion_tensor(
    space: &ConnectionSpace,
    x: &ChartPoint,
    u_field: &TensorField,
) -> Result<Array2<f64>> {
    let n = space.dim();
    let sp = space.clone();
    let uf = u_field.clone();
    // W^k_l = T^k_{lj} u^j as a (1,1) field
    let w_field = TensorField::new(
        (1, 1),
        ArrayField::new(vec![n, n], move |p| {
            let t = torsion(&sp, p)?;
            let u = uf.eval_vector(p)?;
            let mut out = Array2::<f64>::zeros((n, n));
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += t.t[(k, l, j)] * u[j];
                    }
                    out[(k, l)] = s;
                }
            }
            Ok(out.into_dyn())
        }),
    );
    let wcov = w_field.covariant_derivative(space).eval(x, n)?;
    let u = u_field.eval_vector(x)?;
    let ucov = u_cov_matrix(space, u_field, x)?;
    let t = torsion(space, x)?;
    let mut out = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        for l in 0..n {
            let mut s = 0.0;
            for m in 0..n {
                s -= u[m] * wcov.data[IxDyn(&[k, l, m])];
            }
            for j in 0..n {
                for i in 0..n {
                    let mut inner = ucov[(i, l)];
                    for m in 0..n {
                        inner -= t.t[(i, l, m)] * u[m];
                    }
                    s += u[j] * t.t[(k, j, i)] * inner;
                }
            }
            out[(k, l)] = s;
        }
    }
    Ok(out)
}

/// Geodesic variant of the mixed torsion tensor, Eq. (4.10):
/// T^k_l = −T^k_{lj|n} u^j u^n + u^j T^k_{ji} (u^i_{|l} − T^i_{lm} u^m).
pub fn geodesic_torsion_tensor(
    space: &ConnectionSpace,
    x: &ChartPoint,
    u: &Array1<f64>,
    ucov: &Array2<f64>,
) -> Result<Array2<f64>> {
    let n = space.dim();
    let tcov = torsion_field(space).covariant_derivative(space).eval(x, n)?;
    let t = torsion(space, x)?;
    let mut out = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        for l in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                for m in 0..n {
                    s -= tcov.data[IxDyn(&[k, l, j, m])] * u[j] * u[m];
                }
            }
            for j in 0..n {
                for i in 0..n {
                    let mut inner = ucov[(i, l)];
                    for m in 0..n {
                        inner -= t.t[(i, l, m)] * u[m];
                    }
                    s += u[j] * t.t[(k, j, i)] * inner;
                }
            }
            out[(k, l)] = s;
        }
    }
    Ok(out)
}

/// Splits the free-particle tidal acceleration, Eq. (4.9), into its curvature
/// and torsion sources. Requires the free-particle hypotheses; a supplied
/// u-field is validated against them.
pub fn tidal_decomposition(
    space: &ConnectionSpace,
    state: &DeviationState,
    aux: &DeviationAux,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = space.dim();
    let curv = curvature_term(space, &state.x, &state.u, &state.xi)?;
    let t = torsion(space, &state.x)?;
    let torsion_scale = max_abs3(&t.t);
    if torsion_scale <= 1e-13 {
        return Ok((curv, Array1::zeros(n)));
    }
    let u_field = aux.u_field_required(&ConditionVariant::FreeParticles)?;
    let f = force_term_from_field(space, &state.x, u_field)?.0;
    if max_abs(&f) > aux.contract_tol * (1.0 + max_abs(&state.u).powi(2)) {
        return Err(GeomError::ContractViolation(format!(
            "free-particle condition needs F = 0; got |F| = {:.3e}",
            max_abs(&f)
        )));
    }
    let ucov = u_cov_matrix(space, u_field, &state.x)?;
    let tk = geodesic_torsion_tensor(space, &state.x, &state.u, &ucov)?;
    Ok((curv, tk.dot(&state.xi)))
}

/// ξ^k_{|j} at a point from a ξ-field.
fn xi_cov_matrix(space: &ConnectionSpace, xi_field: &TensorField, x: &ChartPoint) -> Result<Array2<f64>> {
    u_cov_matrix(space, xi_field, x)
}

/// u^j u^m (T^k_{jl} ξ^l)_{|m} with a full ξ-field (the Eq. 1.4 torsion term).
fn torsion_term_field(
    space: &ConnectionSpace,
    x: &ChartPoint,
    u: &Array1<f64>,
    xi_field: &TensorField,
) -> Result<Array1<f64>> {
    let n = space.dim();
    let sp = space.clone();
    let xf = xi_field.clone();
    let y = TensorField::new(
        (1, 1),
        ArrayField::new(vec![n, n], move |p| {
            let t = torsion(&sp, p)?;
            let xi = xf.eval_vector(p)?;
            let mut out = Array2::<f64>::zeros((n, n));
            for k in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += t.t[(k, j, l)] * xi[l];
                    }
                    out[(k, j)] = s;
                }
            }
            Ok(out.into_dyn())
        }),
    );
    let ycov = y.covariant_derivative(space).eval(x, n)?;
    let mut out = Array1::<f64>::zeros(n);
    for k in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            for m in 0..n {
                s += u[j] * u[m] * ycov.data[IxDyn(&[k, j, m])];
            }
        }
        out[k] = s;
    }
    Ok(out)
}

/// u^j u^m T^k_{jl|m} ξ^l + u^j T^k_{jl} V^l — the same torsion term expanded
/// along the trajectory (uses D̄ξ/ds = V instead of a ξ-field).
fn torsion_term_on_curve(
    space: &ConnectionSpace,
    x: &ChartPoint,
    u: &Array1<f64>,
    xi: &Array1<f64>,
    v: &Array1<f64>,
) -> Result<Array1<f64>> {
    let n = space.dim();
    let tcov = torsion_field(space).covariant_derivative(space).eval(x, n)?;
    let t = torsion(space, x)?;
    let mut out = Array1::<f64>::zeros(n);
    for k in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            for m in 0..n {
                for l in 0..n {
                    s += u[j] * u[m] * tcov.data[IxDyn(&[k, j, l, m])] * xi[l];
                }
            }
            for l in 0..n {
                s += u[j] * t.t[(k, j, l)] * v[l];
            }
        }
        out[k] = s;
    }
    Ok(out)
}

/// £_ξu as a composite vector field of both extensions.
fn lie_u_field(space: &ConnectionSpace, xi_field: &TensorField, u_field: &TensorField) -> TensorField {
    let sp = space.clone();
    let xf = xi_field.clone();
    let uf = u_field.clone();
    let n = space.dim();
    TensorField::vector(ArrayField::new(vec![n], move |x| {
        Ok(lie_bracket(&sp, &xf, &uf, x)?.into_dyn())
    }))
}

/// D̄w/ds = u^m w^k_{|m} of a composite vector field along the trajectory.
fn covariant_s_derivative(
    space: &ConnectionSpace,
    w_field: &TensorField,
    x: &ChartPoint,
    u: &Array1<f64>,
) -> Result<Array1<f64>> {
    let n = space.dim();
    let wcov = w_field.covariant_derivative(space).eval(x, n)?;
    let mut out = Array1::<f64>::zeros(n);
    for k in 0..n {
        let mut s = 0.0;
        for m in 0..n {
            s += u[m] * wcov.data[IxDyn(&[k, m])];
        }
        out[k] = s;
    }
    Ok(out)
}

struct FieldData {
    ucov: Array2<f64>,
    f: Array1<f64>,
}

fn field_data(space: &ConnectionSpace, u_field: &TensorField, x: &ChartPoint) -> Result<FieldData> {
    let u = u_field.eval_vector(x)?;
    let ucov = u_cov_matrix(space, u_field, x)?;
    let f = ucov.dot(&u);
    Ok(FieldData { ucov, f })
}

/// Assembles D̄²ξ^k/ds² for the chosen condition.
///
/// With a ξ-field the Eq. (1.4)/(1.4a) terms are evaluated as written; the
/// closed conditions (family, free particles, £_ξu = 0, u = ξ) also run from
/// trajectory data alone, with the transverse derivatives eliminated through
/// the condition. Hypotheses are validated against `aux.contract_tol` where
/// the supplied data allows it.
pub fn generalized_deviation_rhs(
    space: &ConnectionSpace,
    state: &DeviationState,
    condition: &ConditionVariant,
    aux: &DeviationAux,
) -> Result<Array1<f64>> {
    let n = space.dim();
    let x = &state.x;
    let u = &state.u;
    let xi = &state.xi;
    let r_term = curvature_term(space, x, u, xi)?;

    match condition {
        ConditionVariant::Generalized => {
            let u_field = aux.u_field_required(condition)?;
            let xi_field = aux.xi_field_required(condition)?;
            let fd = field_data(space, u_field, x)?;
            let xicov = xi_cov_matrix(space, xi_field, x)?;
            let xi_f: Array1<f64> = xicov.dot(&fd.f);
            let t_term = torsion_term_field(space, x, u, xi_field)?;
            let lg = match &aux.lie_gamma {
                Some(cb) => cb(x)?,
                None => {
                    lie_derivative_connection(space, xi_field, x, LieGammaSource::ClosedForm)?.l
                }
            };
            let mut out = r_term + &xi_f + &t_term;
            for k in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += u[i] * u[j] * lg[(k, i, j)];
                    }
                }
                out[k] += s;
            }
            Ok(out)
        }
        ConditionVariant::GeodesicForceFree | ConditionVariant::ParallelU => {
            // Eq. (1.4a) with F = 0 enforced by the hypothesis.
            let u_field = aux.u_field_required(condition)?;
            let xi_field = aux.xi_field_required(condition)?;
            let fd = field_data(space, u_field, x)?;
            let scale = 1.0 + max_abs(u).powi(2);
            if max_abs(&fd.f) > aux.contract_tol * scale {
                return Err(GeomError::ContractViolation(format!(
                    "condition `{}` needs F = 0; got |F| = {:.3e}",
                    condition.tag(),
                    max_abs(&fd.f)
                )));
            }
            if *condition == ConditionVariant::ParallelU {
                let m = fd.ucov.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if m > aux.contract_tol * scale {
                    return Err(GeomError::ContractViolation(format!(
                        "condition `parallel-u` needs u^i_{{|k}} = 0; got {m:.3e}"
                    )));
                }
            }
            let t_term = torsion_term_field(space, x, u, xi_field)?;
            let ff = force_field(space, u_field);
            let lie_f = lie_derivative_tensor(space, &ff, xi_field, x)?
                .data
                .into_dimensionality::<Ix1>()
                .expect("vector");
            let lu_field = lie_u_field(space, xi_field, u_field);
            let d_lu = covariant_s_derivative(space, &lu_field, x, u)?;
            let lu = lu_field.eval_vector(x)?;
            let mut out = r_term + &t_term + &lie_f - &d_lu;
            for k in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    s += fd.ucov[(k, i)] * lu[i];
                }
                out[k] -= s;
            }
            Ok(out)
        }
        ConditionVariant::LieUZero => {
            let u_field = aux.u_field_required(condition)?;
            let fd = field_data(space, u_field, x)?;
            if let Some(xi_field) = &aux.xi_field {
                // field route: Eq. (1.4a) with the last two terms dropped
                let lu = lie_bracket(space, xi_field, u_field, x)?;
                let scale = 1.0 + max_abs(u) * max_abs(xi);
                if max_abs(&lu) > aux.contract_tol * scale {
                    return Err(GeomError::ContractViolation(format!(
                        "condition `lie-u-zero` needs £_ξu = 0; got {:.3e}",
                        max_abs(&lu)
                    )));
                }
                let xicov = xi_cov_matrix(space, xi_field, x)?;
                let t_term = torsion_term_field(space, x, u, xi_field)?;
                let ff = force_field(space, u_field);
                let lie_f = lie_derivative_tensor(space, &ff, xi_field, x)?
                    .data
                    .into_dimensionality::<Ix1>()
                    .expect("vector");
                Ok(r_term + &xicov.dot(&fd.f) + &t_term + &lie_f)
            } else {
                // closed route from trajectory data: expanding £_ξF turns the
                // transverse ξ derivatives into ξ^l F^k_{|l} + T̂(F,ξ), and the
                // torsion term runs on (ξ, V) directly.
                let ff = force_field(space, u_field);
                let fcov = xi_cov_matrix(space, &ff, x)?; // F^k_{|l}
                let t = torsion(space, x)?;
                let t_term = torsion_term_on_curve(space, x, u, xi, &state.v)?;
                let tfx = torsion_contract(&t.t, &fd.f, xi);
                Ok(r_term + &fcov.dot(xi) + &tfx + &t_term)
            }
        }
        ConditionVariant::LieFMinusF => {
            // Eq. (1.4a) with £_ξF = −F substituted.
            let u_field = aux.u_field_required(condition)?;
            let xi_field = aux.xi_field_required(condition)?;
            let fd = field_data(space, u_field, x)?;
            let ff = force_field(space, u_field);
            let lie_f = lie_derivative_tensor(space, &ff, xi_field, x)?
                .data
                .into_dimensionality::<Ix1>()
                .expect("vector");
            let mismatch = &lie_f + &fd.f;
            if max_abs(&mismatch) > aux.contract_tol * (1.0 + max_abs(&fd.f)) {
                return Err(GeomError::ContractViolation(format!(
                    "condition `lie-f-minus-f` needs £_ξF = −F; residual {:.3e}",
                    max_abs(&mismatch)
                )));
            }
            let xicov = xi_cov_matrix(space, xi_field, x)?;
            let t_term = torsion_term_field(space, x, u, xi_field)?;
            let lu_field = lie_u_field(space, xi_field, u_field);
            let d_lu = covariant_s_derivative(space, &lu_field, x, u)?;
            let lu = lu_field.eval_vector(x)?;
            let mut out = r_term + &xicov.dot(&fd.f) + &t_term - &fd.f - &d_lu;
            for k in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    s += fd.ucov[(k, i)] * lu[i];
                }
                out[k] -= s;
            }
            Ok(out)
        }
        ConditionVariant::UEqualsXi => {
            let u_field = aux.u_field_required(condition)?;
            let diff = xi - u;
            if max_abs(&diff) > aux.contract_tol * (1.0 + max_abs(u)) {
                return Err(GeomError::ContractViolation(format!(
                    "condition `u-equals-xi` needs ξ = u; got |ξ−u| = {:.3e}",
                    max_abs(&diff)
                )));
            }
            // Eq. (1.4a) with ξ = u and £_uu = 0: only D̄F/ds survives
            // (the curvature term dies on the antisymmetric slots).
            let r_uu = curvature_term(space, x, u, u)?;
            let ff = force_field(space, u_field);
            let d_f = covariant_s_derivative(space, &ff, x, u)?;
            Ok(r_uu + &d_f)
        }
        ConditionVariant::AbsorbedLieGamma => {
            // Eq. (1.4) with u^iu^j£_ξΓ^k_{ij} = −(F^k + ξ^k_{|j}F^j):
            // the ξ^k_{|j}F^j contributions cancel.
            let u_field = aux.u_field_required(condition)?;
            let fd = field_data(space, u_field, x)?;
            let t_term = match &aux.xi_field {
                Some(xi_field) => torsion_term_field(space, x, u, xi_field)?,
                None => torsion_term_on_curve(space, x, u, xi, &state.v)?,
            };
            Ok(r_term + &t_term - &fd.f)
        }
        ConditionVariant::Family => {
            // Eq. (4.6): R̂(u,ξ)u + ξ^l((DF)^k_l + T^k_l).
            match &aux.u_field {
                Some(u_field) => {
                    let ff = force_field(space, u_field);
                    let fcov = xi_cov_matrix(space, &ff, x)?;
                    let tk = family_torsion_tensor(space, x, u_field)?;
                    Ok(r_term + &fcov.dot(xi) + &tk.dot(xi))
                }
                None => {
                    let t = torsion(space, x)?;
                    if max_abs3(&t.t) > 1e-13 || !aux.geodesic_base {
                        return Err(GeomError::MissingAux {
                            condition: condition.tag().into(),
                            what: "a u-field (required unless the base is geodesic and the space torsion-free)"
                                .into(),
                        });
                    }
                    Ok(r_term)
                }
            }
        }
        ConditionVariant::FreeParticles => {
            let (c, t) = tidal_decomposition(space, state, aux)?;
            Ok(c + &t)
        }
        ConditionVariant::Dragged => {
            let drag = aux.drag.as_ref().ok_or_else(|| GeomError::MissingAux {
                condition: condition.tag().into(),
                what: "w(s) and d(ln w)/ds callbacks".into(),
            })?;
            let lie_gamma = aux.lie_gamma.as_ref().ok_or_else(|| GeomError::MissingAux {
                condition: condition.tag().into(),
                what: "a £_ξΓ callback".into(),
            })?;
            let lie_force = aux.lie_force.as_ref().ok_or_else(|| GeomError::MissingAux {
                condition: condition.tag().into(),
                what: "a £_ξF callback".into(),
            })?;
            let w = (drag.w)(state.s);
            if !(w.is_finite() && w != 0.0) {
                return Err(GeomError::InvalidArgument(format!(
                    "dragged condition needs finite nonzero w, got {w}"
                )));
            }
            let dlnw = (drag.dlnw_ds)(state.s);
            let f = match &aux.u_field {
                Some(uf) => force_term_from_field(space, x, uf)?.0,
                None if aux.geodesic_base => Array1::zeros(n),
                None => {
                    return Err(GeomError::MissingAux {
                        condition: condition.tag().into(),
                        what: "a u-field or geodesic_base for the force term".into(),
                    })
                }
            };
            let lg = lie_gamma(x)?;
            let lf = lie_force(x)?;
            let g = space.gamma(x)?;
            let big_w = u + &state.v;
            let mut out = Array1::<f64>::zeros(n);
            for k in 0..n {
                let mut s = w * w * (lf[k] + f[k]) - f[k] + big_w[k] * dlnw;
                for i in 0..n {
                    for j in 0..n {
                        s -= g[(k, i, j)] * big_w[i] * state.v[j];
                        s -= big_w[i] * big_w[j] * lg[(k, i, j)];
                    }
                }
                out[k] = s;
            }
            Ok(out)
        }
    }
}

/// LHS-minus-RHS residual of the dragged-structure condition, Eq. (4.16),
/// in the reading derived from Eq. (4.15) with v = (u + V)/w:
/// £_ξF^i + F^i − (1/w²){F^i − (u+V)^i D(ln w)/dr + D̄V^i/dr
///                       + Γ^i_{jk}(u+V)^j V^k + (u+V)^j(u+V)^k £_ξΓ^i_{jk}}.
/// Zero iff Eq. (4.15) holds for the given data.
#[allow(clippy::too_many_arguments)]
pub fn dragged_condition_residual(
    space: &ConnectionSpace,
    state: &DeviationState,
    w: f64,
    dw_dr: f64,
    dv_cov: &Array1<f64>,
    lie_gamma: &Array3<f64>,
    lie_force: &Array1<f64>,
    force: &Array1<f64>,
) -> Result<Array1<f64>> {
    if !(w.is_finite() && w != 0.0) {
        return Err(GeomError::InvalidArgument(format!(
            "w must be finite and nonzero, got {w}"
        )));
    }
    let n = space.dim();
    let g = space.gamma(&state.x)?;
    let dlnw = dw_dr / w;
    let big_w = &state.u + &state.v;
    let mut out = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut inner = force[i] - big_w[i] * dlnw + dv_cov[i];
        for j in 0..n {
            for k in 0..n {
                inner += g[(i, j, k)] * big_w[j] * state.v[k];
                inner += big_w[j] * big_w[k] * lie_gamma[(i, j, k)];
            }
        }
        out[i] = lie_force[i] + force[i] - inner / (w * w);
    }
    Ok(out)
}

/// First-integral residual of the family condition, the frame components of
/// −£_ξu along the trajectory: ξ^n u^k_{|n} − V^k − T^k_{nm} ξ^n u^m.
pub fn family_first_integral_residual(
    space: &ConnectionSpace,
    state: &DeviationState,
    u_field: &TensorField,
) -> Result<Array1<f64>> {
    let ucov = u_cov_matrix(space, u_field, &state.x)?;
    let t = torsion(space, &state.x)?;
    let n = space.dim();
    let mut out = Array1::<f64>::zeros(n);
    for k in 0..n {
        let mut s = -state.v[k];
        for m in 0..n {
            s += ucov[(k, m)] * state.xi[m];
            for l in 0..n {
                s -= t.t[(k, m, l)] * state.xi[m] * state.u[l];
            }
        }
        out[k] = s;
    }
    Ok(out)
}

/// Base trajectory supplied to the deviation integrator.
#[derive(Clone)]
pub enum BaseTrajectory {
    /// Geodesic from initial data; co-integrated with the deviation system.
    Geodesic { x0: ChartPoint, u0_frame: Array1<f64> },
    /// Analytic curve: position and coordinate tangent as callbacks.
    Curve {
        x: Arc<dyn Fn(f64) -> Result<ChartPoint> + Send + Sync>,
        u_coord: Arc<dyn Fn(f64) -> Result<Array1<f64>> + Send + Sync>,
    },
}

#[derive(Debug, Clone)]
pub struct DeviationSettings {
    pub integrator: IntegratorSettings,
    /// Warn when ‖ξ‖ exceeds this fraction of the curvature scale ‖R‖^{-1/2}.
    pub xi_warn_fraction: f64,
    /// Validate Eq. (4.5)-style initial-data consistency when possible.
    pub validate_initial: bool,
}

impl Default for DeviationSettings {
    fn default() -> Self {
        Self {
            integrator: IntegratorSettings::default(),
            xi_warn_fraction: 0.05,
            validate_initial: true,
        }
    }
}

/// Integrated deviation history with per-node diagnostics.
#[derive(Debug, Clone)]
pub struct DeviationSeries {
    pub states: Vec<DeviationState>,
    pub rhs: Vec<Array1<f64>>,
    /// ‖£_ξu‖ at each node when a u-field is available, NaN otherwise.
    pub first_integral: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Integrates the geodesic equation, Eq. (4.7), in coordinates; only the
/// symmetric part of Γ enters the contraction.
pub fn integrate_geodesic(
    space: &ConnectionSpace,
    x0: &ChartPoint,
    u0_frame: &Array1<f64>,
    s_range: (f64, f64),
    settings: &IntegratorSettings,
    sample_at: &[f64],
) -> Result<Trajectory> {
    let n = space.dim();
    let u0_coord = space.to_coordinate_components(x0, u0_frame)?;
    let mut y0 = x0.to_vec();
    y0.extend(u0_coord.iter());
    let sp = space.clone();
    let rhs = move |_s: f64, y: &[f64]| -> Result<Vec<f64>> {
        let x = ChartPoint::new(y[..n].to_vec())?;
        let gc = crate::manifold::coordinate_connection(&sp, &x)?;
        let u = &y[n..];
        let mut dy = vec![0.0; 2 * n];
        dy[..n].copy_from_slice(u);
        for a in 0..n {
            let mut acc = 0.0;
            for b in 0..n {
                for g in 0..n {
                    acc -= gc[(a, b, g)] * u[b] * u[g];
                }
            }
            dy[n + a] = acc;
        }
        Ok(dy)
    };
    let out = ode_integrate(&rhs, &y0, s_range, settings, sample_at)?;
    let mut samples = Vec::with_capacity(out.len());
    for (s, y) in out {
        let x = ChartPoint::new(y[..n].to_vec())?;
        let u_coord = Array1::from(y[n..].to_vec());
        let u_frame = space.to_frame_components(&x, &u_coord)?;
        samples.push(TrajectorySample {
            s,
            x,
            u_coord,
            u_frame,
        });
    }
    Ok(Trajectory { samples, s_range })
}

/// Integrates the deviation system (ξ, V) along the base trajectory under the
/// chosen condition; geodesic bases are co-integrated as one state vector.
pub fn integrate_deviation(
    space: &ConnectionSpace,
    base: &BaseTrajectory,
    xi0: &Array1<f64>,
    v0: &Array1<f64>,
    condition: &ConditionVariant,
    aux: &DeviationAux,
    settings: &DeviationSettings,
    sample_at: &[f64],
) -> Result<DeviationSeries> {
    let n = space.dim();
    let mut aux = aux.clone();
    if matches!(base, BaseTrajectory::Geodesic { .. }) {
        aux.geodesic_base = true;
    }
    // initial-data validation (Eq. 4.5 for the family tag) when a u-field
    // makes the check possible
    if settings.validate_initial {
        if let (ConditionVariant::Family | ConditionVariant::FreeParticles, Some(uf)) =
            (condition, &aux.u_field)
        {
            let x0 = match base {
                BaseTrajectory::Geodesic { x0, .. } => x0.clone(),
                BaseTrajectory::Curve { x, .. } => x(0.0)?,
            };
            let u0 = uf.eval_vector(&x0)?;
            let st = DeviationState {
                s: 0.0,
                x: x0,
                u: u0.clone(),
                xi: xi0.clone(),
                v: v0.clone(),
            };
            let res = family_first_integral_residual(space, &st, uf)?;
            let scale = 1.0 + max_abs(&u0) * max_abs(xi0);
            if max_abs(&res) > aux.contract_tol.max(1e-12) * scale {
                return Err(GeomError::ContractViolation(format!(
                    "initial (ξ₀, V₀) violate the first-integral condition: residual {:.3e}",
                    max_abs(&res)
                )));
            }
        }
    }

    let sp = space.clone();
    let cond = condition.clone();
    let aux_rhs = aux.clone();
    let decode = move |s: f64, y: &[f64]| -> Result<(ChartPoint, Array1<f64>, Array1<f64>, Array1<f64>)> {
        match base {
            BaseTrajectory::Geodesic { .. } => {
                let x = ChartPoint::new(y[..n].to_vec())?;
                let u_coord = Array1::from(y[n..2 * n].to_vec());
                let u_frame = sp.to_frame_components(&x, &u_coord)?;
                Ok((
                    x,
                    u_frame,
                    Array1::from(y[2 * n..3 * n].to_vec()),
                    Array1::from(y[3 * n..4 * n].to_vec()),
                ))
            }
            BaseTrajectory::Curve { x, u_coord } => {
                let xp = x(s)?;
                let uc = u_coord(s)?;
                let u_frame = sp.to_frame_components(&xp, &uc)?;
                Ok((
                    xp,
                    u_frame,
                    Array1::from(y[..n].to_vec()),
                    Array1::from(y[n..2 * n].to_vec()),
                ))
            }
        }
    };

    let sp2 = space.clone();
    let decode2 = decode.clone();
    let rhs = move |s: f64, y: &[f64]| -> Result<Vec<f64>> {
        let (x, u_frame, xi, v) = decode2(s, y)?;
        let g = sp2.gamma(&x)?;
        let state = DeviationState {
            s,
            x: x.clone(),
            u: u_frame.clone(),
            xi: xi.clone(),
            v: v.clone(),
        };
        let acc = generalized_deviation_rhs(&sp2, &state, &cond, &aux_rhs)?;
        let mut dy = vec![0.0; y.len()];
        let offset = if matches!(base, BaseTrajectory::Geodesic { .. }) {
            // base geodesic part in coordinates
            let u_coord = Array1::from(y[n..2 * n].to_vec());
            let gc = crate::manifold::coordinate_connection(&sp2, &x)?;
            dy[..n].copy_from_slice(u_coord.as_slice().unwrap());
            for a in 0..n {
                let mut s_acc = 0.0;
                for b in 0..n {
                    for c in 0..n {
                        s_acc -= gc[(a, b, c)] * u_coord[b] * u_coord[c];
                    }
                }
                dy[n + a] = s_acc;
            }
            2 * n
        } else {
            0
        };
        // dξ^k/ds = V^k − Γ^k_{li} ξ^l u^i ; dV^k/ds = acc^k − Γ^k_{li} V^l u^i
        for k in 0..n {
            let mut gxi = 0.0;
            let mut gv = 0.0;
            for l in 0..n {
                for i in 0..n {
                    gxi += g[(k, l, i)] * xi[l] * u_frame[i];
                    gv += g[(k, l, i)] * v[l] * u_frame[i];
                }
            }
            dy[offset + k] = v[k] - gxi;
            dy[offset + n + k] = acc[k] - gv;
        }
        Ok(dy)
    };

    let mut y0 = Vec::new();
    if let BaseTrajectory::Geodesic { x0, u0_frame } = base {
        let u0_coord = space.to_coordinate_components(x0, u0_frame)?;
        y0.extend(x0.to_vec());
        y0.extend(u0_coord.iter());
    }
    y0.extend(xi0.iter());
    y0.extend(v0.iter());

    let s_range = match sample_at.first().zip(sample_at.last()) {
        Some((a, b)) => (*a, *b),
        None => {
            return Err(GeomError::InvalidArgument(
                "integrate_deviation needs at least one sample point".into(),
            ))
        }
    };
    let nodes = ode_integrate(&rhs, &y0, s_range, &settings.integrator, sample_at)?;

    let mut states = Vec::with_capacity(nodes.len());
    let mut rhs_out = Vec::with_capacity(nodes.len());
    let mut first_integral = Vec::with_capacity(nodes.len());
    let mut warnings = Vec::new();
    let mut warned = false;
    for (s, y) in nodes {
        let (x, u_frame, xi, v) = decode(s, &y)?;
        let state = DeviationState {
            s,
            x,
            u: u_frame,
            xi,
            v,
        };
        let acc = generalized_deviation_rhs(space, &state, condition, &aux)?;
        let fi = match &aux.u_field {
            Some(uf) => max_abs(&family_first_integral_residual(space, &state, uf)?),
            None => f64::NAN,
        };
        if !warned && settings.xi_warn_fraction > 0.0 {
            let r = curvature(space, &state.x)?;
            let rnorm = r.r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rnorm > 0.0 {
                let scale = rnorm.sqrt().recip();
                if max_abs(&state.xi) > settings.xi_warn_fraction * scale {
                    warnings.push(format!(
                        "|ξ| = {:.3e} exceeds {} of the curvature scale {:.3e} at s = {}; \
                         the local deviation picture degrades",
                        max_abs(&state.xi),
                        settings.xi_warn_fraction,
                        scale,
                        s
                    ));
                    warned = true;
                }
            }
        }
        states.push(state);
        rhs_out.push(acc);
        first_integral.push(fi);
    }
    Ok(DeviationSeries {
        states,
        rhs: rhs_out,
        first_integral,
        warnings,
    })
}
