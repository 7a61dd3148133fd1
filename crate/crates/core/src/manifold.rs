//! Frames, connections, metrics, and the covariant differentiation machinery.
//!
//! Conventions fixed repo-wide:
//! - frame matrix A[i][alpha] gives E_i = A_i^alpha d_alpha;
//! - connection components Gamma[k][i][j] = Γ^k_{ij} in the frame {E_i},
//!   generally non-symmetric in (i, j);
//! - the covariant derivative places the differentiation index last:
//!   ξ^k_{|i} = E_i(ξ^k) + Γ^k_{li} ξ^l.

use crate::error::{GeomError, Result};
use crate::field::ArrayField;
use crate::numerics::fd::{fd_derivative, FdScheme};
use crate::numerics::linalg;
use crate::point::ChartPoint;
use crate::tensor::TensorValue;
use ndarray::{Array1, Array2, Array3, ArrayD, Dimension, Ix2, Ix3, IxDyn};
use std::sync::Arc;

pub const DEFAULT_EPS_DET: f64 = 1e-12;

/// Frame field E_i = A_i^alpha d_alpha with invertible A.
#[derive(Debug, Clone)]
pub struct FrameField {
    n: usize,
    a: ArrayField,
    identity: bool,
}

impl FrameField {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            a: ArrayField::constant(Array2::<f64>::eye(n).into_dyn()),
            identity: true,
        }
    }

    pub fn new(n: usize, a: ArrayField) -> Result<Self> {
        if a.shape() != [n, n] {
            return Err(GeomError::DimensionMismatch {
                expected: n * n,
                got: a.shape().iter().product(),
            });
        }
        Ok(Self {
            n,
            a,
            identity: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn field(&self) -> &ArrayField {
        &self.a
    }

    /// A_i^alpha as a matrix (rows: frame index, cols: coordinate index).
    pub fn matrix(&self, x: &ChartPoint) -> Result<Array2<f64>> {
        Ok(self
            .a
            .eval(x)?
            .into_dimensionality::<Ix2>()
            .expect("frame shape checked"))
    }

    /// Inverse components A^i_alpha with A_i^alpha A^j_alpha = δ_i^j,
    /// stored with the same [i][alpha] layout. Degenerate frames abort with a
    /// diagnostic rather than being regularized.
    pub fn inverse(&self, x: &ChartPoint, eps_det: f64) -> Result<Array2<f64>> {
        let m = self.matrix(x)?;
        let d = linalg::det(&m);
        if !d.is_finite() || d.abs() < eps_det {
            return Err(GeomError::SingularFrame {
                point: x.to_vec(),
                det: d,
            });
        }
        Ok(linalg::inverse(&m, eps_det)?.t().to_owned())
    }

    pub fn partial(&self, x: &ChartPoint, alpha: usize) -> Result<Array2<f64>> {
        Ok(self
            .a
            .coord_partial(x, alpha)?
            .into_dimensionality::<Ix2>()
            .expect("frame shape checked"))
    }
}

/// Connection coefficients Γ^k_{ij}, stored [k][i][j].
#[derive(Debug, Clone)]
pub struct ConnectionField {
    n: usize,
    gamma: ArrayField,
}

impl ConnectionField {
    pub fn new(n: usize, gamma: ArrayField) -> Result<Self> {
        if gamma.shape() != [n, n, n] {
            return Err(GeomError::DimensionMismatch {
                expected: n * n * n,
                got: gamma.shape().iter().product(),
            });
        }
        Ok(Self { n, gamma })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            gamma: ArrayField::constant(Array3::<f64>::zeros((n, n, n)).into_dyn()),
        }
    }

    pub fn field(&self) -> &ArrayField {
        &self.gamma
    }

    pub fn value(&self, x: &ChartPoint) -> Result<Array3<f64>> {
        Ok(self
            .gamma
            .eval(x)?
            .into_dimensionality::<Ix3>()
            .expect("gamma shape checked"))
    }
}

/// Symmetric metric components g_{ij}; the constructor symmetrizes both the
/// values and any analytic partials, so g_{ij} = g_{ji} holds exactly.
#[derive(Debug, Clone)]
pub struct MetricField {
    n: usize,
    g: ArrayField,
    pub signature: Option<Vec<i8>>,
}

impl MetricField {
    pub fn new(n: usize, g: ArrayField) -> Result<Self> {
        if g.shape() != [n, n] {
            return Err(GeomError::DimensionMismatch {
                expected: n * n,
                got: g.shape().iter().product(),
            });
        }
        let inner = g.clone();
        let sym = ArrayField::new(vec![n, n], move |x| {
            let v = inner.eval(x)?;
            Ok(symmetrize2(&v))
        });
        // forward analytic partials through the symmetrization when present
        let sym = if g.has_analytic_partials() {
            let inner = g.clone();
            sym.with_partials(move |x, alpha| {
                let v = inner.coord_partial(x, alpha)?;
                Ok(symmetrize2(&v))
            })
        } else {
            sym
        };
        Ok(Self {
            n,
            g: sym,
            signature: None,
        })
    }

    pub fn with_signature(mut self, sig: Vec<i8>) -> Self {
        self.signature = Some(sig);
        self
    }

    pub fn field(&self) -> &ArrayField {
        &self.g
    }

    pub fn value(&self, x: &ChartPoint) -> Result<Array2<f64>> {
        Ok(self
            .g
            .eval(x)?
            .into_dimensionality::<Ix2>()
            .expect("metric shape checked"))
    }

    /// Inverse metric per the g^{ik} g_{kj} = δ contract; requires det g != 0.
    pub fn inverse(&self, x: &ChartPoint, eps_det: f64) -> Result<Array2<f64>> {
        let g = self.value(x)?;
        let d = linalg::det(&g);
        if !d.is_finite() || d.abs() < eps_det {
            return Err(GeomError::DegenerateMetric {
                point: x.to_vec(),
                det: d,
            });
        }
        linalg::inverse(&g, eps_det)
    }

    pub fn det(&self, x: &ChartPoint) -> Result<f64> {
        Ok(linalg::det(&self.value(x)?))
    }
}

fn symmetrize2(v: &ArrayD<f64>) -> ArrayD<f64> {
    let m = v.view().into_dimensionality::<Ix2>().unwrap();
    let mut out = m.to_owned();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    out.into_dyn()
}

/// The geometric arena: dimension, frame, connection, optional metric.
#[derive(Debug, Clone)]
pub struct ConnectionSpace {
    n: usize,
    frame: FrameField,
    connection: ConnectionField,
    metric: Option<MetricField>,
    pub eps_det: f64,
}

impl ConnectionSpace {
    pub fn new(frame: FrameField, connection: ConnectionField) -> Result<Self> {
        if frame.dim() != connection.n {
            return Err(GeomError::DimensionMismatch {
                expected: frame.dim(),
                got: connection.n,
            });
        }
        if frame.dim() < 2 {
            return Err(GeomError::DimensionMismatch {
                expected: 2,
                got: frame.dim(),
            });
        }
        Ok(Self {
            n: frame.dim(),
            frame,
            connection,
            metric: None,
            eps_det: DEFAULT_EPS_DET,
        })
    }

    /// Coordinate-frame space (A = identity).
    pub fn coordinate(n: usize, gamma: ArrayField) -> Result<Self> {
        Self::new(FrameField::identity(n), ConnectionField::new(n, gamma)?)
    }

    pub fn flat(n: usize) -> Self {
        Self::new(FrameField::identity(n), ConnectionField::zero(n)).expect("n >= 2")
    }

    pub fn with_metric(mut self, metric: MetricField) -> Result<Self> {
        if metric.n != self.n {
            return Err(GeomError::DimensionMismatch {
                expected: self.n,
                got: metric.n,
            });
        }
        self.metric = Some(metric);
        Ok(self)
    }

    pub fn with_eps_det(mut self, eps: f64) -> Self {
        self.eps_det = eps;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn frame(&self) -> &FrameField {
        &self.frame
    }

    pub fn connection(&self) -> &ConnectionField {
        &self.connection
    }

    pub fn metric(&self) -> Option<&MetricField> {
        self.metric.as_ref()
    }

    pub fn metric_required(&self) -> Result<&MetricField> {
        self.metric.as_ref().ok_or(GeomError::MissingMetric)
    }

    pub fn gamma(&self, x: &ChartPoint) -> Result<Array3<f64>> {
        self.connection.value(x)
    }

    pub fn frame_matrix(&self, x: &ChartPoint) -> Result<Array2<f64>> {
        self.frame.matrix(x)
    }

    pub fn frame_inverse(&self, x: &ChartPoint) -> Result<Array2<f64>> {
        self.frame.inverse(x, self.eps_det)
    }

    /// E_l(Γ^k_{ij}) for all components: the frame-directional derivative of
    /// the connection along E_l.
    pub fn gamma_frame_partial(&self, x: &ChartPoint, l: usize) -> Result<Array3<f64>> {
        Ok(frame_partial(&self.frame, self.connection.field(), x, l)?
            .into_dimensionality::<Ix3>()
            .expect("gamma shape checked"))
    }

    /// Frame components v^i = A^i_alpha v^alpha of a coordinate vector.
    pub fn to_frame_components(&self, x: &ChartPoint, v_coord: &Array1<f64>) -> Result<Array1<f64>> {
        if self.frame.is_identity() {
            return Ok(v_coord.clone());
        }
        let inv = self.frame_inverse(x)?;
        Ok(inv.dot(v_coord))
    }

    /// Coordinate components v^alpha = A_i^alpha v^i of frame components.
    pub fn to_coordinate_components(&self, x: &ChartPoint, v_frame: &Array1<f64>) -> Result<Array1<f64>> {
        if self.frame.is_identity() {
            return Ok(v_frame.clone());
        }
        let a = self.frame_matrix(x)?;
        Ok(a.t().dot(v_frame))
    }
}

/// The action of E_i on a scalar function: f_{,i} = A_i^alpha d_alpha f.
pub fn frame_directional_derivative<F>(
    frame: &FrameField,
    f: &F,
    x: &ChartPoint,
    i: usize,
    scheme: &FdScheme,
) -> Result<f64>
where
    F: Fn(&ChartPoint) -> Result<f64> + ?Sized,
{
    if i >= frame.dim() {
        return Err(GeomError::SlotMismatch(format!(
            "frame index {i} out of range for n = {}",
            frame.dim()
        )));
    }
    let a = frame.matrix(x)?;
    let mut out = 0.0;
    for alpha in 0..frame.dim() {
        let w = a[(i, alpha)];
        if w != 0.0 {
            out += w * fd_derivative(f, x, alpha, scheme)?;
        }
    }
    Ok(out)
}

/// E_i applied to every component of an array field, honoring analytic
/// partials when the field carries them.
pub fn frame_partial(
    frame: &FrameField,
    field: &ArrayField,
    x: &ChartPoint,
    i: usize,
) -> Result<ArrayD<f64>> {
    if frame.is_identity() {
        return field.coord_partial(x, i);
    }
    let a = frame.matrix(x)?;
    let mut out = ArrayD::<f64>::zeros(IxDyn(field.shape()));
    for alpha in 0..frame.dim() {
        let w = a[(i, alpha)];
        if w != 0.0 {
            out = out + field.coord_partial(x, alpha)? * w;
        }
    }
    Ok(out)
}

/// A tensor field: an array field together with its declared valence.
#[derive(Debug, Clone)]
pub struct TensorField {
    pub valence: (usize, usize),
    pub field: ArrayField,
    pub frame_tag: String,
}

impl TensorField {
    pub fn new(valence: (usize, usize), field: ArrayField) -> Self {
        Self {
            valence,
            field,
            frame_tag: "E".into(),
        }
    }

    pub fn vector(field: ArrayField) -> Self {
        Self::new((1, 0), field)
    }

    pub fn eval(&self, x: &ChartPoint, n: usize) -> Result<TensorValue> {
        let v = self.field.eval(x)?;
        Ok(TensorValue::new(self.valence, v, n)?.tagged(&self.frame_tag))
    }

    pub fn eval_vector(&self, x: &ChartPoint) -> Result<Array1<f64>> {
        if self.valence != (1, 0) {
            return Err(GeomError::SlotMismatch(
                "expected a (1,0) tensor field".into(),
            ));
        }
        Ok(self
            .field
            .eval(x)?
            .into_dimensionality::<ndarray::Ix1>()
            .expect("vector field shape"))
    }

    /// Covariant derivative as a new field of valence (p, q+1); the new
    /// covariant slot is appended last and carries the differentiation index:
    /// T^{..k..}_{..l..|j} = E_j T + Σ_upper Γ^k_{mj} T^{..m..} − Σ_lower Γ^m_{lj} T_{..m..}.
    pub fn covariant_derivative(&self, space: &ConnectionSpace) -> TensorField {
        let n = space.dim();
        let (p, q) = self.valence;
        let inner = self.clone();
        let space = space.clone();
        let mut shape = self.field.shape().to_vec();
        shape.push(n);
        let out_field = ArrayField::new(shape, move |x| {
            let g = space.gamma(x)?;
            let t = inner.field.eval(x)?;
            let rank = p + q;
            let mut out_shape = t.shape().to_vec();
            out_shape.push(n);
            let mut out = ArrayD::<f64>::zeros(IxDyn(&out_shape));
            // derivative part
            for j in 0..n {
                let dj = frame_partial(space.frame(), &inner.field, x, j)?;
                for (idx, v) in dj.indexed_iter() {
                    let mut full: Vec<usize> = idx.slice().to_vec();
                    full.push(j);
                    out[IxDyn(&full)] = *v;
                }
            }
            // connection terms
            for (idx, slot) in out.indexed_iter_mut() {
                let j = idx[rank];
                let base: Vec<usize> = idx.slice()[..rank].to_vec();
                let mut corr = 0.0;
                for s in 0..rank {
                    let is_upper = s < p;
                    let orig = base[s];
                    let mut src = base.clone();
                    for m in 0..n {
                        src[s] = m;
                        let tv = t[IxDyn(&src)];
                        if tv != 0.0 {
                            corr += if is_upper {
                                g[(orig, m, j)] * tv
                            } else {
                                -g[(m, orig, j)] * tv
                            };
                        }
                    }
                    src[s] = orig;
                }
                *slot += corr;
            }
            Ok(out)
        });
        TensorField {
            valence: (p, q + 1),
            field: out_field,
            frame_tag: self.frame_tag.clone(),
        }
    }
}

/// Covariant derivative of a tensor field evaluated at one point.
pub fn covariant_derivative_at(
    space: &ConnectionSpace,
    t: &TensorField,
    x: &ChartPoint,
) -> Result<TensorValue> {
    t.covariant_derivative(space).eval(x, space.dim())
}

/// Second covariant derivative of a vector field, slots (k; i, j).
pub fn second_covariant_derivative(
    space: &ConnectionSpace,
    xi: &TensorField,
    x: &ChartPoint,
) -> Result<TensorValue> {
    xi.covariant_derivative(space)
        .covariant_derivative(space)
        .eval(x, space.dim())
}

/// Connection transformation under a frame change E_{j'} = A^j_{j'} E_j
/// (matrix field `aprime` laid out [new][old]):
/// Γ^{i'}_{j'k'} = A^{i'}_i A^j_{j'} A^k_{k'} Γ^i_{jk} + A^{i'}_i A^i_{j',k'},
/// where the comma is the frame-directional derivative along the new frame.
pub fn transform_connection(
    space: &ConnectionSpace,
    aprime: &ArrayField,
    x: &ChartPoint,
) -> Result<Array3<f64>> {
    let n = space.dim();
    if aprime.shape() != [n, n] {
        return Err(GeomError::DimensionMismatch {
            expected: n * n,
            got: aprime.shape().iter().product(),
        });
    }
    let p = aprime
        .eval(x)?
        .into_dimensionality::<Ix2>()
        .expect("shape checked"); // p[new][old]
    let d = linalg::det(&p);
    if !d.is_finite() || d.abs() < space.eps_det {
        return Err(GeomError::SingularFrame {
            point: x.to_vec(),
            det: d,
        });
    }
    let pinv = linalg::inverse(&p, space.eps_det)?; // pinv[old][new]
    let g = space.gamma(x)?;

    // E_m(A^i_{j'}) for all m: frame-directional derivatives along the OLD frame
    let mut dp = Vec::with_capacity(n);
    for m in 0..n {
        dp.push(
            frame_partial(space.frame(), aprime, x, m)?
                .into_dimensionality::<Ix2>()
                .expect("shape checked"),
        );
    }

    let mut out = Array3::<f64>::zeros((n, n, n));
    for ip in 0..n {
        for jp in 0..n {
            for kp in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            s += pinv[(i, ip)] * p[(jp, j)] * p[(kp, k)] * g[(i, j, k)];
                        }
                    }
                    // inhomogeneous term: A^{i'}_i E_{k'}(A^i_{j'}), with
                    // E_{k'} = A^m_{k'} E_m
                    let mut dval = 0.0;
                    for m in 0..n {
                        dval += p[(kp, m)] * dp[m][(jp, i)];
                    }
                    s += pinv[(i, ip)] * dval;
                }
                out[(ip, jp, kp)] = s;
            }
        }
    }
    Ok(out)
}

/// Frame-change matrix field that maps a frame-defined space back to the
/// coordinate frame: P[alpha][i] = A^i_alpha (rows are the new = coordinate
/// frame labels).
pub fn coordinate_frame_change(space: &ConnectionSpace) -> ArrayField {
    let frame = space.frame().clone();
    let eps = space.eps_det;
    let n = space.dim();
    ArrayField::new(vec![n, n], move |x| {
        Ok(frame.inverse(x, eps)?.t().to_owned().into_dyn())
    })
}

/// Connection components in the coordinate frame; identity-frame spaces are
/// returned as-is.
pub fn coordinate_connection(space: &ConnectionSpace, x: &ChartPoint) -> Result<Array3<f64>> {
    if space.frame().is_identity() {
        return space.gamma(x);
    }
    let change = coordinate_frame_change(space);
    transform_connection(space, &change, x)
}

pub type VecFn = Arc<dyn Fn(&ChartPoint) -> Result<Array1<f64>> + Send + Sync>;
pub type Rank3Fn = Arc<dyn Fn(&ChartPoint) -> Result<Array3<f64>> + Send + Sync>;
