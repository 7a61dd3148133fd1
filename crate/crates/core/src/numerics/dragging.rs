//! Finite-ε dragging oracle for the Lie derivative of the connection.
//!
//! The frame dragged by x ↦ x + εξ has matrices A^j_{bar i} = δ(δ − εΣ) and
//! A^{bar i}_j = δ(δ + εΣ) with Σ^j_k = ξ^j_{,k} + C^j_{kl}ξ^l. Transporting
//! the connection evaluated at the displaced point back through those matrices
//! gives Γ'(ε); the first-order quotient (Γ'(ε) − Γ)/ε tends to £_ξΓ, and one
//! Richardson level removes the leading O(ε) error.

use crate::error::{GeomError, Result};
use crate::manifold::{frame_partial, ConnectionSpace, TensorField};
use crate::point::ChartPoint;
use ndarray::{Array1, Array2, Array3, Ix2};

/// Descending ε schedule; consecutive entries should shrink by the fixed
/// `ratio` (the Richardson pair for each ε is (ε, ε/2) regardless).
#[derive(Debug, Clone, PartialEq)]
pub struct DraggingProbe {
    pub epsilons: Vec<f64>,
}

impl Default for DraggingProbe {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-3, 5e-4],
        }
    }
}

impl DraggingProbe {
    pub fn new(epsilons: Vec<f64>) -> Result<Self> {
        if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(GeomError::InvalidArgument(
                "epsilon schedule must be non-empty and positive".into(),
            ));
        }
        if epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(GeomError::InvalidArgument(
                "epsilon schedule must be strictly descending".into(),
            ));
        }
        Ok(Self { epsilons })
    }
}

/// Per-ε first-order quotients and their Richardson-extrapolated limits.
#[derive(Debug, Clone)]
pub struct DraggingEstimates {
    /// (ε, (Γ'(ε) − Γ)/ε) for every ε and ε/2 in the schedule.
    pub quotients: Vec<(f64, Array3<f64>)>,
    /// (ε, 2 D(ε/2) − D(ε)) per schedule entry.
    pub extrapolations: Vec<(f64, Array3<f64>)>,
    /// The extrapolation at the smallest ε.
    pub extrapolated: Array3<f64>,
}

fn dragged_gamma(
    space: &ConnectionSpace,
    xi: &TensorField,
    sigma: &crate::field::ArrayField,
    x: &ChartPoint,
    eps: f64,
) -> Result<Array3<f64>> {
    let n = space.dim();
    let sig = sigma.eval(x)?.into_dimensionality::<Ix2>().expect("sigma");
    // coordinate displacement: xbar^alpha = x^alpha + eps * A_i^alpha xi^i
    let xi_frame = xi.eval_vector(x)?;
    let xi_coord: Array1<f64> = if space.frame().is_identity() {
        xi_frame.clone()
    } else {
        space.frame_matrix(x)?.t().dot(&xi_frame)
    };
    let xbar = x.displaced(&(eps * &xi_coord));
    let g_bar = space.gamma(&xbar)?;

    let mut p = Array2::<f64>::eye(n); // A^j_{bar i} = I − εΣ
    let mut q = Array2::<f64>::eye(n); // A^{bar i}_j = I + εΣ
    for a in 0..n {
        for b in 0..n {
            p[(a, b)] -= eps * sig[(a, b)];
            q[(a, b)] += eps * sig[(a, b)];
        }
    }

    // homogeneous transport + inhomogeneous derivative term P (ε E_k Σ)
    let mut dsig = Vec::with_capacity(n);
    for k in 0..n {
        dsig.push(
            frame_partial(space.frame(), sigma, x, k)?
                .into_dimensionality::<Ix2>()
                .expect("sigma"),
        );
    }
    let mut out = Array3::<f64>::zeros((n, n, n));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for pp in 0..n {
                    let w_p = p[(i, pp)];
                    if w_p == 0.0 {
                        continue;
                    }
                    for qq in 0..n {
                        for rr in 0..n {
                            s += w_p * q[(qq, j)] * q[(rr, k)] * g_bar[(pp, qq, rr)];
                        }
                    }
                }
                for m in 0..n {
                    s += p[(i, m)] * eps * dsig[k][(m, j)];
                }
                out[(i, j, k)] = s;
            }
        }
    }
    Ok(out)
}

/// Runs the dragging schedule and Richardson-extrapolates each ε-pair.
pub fn dragging_oracle(
    space: &ConnectionSpace,
    xi: &TensorField,
    x: &ChartPoint,
    probe: &DraggingProbe,
) -> Result<DraggingEstimates> {
    if probe.epsilons.is_empty() {
        return Err(GeomError::InvalidArgument("empty epsilon schedule".into()));
    }
    let sigma = crate::lie::sigma_field(space, xi);
    let g0 = space.gamma(x)?;
    let mut quotients = Vec::new();
    let mut extrapolations = Vec::new();
    for &eps in &probe.epsilons {
        let d_full = (dragged_gamma(space, xi, &sigma, x, eps)? - &g0) / eps;
        let d_half = (dragged_gamma(space, xi, &sigma, x, 0.5 * eps)? - &g0) / (0.5 * eps);
        let ext = &d_half * 2.0 - &d_full;
        quotients.push((eps, d_full));
        quotients.push((0.5 * eps, d_half));
        extrapolations.push((eps, ext));
    }
    let extrapolated = extrapolations.last().unwrap().1.clone();

    // convergence diagnostic: first-order errors of the raw quotients must
    // shrink linearly in ε (ratio near the schedule ratio)
    if probe.epsilons.len() >= 2 {
        let err_of = |d: &Array3<f64>| -> f64 {
            d.iter()
                .zip(extrapolated.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let e0 = err_of(&quotients[0].1);
        let scale = extrapolated.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if e0 > 1e-10 * (1.0 + scale) {
            let e_last = err_of(&quotients[quotients.len() - 2].1);
            let expected = probe.epsilons[0] / probe.epsilons[probe.epsilons.len() - 1];
            let observed = e0 / e_last.max(1e-300);
            if observed < 0.3 * expected || observed > 3.5 * expected {
                return Err(GeomError::OracleDivergence(format!(
                    "first-order error ratio {observed:.3} deviates from the schedule ratio {expected:.3}"
                )));
            }
        }
    }
    Ok(DraggingEstimates {
        quotients,
        extrapolations,
        extrapolated,
    })
}
