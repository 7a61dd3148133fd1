use crate::error::{GeomError, Result};

/// Stepper selection with its control parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeMethod {
    Rk4Fixed { step: f64 },
    Rk45Adaptive { rel_tol: f64, abs_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub method: OdeMethod,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            method: OdeMethod::Rk45Adaptive {
                rel_tol: 1e-10,
                abs_tol: 1e-12,
            },
            max_steps: 4_000_000,
        }
    }
}

impl IntegratorSettings {
    pub fn rk4(step: f64) -> Self {
        Self {
            method: OdeMethod::Rk4Fixed { step },
            max_steps: 4_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.method {
            OdeMethod::Rk4Fixed { step } => step > 0.0 && step.is_finite(),
            OdeMethod::Rk45Adaptive { rel_tol, abs_tol } => rel_tol > 0.0 && abs_tol > 0.0,
        };
        if !ok || self.max_steps == 0 {
            return Err(GeomError::InvalidArgument(
                "integrator settings must have positive step/tolerances and max_steps".into(),
            ));
        }
        Ok(())
    }
}

pub type RhsFn<'a> = dyn Fn(f64, &[f64]) -> Result<Vec<f64>> + 'a;

struct Segment {
    s0: f64,
    s1: f64,
    y0: Vec<f64>,
    y1: Vec<f64>,
    f0: Vec<f64>,
    f1: Vec<f64>,
}

impl Segment {
    /// Cubic Hermite evaluation inside [s0, s1]; third-order dense output.
    fn eval(&self, s: f64) -> Vec<f64> {
        let h = self.s1 - self.s0;
        let t = (s - self.s0) / h;
        let mut out = vec![0.0; self.y0.len()];
        for i in 0..out.len() {
            let dy = self.y1[i] - self.y0[i];
            out[i] = (1.0 - t) * self.y0[i]
                + t * self.y1[i]
                + t * (t - 1.0)
                    * ((1.0 - 2.0 * t) * dy + (t - 1.0) * h * self.f0[i] + t * h * self.f1[i]);
        }
        out
    }
}

fn rk4_step(rhs: &RhsFn, s: f64, y: &[f64], h: f64) -> Result<Vec<f64>> {
    let add = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    let k1 = rhs(s, y)?;
    let k2 = rhs(s + 0.5 * h, &add(y, &k1, 0.5 * h))?;
    let k3 = rhs(s + 0.5 * h, &add(y, &k2, 0.5 * h))?;
    let k4 = rhs(s + h, &add(y, &k3, h))?;
    Ok(y.iter()
        .enumerate()
        .map(|(i, v)| v + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dp45_step(rhs: &RhsFn, s: f64, y: &[f64], h: f64) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let dim = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(rhs(s, y)?);
    for stage in 0..6 {
        let mut yt = y.to_vec();
        for (j, a) in DP_A[stage].iter().enumerate() {
            if *a != 0.0 {
                for i in 0..dim {
                    yt[i] += h * a * k[j][i];
                }
            }
        }
        k.push(rhs(s + DP_C[stage] * h, &yt)?);
    }
    // 5th-order solution is the last stage's argument (FSAL property of the tableau)
    let mut y5 = y.to_vec();
    for (j, a) in DP_A[5].iter().enumerate() {
        for i in 0..dim {
            y5[i] += h * a * k[j][i];
        }
    }
    let mut err = vec![0.0; dim];
    for i in 0..dim {
        let mut y4i = y[i];
        for (j, b) in DP_B4.iter().enumerate() {
            y4i += h * b * k[j][i];
        }
        err[i] = y5[i] - y4i;
    }
    Ok((y5, 0.0, err))
}

/// Integrates `dy/ds = rhs(s, y)` over `s_range` and reports states at
/// `sample_at` (dense cubic-Hermite output between accepted steps). With an
/// empty `sample_at`, the accepted nodes themselves are returned. Backward
/// ranges (s1 < s0) are supported.
pub fn ode_integrate(
    rhs: &RhsFn,
    y0: &[f64],
    s_range: (f64, f64),
    settings: &IntegratorSettings,
    sample_at: &[f64],
) -> Result<Vec<(f64, Vec<f64>)>> {
    settings.validate()?;
    let (s0, s1) = s_range;
    let dir = if s1 >= s0 { 1.0 } else { -1.0 };
    let span = (s1 - s0).abs();
    if span == 0.0 {
        return Ok(vec![(s0, y0.to_vec())]);
    }
    for (i, s) in sample_at.iter().enumerate() {
        let inside = (s - s0) * dir >= -1e-12 && (s1 - s) * dir >= -1e-12;
        if !inside || (i > 0 && (s - sample_at[i - 1]) * dir < 0.0) {
            return Err(GeomError::InvalidArgument(
                "sample points must lie inside s_range in integration order".into(),
            ));
        }
    }

    let mut s = s0;
    let mut y = y0.to_vec();
    let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut next_sample = 0usize;
    let emit_nodes = sample_at.is_empty();
    if emit_nodes {
        out.push((s, y.clone()));
    }
    // samples exactly at s0
    while next_sample < sample_at.len() && (sample_at[next_sample] - s0).abs() <= 1e-12 * (1.0 + span) {
        out.push((s0, y.clone()));
        next_sample += 1;
    }

    // cap adaptive steps so the cubic-Hermite dense output keeps pace with
    // the step solution
    let h_max = span / 50.0;
    let mut h = match settings.method {
        OdeMethod::Rk4Fixed { step } => step * dir,
        OdeMethod::Rk45Adaptive { .. } => (span / 100.0).min(0.1).max(1e-8) * dir,
    };
    let mut steps = 0usize;

    while (s1 - s) * dir > 1e-14 * (1.0 + span) {
        steps += 1;
        if steps > settings.max_steps {
            return Err(GeomError::Integration(format!(
                "max_steps ({}) exceeded at s = {s}",
                settings.max_steps
            )));
        }
        if (s + h - s) == 0.0 {
            return Err(GeomError::Integration(format!("step underflow at s = {s}")));
        }
        if (s1 - (s + h)) * dir < 0.0 {
            h = s1 - s;
        }
        let f0 = rhs(s, &y)?;
        let (y_new, s_new) = match settings.method {
            OdeMethod::Rk4Fixed { .. } => (rk4_step(rhs, s, &y, h)?, s + h),
            OdeMethod::Rk45Adaptive { rel_tol, abs_tol } => {
                let (y5, _, err) = dp45_step(rhs, s, &y, h)?;
                let mut norm = 0.0f64;
                for i in 0..y.len() {
                    let sc = abs_tol + rel_tol * y[i].abs().max(y5[i].abs());
                    norm += (err[i] / sc).powi(2);
                }
                let norm = (norm / y.len() as f64).sqrt();
                if norm > 1.0 {
                    // rejected step; retry with a smaller h (counts toward max_steps)
                    h *= (0.9 * norm.powf(-0.2)).max(0.2);
                    continue;
                }
                let grow = (0.9 * norm.max(1e-10).powf(-0.2)).min(5.0).max(0.2);
                let s_next = s + h;
                h *= grow;
                if h.abs() > h_max {
                    h = h_max * dir;
                }
                (y5, s_next)
            }
        };
        if y_new.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::Integration(format!(
                "state became non-finite at s = {s_new}"
            )));
        }
        let f1 = rhs(s_new, &y_new)?;
        let seg = Segment {
            s0: s,
            s1: s_new,
            y0: y.clone(),
            y1: y_new.clone(),
            f0,
            f1,
        };
        while next_sample < sample_at.len() {
            let target = sample_at[next_sample];
            if (target - s_new) * dir <= 1e-12 * (1.0 + span) {
                out.push((target, seg.eval(target)));
                next_sample += 1;
            } else {
                break;
            }
        }
        s = s_new;
        y = y_new;
        if emit_nodes {
            out.push((s, y.clone()));
        }
    }
    // flush samples that coincide with the endpoint within tolerance
    while next_sample < sample_at.len() {
        out.push((sample_at[next_sample], y.clone()));
        next_sample += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_rhs_constant() {
        let rhs = |_: f64, _: &[f64]| Ok(vec![0.0, 0.0]);
        let out = ode_integrate(&rhs, &[1.5, -2.0], (0.0, 3.0), &IntegratorSettings::default(), &[1.0, 2.5]).unwrap();
        for (_, y) in out {
            assert_eq!(y, vec![1.5, -2.0]);
        }
    }

    #[test]
    fn exponential_growth() {
        let rhs = |_: f64, y: &[f64]| Ok(vec![y[0]]);
        let out = ode_integrate(&rhs, &[1.0], (0.0, 1.0), &IntegratorSettings::default(), &[1.0]).unwrap();
        assert_abs_diff_eq!(out.last().unwrap().1[0], std::f64::consts::E, epsilon = 1e-8);
    }

    #[test]
    fn harmonic_oscillator_energy_drift() {
        let rhs = |_: f64, y: &[f64]| Ok(vec![y[1], -y[0]]);
        let period = 2.0 * std::f64::consts::PI;
        let out = ode_integrate(
            &rhs,
            &[1.0, 0.0],
            (0.0, 10.0 * period),
            &IntegratorSettings::rk4(1e-3),
            &[10.0 * period],
        )
        .unwrap();
        let y = &out.last().unwrap().1;
        let energy = 0.5 * (y[0] * y[0] + y[1] * y[1]);
        assert!((energy - 0.5).abs() < 1e-6, "drift {}", (energy - 0.5).abs());
    }

    #[test]
    fn dense_output_matches_solution() {
        let rhs = |s: f64, _: &[f64]| Ok(vec![s.cos()]);
        let out = ode_integrate(
            &rhs,
            &[0.0],
            (0.0, 2.0),
            &IntegratorSettings::default(),
            &[0.3, 0.77, 1.4142, 2.0],
        )
        .unwrap();
        for (s, y) in out {
            assert_abs_diff_eq!(y[0], s.sin(), epsilon = 1e-7);
        }
    }

    #[test]
    fn backward_integration() {
        let rhs = |_: f64, y: &[f64]| Ok(vec![y[0]]);
        let out = ode_integrate(&rhs, &[1.0], (1.0, 0.0), &IntegratorSettings::default(), &[0.0]).unwrap();
        assert_abs_diff_eq!(out.last().unwrap().1[0], (-1.0f64).exp(), epsilon = 1e-8);
    }
}
