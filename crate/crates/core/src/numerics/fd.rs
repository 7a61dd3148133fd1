use crate::error::{GeomError, Result};
use crate::point::ChartPoint;
use ndarray::ArrayD;

/// Central finite-difference scheme for coordinate partials.
///
/// The step is `rel_step * max(1, |x_alpha|)`; one Richardson level lifts the
/// order from 2 to 4 when `richardson` is set.
#[derive(Debug, Clone, Copy)]
pub struct FdScheme {
    pub rel_step: f64,
    pub richardson: bool,
}

impl Default for FdScheme {
    fn default() -> Self {
        // eps^(1/3) is the usual sweet spot for O(h^2) central differences.
        Self {
            rel_step: f64::EPSILON.cbrt(),
            richardson: true,
        }
    }
}

impl FdScheme {
    pub fn plain(rel_step: f64) -> Self {
        Self {
            rel_step,
            richardson: false,
        }
    }

    pub fn with_richardson(rel_step: f64) -> Self {
        Self {
            rel_step,
            richardson: true,
        }
    }

    pub fn step_at(&self, x_alpha: f64) -> f64 {
        self.rel_step * x_alpha.abs().max(1.0)
    }
}

fn central<F>(f: &F, x: &ChartPoint, alpha: usize, h: f64) -> Result<f64>
where
    F: Fn(&ChartPoint) -> Result<f64> + ?Sized,
{
    if x[alpha] + h == x[alpha] {
        return Err(GeomError::StepUnderflow { h });
    }
    let fp = f(&x.shifted(alpha, h))?;
    let fm = f(&x.shifted(alpha, -h))?;
    Ok((fp - fm) / (2.0 * h))
}

/// Coordinate partial ∂f/∂x^alpha of a scalar function by central differences.
pub fn fd_derivative<F>(f: &F, x: &ChartPoint, alpha: usize, scheme: &FdScheme) -> Result<f64>
where
    F: Fn(&ChartPoint) -> Result<f64> + ?Sized,
{
    let h = scheme.step_at(x[alpha]);
    let d_h = central(f, x, alpha, h)?;
    if !scheme.richardson {
        return finite_or_err(d_h, x);
    }
    let d_h2 = central(f, x, alpha, 0.5 * h)?;
    finite_or_err(d_h2 + (d_h2 - d_h) / 3.0, x)
}

fn finite_or_err(v: f64, x: &ChartPoint) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(GeomError::NonFinite {
            what: "finite-difference derivative".into(),
            point: x.to_vec(),
        })
    }
}

/// Componentwise central differences of an array-valued function.
pub fn fd_partial_array<F>(
    f: &F,
    x: &ChartPoint,
    alpha: usize,
    scheme: &FdScheme,
) -> Result<ArrayD<f64>>
where
    F: Fn(&ChartPoint) -> Result<ArrayD<f64>> + ?Sized,
{
    let h = scheme.step_at(x[alpha]);
    if x[alpha] + h == x[alpha] {
        return Err(GeomError::StepUnderflow { h });
    }
    let diff = |hh: f64| -> Result<ArrayD<f64>> {
        let fp = f(&x.shifted(alpha, hh))?;
        let fm = f(&x.shifted(alpha, -hh))?;
        Ok((fp - fm) / (2.0 * hh))
    };
    let d_h = diff(h)?;
    let out = if scheme.richardson {
        let d_h2 = diff(0.5 * h)?;
        &d_h2 + &((&d_h2 - &d_h) / 3.0)
    } else {
        d_h
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(GeomError::NonFinite {
            what: "finite-difference derivative".into(),
            point: x.to_vec(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(c: &[f64]) -> ChartPoint {
        ChartPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn square_at_three() {
        let f = |p: &ChartPoint| Ok(p[0] * p[0]);
        let d = fd_derivative(&f, &pt(&[3.0, 0.0]), 0, &FdScheme::default()).unwrap();
        assert_abs_diff_eq!(d, 6.0, epsilon = 1e-8);
    }

    #[test]
    fn constant_is_flat() {
        let f = |_: &ChartPoint| Ok(2.5);
        let d = fd_derivative(&f, &pt(&[1.0, 2.0]), 1, &FdScheme::default()).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn sine_with_richardson() {
        let f = |p: &ChartPoint| Ok(p[0].sin());
        let d = fd_derivative(&f, &pt(&[1.0, 0.0]), 0, &FdScheme::default()).unwrap();
        assert_abs_diff_eq!(d, 1.0_f64.cos(), epsilon = 1e-9);
    }

    #[test]
    fn observed_convergence_orders() {
        // central alone: order >= 1.9; with Richardson: order >= 3.8
        let f = |p: &ChartPoint| Ok((p[0] * 1.3).sin() * (p[0] * 0.7).exp());
        let x = pt(&[0.8, 0.0]);
        let exact = {
            let (a, b) = (1.3_f64, 0.7_f64);
            (a * (x[0] * a).cos() + b * (x[0] * a).sin()) * (x[0] * b).exp()
        };
        let err = |h: f64, rich: bool| {
            let s = FdScheme {
                rel_step: h,
                richardson: rich,
            };
            (fd_derivative(&f, &x, 0, &s).unwrap() - exact).abs()
        };
        let ratio_plain = err(1e-2, false) / err(5e-3, false);
        let ratio_rich = err(1e-1, true) / err(5e-2, true);
        assert!(ratio_plain.log2() >= 1.9, "plain order {}", ratio_plain.log2());
        assert!(ratio_rich.log2() >= 3.8, "richardson order {}", ratio_rich.log2());
    }
}
