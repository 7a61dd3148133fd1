//! Task dispatch: every scenario runs one task and produces a structured-text
//! report (plus a CSV time series for the trajectory tasks).
//!
//! Exit codes: 0 = all checks within tolerance, 1 = check failures,
//! 2 = usage/parse error (handled by main), 3 = numerical failure.

use crate::scenario::{
    build_space, condition_from_tag, expr_vector_field, integrator_settings, Scenario, TaskKind,
};
use lndev_core::builtin::Builtin;
use lndev_core::classify::{classify_space, ClassifyOptions, Recovered, SymmetryKind};
use lndev_core::deviation::{
    dragged_condition_residual, force_term_from_field, integrate_deviation, tidal_decomposition,
    BaseTrajectory, ConditionVariant, DeviationAux, DeviationSettings, DeviationState,
};
use lndev_core::lie::{lie_derivative_connection, lie_derivative_tensor, LieGammaSource};
use lndev_core::manifold::{ConnectionSpace, TensorField};
use lndev_core::numerics::dragging::DraggingProbe;
use lndev_core::point::ChartPoint;
use lndev_core::poly::{poly_array_field, MultiPoly};
use lndev_core::{GeomError, TensorValue};
use ndarray::{Array1, Ix1, IxDyn};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;

pub struct RunOutcome {
    pub exit_code: i32,
    pub report: String,
}

/// Full-precision, locale-independent float formatting (17 significant
/// digits) for CSV cells and report values.
pub fn fmt_full(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

struct Report {
    text: String,
    failures: usize,
}

impl Report {
    fn new(scenario: &Scenario, seed: u64, tol: f64) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "task = {}", scenario.task.name());
        let space_name = scenario
            .space
            .builtin
            .clone()
            .unwrap_or_else(|| "inline".into());
        let _ = writeln!(text, "space = {space_name}");
        let _ = writeln!(text, "seed = {seed}");
        let _ = writeln!(text, "tolerance = {}", fmt_full(tol));
        Self { text, failures: 0 }
    }

    fn section(&mut self, name: &str) {
        let _ = writeln!(self.text, "\n[{name}]");
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    fn check(&mut self, key: &str, residual: f64, pass: bool) {
        self.kv(key, fmt_full(residual));
        self.kv("holds", pass);
        if !pass {
            self.failures += 1;
        }
    }

    fn outcome(self) -> RunOutcome {
        let exit_code = if self.failures == 0 { 0 } else { 1 };
        let mut report = self.text;
        let _ = writeln!(report, "\nexit = {exit_code}");
        RunOutcome { exit_code, report }
    }
}

fn max_abs<'a, I: IntoIterator<Item = &'a f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn sample_points(
    scenario: &Scenario,
    space: &ConnectionSpace,
    seed: u64,
) -> Result<Vec<ChartPoint>, GeomError> {
    let n = space.dim();
    let bounds: Vec<(f64, f64)> = if !scenario.numerics.sample_box.is_empty() {
        scenario
            .numerics
            .sample_box
            .iter()
            .map(|b| (b[0], b[1]))
            .collect()
    } else if let Some(name) = &scenario.space.builtin {
        Builtin::parse(name, &scenario.space.params)?.sample_box()
    } else {
        vec![(-0.5, 0.5); n]
    };
    if bounds.len() != n || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(GeomError::InvalidArgument(
            "sample box must have one nonempty interval per dimension".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..scenario.numerics.sample_count.max(1))
        .map(|_| {
            ChartPoint::new(
                bounds
                    .iter()
                    .map(|(lo, hi)| rng.random_range(*lo..*hi))
                    .collect(),
            )
        })
        .collect()
}

/// Seeded random polynomial vector field of degree ≤ 2 with analytic
/// partials, used by the identity and Lie-oracle tasks.
fn seeded_vector_field(n: usize, seed: u64) -> TensorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut polys = Vec::with_capacity(n);
    for _ in 0..n {
        let mut terms = vec![(rng.random_range(-0.4..0.4), vec![0u32; n])];
        for a in 0..n {
            let mut e = vec![0u32; n];
            e[a] = 1;
            terms.push((rng.random_range(-0.4..0.4), e.clone()));
            e[a] = 2;
            terms.push((rng.random_range(-0.4..0.4), e));
        }
        polys.push(MultiPoly::new(n, terms));
    }
    TensorField::vector(poly_array_field(n, vec![n], polys))
}

fn sample_grid(s_range: [f64; 2], count: usize) -> Vec<f64> {
    (0..=count)
        .map(|i| s_range[0] + (s_range[1] - s_range[0]) * i as f64 / count as f64)
        .collect()
}

pub fn run(scenario: &Scenario, out_dir: &Path) -> Result<RunOutcome, GeomError> {
    let seed = scenario.numerics.seed;
    let tol = scenario.numerics.tolerance;
    let space = build_space(&scenario.space)
        .map_err(|e| GeomError::InvalidArgument(e.to_string()))?;
    let mut report = Report::new(scenario, seed, tol);
    match scenario.task {
        TaskKind::CheckIdentity => check_identity(scenario, &space, &mut report)?,
        TaskKind::Classify => classify(scenario, &space, &mut report)?,
        TaskKind::Symmetry => symmetry(scenario, &space, &mut report)?,
        TaskKind::Integrate => integrate(scenario, &space, &mut report, out_dir)?,
        TaskKind::Tidal => tidal(scenario, &space, &mut report, out_dir)?,
        TaskKind::LieOracle => lie_oracle(scenario, &space, &mut report)?,
        TaskKind::DraggedResidual => dragged_residual(scenario, &space, &mut report)?,
    }
    Ok(report.outcome())
}

fn check_identity(
    scenario: &Scenario,
    space: &ConnectionSpace,
    report: &mut Report,
) -> Result<(), GeomError> {
    let points = sample_points(scenario, space, scenario.numerics.seed)?;
    let xi = seeded_vector_field(space.dim(), scenario.numerics.seed);
    let mut worst = 0.0f64;
    for x in &points {
        let closed = lie_derivative_connection(space, &xi, x, LieGammaSource::ClosedForm)?.l;
        let ident = lie_derivative_connection(space, &xi, x, LieGammaSource::Identity)?.l;
        let scale = 1.0 + max_abs(closed.iter());
        for (a, b) in closed.iter().zip(ident.iter()) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    report.section("check identity");
    report.kv("points", points.len());
    report.check("max-residual", worst, worst <= scenario.numerics.tolerance);
    Ok(())
}

fn classify(
    scenario: &Scenario,
    space: &ConnectionSpace,
    report: &mut Report,
) -> Result<(), GeomError> {
    let points = sample_points(scenario, space, scenario.numerics.seed)?;
    let rep = classify_space(
        space,
        &points,
        &ClassifyOptions {
            tolerance: scenario.numerics.tolerance,
            recurrence_order: 1,
        },
    )?;
    let expected: Vec<(&str, bool)> = scenario
        .space
        .builtin
        .as_deref()
        .and_then(|name| Builtin::parse(name, &scenario.space.params).ok())
        .map(|b| b.expected_classes())
        .unwrap_or_default();
    for entry in &rep.entries {
        report.section(&format!("class {}", entry.name));
        report.kv("residual", fmt_full(entry.residual));
        report.kv("holds", entry.holds);
        match &entry.recovered {
            Some(Recovered::Scalar(v)) => report.kv("recovered", fmt_full(*v)),
            Some(Recovered::Covector(w)) => {
                let vals: Vec<String> = w.iter().map(|v| fmt_full(*v)).collect();
                report.kv("recovered", vals.join(", "));
            }
            Some(Recovered::PerPoint(p)) => {
                let vals: Vec<String> = p.iter().map(|v| fmt_full(*v)).collect();
                report.kv("recovered", vals.join(", "));
            }
            None => {}
        }
        for (name, r) in &entry.extra_residuals {
            report.kv(&format!("residual[{name}]"), fmt_full(*r));
        }
        if let Some(d) = &entry.detail {
            report.kv("detail", d);
        }
        // builtin ground truth acts as the check
        if let Some((_, want)) = expected.iter().find(|(n, _)| *n == entry.name) {
            if entry.holds != *want {
                report.kv("expected", want);
                report.failures += 1;
            }
        }
    }
    if !rep.skipped.is_empty() {
        report.section("skipped");
        for s in &rep.skipped {
            report.kv("class", s);
        }
    }
    Ok(())
}

fn symmetry(
    scenario: &Scenario,
    space: &ConnectionSpace,
    report: &mut Report,
) -> Result<(), GeomError> {
    let spec = scenario.symmetry.as_ref().expect("validated");
    let points = sample_points(scenario, space, scenario.numerics.seed)?;
    let xi = expr_vector_field(&spec.xi, space.dim())
        .map_err(|e| GeomError::InvalidArgument(e.to_string()))?;
    for kind_name in &spec.kinds {
        let kind = match kind_name.as_str() {
            "projective" => SymmetryKind::Projective,
            "affine" => SymmetryKind::Affine,
            "isometric" => SymmetryKind::Isometric,
            "conformal" => SymmetryKind::Conformal,
            other => {
                return Err(GeomError::InvalidArgument(format!(
                    "unknown symmetry kind `{other}`"
                )))
            }
        };
        report.section(&format!("symmetry {kind_name}"));
        if matches!(kind, SymmetryKind::Isometric | SymmetryKind::Conformal)
            && space.metric().is_none()
        {
            report.kv("skipped", "no metric attached");
            continue;
        }
        let check =
            lndev_core::classify::check_symmetry(space, &xi, kind, &points, scenario.numerics.tolerance)?;
        report.check("residual", check.residual, check.holds);
        if let Some(Recovered::PerPoint(phis)) = &check.recovered {
            let vals: Vec<String> = phis.iter().map(|v| fmt_full(*v)).collect();
            report.kv("recovered-phi", vals.join(", "));
        }
        for (name, r) in &check.extra_residuals {
            report.kv(&format!("residual[{name}]"), fmt_full(*r));
        }
    }
    Ok(())
}

struct DeviationRun {
    series: lndev_core::DeviationSeries,
    condition: ConditionVariant,
}

fn deviation_run(
    scenario: &Scenario,
    space: &ConnectionSpace,
    force_condition: Option<ConditionVariant>,
) -> Result<DeviationRun, GeomError> {
    let traj = scenario.trajectory.as_ref().expect("validated");
    let dev = scenario.deviation.as_ref().expect("validated");
    let condition = match force_condition {
        Some(c) => c,
        None => condition_from_tag(&dev.condition).ok_or_else(|| {
            GeomError::InvalidArgument(format!("unknown condition `{}`", dev.condition))
        })?,
    };
    let mut aux = DeviationAux::new();
    aux.geodesic_base = dev.geodesic_base;
    aux.contract_tol = scenario.numerics.tolerance.max(1e-9);
    if !dev.u_field.is_empty() {
        aux.u_field = Some(
            expr_vector_field(&dev.u_field, space.dim())
                .map_err(|e| GeomError::InvalidArgument(e.to_string()))?,
        );
    }
    if !dev.xi_field.is_empty() {
        aux.xi_field = Some(
            expr_vector_field(&dev.xi_field, space.dim())
                .map_err(|e| GeomError::InvalidArgument(e.to_string()))?,
        );
    }
    let x0 = ChartPoint::new(traj.x0.clone())?;
    let series = integrate_deviation(
        space,
        &BaseTrajectory::Geodesic {
            x0,
            u0_frame: Array1::from(traj.u0.clone()),
        },
        &Array1::from(dev.xi0.clone()),
        &Array1::from(dev.v0.clone()),
        &condition,
        &aux,
        &DeviationSettings {
            integrator: integrator_settings(&scenario.numerics),
            xi_warn_fraction: scenario.numerics.xi_warn_fraction,
            validate_initial: true,
        },
        &sample_grid(traj.s_range, traj.samples),
    )?;
    Ok(DeviationRun { series, condition })
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<(), GeomError> {
    let mut text = String::with_capacity(rows.len() * 64);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_full(*v)).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| {
        GeomError::InvalidArgument(format!("cannot write {}: {e}", path.display()))
    })
}

fn integrate(
    scenario: &Scenario,
    space: &ConnectionSpace,
    report: &mut Report,
    out_dir: &Path,
) -> Result<(), GeomError> {
    let run = deviation_run(scenario, space, None)?;
    let n = space.dim();
    // CSV: s, x_0.., u_0.., xi_0.., V_0.., rhs_0.., res_firstintegral
    let mut header = String::from("s");
    for tag in ["x", "u", "xi", "V", "rhs"] {
        for i in 0..n {
            let _ = write!(header, ",{tag}_{i}");
        }
    }
    header.push_str(",res_firstintegral");
    let mut rows = Vec::with_capacity(run.series.states.len());
    let mut drift = 0.0f64;
    let mut drift_known = false;
    for ((st, rhs), fi) in run
        .series
        .states
        .iter()
        .zip(&run.series.rhs)
        .zip(&run.series.first_integral)
    {
        let mut row = vec![st.s];
        row.extend(st.x.to_vec());
        row.extend(st.u.iter());
        row.extend(st.xi.iter());
        row.extend(st.v.iter());
        row.extend(rhs.iter());
        row.push(*fi);
        rows.push(row);
        if fi.is_finite() {
            drift_known = true;
            let bound = 1.0 + max_abs(st.u.iter()) * max_abs(st.xi.iter());
            drift = drift.max(fi / bound);
        }
    }
    let csv_path = out_dir.join("series.csv");
    write_csv(&csv_path, &header, &rows)?;
    report.section("integrate");
    report.kv("condition", run.condition.tag());
    report.kv("nodes", rows.len());
    report.kv("csv", csv_path.display());
    if drift_known {
        // first-integral preservation bound fixed at 1e-5 (1 + |u||ξ|)
        report.check("first-integral-drift", drift, drift <= 1e-5);
    } else {
        report.kv("first-integral-drift", "not computable without a u-field");
    }
    for w in &run.series.warnings {
        report.kv("warning", w);
    }
    Ok(())
}

fn tidal(
    scenario: &Scenario,
    space: &ConnectionSpace,
    report: &mut Report,
    out_dir: &Path,
) -> Result<(), GeomError> {
    let run = deviation_run(scenario, space, Some(ConditionVariant::FreeParticles))?;
    let dev = scenario.deviation.as_ref().expect("validated");
    let mut aux = DeviationAux::new();
    aux.contract_tol = scenario.numerics.tolerance.max(1e-9);
    if !dev.u_field.is_empty() {
        aux.u_field = Some(
            expr_vector_field(&dev.u_field, space.dim())
                .map_err(|e| GeomError::InvalidArgument(e.to_string()))?,
        );
    }
    let n = space.dim();
    let mut header = String::from("s");
    for tag in ["x", "curv", "tors", "sum"] {
        for i in 0..n {
            let _ = write!(header, ",{tag}_{i}");
        }
    }
    let mut rows = Vec::new();
    let mut max_sum = 0.0f64;
    let mut min_curv = f64::INFINITY;
    for st in &run.series.states {
        let (c, t) = tidal_decomposition(space, st, &aux)?;
        let sum: Array1<f64> = &c + &t;
        max_sum = max_sum.max(max_abs(sum.iter()));
        min_curv = min_curv.min(max_abs(c.iter()));
        let mut row = vec![st.s];
        row.extend(st.x.to_vec());
        row.extend(c.iter());
        row.extend(t.iter());
        row.extend(sum.iter());
        rows.push(row);
    }
    let csv_path = out_dir.join("series.csv");
    write_csv(&csv_path, &header, &rows)?;
    report.section("tidal");
    report.kv("nodes", rows.len());
    report.kv("csv", csv_path.display());
    report.kv("max-sum-norm", fmt_full(max_sum));
    report.kv("min-curvature-norm", fmt_full(min_curv));
    report.kv(
        "compensated",
        max_sum <= scenario.numerics.tolerance * (1.0 + min_curv),
    );
    Ok(())
}

fn lie_oracle(
    scenario: &Scenario,
    space: &ConnectionSpace,
    report: &mut Report,
) -> Result<(), GeomError> {
    let points = sample_points(scenario, space, scenario.numerics.seed)?;
    let xi = seeded_vector_field(space.dim(), scenario.numerics.seed);
    let probe = DraggingProbe::default();
    let mut worst_ci = 0.0f64;
    let mut worst_cd = 0.0f64;
    for x in &points {
        let closed = lie_derivative_connection(space, &xi, x, LieGammaSource::ClosedForm)?.l;
        let ident = lie_derivative_connection(space, &xi, x, LieGammaSource::Identity)?.l;
        let drag =
            lie_derivative_connection(space, &xi, x, LieGammaSource::Dragging(probe.clone()))?.l;
        let scale = 1.0 + max_abs(closed.iter());
        for ((a, b), c) in closed.iter().zip(ident.iter()).zip(drag.iter()) {
            worst_ci = worst_ci.max((a - b).abs() / scale);
            worst_cd = worst_cd.max((a - c).abs() / scale);
        }
    }
    let tol = scenario.numerics.tolerance;
    report.section("lie oracle");
    report.kv("points", points.len());
    report.check("closed-vs-identity", worst_ci, worst_ci <= tol);
    // the dragging estimate carries the O(ε²) extrapolation remainder
    report.check("closed-vs-dragging", worst_cd, worst_cd <= 100.0 * tol);
    Ok(())
}

fn dragged_residual(
    scenario: &Scenario,
    space: &ConnectionSpace,
    report: &mut Report,
) -> Result<(), GeomError> {
    let traj = scenario.trajectory.as_ref().expect("validated");
    let dev = scenario.deviation.as_ref().expect("validated");
    let drag = scenario.dragged.as_ref().expect("validated");
    let n = space.dim();
    let u_field = expr_vector_field(&dev.u_field, n)
        .map_err(|e| GeomError::InvalidArgument(e.to_string()))?;
    let xi_field = expr_vector_field(&dev.xi_field, n)
        .map_err(|e| GeomError::InvalidArgument(e.to_string()))?;
    let x = ChartPoint::new(traj.x0.clone())?;
    let u = u_field.eval_vector(&x)?;
    let xi = xi_field.eval_vector(&x)?;
    // V = ∇_u ξ and D̄V/dr = ∇_u ∇_u ξ from the field extensions
    let contract_u = |w: &TensorValue, u: &Array1<f64>| -> Array1<f64> {
        let mut out = Array1::<f64>::zeros(n);
        for k in 0..n {
            for m in 0..n {
                out[k] += w.data[IxDyn(&[k, m])] * u[m];
            }
        }
        out
    };
    let xicov = xi_field.covariant_derivative(space);
    let v = contract_u(&xicov.eval(&x, n)?, &u);
    let v_field = {
        let sp = space.clone();
        let xf = xi_field.clone();
        let uf = u_field.clone();
        TensorField::vector(lndev_core::ArrayField::new(vec![n], move |p| {
            let w = xf.covariant_derivative(&sp).eval(p, n)?;
            let uv = uf.eval_vector(p)?;
            let mut out = Array1::<f64>::zeros(n);
            for k in 0..n {
                for m in 0..n {
                    out[k] += w.data[IxDyn(&[k, m])] * uv[m];
                }
            }
            Ok(out.into_dyn())
        }))
    };
    let dv_cov = contract_u(&v_field.covariant_derivative(space).eval(&x, n)?, &u);
    let f = force_term_from_field(space, &x, &u_field)?.0;
    let ff = lndev_core::deviation::force_field(space, &u_field);
    let lie_f = lie_derivative_tensor(space, &ff, &xi_field, &x)?
        .data
        .into_dimensionality::<Ix1>()
        .expect("vector");
    let lie_g = lie_derivative_connection(space, &xi_field, &x, LieGammaSource::ClosedForm)?.l;
    let st = DeviationState {
        s: traj.s_range[0],
        x,
        u,
        xi,
        v,
    };
    let res = dragged_condition_residual(space, &st, drag.w, drag.dw_dr, &dv_cov, &lie_g, &lie_f, &f)?;
    let scale = 1.0 + max_abs(f.iter()) + max_abs(lie_f.iter());
    let rel = max_abs(res.iter()) / scale;
    report.section("dragged residual");
    report.kv("w", fmt_full(drag.w));
    let comps: Vec<String> = res.iter().map(|v| fmt_full(*v)).collect();
    report.kv("residual-components", comps.join(", "));
    report.check("residual", rel, rel <= scenario.numerics.tolerance);
    Ok(())
}
