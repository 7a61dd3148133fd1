//! Scenario files: TOML-backed schema, strict validation with per-field
//! diagnostics, and assembly of the geometric objects they describe.

use crate::expr::{parse_expr, Expr};
use lndev_core::builtin::Builtin;
use lndev_core::field::ArrayField;
use lndev_core::manifold::{ConnectionField, ConnectionSpace, FrameField, MetricField, TensorField};
use lndev_core::numerics::{IntegratorSettings, OdeMethod};
use lndev_core::point::ChartPoint;
use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    CheckIdentity,
    Classify,
    Symmetry,
    Integrate,
    Tidal,
    LieOracle,
    DraggedResidual,
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::CheckIdentity => "check-identity",
            TaskKind::Classify => "classify",
            TaskKind::Symmetry => "symmetry",
            TaskKind::Integrate => "integrate",
            TaskKind::Tidal => "tidal",
            TaskKind::LieOracle => "lie-oracle",
            TaskKind::DraggedResidual => "dragged-residual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    /// Row-major n×n frame matrix entries A_i^alpha as expressions; empty
    /// means the coordinate frame.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frame: Vec<String>,
    /// Sparse connection components: key "k,i,j" (1-based) → expression.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub gamma: BTreeMap<String, String>,
    /// Row-major n×n metric entries; empty means no metric.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metric: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
    pub s_range: [f64; 2],
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationSpec {
    pub xi0: Vec<f64>,
    pub v0: Vec<f64>,
    pub condition: String,
    /// Vector-field expressions (one per component) extending u off the
    /// trajectory, when the condition needs them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u_field: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub xi_field: Vec<String>,
    #[serde(default)]
    pub geodesic_base: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySpec {
    /// Vector-field expressions for the candidate symmetry generator.
    pub xi: Vec<String>,
    /// Kinds to test: projective | affine | isometric | conformal.
    #[serde(default = "default_kinds")]
    pub kinds: Vec<String>,
}

fn default_kinds() -> Vec<String> {
    vec![
        "projective".into(),
        "affine".into(),
        "isometric".into(),
        "conformal".into(),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DraggedSpec {
    pub w: f64,
    pub dw_dr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSpec {
    /// rk4-fixed or rk45-adaptive.
    pub method: String,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// "Holds"/check tolerance.
    pub tolerance: f64,
    /// Sampling box for per-point checks; empty = builtin box or unit box.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sample_box: Vec<[f64; 2]>,
    pub sample_count: usize,
    pub seed: u64,
    pub xi_warn_fraction: f64,
}

impl Default for NumericsSpec {
    fn default() -> Self {
        Self {
            method: "rk45-adaptive".into(),
            step: 1e-3,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 4_000_000,
            tolerance: 1e-6,
            sample_box: Vec::new(),
            sample_count: 20,
            seed: 0,
            xi_warn_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub task: TaskKind,
    pub space: SpaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation: Option<DeviationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<SymmetrySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dragged: Option<DraggedSpec>,
    #[serde(default)]
    pub numerics: NumericsSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A parse/validation diagnostic with its location when known.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub field: String,
    pub reason: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {}: {}: {}", l, self.field, self.reason),
            None => write!(f, "{}: {}", self.field, self.reason),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario rejected:\n{}", .0.iter().map(|d| format!("  - {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text.bytes().take(offset).filter(|b| *b == b'\n').count() + 1
}

/// Parses scenario text; unknown keys, bad expressions, and missing
/// task-specific sections are all reported with precise diagnostics.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        ScenarioError::Invalid(vec![Diagnostic {
            line,
            field: "scenario".into(),
            reason: e.message().to_string(),
        }])
    })?;
    let diags = validate(&scenario);
    if diags.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid(diags))
    }
}

pub fn serialize_scenario(s: &Scenario) -> String {
    toml::to_string(s).expect("scenario serialization")
}

fn check_exprs(field: &str, exprs: &[String], n: usize, diags: &mut Vec<Diagnostic>) {
    for (i, text) in exprs.iter().enumerate() {
        match parse_expr(text) {
            Err(e) => diags.push(Diagnostic {
                line: None,
                field: format!("{field}[{i}]"),
                reason: e.to_string(),
            }),
            Ok(expr) => {
                if let Some(m) = expr.max_coord() {
                    if m >= n {
                        diags.push(Diagnostic {
                            line: None,
                            field: format!("{field}[{i}]"),
                            reason: format!("uses x{} but the space has dimension {n}", m + 1),
                        });
                    }
                }
            }
        }
    }
}

fn validate(s: &Scenario) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let push = |diags: &mut Vec<Diagnostic>, field: &str, reason: String| {
        diags.push(Diagnostic {
            line: None,
            field: field.into(),
            reason,
        })
    };

    // space
    let n = match (&s.space.builtin, s.space.dimension) {
        (Some(name), _) => match Builtin::parse(name, &s.space.params) {
            Ok(b) => match b.build() {
                Ok(sp) => Some(sp.dim()),
                Err(e) => {
                    push(&mut diags, "space.builtin", e.to_string());
                    None
                }
            },
            Err(e) => {
                push(&mut diags, "space.builtin", e.to_string());
                None
            }
        },
        (None, Some(n)) if n >= 2 => Some(n),
        (None, Some(n)) => {
            push(&mut diags, "space.dimension", format!("dimension {n} < 2"));
            None
        }
        (None, None) => {
            push(
                &mut diags,
                "space",
                "either `builtin` or an inline `dimension` is required".into(),
            );
            None
        }
    };
    if let Some(n) = n {
        if s.space.builtin.is_none() {
            if !s.space.frame.is_empty() && s.space.frame.len() != n * n {
                push(
                    &mut diags,
                    "space.frame",
                    format!("needs {} entries for n = {n}", n * n),
                );
            }
            if !s.space.metric.is_empty() && s.space.metric.len() != n * n {
                push(
                    &mut diags,
                    "space.metric",
                    format!("needs {} entries for n = {n}", n * n),
                );
            }
            check_exprs("space.frame", &s.space.frame, n, &mut diags);
            check_exprs("space.metric", &s.space.metric, n, &mut diags);
            for (key, text) in &s.space.gamma {
                match parse_gamma_key(key, n) {
                    Err(reason) => push(&mut diags, &format!("space.gamma.{key}"), reason),
                    Ok(_) => check_exprs(
                        &format!("space.gamma.{key}"),
                        std::slice::from_ref(text),
                        n,
                        &mut diags,
                    ),
                }
            }
        } else if s.space.dimension.is_some()
            || !s.space.frame.is_empty()
            || !s.space.gamma.is_empty()
            || !s.space.metric.is_empty()
        {
            push(
                &mut diags,
                "space",
                "builtin spaces take no inline frame/gamma/metric".into(),
            );
        }

        let check_vec = |diags: &mut Vec<Diagnostic>, field: &str, v: &[f64]| {
            if v.len() != n {
                diags.push(Diagnostic {
                    line: None,
                    field: field.into(),
                    reason: format!("needs {n} components"),
                });
            }
        };
        if let Some(t) = &s.trajectory {
            check_vec(&mut diags, "trajectory.x0", &t.x0);
            check_vec(&mut diags, "trajectory.u0", &t.u0);
            if t.samples == 0 {
                push(&mut diags, "trajectory.samples", "must be positive".into());
            }
        }
        if let Some(d) = &s.deviation {
            check_vec(&mut diags, "deviation.xi0", &d.xi0);
            check_vec(&mut diags, "deviation.v0", &d.v0);
            if condition_from_tag(&d.condition).is_none() {
                push(
                    &mut diags,
                    "deviation.condition",
                    format!("unknown condition tag `{}`", d.condition),
                );
            }
            if !d.u_field.is_empty() && d.u_field.len() != n {
                push(&mut diags, "deviation.u-field", format!("needs {n} components"));
            }
            if !d.xi_field.is_empty() && d.xi_field.len() != n {
                push(&mut diags, "deviation.xi-field", format!("needs {n} components"));
            }
            check_exprs("deviation.u-field", &d.u_field, n, &mut diags);
            check_exprs("deviation.xi-field", &d.xi_field, n, &mut diags);
        }
        if let Some(sy) = &s.symmetry {
            if sy.xi.len() != n {
                push(&mut diags, "symmetry.xi", format!("needs {n} components"));
            }
            check_exprs("symmetry.xi", &sy.xi, n, &mut diags);
            for k in &sy.kinds {
                if !matches!(k.as_str(), "projective" | "affine" | "isometric" | "conformal") {
                    push(&mut diags, "symmetry.kinds", format!("unknown kind `{k}`"));
                }
            }
        }
        if !s.numerics.sample_box.is_empty() && s.numerics.sample_box.len() != n {
            push(
                &mut diags,
                "numerics.sample-box",
                format!("needs {n} intervals"),
            );
        }
    }

    // task-specific requirements
    let need = |diags: &mut Vec<Diagnostic>, cond: bool, field: &str| {
        if !cond {
            diags.push(Diagnostic {
                line: None,
                field: field.into(),
                reason: format!("required by task `{}`", s.task.name()),
            });
        }
    };
    match s.task {
        TaskKind::CheckIdentity | TaskKind::Classify | TaskKind::LieOracle => {}
        TaskKind::Symmetry => need(&mut diags, s.symmetry.is_some(), "symmetry"),
        TaskKind::Integrate => {
            need(&mut diags, s.trajectory.is_some(), "trajectory");
            need(&mut diags, s.deviation.is_some(), "deviation");
        }
        TaskKind::Tidal => {
            need(&mut diags, s.trajectory.is_some(), "trajectory");
            need(&mut diags, s.deviation.is_some(), "deviation");
        }
        TaskKind::DraggedResidual => {
            need(&mut diags, s.trajectory.is_some(), "trajectory");
            need(&mut diags, s.dragged.is_some(), "dragged");
            let has_fields = s
                .deviation
                .as_ref()
                .map(|d| !d.u_field.is_empty() && !d.xi_field.is_empty())
                .unwrap_or(false);
            need(&mut diags, has_fields, "deviation.u-field / deviation.xi-field");
        }
    }
    if !matches!(s.numerics.method.as_str(), "rk4-fixed" | "rk45-adaptive") {
        push(
            &mut diags,
            "numerics.method",
            format!("unknown method `{}`", s.numerics.method),
        );
    }
    if s.numerics.tolerance <= 0.0 || s.numerics.step <= 0.0 {
        push(
            &mut diags,
            "numerics",
            "tolerance and step must be positive".into(),
        );
    }
    diags
}

pub fn parse_gamma_key(key: &str, n: usize) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = key.split(',').collect();
    if parts.len() != 3 {
        return Err("gamma keys look like \"k,i,j\" with 1-based indices".into());
    }
    let mut out = [0usize; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        match part.trim().parse::<usize>() {
            Ok(v) if (1..=n).contains(&v) => *slot = v - 1,
            _ => return Err(format!("index `{part}` out of range 1..={n}")),
        }
    }
    Ok((out[0], out[1], out[2]))
}

pub fn condition_from_tag(tag: &str) -> Option<lndev_core::ConditionVariant> {
    use lndev_core::ConditionVariant::*;
    Some(match tag {
        "generalized" => Generalized,
        "geodesic" => GeodesicForceFree,
        "lie-u-zero" => LieUZero,
        "parallel-u" => ParallelU,
        "lie-f-minus-f" => LieFMinusF,
        "u-equals-xi" => UEqualsXi,
        "absorbed-lie-gamma" => AbsorbedLieGamma,
        "family" => Family,
        "free-particles" => FreeParticles,
        "dragged" => Dragged,
        _ => return None,
    })
}

/// Builds an expression-backed vector field (finite-difference partials).
pub fn expr_vector_field(exprs: &[String], n: usize) -> Result<TensorField, ScenarioError> {
    let parsed: Vec<Expr> = exprs
        .iter()
        .map(|t| {
            parse_expr(t).map_err(|e| {
                ScenarioError::Invalid(vec![Diagnostic {
                    line: None,
                    field: "field expression".into(),
                    reason: e.to_string(),
                }])
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(TensorField::vector(ArrayField::new(vec![n], move |p| {
        let c = p.to_vec();
        let data: Vec<f64> = parsed.iter().map(|e| e.eval(&c)).collect();
        Ok(ArrayD::from_shape_vec(IxDyn(&[n]), data).expect("shape"))
    })))
}

/// Builds the scenario's connection space (builtin or inline expressions).
pub fn build_space(spec: &SpaceSpec) -> Result<ConnectionSpace, ScenarioError> {
    let invalid = |field: &str, reason: String| {
        ScenarioError::Invalid(vec![Diagnostic {
            line: None,
            field: field.into(),
            reason,
        }])
    };
    if let Some(name) = &spec.builtin {
        let b = Builtin::parse(name, &spec.params)
            .map_err(|e| invalid("space.builtin", e.to_string()))?;
        return b.build().map_err(|e| invalid("space.builtin", e.to_string()));
    }
    let n = spec
        .dimension
        .ok_or_else(|| invalid("space.dimension", "required for inline spaces".into()))?;
    let parse_matrix = |field: &str, exprs: &[String]| -> Result<Vec<Expr>, ScenarioError> {
        exprs
            .iter()
            .map(|t| parse_expr(t).map_err(|e| invalid(field, e.to_string())))
            .collect()
    };
    let frame = if spec.frame.is_empty() {
        FrameField::identity(n)
    } else {
        let parsed = parse_matrix("space.frame", &spec.frame)?;
        FrameField::new(
            n,
            ArrayField::new(vec![n, n], move |p| {
                let c = p.to_vec();
                let data: Vec<f64> = parsed.iter().map(|e| e.eval(&c)).collect();
                Ok(ArrayD::from_shape_vec(IxDyn(&[n, n]), data).expect("shape"))
            }),
        )
        .map_err(|e| invalid("space.frame", e.to_string()))?
    };
    let mut entries: Vec<((usize, usize, usize), Expr)> = Vec::new();
    for (key, text) in &spec.gamma {
        let idx = parse_gamma_key(key, n).map_err(|r| invalid(&format!("space.gamma.{key}"), r))?;
        let e = parse_expr(text).map_err(|e| invalid(&format!("space.gamma.{key}"), e.to_string()))?;
        entries.push((idx, e));
    }
    let gamma = ArrayField::new(vec![n, n, n], move |p| {
        let c = p.to_vec();
        let mut data = ArrayD::<f64>::zeros(IxDyn(&[n, n, n]));
        for ((k, i, j), e) in &entries {
            data[IxDyn(&[*k, *i, *j])] = e.eval(&c);
        }
        Ok(data)
    });
    let mut space = ConnectionSpace::new(
        frame,
        ConnectionField::new(n, gamma).map_err(|e| invalid("space.gamma", e.to_string()))?,
    )
    .map_err(|e| invalid("space", e.to_string()))?;
    if !spec.metric.is_empty() {
        let parsed = parse_matrix("space.metric", &spec.metric)?;
        let metric = MetricField::new(
            n,
            ArrayField::new(vec![n, n], move |p| {
                let c = p.to_vec();
                let data: Vec<f64> = parsed.iter().map(|e| e.eval(&c)).collect();
                Ok(ArrayD::from_shape_vec(IxDyn(&[n, n]), data).expect("shape"))
            }),
        )
        .map_err(|e| invalid("space.metric", e.to_string()))?;
        space = space
            .with_metric(metric)
            .map_err(|e| invalid("space.metric", e.to_string()))?;
    }
    // expressions must evaluate finitely at a probe point
    let probe = ChartPoint::new(vec![0.1; n]).map_err(|e| invalid("space", e.to_string()))?;
    space
        .gamma(&probe)
        .map_err(|e| invalid("space.gamma", format!("probe evaluation failed: {e}")))?;
    Ok(space)
}

pub fn integrator_settings(n: &NumericsSpec) -> IntegratorSettings {
    IntegratorSettings {
        method: match n.method.as_str() {
            "rk4-fixed" => OdeMethod::Rk4Fixed { step: n.step },
            _ => OdeMethod::Rk45Adaptive {
                rel_tol: n.rel_tol,
                abs_tol: n.abs_tol,
            },
        },
        max_steps: n.max_steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
task = "check-identity"

[space]
builtin = "flat-cartesian"
params = { n = 2 }
"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.task, TaskKind::CheckIdentity);
        assert_eq!(s.numerics.sample_count, 20);
        assert_eq!(s.numerics.tolerance, 1e-6);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let bad = r#"
task = "classify"

[space]
builtin = "sphere"
metrik = "oops"
"#;
        let err = parse_scenario(bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("metrik"), "{msg}");
        assert!(msg.contains("line 6"), "{msg}");
    }

    #[test]
    fn missing_sections_are_reported() {
        let bad = r#"
task = "integrate"

[space]
builtin = "sphere"
"#;
        let err = parse_scenario(bad).unwrap_err().to_string();
        assert!(err.contains("trajectory"), "{err}");
        assert!(err.contains("deviation"), "{err}");
    }

    #[test]
    fn inline_space_builds() {
        let text = r#"
task = "classify"

[space]
dimension = 2
metric = ["1", "0", "0", "x1^2"]

[space.gamma]
"1,2,2" = "-x1"
"2,1,2" = "1/x1"
"2,2,1" = "1/x1"
"#;
        let s = parse_scenario(text).unwrap();
        let space = build_space(&s.space).unwrap();
        assert_eq!(space.dim(), 2);
        let g = space
            .gamma(&ChartPoint::new(vec![2.0, 0.3]).unwrap())
            .unwrap();
        assert_eq!(g[(0, 1, 1)], -2.0);
        assert_eq!(g[(1, 0, 1)], 0.5);
    }

    #[test]
    fn round_trip_preserves_scenario() {
        let text = r#"
task = "integrate"

[space]
builtin = "sphere"
params = { a = 1.0, n = 2 }

[trajectory]
x0 = [1.5707963267948966, 0.0]
u0 = [0.0, 1.0]
s_range = [0.0, 1.5]
samples = 40

[deviation]
xi0 = [0.01, 0.0]
v0 = [0.0, 0.0]
condition = "free-particles"

[numerics]
method = "rk4-fixed"
step = 0.001
seed = 7
"#;
        let s1 = parse_scenario(text).unwrap();
        let s2 = parse_scenario(&serialize_scenario(&s1)).unwrap();
        assert_eq!(s1, s2);
    }
}
