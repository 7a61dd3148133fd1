//! Numerical toolkit for n-dimensional spaces with affine connection in
//! arbitrary frames: curvature/torsion/Lie-derivative structure, symmetry and
//! classification checks, and integration of the generalized deviation
//! equation along trajectories under pluggable closing conditions.
//!
//! The geometric arena is a [`manifold::ConnectionSpace`] (frame field,
//! connection coefficients, optional metric) over a single global chart.
//! Built-in spaces live in [`builtin`]; the exact-identity and finite-ε
//! dragging oracles that pin the sign conventions live in [`lie`] and
//! [`numerics::dragging`].

pub mod builtin;
pub mod classify;
pub mod curvature;
pub mod deviation;
pub mod error;
pub mod field;
pub mod lie;
pub mod manifold;
pub mod numerics;
pub mod point;
pub mod poly;
pub mod tensor;

pub use builtin::{compensation_setup, Builtin, CompensationSetup};
pub use classify::{
    check_symmetry, classify_space, ClassificationReport, ClassifyOptions, PropertyCheck,
    Recovered, SymmetryKind,
};
pub use curvature::{anholonomy, curvature, ricci, thomas_projective, torsion, CurvatureValue, TorsionValue};
pub use deviation::{
    dragged_condition_residual, family_first_integral_residual, family_torsion_tensor,
    force_term_from_curve, force_term_from_field, generalized_deviation_rhs, geodesic_torsion_tensor,
    integrate_deviation, integrate_geodesic, tidal_decomposition, BaseTrajectory, ConditionVariant,
    DeviationAux, DeviationSeries, DeviationSettings, DeviationState, DragData, ForceTerm,
    Trajectory, TrajectorySample,
};
pub use error::{GeomError, Result};
pub use field::ArrayField;
pub use lie::{
    lie_bracket, lie_derivative_connection, lie_derivative_metric, lie_derivative_tensor,
    lie_metric_weight_normalized, lie_thomas_projective, LieConnectionValue, LieGammaSource,
};
pub use manifold::{
    coordinate_connection, covariant_derivative_at, frame_directional_derivative, frame_partial,
    second_covariant_derivative, transform_connection, ConnectionField, ConnectionSpace,
    FrameField, MetricField, TensorField,
};
pub use numerics::{dragging_oracle, fd_derivative, DraggingProbe, FdScheme, IntegratorSettings, OdeMethod};
pub use point::ChartPoint;
pub use tensor::{transform_tensor, TensorValue};
