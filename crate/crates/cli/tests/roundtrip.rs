//! Property test: serializing a scenario and reparsing it yields an
//! identical scenario.

use lndev_cli::scenario::{
    parse_scenario, serialize_scenario, DeviationSpec, NumericsSpec, OutputSpec, Scenario,
    SpaceSpec, SymmetrySpec, TaskKind, TrajectorySpec,
};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn finite() -> impl Strategy<Value = f64> {
    (-100.0..100.0f64).prop_filter("finite", |v| v.is_finite())
}

fn vec_n(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(finite(), n)
}

fn builtin_space() -> impl Strategy<Value = SpaceSpec> {
    (prop_oneof![Just("flat-cartesian"), Just("sphere")], 2usize..=3).prop_map(|(name, n)| {
        let mut params = BTreeMap::new();
        params.insert("n".to_string(), n as f64);
        if name == "sphere" {
            params.insert("a".to_string(), 1.0);
        }
        SpaceSpec {
            builtin: Some(name.to_string()),
            params,
            ..Default::default()
        }
    })
}

fn integrate_scenario() -> impl Strategy<Value = Scenario> {
    (vec_n(2), vec_n(2), 1usize..200, any::<u64>(), 1e-9..1e-2f64).prop_map(
        |(xi0, v0, samples, seed, tolerance)| Scenario {
            task: TaskKind::Integrate,
            space: SpaceSpec {
                builtin: Some("flat-cartesian".into()),
                params: BTreeMap::from([("n".to_string(), 2.0)]),
                ..Default::default()
            },
            trajectory: Some(TrajectorySpec {
                x0: vec![0.0, 0.0],
                u0: vec![1.0, 0.0],
                s_range: [0.0, 1.0],
                samples,
            }),
            deviation: Some(DeviationSpec {
                xi0,
                v0,
                condition: "free-particles".into(),
                u_field: vec!["1".into(), "0".into()],
                xi_field: Vec::new(),
                geodesic_base: false,
            }),
            symmetry: None,
            dragged: None,
            numerics: NumericsSpec {
                seed,
                tolerance,
                ..Default::default()
            },
            output: OutputSpec::default(),
        },
    )
}

fn symmetry_scenario() -> impl Strategy<Value = Scenario> {
    (builtin_space(), any::<u64>()).prop_map(|(space, seed)| {
        let n = space.params.get("n").copied().unwrap_or(2.0) as usize;
        Scenario {
            task: TaskKind::Symmetry,
            symmetry: Some(SymmetrySpec {
                xi: (0..n).map(|i| format!("x{}", i + 1)).collect(),
                kinds: vec!["affine".into(), "projective".into()],
            }),
            space,
            trajectory: None,
            deviation: None,
            dragged: None,
            numerics: NumericsSpec {
                seed,
                ..Default::default()
            },
            output: OutputSpec::default(),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn serialize_then_parse_is_identity(s in prop_oneof![integrate_scenario(), symmetry_scenario()]) {
        let text = serialize_scenario(&s);
        let reparsed = parse_scenario(&text).unwrap_or_else(|e| panic!("reparse failed: {e}\n{text}"));
        prop_assert_eq!(s, reparsed);
    }
}
