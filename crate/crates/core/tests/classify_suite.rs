//! Classification and symmetry-check tests: recovery inverses, the
//! implication lattice on builtins, and the symmetry kinds on Euclidean
//! fields.

mod common;

use common::rng;
use lndev_core::builtin::Builtin;
use lndev_core::classify::{
    check_symmetry, classify_space, ClassifyOptions, Recovered, SymmetryKind,
};
use lndev_core::manifold::TensorField;
use lndev_core::point::ChartPoint;
use lndev_core::poly::{poly_array_field, MultiPoly};
use rand::Rng;

fn box_points(b: &Builtin, count: usize, seed: u64) -> Vec<ChartPoint> {
    let bounds = b.sample_box();
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            ChartPoint::new(
                bounds
                    .iter()
                    .map(|(lo, hi)| r.random_range(*lo..*hi))
                    .collect(),
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn builtin_truth_tables() {
    for b in [
        Builtin::FlatCartesian { n: 2 },
        Builtin::FlatCartesian { n: 3 },
        Builtin::FlatPolarFrame,
        Builtin::ConstantTorsion { c: 0.5 },
        Builtin::Sphere { a: 1.0, dim: 2 },
        Builtin::Sphere { a: 1.4, dim: 3 },
        Builtin::WeylExample {
            sigma_slope: 0.3,
            w: [0.4, -0.3, 0.2],
        },
        Builtin::Compensation,
    ] {
        let space = b.build().unwrap();
        let points = box_points(&b, 6, 97);
        let report = classify_space(&space, &points, &ClassifyOptions::default()).unwrap();
        for (name, expect) in b.expected_classes() {
            let entry = report
                .get(name)
                .unwrap_or_else(|| panic!("{b:?}: class {name} missing from report"));
            assert_eq!(
                entry.holds, expect,
                "{b:?}: class {name} residual {:.3e}",
                entry.residual
            );
        }
    }
}

#[test]
fn sphere_einstein_constant_matches_oracle() {
    // frozen oracle: f = −(n−1)/a² under the adopted Ricci contraction
    for (a, dim) in [(1.0, 2), (1.7, 2), (1.2, 3)] {
        let b = Builtin::Sphere { a, dim };
        let space = b.build().unwrap();
        let report =
            classify_space(&space, &box_points(&b, 5, 3), &ClassifyOptions::default()).unwrap();
        let e = report.get("einstein").unwrap();
        assert!(e.holds);
        let f_oracle = -((dim - 1) as f64) / (a * a);
        match e.recovered {
            Some(Recovered::Scalar(f)) => {
                assert!((f - f_oracle).abs() < 1e-6, "f = {f} vs oracle {f_oracle}")
            }
            ref other => panic!("expected scalar recovery, got {other:?}"),
        }
    }
}

#[test]
fn sphere3_is_conformally_euclidean() {
    let b = Builtin::Sphere { a: 1.0, dim: 3 };
    let space = b.build().unwrap();
    let report =
        classify_space(&space, &box_points(&b, 4, 5), &ClassifyOptions::default()).unwrap();
    let e = report.get("conformally-euclidean").unwrap();
    assert!(
        e.holds,
        "3-sphere should pass 3.13/3.13a: residual {:.3e} ({:?})",
        e.residual, e.detail
    );
}

#[test]
fn weyl_example_recovers_its_covector() {
    let w_true = [0.4, -0.3, 0.2];
    let b = Builtin::WeylExample {
        sigma_slope: 0.3,
        w: w_true,
    };
    let space = b.build().unwrap();
    let report =
        classify_space(&space, &box_points(&b, 6, 7), &ClassifyOptions::default()).unwrap();
    let semi = report.get("semi-metric").unwrap();
    assert!(semi.holds);
    match &semi.recovered {
        Some(Recovered::Covector(w)) => {
            for (got, want) in w.iter().zip(w_true) {
                assert!((got - want).abs() < 1e-6, "w recovered {got} vs {want}");
            }
        }
        other => panic!("expected covector recovery, got {other:?}"),
    }
    assert!(!report.get("metric-transport").unwrap().holds);
}

#[test]
fn implication_lattice_on_builtins() {
    // metric transport ⇒ semi-metric with w = 0; flat ⇒ 1-recurrent
    for b in [
        Builtin::FlatCartesian { n: 3 },
        Builtin::Sphere { a: 1.0, dim: 2 },
        Builtin::FlatPolarFrame,
    ] {
        let space = b.build().unwrap();
        let report =
            classify_space(&space, &box_points(&b, 5, 11), &ClassifyOptions::default()).unwrap();
        if let (Some(mt), Some(sm)) = (report.get("metric-transport"), report.get("semi-metric")) {
            if mt.holds {
                assert!(sm.holds, "{b:?}: metric transport without semi-metric");
                if let Some(Recovered::Covector(w)) = &sm.recovered {
                    assert!(w.iter().all(|v| v.abs() < 1e-6), "{b:?}: w should be 0");
                }
            }
        }
        if let (Some(flat), Some(rec)) = (report.get("flat"), report.get("1-recurrent")) {
            if flat.holds {
                assert!(rec.holds, "{b:?}: flat but not recurrent");
            }
        }
        // Einstein consistency: when the space is metric-compatible and
        // torsion-free, the Ricci used in the Einstein check is symmetric
        if report.get("metric-transport").map(|e| e.holds) == Some(true)
            && report.get("torsion-free").map(|e| e.holds) == Some(true)
        {
            assert!(report.get("equiaffine").unwrap().holds, "{b:?}");
        }
    }
}

#[test]
fn euclidean_symmetries() {
    let b = Builtin::FlatCartesian { n: 2 };
    let space = b.build().unwrap();
    let points = box_points(&b, 5, 13);
    // translation: all four kinds hold
    let translation = TensorField::vector(poly_array_field(
        2,
        vec![2],
        vec![MultiPoly::constant(2, 1.0), MultiPoly::constant(2, -0.5)],
    ));
    for kind in [
        SymmetryKind::Projective,
        SymmetryKind::Affine,
        SymmetryKind::Isometric,
        SymmetryKind::Conformal,
    ] {
        let check = check_symmetry(&space, &translation, kind, &points, 1e-10).unwrap();
        assert!(
            check.holds && check.residual < 1e-10,
            "translation {kind:?}: {:.3e}",
            check.residual
        );
    }
    // rotation: isometric
    let rotation = TensorField::vector(poly_array_field(
        2,
        vec![2],
        vec![
            MultiPoly::coordinate(2, 1).scale(-1.0),
            MultiPoly::coordinate(2, 0),
        ],
    ));
    let check = check_symmetry(&space, &rotation, SymmetryKind::Isometric, &points, 1e-10).unwrap();
    assert!(check.holds);
    // dilation: conformal with Φ = 1, isometric fails
    let dilation = TensorField::vector(poly_array_field(
        2,
        vec![2],
        vec![MultiPoly::coordinate(2, 0), MultiPoly::coordinate(2, 1)],
    ));
    let conf = check_symmetry(&space, &dilation, SymmetryKind::Conformal, &points, 1e-8).unwrap();
    assert!(conf.holds);
    match &conf.recovered {
        Some(Recovered::PerPoint(phis)) => {
            assert!(phis.iter().all(|p| (p - 1.0).abs() < 1e-8));
        }
        other => panic!("expected per-point Φ, got {other:?}"),
    }
    let wn = conf
        .extra_residuals
        .iter()
        .find(|(name, _)| name == "weight-normalized")
        .unwrap();
    assert!(wn.1 < 1e-8, "3.4a residual {}", wn.1);
    let iso = check_symmetry(&space, &dilation, SymmetryKind::Isometric, &points, 1e-8).unwrap();
    assert!(!iso.holds, "dilation must fail the isometric check");
}

#[test]
fn affine_symmetry_implies_projective() {
    // constant ξ on a constant-Γ space is an affine collineation; the Thomas
    // parameters must then be Lie-invariant as well
    let b = Builtin::WeylExample {
        sigma_slope: 0.3,
        w: [0.4, -0.3, 0.2],
    };
    let space = b.build().unwrap();
    let points = box_points(&b, 5, 17);
    let xi = TensorField::vector(poly_array_field(
        3,
        vec![3],
        vec![
            MultiPoly::constant(3, 0.7),
            MultiPoly::constant(3, -0.2),
            MultiPoly::constant(3, 0.4),
        ],
    ));
    let affine = check_symmetry(&space, &xi, SymmetryKind::Affine, &points, 1e-9).unwrap();
    assert!(affine.holds, "affine residual {:.3e}", affine.residual);
    let projective = check_symmetry(&space, &xi, SymmetryKind::Projective, &points, 1e-9).unwrap();
    assert!(projective.holds, "projective residual {:.3e}", projective.residual);
}

#[test]
fn sphere_killing_field() {
    // ∂_φ generates rotations of the sphere: isometric and affine
    let b = Builtin::Sphere { a: 1.0, dim: 2 };
    let space = b.build().unwrap();
    let points = box_points(&b, 5, 19);
    let xi = TensorField::vector(poly_array_field(
        2,
        vec![2],
        vec![MultiPoly::zero(2), MultiPoly::constant(2, 1.0)],
    ));
    for kind in [SymmetryKind::Isometric, SymmetryKind::Affine, SymmetryKind::Projective] {
        let check = check_symmetry(&space, &xi, kind, &points, 1e-8).unwrap();
        assert!(check.holds, "{kind:?} residual {:.3e}", check.residual);
    }
}

#[test]
fn missing_metric_is_reported() {
    let b = Builtin::ConstantTorsion { c: 0.3 };
    let space = b.build().unwrap();
    let report =
        classify_space(&space, &box_points(&b, 3, 23), &ClassifyOptions::default()).unwrap();
    assert!(report.get("semi-metric").is_none());
    assert!(report.skipped.iter().any(|s| s.contains("semi-metric")));
    let xi = TensorField::vector(poly_array_field(
        2,
        vec![2],
        vec![MultiPoly::constant(2, 1.0), MultiPoly::zero(2)],
    ));
    let err = check_symmetry(
        &space,
        &xi,
        SymmetryKind::Isometric,
        &box_points(&b, 2, 29),
        1e-8,
    );
    assert!(err.is_err());
}
