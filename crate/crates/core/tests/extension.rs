mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sobext::domains::{gen_domain, gen_test_field, DomainKind, DomainSpec};
use sobext::extension::{
    extend, extend_p1, extend_vector, extend_with, extension_criterion, extension_criterion_sweep,
    local_extension_estimate, maximal_bound, operator_norm_ratio, CriterionLevel, ExtendOptions,
    ExtensionOperator, OperatorKind, Verdict,
};
use sobext::gradients::{discrete_upper_gradient, Scope, SolveOptions, Values};
use sobext::space::{Field, NormTag, Space, SubsetMask, VecField};

fn domain(kind: DomainKind, h: f64) -> (Space, Arc<SubsetMask>) {
    gen_domain(&DomainSpec::new(kind, h)).unwrap()
}

fn random_field(f: &Arc<SubsetMask>, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..f.universe()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Field::new(f.clone(), vals).unwrap()
}

fn random_vec(f: &Arc<SubsetMask>, n: usize, seed: u64) -> VecField {
    let coords: Vec<Field> = (0..n).map(|k| random_field(f, seed * 31 + k as u64)).collect();
    VecField::from_coords(&coords, NormTag::Sup).unwrap()
}

#[test]
fn constant_extends_to_constant_on_u() {
    let (space, f) = domain(DomainKind::Disk, 1.0 / 16.0);
    let u = Field::constant(f.clone(), 2.5).unwrap();
    for p in [1.0, 2.0] {
        let res = extend(&space, &f, &u, p).unwrap();
        let h = res.h.scalar().unwrap();
        let t = res.tilde.scalar().unwrap();
        for i in f.indices() {
            assert_eq!(h.value(i), 2.5);
        }
        for z in 0..space.len() {
            assert!((t.value(z) - 2.5).abs() <= 1e-12 * 2.5, "z {z} t {}", t.value(z));
        }
        assert_eq!(res.diagnostics.restriction_residual, 0.0);
    }
}

#[test]
fn restriction_identity_is_bitwise() {
    for kind in [DomainKind::Disk, DomainKind::SlitDisk, DomainKind::TwoSquares] {
        let (space, f) = domain(kind, 1.0 / 16.0);
        let u = random_field(&f, 5);
        for p in [1.0, 1.5, 2.0] {
            let res = extend(&space, &f, &u, p).unwrap();
            let h = res.h.scalar().unwrap();
            for i in f.indices() {
                assert_eq!(h.value(i).to_bits(), u.value(i).to_bits());
            }
        }
    }
}

#[test]
fn operators_are_linear() {
    let (space, f) = domain(DomainKind::Disk, 1.0 / 16.0);
    for kind in [OperatorKind::PGt1, OperatorKind::PEq1] {
        let op = ExtensionOperator::new(&space, &f, kind).unwrap();
        let (u, v) = (random_field(&f, 1), random_field(&f, 2));
        let alpha = -1.7;
        let w = Field::from_fn(f.clone(), |i| u.value(i) + alpha * v.value(i)).unwrap();
        let (eu, ev, ew) = (
            op.apply(&space, &u).unwrap(),
            op.apply(&space, &v).unwrap(),
            op.apply(&space, &w).unwrap(),
        );
        let scale = ew.max_abs().max(1.0);
        for z in 0..space.len() {
            assert!((ew.value(z) - eu.value(z) - alpha * ev.value(z)).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn vector_extension_commutes_with_linear_maps() {
    let (space, f) = domain(DomainKind::SlitDisk, 1.0 / 16.0);
    let op = ExtensionOperator::new(&space, &f, OperatorKind::PGt1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let t: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let u = random_vec(&f, 3, 9);
    let a = op.apply_vec(&space, &u.apply_linear(&t, 3).unwrap()).unwrap();
    let b = op.apply_vec(&space, &u).unwrap().apply_linear(&t, 3).unwrap();
    let scale = b.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((x - y).abs() <= 1e-12 * scale);
    }
    // Projection onto a coordinate commutes exactly.
    let e = op.apply_vec(&space, &u).unwrap();
    for k in 0..3 {
        assert_eq!(e.coord(k).unwrap(), op.apply(&space, &u.coord(k).unwrap()).unwrap());
    }
}

#[test]
fn one_coordinate_vector_matches_scalar_bitwise() {
    let (space, f) = domain(DomainKind::TwoSquares, 1.0 / 16.0);
    let u = random_field(&f, 3);
    let v = VecField::from_coords(&[u.clone()], NormTag::Sup).unwrap();
    for p in [1.0, 2.0] {
        let a = extend(&space, &f, &u, p).unwrap();
        let b = extend_vector(&space, &f, &v, p).unwrap();
        let hb = b.h.vector().unwrap().coord(0).unwrap();
        assert_eq!(a.h.scalar().unwrap(), &hb);
        assert_eq!(a.diagnostics, b.diagnostics);
    }
}

#[test]
fn positivity_and_pointwise_norm_bound() {
    let (space, f) = domain(DomainKind::Disk, 1.0 / 16.0);
    let op = ExtensionOperator::new(&space, &f, OperatorKind::PGt1).unwrap();
    for seed in 0..5 {
        let u = random_vec(&f, 3, seed);
        let tv = op.tilde_vec(&space, &u).unwrap();
        let tr = op.tilde(&space, &u.norm_field()).unwrap();
        for z in 0..space.len() {
            assert!(tr.value(z) >= 0.0);
            assert!(tv.norm_at(z) <= tr.value(z), "z {z}");
        }
    }
}

#[test]
fn p1_support_lies_in_dilated_balls() {
    let (space, f) = domain(DomainKind::Disk, 1.0 / 32.0);
    let op = ExtensionOperator::new(&space, &f, OperatorKind::PEq1).unwrap();
    let r = space.scale_unit() / 10.0;
    let u = random_field(&f, 4);
    let h = op.apply(&space, &u).unwrap();
    for z in 0..space.len() {
        if h.value(z) != 0.0 {
            assert!(op.p1_centers.iter().any(|&c| space.dist(c, z) < 5.0 * r));
        }
    }
    // Centers are pairwise at least a diameter apart.
    for (a, &c) in op.p1_centers.iter().enumerate() {
        for &d in &op.p1_centers[a + 1..] {
            assert!(space.dist(c, d) >= 2.0 * r);
        }
    }
}

#[test]
fn p1_overlap_regression_on_disk_family() {
    let mut seen = Vec::new();
    for kind in [DomainKind::Disk, DomainKind::SlitDisk, DomainKind::OutwardCusp] {
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let (space, f) = domain(kind, h);
            let op = ExtensionOperator::new(&space, &f, OperatorKind::PEq1).unwrap();
            seen.push((kind.name(), h, op.p1_overlap));
        }
    }
    let frozen = [22, 23, 21, 23, 21, 23];
    let got: Vec<usize> = seen.iter().map(|s| s.2).collect();
    assert_eq!(got, frozen, "{seen:?}");
}

#[test]
fn maximal_bound_constant_is_stable_under_refinement() {
    let mut cs = Vec::new();
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let (space, f) = domain(DomainKind::Disk, h);
        let op = ExtensionOperator::new(&space, &f, OperatorKind::PGt1).unwrap();
        let u = gen_test_field("random_smooth:3", &space, &f).unwrap();
        let t = op.tilde(&space, &u.abs()).unwrap();
        cs.push(maximal_bound(&space, &op, &t, &u.abs()).unwrap().c);
    }
    println!("maximal bound constants {cs:?}");
    assert!(cs[1] <= 1.5 * cs[0] && cs[0] <= 1.5 * cs[1], "{cs:?}");
}

#[test]
fn diagnostics_report_sizes_and_margin() {
    let (space, f) = domain(DomainKind::HalfPlane, 1.0 / 16.0);
    let u = gen_test_field("linear:y", &space, &f).unwrap();
    let res = extend_with(&space, &f, Values::Scalar(&u), 2.0, &ExtendOptions::default()).unwrap();
    let d = &res.diagnostics;
    assert!(d.density > 0.4);
    assert!(d.whitney_balls > 0 && d.i1_balls == d.whitney_balls);
    assert!(d.maximal_margin.as_ref().unwrap().c.is_finite());
    assert_eq!(res.operator_kind, OperatorKind::PGt1);
    assert_eq!(extend_p1(&space, &f, &u).unwrap().operator_kind, OperatorKind::PEq1);
}

#[test]
fn empty_subset_is_rejected() {
    let (space, _) = domain(DomainKind::Disk, 1.0 / 8.0);
    let empty = Arc::new(space.mask(vec![false; space.len()]).unwrap());
    assert!(ExtensionOperator::new(&space, &empty, OperatorKind::PGt1).is_err());
}

#[test]
fn field_undefined_on_f_is_rejected() {
    let (space, f) = domain(DomainKind::Disk, 1.0 / 8.0);
    let part: Vec<bool> = (0..space.len()).map(|i| f.contains(i) && i % 2 == 0).collect();
    let part = Arc::new(space.mask(part).unwrap());
    let u = Field::constant(part, 1.0).unwrap();
    assert!(extend(&space, &f, &u, 2.0).is_err());
}

#[test]
fn local_estimate_of_constant_is_zero() {
    let (space, f) = domain(DomainKind::Disk, 1.0 / 16.0);
    let op = ExtensionOperator::new(&space, &f, OperatorKind::PGt1).unwrap();
    let u = Field::constant(f.clone(), 1.0).unwrap();
    let g = Field::constant(f.clone(), 0.0).unwrap();
    let x = f.indices()[0];
    let est = local_extension_estimate(&space, &op, &u, &g, x, 0.2).unwrap();
    assert_eq!(est.c, 0.0);
    assert!(est.pairs > 0);
}

#[test]
fn local_estimate_rejects_infeasible_gradient() {
    let (space, f) = domain(DomainKind::Disk, 1.0 / 16.0);
    let op = ExtensionOperator::new(&space, &f, OperatorKind::PGt1).unwrap();
    let u = gen_test_field("linear:x", &space, &f).unwrap();
    let g = Field::constant(f.clone(), 0.1).unwrap();
    let x = f.indices()[0];
    assert!(local_extension_estimate(&space, &op, &u, &g, x, 0.2).is_err());
}

/// Boundary point of `F` nearest to `target`.
fn nearest_point(space: &Space, f: &SubsetMask, target: [f64; 2]) -> usize {
    f.indices()
        .into_iter()
        .min_by(|&a, &b| {
            let da = (space.coords()[a][0] - target[0]).hypot(space.coords()[a][1] - target[1]);
            let db = (space.coords()[b][0] - target[0]).hypot(space.coords()[b][1] - target[1]);
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .unwrap()
}

#[test]
fn local_estimate_is_refinement_stable_on_half_plane() {
    let mut cs = Vec::new();
    for h in [1.0 / 16.0, 1.0 / 32.0] {
        let (space, f) = domain(DomainKind::HalfPlane, h);
        let op = ExtensionOperator::new(&space, &f, OperatorKind::PGt1).unwrap();
        let u = gen_test_field("linear:x", &space, &f).unwrap();
        let g = Field::constant(f.clone(), 0.5).unwrap();
        let x = nearest_point(&space, &f, [0.0, 0.0]);
        cs.push(local_extension_estimate(&space, &op, &u, &g, x, 0.2).unwrap().c);
    }
    println!("half-plane local constants {cs:?}");
    assert!(cs[0] > 0.0 && cs[1] <= 1.5 * cs[0] && cs[0] <= 1.5 * cs[1], "{cs:?}");
}

/// Fitted constant over boundary centers at eight angles.
fn boundary_constant(space: &Space, op: &ExtensionOperator, u: &Field, g: &Field, r: f64) -> f64 {
    (0..8)
        .map(|k| {
            let a = k as f64 * std::f64::consts::FRAC_PI_4 + 0.1;
            let x = nearest_point(space, op.subset(), [a.cos(), a.sin()]);
            local_extension_estimate(space, op, u, g, x, r).unwrap().c
        })
        .fold(0.0, f64::max)
}

#[test]
fn local_estimate_grows_mildly_with_scale_on_disk_family() {
    for kind in [DomainKind::Disk, DomainKind::SlitDisk] {
        let (space, f) = domain(kind, 1.0 / 32.0);
        let op = ExtensionOperator::new(&space, &f, OperatorKind::PGt1).unwrap();
        let u = gen_test_field("linear:x", &space, &f).unwrap();
        let g = Field::constant(f.clone(), 0.5).unwrap();
        let c1 = boundary_constant(&space, &op, &u, &g, 0.1);
        let c4 = boundary_constant(&space, &op, &u, &g, 0.4);
        println!("{} local constants r=0.1: {c1}, r=0.4: {c4}", kind.name());
        assert!(c1 > 0.0 && c4 <= 2.0 * c1, "{c1} {c4}");
    }
}

#[test]
fn criterion_needs_two_levels() {
    let one = vec![CriterionLevel { h: 0.1, points: 10, norms: vec![1.0] }];
    assert_eq!(extension_criterion(one, 2.0, &[0.1]).unwrap().verdict, Verdict::Inconclusive);
    let grow = vec![
        CriterionLevel { h: 0.1, points: 10, norms: vec![1.0, 1.0] },
        CriterionLevel { h: 0.05, points: 40, norms: vec![1.6, 1.5] },
    ];
    assert_eq!(extension_criterion(grow, 2.0, &[0.1, 0.2]).unwrap().verdict, Verdict::Obstructed);
    let mixed = vec![
        CriterionLevel { h: 0.1, points: 10, norms: vec![1.0, 1.0] },
        CriterionLevel { h: 0.05, points: 40, norms: vec![1.6, 1.3] },
    ];
    assert_eq!(extension_criterion(mixed, 2.0, &[0.1, 0.2]).unwrap().verdict, Verdict::Inconclusive);
}

#[test]
fn smooth_radial_field_on_disk_is_extendable() {
    let rep = extension_criterion_sweep(
        &DomainSpec::new(DomainKind::Disk, 1.0 / 32.0),
        &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
        "radial",
        2.0,
        &[0.05, 0.1, 0.2],
    )
    .unwrap();
    println!("{:?} {:?}", rep.spread, rep.growth);
    assert_eq!(rep.verdict, Verdict::ExtendableStable);
}

#[test]
fn operator_norm_ratio_is_bounded_on_small_grids() {
    let mut ratios = Vec::new();
    for h in [1.0 / 4.0, 1.0 / 6.0] {
        let (space, f) = domain(DomainKind::Disk, h);
        let op = ExtensionOperator::new(&space, &f, OperatorKind::PGt1).unwrap();
        let u = gen_test_field("linear:x", &space, &f).unwrap();
        let rep = operator_norm_ratio(&space, &op, &u, 2.0, Scope::Global, &SolveOptions::default()).unwrap();
        assert!(!rep.localized);
        ratios.push(rep.ratio);
    }
    println!("operator norm ratios {ratios:?}");
    assert!(ratios.iter().all(|&r| r > 0.5 && r < 4.0), "{ratios:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn restriction_and_positivity_hold_for_random_fields(seed in 0u64..10_000, shift in 0.0f64..2.0) {
        let (space, f) = domain(DomainKind::TwoSquares, 1.0 / 8.0);
        let u = random_field(&f, seed).map(|v| v + shift).unwrap();
        let op = ExtensionOperator::new(&space, &f, OperatorKind::PGt1).unwrap();
        let h = op.apply(&space, &u).unwrap();
        let t = op.tilde(&space, &u).unwrap();
        let ta = op.tilde(&space, &u.abs()).unwrap();
        for i in 0..space.len() {
            if f.contains(i) {
                prop_assert_eq!(h.value(i).to_bits(), u.value(i).to_bits());
            }
            prop_assert!(t.value(i).abs() <= ta.value(i));
            if shift >= 1.0 {
                prop_assert!(t.value(i) >= 0.0);
            }
        }
    }

    #[test]
    fn upper_gradient_of_extension_is_finite(seed in 0u64..1000) {
        let (space, f) = domain(DomainKind::Disk, 1.0 / 8.0);
        let u = random_field(&f, seed);
        let h = extend(&space, &f, &u, 2.0).unwrap();
        let rho = discrete_upper_gradient(&space, h.h.scalar().unwrap().into());
        prop_assert!(rho.max_abs().is_finite());
    }
}
