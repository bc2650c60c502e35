mod common;

use std::sync::Arc;

use common::{oracle_norm, random_instance, random_vec_field, rel_err};
use proptest::prelude::*;
use sobext::domains::{gen_domain, gen_test_field, DomainKind, DomainSpec};
use sobext::gradients::{
    check_hajlasz, discrete_upper_gradient, lipschitz_postcompose, local_gradient_from_sharp,
    minimal_hajlasz_gradient, product_rule, sharp_functional, sharp_functional_multi, Scope,
    SharpOptions, SolveOptions,
};
use sobext::space::{build_grid_space, Field, MetricKind, NormTag, Space, VecField};

fn line(n: usize, h: f64) -> Space {
    build_grid_space(&[(0.0, n as f64 * h)], h, MetricKind::Euclidean, 1 << 20).unwrap()
}

#[test]
fn constant_field_checks_with_zero_gradient() {
    let inst = random_instance(1, 8);
    let u = Field::constant(inst.full.clone(), 3.0).unwrap();
    let g = Field::constant(inst.full.clone(), 0.0).unwrap();
    let c = check_hajlasz(&inst.space, (&u).into(), &g, Scope::Global, 2.0, 0.0).unwrap();
    assert!(c.feasible);
    assert_eq!(c.pairs_checked, 28);
}

#[test]
fn unit_pair_is_tight_at_one_half() {
    let s = line(2, 1.0);
    let full = Arc::new(s.full_mask());
    let u = Field::new(full.clone(), vec![0.0, 1.0]).unwrap();
    let g = Field::constant(full.clone(), 0.5).unwrap();
    let c = check_hajlasz(&s, (&u).into(), &g, Scope::Global, 2.0, 0.0).unwrap();
    assert!(c.feasible);
    assert_eq!(c.worst_pair.unwrap().2, 0.0);
    for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
        let m = minimal_hajlasz_gradient(&s, (&u).into(), p, Scope::Global, &SolveOptions::default()).unwrap();
        assert!(m.feasible);
        if p == 1.0 {
            assert!((m.lp_norm - 1.0).abs() < 1e-9);
            continue;
        }
        for i in 0..2 {
            assert!((m.g.value(i) - 0.5).abs() < 1e-9, "p={p} g={:?}", m.g.values());
        }
    }
}

#[test]
fn minimal_gradient_of_constant_is_zero() {
    let inst = random_instance(2, 10);
    let u = Field::constant(inst.full.clone(), -2.0).unwrap();
    for p in [1.0, 2.0, f64::INFINITY] {
        let m = minimal_hajlasz_gradient(&inst.space, (&u).into(), p, Scope::Global, &SolveOptions::default()).unwrap();
        assert_eq!(m.lp_norm, 0.0);
    }
}

#[test]
fn minimal_gradient_matches_interior_point_oracle() {
    for seed in 0..12u64 {
        let inst = random_instance(100 + seed, 12);
        for p in [1.0, 2.0, f64::INFINITY] {
            let ours = minimal_hajlasz_gradient(&inst.space, (&inst.u).into(), p, Scope::Global, &SolveOptions::default()).unwrap();
            assert!(ours.feasible);
            let oracle = oracle_norm(&inst.space, inst.u.values(), p);
            let e = rel_err(ours.lp_norm, oracle);
            assert!(e <= 1e-8, "seed {seed} p {p}: ours {} oracle {oracle} rel {e:.2e}", ours.lp_norm);
        }
    }
}

#[test]
fn intermediate_exponent_is_between_neighbours_and_feasible() {
    let inst = random_instance(7, 10);
    let opts = SolveOptions::default();
    for p in [1.5, 3.0] {
        let m = minimal_hajlasz_gradient(&inst.space, (&inst.u).into(), p, Scope::Global, &opts).unwrap();
        assert!(m.feasible);
        let info = m.solver.unwrap();
        assert!(info.gap <= 1e-9, "gap {}", info.gap);
    }
}

#[test]
fn local_scope_never_increases_optimum() {
    for seed in 0..5u64 {
        let inst = random_instance(300 + seed, 10);
        for p in [1.0, 2.0, f64::INFINITY] {
            let opts = SolveOptions::default();
            let g = minimal_hajlasz_gradient(&inst.space, (&inst.u).into(), p, Scope::Global, &opts).unwrap();
            let l = minimal_hajlasz_gradient(&inst.space, (&inst.u).into(), p, Scope::Local(0.4), &opts).unwrap();
            assert!(l.lp_norm <= g.lp_norm * (1.0 + 1e-9));
        }
    }
}

#[test]
fn optimum_scales_with_the_field() {
    let inst = random_instance(11, 9);
    let opts = SolveOptions::default();
    for p in [1.0, 2.0, f64::INFINITY] {
        let base = minimal_hajlasz_gradient(&inst.space, (&inst.u).into(), p, Scope::Global, &opts).unwrap();
        for alpha in [-3.0, 0.25] {
            let v = inst.u.map(|x| alpha * x).unwrap();
            let m = minimal_hajlasz_gradient(&inst.space, (&v).into(), p, Scope::Global, &opts).unwrap();
            assert!(rel_err(m.lp_norm, alpha.abs() * base.lp_norm) <= 1e-8);
        }
    }
}

#[test]
fn vector_feasibility_is_coordinatewise() {
    for seed in 0..20u64 {
        let inst = random_instance(500 + seed, 10);
        let u = random_vec_field(&inst.full, 3, seed);
        let g = Field::from_fn(inst.full.clone(), |i| 0.6 + 0.8 * ((i * 7 + seed as usize) % 5) as f64).unwrap();
        let whole = check_hajlasz(&inst.space, (&u).into(), &g, Scope::Global, 2.0, 0.0).unwrap();
        let each = (0..3).all(|k| {
            let c = u.coord(k).unwrap();
            check_hajlasz(&inst.space, (&c).into(), &g, Scope::Global, 2.0, 0.0).unwrap().feasible
        });
        assert_eq!(whole.feasible, each);
    }
}

#[test]
fn upper_gradient_of_linear_field_on_line() {
    let s = line(20, 0.05);
    let full = Arc::new(s.full_mask());
    let u = Field::from_fn(full.clone(), |i| s.coords()[i][0]).unwrap();
    let rho = discrete_upper_gradient(&s, (&u).into());
    for i in 1..19 {
        assert!((rho.value(i) - 1.0).abs() < 1e-12);
    }
    let c = Field::constant(full, 2.0).unwrap();
    assert_eq!(discrete_upper_gradient(&s, (&c).into()).max_abs(), 0.0);
}

#[test]
fn slit_jump_upper_gradient_vanishes_along_the_slit() {
    let (space, omega) = gen_domain(&DomainSpec::new(DomainKind::SlitDisk, 1.0 / 32.0)).unwrap();
    let u = gen_test_field("slit_jump", &space, &omega).unwrap();
    let rho = discrete_upper_gradient(&space, (&u).into());
    let mut near = 0;
    for i in omega.indices() {
        let p = space.coords()[i];
        if p[0] > 0.3 && p[1].abs() < 0.2 {
            near += 1;
            assert_eq!(rho.value(i), 0.0, "at {p:?}");
        }
    }
    assert!(near > 50);
    assert!(rho.max_abs() <= 6.0 + 1e-9);
}

#[test]
fn sharp_functional_of_constant_is_zero() {
    let inst = random_instance(3, 30);
    let u = Field::constant(inst.full.clone(), 1.25).unwrap();
    let s = sharp_functional(&inst.space, (&u).into(), 0.5, &SharpOptions::default()).unwrap();
    assert_eq!(s.values.max_abs(), 0.0);
}

/// Direct evaluation of the sharp functional from its definition.
fn sharp_brute(space: &Space, u: &Field, s: f64) -> Vec<f64> {
    let dom = u.domain();
    let w = space.weights();
    (0..space.len())
        .map(|x| {
            if !dom.contains(x) {
                return 0.0;
            }
            let mut radii: Vec<f64> = dom
                .indices()
                .into_iter()
                .map(|y| space.dist(x, y))
                .filter(|&d| d > 0.0 && d < s)
                .collect();
            radii.sort_by(f64::total_cmp);
            radii.dedup();
            let mut best: f64 = 0.0;
            for t in radii {
                let set: Vec<usize> = dom.indices().into_iter().filter(|&y| space.dist(x, y) < t).collect();
                let tw: f64 = set.iter().map(|&y| w[y]).sum();
                let mut acc = 0.0;
                for &a in &set {
                    for &b in &set {
                        acc += w[a] * w[b] * (u.value(a) - u.value(b)).abs();
                    }
                }
                best = best.max(acc / (tw * tw) / t);
            }
            best
        })
        .collect()
}

#[test]
fn sharp_functional_matches_definition_on_random_instances() {
    for seed in 0..6u64 {
        let inst = random_instance(700 + seed, 40);
        let ours = sharp_functional(&inst.space, (&inst.u).into(), 0.35, &SharpOptions::default()).unwrap();
        let brute = sharp_brute(&inst.space, &inst.u, 0.35);
        for i in 0..40 {
            assert!((ours.values.value(i) - brute[i]).abs() <= 1e-12 * brute[i].max(1.0));
        }
    }
}

#[test]
fn vector_sharp_direct_matches_scalar_for_one_coordinate() {
    let inst = random_instance(9, 40);
    let v = VecField::from_coords(&[inst.u.clone()], NormTag::Sup).unwrap();
    let a = sharp_functional(&inst.space, (&inst.u).into(), 0.4, &SharpOptions::default()).unwrap();
    let b = sharp_functional(&inst.space, (&v).into(), 0.4, &SharpOptions::default()).unwrap();
    assert_eq!(b.method, "exact-direct");
    for i in 0..40 {
        assert!((a.values.value(i) - b.values.value(i)).abs() <= 1e-12);
    }
    let bound = sharp_functional(&inst.space, (&v).into(), 0.4, &SharpOptions { direct_limit: 3 }).unwrap();
    assert_eq!(bound.method, "mad-bound");
    for i in 0..40 {
        assert!(bound.values.value(i) >= a.values.value(i) - 1e-12);
    }
}

#[test]
fn sharp_of_linear_field_tends_to_two_thirds() {
    // Interior point of [0,1]: the limit of (1/t)·E|X−Y| over a length-2t interval.
    let mut prev_err = f64::INFINITY;
    for k in [9u32, 10, 11] {
        let h = 1.0 / f64::from(1u32 << k);
        let s = line(1 << k, h);
        let full = Arc::new(s.full_mask());
        let u = Field::from_fn(full, |i| s.coords()[i][0]).unwrap();
        let sh = sharp_functional(&s, (&u).into(), 0.05, &SharpOptions::default()).unwrap();
        let mid = (1usize << k) / 2;
        // Realized radii are multiples of h; the largest below 0.05 leaves m points per side.
        let m = ((0.05 / h).ceil() - 2.0) as usize;
        let m = m as f64;
        let exact = 4.0 * m / (3.0 * (2.0 * m + 1.0));
        assert!((sh.values.value(mid) - exact).abs() <= 1e-12);
        let err = (sh.values.value(mid) - 2.0 / 3.0).abs();
        assert!(err < prev_err);
        prev_err = err;
    }
    assert!(prev_err < 5e-3);
}

#[test]
fn multi_scale_sweep_matches_single_scales() {
    let inst = random_instance(21, 50);
    let scales = [0.3, 0.1, 0.2];
    let multi = sharp_functional_multi(&inst.space, (&inst.u).into(), &scales, &SharpOptions::default()).unwrap();
    for (k, &s) in scales.iter().enumerate() {
        let single = sharp_functional(&inst.space, (&inst.u).into(), s, &SharpOptions::default()).unwrap();
        for i in 0..50 {
            assert!((multi[k].values.value(i) - single.values.value(i)).abs() <= 1e-12);
        }
    }
}

#[test]
fn local_gradient_from_sharp_is_feasible_and_stable() {
    let mut cs = Vec::new();
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let s = build_grid_space(&[(0.0, 1.0), (0.0, 1.0)], h, MetricKind::Euclidean, 1 << 20).unwrap();
        let full = Arc::new(s.full_mask());
        let u = Field::from_fn(full, |i| s.coords()[i][0]).unwrap();
        let lg = local_gradient_from_sharp(&s, &u, 0.1, 2.0).unwrap();
        assert!(lg.certificate.feasible);
        cs.push(lg.c_min);
    }
    assert!(rel_err(cs[0], cs[1]) <= 0.2, "{cs:?}");
}

#[test]
fn local_gradient_constant_across_domains() {
    let mut cs = Vec::new();
    for kind in [DomainKind::Disk, DomainKind::HalfPlane, DomainKind::TwoSquares] {
        let (space, omega) = gen_domain(&DomainSpec::new(kind, 1.0 / 32.0)).unwrap();
        let (sub, _) = space.restrict(&omega).unwrap();
        let full = Arc::new(sub.full_mask());
        let u = gen_test_field("linear:x", &sub, &full).unwrap();
        let lg = local_gradient_from_sharp(&sub, &u, 0.1, 2.0).unwrap();
        assert!(lg.certificate.feasible);
        cs.push(lg.c_min);
    }
    let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    assert!(hi <= 2.0 * lo, "{cs:?}");
}

#[test]
fn postcomposition_and_product_rule_stay_feasible() {
    for seed in 0..5u64 {
        let inst = random_instance(900 + seed, 12);
        let opts = SolveOptions::default();
        let cert = minimal_hajlasz_gradient(&inst.space, (&inst.u).into(), 2.0, Scope::Global, &opts).unwrap();
        let (_, id) = lipschitz_postcompose(&inst.space, &inst.u, |x| x, 1.0, &cert).unwrap();
        assert!(id.feasible);
        assert_eq!(id.g, cert.g);
        let (_, ab) = lipschitz_postcompose(&inst.space, &inst.u, f64::abs, 1.0, &cert).unwrap();
        assert!(ab.feasible);
        let (_, tr) = lipschitz_postcompose(&inst.space, &inst.u, |x| x.clamp(-0.3, 0.3), 1.0, &cert).unwrap();
        assert!(tr.feasible);

        let f_mask = inst.space.mask((0..12).map(|i| i % 3 == 0).collect()).unwrap();
        let phi: Vec<f64> = (0..12).map(|i| (1.0 - f_mask.dist(i)).max(0.0)).collect();
        let (_, pr) = product_rule(&inst.space, &inst.u, &phi, 1.0, &cert).unwrap();
        assert!(pr.feasible);
        let ones = vec![1.0; 12];
        let (_, one) = product_rule(&inst.space, &inst.u, &ones, 0.0, &cert).unwrap();
        assert_eq!(one.g, cert.g);
        let zeros = vec![0.0; 12];
        let (prod, zero) = product_rule(&inst.space, &inst.u, &zeros, 0.0, &cert).unwrap();
        assert_eq!(zero.g.max_abs(), 0.0);
        assert_eq!(prod.max_abs(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sharp_is_monotone_in_scale(seed in 0u64..1000, s1 in 0.05f64..0.4, ds in 0.0f64..0.3) {
        let inst = random_instance(seed, 25);
        let a = sharp_functional(&inst.space, (&inst.u).into(), s1, &SharpOptions::default()).unwrap();
        let b = sharp_functional(&inst.space, (&inst.u).into(), s1 + ds, &SharpOptions::default()).unwrap();
        for i in 0..25 {
            prop_assert!(a.values.value(i) <= b.values.value(i) * (1.0 + 1e-12) + 1e-15);
            prop_assert!(a.values.value(i) >= 0.0);
        }
    }

    #[test]
    fn one_lipschitz_composition_never_raises_upper_gradient(seed in 0u64..1000, level in -0.5f64..0.5) {
        let inst = random_instance(seed, 15);
        let s = build_grid_space(&[(0.0, 1.0), (0.0, 1.0)], 0.1, MetricKind::Euclidean, 1000).unwrap();
        let full = Arc::new(s.full_mask());
        let u = Field::from_fn(full, |i| inst.u.value(i % 15) * (i as f64).sin()).unwrap();
        let v = u.map(|x| (x - level).abs()).unwrap();
        let ru = discrete_upper_gradient(&s, (&u).into());
        let rv = discrete_upper_gradient(&s, (&v).into());
        for i in 0..s.len() {
            prop_assert!(rv.value(i) <= ru.value(i) * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn sup_norm_feasibility_equals_coordinatewise(seed in 0u64..10_000, gscale in 0.1f64..3.0) {
        let inst = random_instance(seed, 10);
        let u = random_vec_field(&inst.full, 3, seed ^ 0xabc);
        let g = Field::from_fn(inst.full.clone(), |i| gscale * (1.0 + (i as f64 * 0.37).sin().abs())).unwrap();
        let whole = check_hajlasz(&inst.space, (&u).into(), &g, Scope::Global, 2.0, 0.0).unwrap().feasible;
        let each = (0..3).all(|k| {
            let c = u.coord(k).unwrap();
            check_hajlasz(&inst.space, (&c).into(), &g, Scope::Global, 2.0, 0.0).unwrap().feasible
        });
        prop_assert_eq!(whole, each);
    }
}
