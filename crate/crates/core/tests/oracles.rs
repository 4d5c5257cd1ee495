//! Independent oracles for derived values.

use std::f64::consts::{PI, TAU};

use torus_nodal::balls::{mass_ratios, ScaleFunction};
use torus_nodal::cover::build_cover;
use torus_nodal::doubling::DilatedView;
use torus_nodal::eigen::{
    enumerate_modes, random_eigenfunction, sample_grid, EigenfunctionSpec, SampledField,
};
use torus_nodal::growth::real_doubling_exponent;
use torus_nodal::harness::{
    check_ball_comparability, check_nodal_distribution, replicate_bound_chain, CHAIN_HOLDS,
    CHAIN_UNMET,
};
use torus_nodal::nodal::{extract_nodal, length_in_ball};
use torus_nodal::testfn::TestFunction;

fn brute_force_modes(e: i64) -> Vec<[i64; 2]> {
    let r = (e as f64).sqrt().ceil() as i64;
    let mut v = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            if a * a + b * b == e {
                v.push([a, b]);
            }
        }
    }
    v
}

#[test]
fn modes_match_brute_force_up_to_2000() {
    for e in 1..=2000u64 {
        let got: Vec<[i64; 2]> = enumerate_modes(e).into_iter().map(|m| m.xi).collect();
        assert_eq!(got, brute_force_modes(e as i64), "E={e}");
    }
}

#[test]
fn desk_energies_mode_counts() {
    // r2(n) = 4 (d1(n) - d3(n))
    assert_eq!(enumerate_modes(65).len(), 16);
    assert_eq!(enumerate_modes(325).len(), 24);
    assert_eq!(enumerate_modes(1105).len(), 32);
}

#[test]
fn parseval_over_two_hundred_seeds() {
    for seed in 1..=200u64 {
        let field = sample_grid(&random_eigenfunction(65, seed).unwrap(), 512).unwrap();
        assert!(
            (field.mean_square() - 1.0).abs() < 1e-12,
            "seed {seed}: {}",
            field.mean_square()
        );
    }
}

#[test]
fn nodal_length_converges_under_refinement() {
    let spec = random_eigenfunction(65, 11).unwrap();
    let lengths: Vec<f64> = [128, 256, 512, 1024]
        .iter()
        .map(|&n| extract_nodal(&sample_grid(&spec, n).unwrap()).total_length())
        .collect();
    let d1 = (lengths[1] - lengths[0]).abs();
    let d2 = (lengths[2] - lengths[1]).abs();
    let d3 = (lengths[3] - lengths[2]).abs();
    assert!(d2 < d1 && d3 < d2, "{lengths:?}");
    assert!(d3 / lengths[3] < 1e-3);
}

#[test]
fn sine_ball_ratio_matches_chord() {
    for k in [1u32, 2] {
        let field = sample_grid(&EigenfunctionSpec::sine_x(k), 512).unwrap();
        let nodal = extract_nodal(&field);
        let r = 0.1;
        let got = length_in_ball(&nodal, [0.0, 0.37], r).unwrap() / field.lambda() / (PI * r * r);
        let exact = (2.0 * r) / (TAU * k as f64) / (PI * r * r);
        assert!(
            (got - exact).abs() < 1e-9 * exact,
            "k={k}: {got} vs {exact}"
        );
    }
}

#[test]
fn sine_view_doubling_exponent_closed_form() {
    let field = sample_grid(&EigenfunctionSpec::sine_x(1), 256).unwrap();
    // r = 1/lambda makes mu = 1 and v(y) = sqrt2 sin(y_1)
    let r = 1.0 / field.lambda();
    let view = DilatedView::with_chart(&field, [0.0, 0.3], r, 3.0).unwrap();
    let g = real_doubling_exponent(&view, 0.25, &[[0.0, 0.0]]).unwrap();
    let exact = (0.5f64.sin() / 0.25f64.sin()).ln();
    assert!((g.c7_max - exact).abs() < 1e-6, "{} vs {exact}", g.c7_max);
}

#[test]
fn mass_gate_excludes_and_counts() {
    // sine values read at the radius of a much higher eigenvalue
    let sine = sample_grid(&EigenfunctionSpec::sine_x(1), 544).unwrap();
    let field =
        SampledField::from_values(544, sine.values().to_vec(), TAU * 1105f64.sqrt()).unwrap();
    let nodal = extract_nodal(&field);
    let scale = ScaleFunction::default();
    let r = scale.radius(field.lambda());
    let family = build_cover(r, 2).unwrap();
    let t = check_ball_comparability(&field, &nodal, scale, &family).unwrap();
    assert_eq!(t.included + t.excluded, family.len());
    assert!(t.excluded > 0);
    let ratios = mass_ratios(&field, r, &family.centers).unwrap();
    assert_eq!(
        ratios.iter().filter(|q| q.1 < 0.1 || q.1 > 10.0).count(),
        t.excluded
    );
}

#[test]
fn suite_spread_at_e65_seed7() {
    let field = sample_grid(&random_eigenfunction(65, 7).unwrap(), 256).unwrap();
    let nodal = extract_nodal(&field);
    let t = check_nodal_distribution(&field, &nodal, &TestFunction::suite()).unwrap();
    assert!(t.c2_hat / t.c1_hat <= 10.0);
    let one = t.rho_f.iter().find(|x| x.0 == "one").unwrap().1;
    assert_eq!(one, nodal.yau_ratio());
    assert!(t.c1_hat <= one && one <= t.c2_hat);
}

#[test]
fn bound_chain_constant_function_collapses() {
    let field = sample_grid(&random_eigenfunction(65, 7).unwrap(), 256).unwrap();
    let nodal = extract_nodal(&field);
    let scale = ScaleFunction::default();
    let family = build_cover(scale.radius(field.lambda()), 7).unwrap();
    let t =
        replicate_bound_chain(&field, &nodal, scale, &family, &TestFunction::One, 1e-3).unwrap();
    assert_eq!(t.omega, 0.0);
    assert_eq!(t.status, CHAIN_HOLDS);
    assert!(t.lower.iter().chain(&t.upper).all(|s| s.holds));
    let cos = replicate_bound_chain(&field, &nodal, scale, &family, &TestFunction::CosX(1), 1e-3)
        .unwrap();
    assert!(cos
        .lower
        .iter()
        .chain(&cos.upper)
        .filter(|s| !s.conditional)
        .all(|s| s.holds));
}

#[test]
fn bound_chain_adversarial_function_is_reported_not_failed() {
    // lambda = 8 pi at E = 16, so r = lambda^-1/2 is about 0.2
    let field = sample_grid(&random_eigenfunction(16, 3).unwrap(), 256).unwrap();
    let nodal = extract_nodal(&field);
    let scale = ScaleFunction::default();
    let r = scale.radius(field.lambda());
    assert!((r - 0.2).abs() < 0.01);
    let family = build_cover(r, 3).unwrap();
    let f = TestFunction::CosX(16);
    assert!((f.lipschitz() - 100.0).abs() < 1.0);
    let t = replicate_bound_chain(&field, &nodal, scale, &family, &f, 1e-3).unwrap();
    assert_eq!(t.status, CHAIN_UNMET);
    assert!(!t.lower_regime_met);
}

#[test]
fn ratios_stable_under_grid_doubling() {
    let spec = random_eigenfunction(65, 7).unwrap();
    let scale = ScaleFunction::default();
    let measure = |n: usize| {
        let field = sample_grid(&spec, n).unwrap();
        let nodal = extract_nodal(&field);
        let family = build_cover(scale.radius(field.lambda()), 7).unwrap();
        let t1 = check_ball_comparability(&field, &nodal, scale, &family).unwrap();
        let t2 = check_nodal_distribution(&field, &nodal, &TestFunction::suite()).unwrap();
        let masses: Vec<f64> = mass_ratios(&field, family.full_radius, &family.centers)
            .unwrap()
            .into_iter()
            .map(|x| x.1)
            .collect();
        let mut v = vec![nodal.yau_ratio(), t2.c1_hat, t2.c2_hat];
        v.extend(t1.ratios);
        v.extend(masses);
        v
    };
    let (a, b) = (measure(256), measure(512));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 0.02 * y.abs(), "{x} vs {y}");
    }
}
