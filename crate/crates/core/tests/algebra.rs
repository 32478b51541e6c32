use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use realflag::{build_algebra, AlgebraElement, AlgebraModel, Error, Family, Label};

fn family() -> impl Strategy<Value = (Family, usize)> {
    prop_oneof![
        (1usize..6).prop_map(|l| (Family::A, l)),
        (2usize..5).prop_map(|l| (Family::B, l)),
        (2usize..5).prop_map(|l| (Family::C, l)),
        (3usize..5).prop_map(|l| (Family::D, l)),
    ]
}

fn element(m: &AlgebraModel, seed: &[f64]) -> AlgebraElement {
    AlgebraElement::from_vec(
        (0..m.dim())
            .map(|i| seed[i % seed.len()] * (1.0 + 0.1 * i as f64))
            .collect(),
    )
}

fn seeds() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 7)
}

#[test]
fn basis_sizes_and_rank_limits() {
    assert_eq!(build_algebra(Family::A, 3).unwrap().dim(), 6);
    assert_eq!(build_algebra(Family::C, 3).unwrap().dim(), 9);
    assert_eq!(build_algebra(Family::B, 2).unwrap().dim(), 4);
    for l in 2..6 {
        assert_eq!(build_algebra(Family::A, l).unwrap().dim(), (l + 1) * l / 2);
        assert_eq!(build_algebra(Family::B, l).unwrap().dim(), l * l);
    }
    assert!(matches!(
        build_algebra(Family::D, 2),
        Err(Error::UnsupportedRank { .. })
    ));
    assert!(matches!(
        build_algebra(Family::A, 0),
        Err(Error::UnsupportedRank { .. })
    ));
}

/// Oracle: the commutator of the ambient matrices E_ij - E_ji.
#[test]
fn so4_bracket_and_products() {
    let m = build_algebra(Family::A, 3).unwrap();
    let e = |i: usize, j: usize| {
        let mut x = DMatrix::<f64>::zeros(4, 4);
        x[(i - 1, j - 1)] = 1.0;
        x[(j - 1, i - 1)] = -1.0;
        x
    };
    let (w21, w31) = (e(2, 1), e(3, 1));
    let comm = &w21 * &w31 - &w31 * &w21;
    let via_model = m.matrix_of(&m.bracket(&m.element(Label::W(2, 1)).unwrap(), &m.element(Label::W(3, 1)).unwrap()));
    assert!((comm - via_model).norm() < 1e-14);
    let x = m.element(Label::W(2, 1)).unwrap();
    assert_eq!(m.ambient_inner(&x, &x), 4.0);
    // (n - 2) tr(XY) for so(n)
    let trace_form = 2.0 * (&w21 * &w21).trace();
    assert!((m.killing(&x, &x) - trace_form).abs() < 1e-12);
}

#[test]
fn unit_norms_of_b_family() {
    for l in 2..5 {
        let m = build_algebra(Family::B, l).unwrap();
        for b in &m.basis {
            let x = m.element(b.label).unwrap();
            assert!((m.ambient_inner(&x, &x) - 1.0).abs() < 1e-14, "{}", b.label);
        }
    }
}

#[test]
fn killing_is_a_constant_multiple_of_the_trace_form_per_ideal() {
    for (f, l) in [
        (Family::A, 4),
        (Family::B, 3),
        (Family::B, 4),
        (Family::D, 4),
        (Family::D, 5),
    ] {
        let m = build_algebra(f, l).unwrap();
        let k = m.killing_matrix();
        let mut ratios: Vec<f64> = (0..m.dim()).map(|i| k[(i, i)] / m.gram[(i, i)]).collect();
        for r in &ratios {
            assert!(*r < 0.0, "{f:?}{l}: Killing not negative");
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ratios.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        // one ratio per simple ideal
        let ideals = match (f, l) {
            (Family::A, _) => 1,
            (Family::B, 3) | (Family::D, 5) => 2,
            (Family::B, _) => 2,
            (Family::D, 4) => 3,
            _ => unreachable!(),
        };
        assert!(ratios.len() <= ideals, "{f:?}{l}: ratios {ratios:?}");
    }
}

#[test]
fn u_span_brackets_land_in_the_isotropy() {
    let m = build_algebra(Family::C, 4).unwrap();
    let u: Vec<usize> = (0..m.dim())
        .filter(|&k| matches!(m.basis[k].label, Label::U(..)))
        .collect();
    for &a in &u {
        for &b in &u {
            for &(c, _) in m.structure(a, b) {
                assert!(matches!(m.basis[c].label, Label::W(..)));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bracket_is_antisymmetric((f, l) in family(), s in seeds(), t in seeds()) {
        let m = build_algebra(f, l).unwrap();
        let (x, y) = (element(&m, &s), element(&m, &t));
        let sum = m.bracket(&x, &y).coords + m.bracket(&y, &x).coords;
        prop_assert!(sum.amax() < 1e-12);
        prop_assert!(m.bracket(&x, &x).coords.amax() < 1e-12);
    }

    #[test]
    fn jacobi_on_random_triples((f, l) in family(), s in seeds(), t in seeds(), u in seeds()) {
        let m = build_algebra(f, l).unwrap();
        let (x, y, z) = (element(&m, &s), element(&m, &t), element(&m, &u));
        let j = m.bracket(&m.bracket(&x, &y), &z).coords
            + m.bracket(&m.bracket(&y, &z), &x).coords
            + m.bracket(&m.bracket(&z, &x), &y).coords;
        prop_assert!(j.amax() < 1e-10);
    }

    #[test]
    fn cached_brackets_match_ambient_commutators((f, l) in family(), s in seeds(), t in seeds()) {
        let m = build_algebra(f, l).unwrap();
        let (x, y) = (element(&m, &s), element(&m, &t));
        let direct = m.bracket_ambient(&x, &y).unwrap();
        prop_assert!((direct.coords - m.bracket(&x, &y).coords).amax() < 1e-12);
    }

    #[test]
    fn products_are_symmetric_and_invariant((f, l) in family(), s in seeds(), t in seeds(), u in seeds()) {
        let m = build_algebra(f, l).unwrap();
        let (x, y, z) = (element(&m, &s), element(&m, &t), element(&m, &u));
        prop_assert!((m.ambient_inner(&x, &y) - m.ambient_inner(&y, &x)).abs() < 1e-12);
        prop_assert!((m.killing(&x, &y) - m.killing(&y, &x)).abs() < 1e-10);
        let amb = m.ambient_inner(&m.bracket(&z, &x), &y) + m.ambient_inner(&x, &m.bracket(&z, &y));
        let kil = m.killing(&m.bracket(&z, &x), &y) + m.killing(&x, &m.bracket(&z, &y));
        prop_assert!(amb.abs() < 1e-10, "ambient {amb}");
        prop_assert!(kil.abs() < 1e-9, "killing {kil}");
    }

    #[test]
    fn ad_is_a_representation((f, l) in family(), s in seeds(), t in seeds()) {
        let m = build_algebra(f, l).unwrap();
        let (x, y) = (element(&m, &s), element(&m, &t));
        let (ax, ay) = (m.ad(&x), m.ad(&y));
        let lhs = m.ad(&m.bracket(&x, &y));
        prop_assert!((lhs - (&ax * &ay - &ay * &ax)).amax() < 1e-10);
        let v = DVector::from_fn(m.dim(), |i, _| (i as f64).cos());
        let w = AlgebraElement::from_vec(v.iter().copied().collect());
        prop_assert!((&ax * &v - m.bracket(&x, &w).coords).amax() < 1e-12);
    }
}
