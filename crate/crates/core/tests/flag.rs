mod common;

use std::sync::Arc;

use common::flag;
use proptest::prelude::*;
use realflag::{
    build_algebra, decompose_isotropy, enumerate_small_flags, make_flag, parse_flag, split_reductive, Error, Family,
};

fn dims(s: &str) -> Vec<usize> {
    decompose_isotropy(&flag(s))
        .unwrap()
        .submodules
        .iter()
        .map(|w| w.dim())
        .collect()
}

#[test]
fn make_flag_validates_partitions() {
    assert_eq!(flag("B:5:[1,4]:+").theta(), vec![2, 3, 4, 5]);
    assert_eq!(flag("A:3:[2,1,1]:-").theta(), vec![1]);
    let b3 = Arc::new(build_algebra(Family::B, 3).unwrap());
    assert!(matches!(
        make_flag(b3.clone(), &[1, 1, 2], false),
        Err(Error::BadPartition(_))
    ));
    assert!(matches!(make_flag(b3, &[0, 3], false), Err(Error::BadPartition(_))));
    let a3 = Arc::new(build_algebra(Family::A, 3).unwrap());
    assert!(matches!(make_flag(a3, &[2, 2], true), Err(Error::BadFlag(_))));
}

#[test]
fn malformed_specs_are_parse_errors() {
    for s in ["A:3:[2,2]", "X:3:[3]:-", "B:three:[3]:-", "B:3:3:-", "B:3:[3]:?"] {
        assert!(matches!(parse_flag(s), Err(Error::Parse { .. })), "{s}");
    }
}

#[test]
fn default_inner_scales() {
    assert_eq!(flag("A:3:[2,2]:-").inner_scale, 1.0);
    assert_eq!(flag("A:6:[3,3,1]:-").inner_scale, 1.0 / 10.0);
    assert_eq!(flag("B:5:[5]:-").inner_scale, 1.0);
}

#[test]
fn reductive_split_examples() {
    let f = flag("A:3:[2,2]:-");
    let (iso, tan) = split_reductive(&f);
    let labels: Vec<String> = iso.iter().map(|&k| f.algebra.basis[k].label.to_string()).collect();
    assert_eq!(labels, ["w21", "w43"]);
    assert_eq!(tan.len(), 4);
    for l in 3..6 {
        assert_eq!(
            split_reductive(&flag(&format!("C:{l}:[{l}]:-"))).1.len(),
            l * (l + 1) / 2
        );
    }
    assert!(split_reductive(&flag("B:3:[1,1,1]:-")).0.is_empty());
}

#[test]
fn summand_dimensions_follow_the_index_ranges() {
    for l in 3..7 {
        assert_eq!(dims(&format!("B:{l}:[1,{}]:+", l - 1)), [l - 1, l]);
    }
    for parts in [[1, 2, 3], [2, 2, 2], [3, 1, 1]] {
        let l = parts.iter().sum::<usize>() - 1;
        let s = format!("A:{l}:[{},{},{}]:-", parts[0], parts[1], parts[2]);
        let mut got = dims(&s);
        let mut want = vec![parts[0] * parts[1], parts[0] * parts[2], parts[1] * parts[2]];
        got.sort();
        want.sort();
        assert_eq!(got, want, "{s}");
    }
    for l in 5..8 {
        let s = format!("D:{l}:[{},1]:-", l - 1);
        let d = decompose_isotropy(&flag(&s)).unwrap();
        let mut got: Vec<usize> = d.submodules.iter().map(|w| w.dim()).collect();
        got.sort();
        assert_eq!(got, [l - 1, l - 1, (l - 1) * (l - 2) / 2], "{s}");
        assert_eq!(d.pairs().len(), 1);
    }
}

#[test]
fn enumeration_examples() {
    let names = |f, l| -> Vec<String> {
        enumerate_small_flags(f, l)
            .unwrap()
            .iter()
            .map(|s| s.canonical())
            .collect()
    };
    let a5 = names(Family::A, 5);
    assert_eq!(a5.len(), 10);
    assert!(a5.iter().all(|s| s.matches(',').count() == 2));
    let b5 = names(Family::B, 5);
    for want in [
        "B:5:[1,4]:+last",
        "B:5:[5]:-last",
        "B:5:[2,3]:+last",
        "B:5:[3,2]:+last",
        "B:5:[4,1]:+last",
    ] {
        assert!(b5.iter().any(|s| s == want), "{want} missing from {b5:?}");
    }
    let c5 = names(Family::C, 5);
    for want in ["C:5:[5]:-last", "C:5:[1,4]:+last", "C:5:[2,3]:+last"] {
        assert!(c5.iter().any(|s| s == want), "{want} missing from {c5:?}");
    }
}

#[test]
fn unlisted_low_rank_cases_are_unimplemented() {
    assert!(matches!(
        decompose_isotropy(&flag("C:4:[2,2]:-")),
        Err(Error::UnimplementedCase(_))
    ));
}

fn enumerated() -> Vec<String> {
    let mut out = Vec::new();
    for (f, ls) in [
        (Family::A, 2..6),
        (Family::B, 3..6),
        (Family::C, 3..6),
        (Family::D, 4..6),
    ] {
        for l in ls {
            out.extend(enumerate_small_flags(f, l).unwrap().iter().map(|s| s.canonical()));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn decompositions_are_invariant_orthogonal_and_complete(i in 0usize..1000) {
        let all = enumerated();
        let s = &all[i % all.len()];
        let spec = flag(s);
        let d = decompose_isotropy(&spec).unwrap();
        let n = d.tangent_dim();
        prop_assert_eq!(d.submodules.iter().map(|w| w.dim()).sum::<usize>(), n);
        for (a, wa) in d.submodules.iter().enumerate() {
            let gram = wa.frame.transpose() * &wa.frame;
            prop_assert!((gram - nalgebra::DMatrix::identity(wa.dim(), wa.dim())).amax() < 1e-12);
            for wb in &d.submodules[a + 1..] {
                prop_assert!((wa.frame.transpose() * &wb.frame).amax() < 1e-12, "{} not orthogonal", s);
            }
            for &x in &d.isotropy_basis {
                let (ad, leak) = d.ad_on_tangent(&spec.algebra, x);
                prop_assert!(leak < 1e-12);
                let image = &ad * &wa.frame;
                let rest = &image - &wa.frame * (wa.frame.transpose() * &image);
                prop_assert!(rest.amax() < 1e-12, "{}: {} not invariant", s, wa.name);
            }
        }
        for c in &d.equiv_classes {
            prop_assert!(c.iter().all(|&k| d.submodules[k].dim() == d.submodules[c[0]].dim()));
        }
    }

    #[test]
    fn canonical_text_round_trips(i in 0usize..1000) {
        let all = enumerated();
        let s = &all[i % all.len()];
        prop_assert_eq!(&parse_flag(s).unwrap().canonical(), s);
    }
}
