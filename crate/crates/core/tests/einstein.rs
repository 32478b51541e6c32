mod common;

use common::{flag, gauged, rel, solved, space};
use realflag::einstein::table1_flags;
use realflag::{
    closed_form_solutions, dedup_homothety, einstein_defect, make_metric, numeric_solutions, solve, table1_row_from,
    EinsteinSolution, Error, Provenance, SolveMode, TableFamily,
};

fn assert_coeffs(got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len());
    for (a, b) in got.iter().zip(want) {
        assert!((a - b).abs() < 1e-9, "{got:?} vs {want:?}");
    }
}

#[test]
fn catalog_examples() {
    let a3 = closed_form_solutions(&flag("A:3:[2,1,1]:-")).unwrap();
    let ids: Vec<&str> = a3.iter().map(|s| s.rule_id.as_str()).collect();
    assert_eq!(ids, ["E1", "E2", "E3", "E4", "E5"]);
    // E1: b = 0, mu1 = mu2 = 3/4 mu0
    assert_coeffs(a3[0].coeffs(), &[4.0 / 3.0, 1.0, 1.0, 0.0]);
    // |b| = mu_min = mu_max/3 = mu0/2
    for s in &a3[1..] {
        let c = s.coeffs();
        let (lo, hi) = (c[1].min(c[2]), c[1].max(c[2]));
        assert!((c[3].abs() - lo).abs() < 1e-12 && (hi - 3.0 * lo).abs() < 1e-12 && (c[0] - 2.0 * lo).abs() < 1e-12);
    }
    assert!(closed_form_solutions(&flag("C:4:[4]:-")).unwrap().is_empty());

    let a6 = closed_form_solutions(&flag("A:6:[1,3,3]:-")).unwrap();
    let ids: Vec<&str> = a6.iter().map(|s| s.rule_id.as_str()).collect();
    assert_eq!(ids, ["branch-3", "branch-4"]);

    let b3 = closed_form_solutions(&flag("B:3:[3]:-")).unwrap();
    assert_coeffs(b3[0].coeffs(), &[0.5, 1.0]);
    assert_coeffs(b3[1].coeffs(), &[1.5, 1.0]);
    for s in b3.iter().chain(&a3).chain(&a6) {
        assert!(s.defect.residual < 1e-9, "{}: {:e}", s.rule_id, s.defect.residual);
        assert_eq!(s.provenance, Provenance::ClosedForm(s.rule_id.clone()));
    }
}

#[test]
fn bound_only_families_have_no_catalog() {
    for f in ["B:5:[3,2]:+", "C:5:[2,3]:+", "A:5:[1,2,3]:-"] {
        assert!(
            matches!(closed_form_solutions(&flag(f)), Err(Error::NoCatalogEntry(_))),
            "{f}"
        );
    }
}

#[test]
fn solver_limits() {
    assert!(matches!(
        numeric_solutions(&flag("A:4:[1,1,1,2]:-")),
        Err(Error::TooManyParameters { params: 6, limit: 4 })
    ));
}

#[test]
fn numeric_counts() {
    assert_eq!(solved("A:8:[3,3,3]:-").count(), 4);
    assert_eq!(solved("A:13:[4,5,5]:-").count(), 3);
    assert_eq!(solved("D:4:[3,1]:-").count(), 5);
    assert_eq!(numeric_solutions(&flag("A:6:[1,3,3]:-")).unwrap().len(), 2);
}

fn solution(f: &str, coeffs: &[f64]) -> EinsteinSolution {
    let metric = make_metric(&space(f), coeffs).unwrap();
    EinsteinSolution {
        defect: einstein_defect(&metric),
        metric,
        provenance: Provenance::NumericRoot,
        rule_id: String::new(),
    }
}

#[test]
fn homothety_dedup_examples() {
    let f = "B:4:[4]:-";
    let one = dedup_homothety(vec![solution(f, &[1.0, 2.0, 2.0]), solution(f, &[2.0, 4.0, 4.0])]);
    assert_eq!(one.len(), 1);
    assert_coeffs(one[0].coeffs(), &[0.5, 1.0, 1.0]);
    let merged = dedup_homothety(vec![
        solution(f, &[1.0, 2.0, 2.0]),
        solution(f, &[1.0, 2.000000001, 2.0]),
    ]);
    assert_eq!(merged.len(), 1);
    let kept = dedup_homothety(vec![solution(f, &[1.0, 2.0, 2.0]), solution(f, &[1.0, 2.1, 2.0])]);
    assert_eq!(kept.len(), 2);

    let a3 = closed_form_solutions(&flag("A:3:[2,1,1]:-")).unwrap();
    assert_eq!(dedup_homothety(a3).len(), 5);
}

/// Eigenvalues of the metric on the single and the doubled class.
fn xi(c: &[f64]) -> (f64, f64, f64) {
    let (m1, m2, b) = (c[1], c[2], c[3]);
    let mean = (m1 + m2) / 2.0;
    let r = (((m1 - m2) / 2.0).powi(2) + b * b).sqrt();
    (c[0], mean - r, mean + r)
}

#[test]
fn non_diagonal_branches_satisfy_the_eigenvalue_conditions() {
    for (f, ids) in [
        ("A:3:[2,1,1]:-", ["E2", "E3", "E4", "E5"]),
        ("D:5:[4,1]:-", ["F3", "F4", "F5", "F6"]),
    ] {
        let set = solved(f);
        for id in ids {
            let s = &set.solutions[set.index_of(id).unwrap_or_else(|| panic!("{f}: {id}"))];
            let (x0, x1, x2) = xi(s.coeffs());
            assert!((2.0 * x1 * x2 - x0 * x0).abs() < 1e-9, "{f} {id}");
            assert!((x1 + x2 - 2.0 * (2.0 * x1 * x2).sqrt()).abs() < 1e-9, "{f} {id}");
        }
    }
    for l in [6, 7] {
        let set = solved(&format!("D:{l}:[{},1]:-", l - 1));
        assert_eq!(set.count(), 6);
        for s in set.solutions.iter().filter(|s| s.coeffs()[3] != 0.0) {
            let (x0, x1, x2) = xi(s.coeffs());
            assert!((2.0 * x1 * x2 - x0 * x0).abs() < 1e-9 && (x1 + x2 - 2.0 * (2.0 * x1 * x2).sqrt()).abs() < 1e-9);
        }
    }
}

#[test]
fn three_part_bounds() {
    for spec in table1_flags(6).unwrap() {
        let f = spec.canonical();
        match TableFamily::classify(&spec) {
            Some(TableFamily::BThreePart { l, d }) => {
                let set = solved(&f);
                let n = set.count();
                assert!(n <= if d == 2 { 3 } else { 4 }, "{f}: {n}");
                let (lf, df) = (l as f64, d as f64);
                let disc = lf * lf * (lf - 2.0).powi(2) - 2.0 * (df - 1.0).powi(2) * (df - 2.0) * (2.0 * lf - df);
                if n > 0 {
                    assert!(disc > 0.0, "{f}: {n} solutions with discriminant {disc}");
                }
                assert!(set.solutions.iter().all(|s| s.defect.residual < 1e-9));
            }
            Some(TableFamily::CThreePart { .. }) => {
                let n = solved(&f).count();
                assert!(n <= 2, "{f}: {n}");
            }
            _ => {}
        }
    }
}

#[test]
fn table_rows() {
    let row = |f: &str| table1_row_from(&solved(f)).unwrap();
    let r = row("A:3:[2,2]:-");
    assert_eq!(
        (r.summands, r.equivalent_summands, r.count, r.normal_einstein),
        (2, false, 1, true)
    );
    let r = row("B:4:[4]:-");
    assert_eq!(
        (r.summands, r.equivalent_summands, r.count, r.normal_einstein),
        (3, false, 2, true)
    );
    let r = row("D:5:[4,1]:-");
    assert_eq!(
        (r.summands, r.equivalent_summands, r.count, r.normal_einstein),
        (3, true, 6, false)
    );
    assert!(r.matches);
}

#[test]
fn every_table_flag_is_classified() {
    for spec in table1_flags(6).unwrap() {
        assert!(TableFamily::classify(&spec).is_some(), "{}", spec.canonical());
    }
}

#[test]
fn solving_is_deterministic() {
    for f in ["A:3:[2,1,1]:-", "B:4:[4]:-"] {
        let a = solve(&flag(f), SolveMode::Numeric).unwrap();
        let b = solve(&flag(f), SolveMode::Numeric).unwrap();
        let ca: Vec<&[f64]> = a.solutions.iter().map(|s| s.coeffs()).collect();
        let cb: Vec<&[f64]> = b.solutions.iter().map(|s| s.coeffs()).collect();
        assert_eq!(ca, cb, "{f}");
    }
}

#[test]
fn gauge_is_the_last_diagonal_coefficient() {
    for f in ["A:3:[2,1,1]:-", "D:5:[4,1]:-", "A:6:[1,3,3]:-", "B:4:[4]:-"] {
        let sp = space(f);
        for s in &solved(f).solutions {
            assert_eq!(s.coeffs()[sp.gauge_index()], 1.0, "{f} {}", s.rule_id);
            assert_eq!(gauged(&sp, s.coeffs()), s.coeffs());
        }
    }
}

/// Volume-normalized Einstein constants. The first value is closed form; the
/// rest are frozen from the catalog metrics, which agree with the numeric
/// roots.
#[test]
fn normalized_constants() {
    let frozen: [(&str, &str, f64); 12] = [
        ("B:3:[3]:-", "mu-half", 2.0 * std::f64::consts::SQRT_2),
        ("B:3:[3]:-", "mu-ratio", 2.72165526976),
        ("B:4:[4]:-", "mu-half", 4.54714969953),
        ("B:4:[4]:-", "mu-equal", 4.5),
        ("A:3:[2,1,1]:-", "E1", 1.41229845473),
        ("A:3:[2,1,1]:-", "E3", 1.51571656651),
        ("D:5:[4,1]:-", "F1", 4.7123010786),
        ("D:5:[4,1]:-", "F4", 4.92201213605),
        ("A:6:[1,3,3]:-", "branch-3", 4.05288011556),
        ("A:13:[4,5,5]:-", "branch-1", 9.680670838),
        ("A:13:[4,5,5]:-", "branch-3", 9.723708571),
        ("A:13:[4,5,5]:-", "branch-4", 9.723708571),
    ];
    for (f, id, want) in frozen {
        let set = solved(f);
        let s = &set.solutions[set.index_of(id).unwrap_or_else(|| panic!("{f}: {id}"))];
        let got = s.defect.normalized_constant;
        assert!(rel(got, want) < 1e-9, "{f} {id}: {got}");
    }
}
