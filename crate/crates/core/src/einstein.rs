//! Invariant Einstein metrics: closed-form catalog, multistart solver,
//! homothety deduplication and equivalence screening.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::algebra::Family;
use crate::curvature::{einstein_defect, EinsteinDefect, ReducedModel};
use crate::error::{Error, Result};
use crate::flag::{enumerate_small_flags, make_flag, FlagSpec};
use crate::invariant::{make_metric, metric_space_for, normal_metric, CoefficientKind, InvariantMetric, MetricSpace};
use crate::polynomial;

pub const MAX_PARAMETERS: usize = 4;
pub const GRID_POINTS: usize = 21;
pub const FINE_GRID_POINTS: usize = 41;
/// Dense Einstein residual every returned solution must meet.
pub const SOLUTION_TOLERANCE: f64 = 1e-9;
/// Relative distance below which two normalized coefficient vectors are one metric.
pub const DEDUP_TOLERANCE: f64 = 1e-6;
/// Relative tolerance for equal normalized Einstein constants.
pub const CONSTANT_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    ClosedForm(String),
    NumericRoot,
}

#[derive(Clone, Debug)]
pub struct EinsteinSolution {
    pub metric: InvariantMetric,
    pub defect: EinsteinDefect,
    pub provenance: Provenance,
    pub rule_id: String,
}

impl EinsteinSolution {
    fn new(metric: InvariantMetric, provenance: Provenance, rule_id: String) -> EinsteinSolution {
        EinsteinSolution {
            defect: einstein_defect(&metric),
            metric,
            provenance,
            rule_id,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.metric.coeffs
    }
}

impl Serialize for EinsteinSolution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let names = &self.metric.space.names;
        let coeffs: Vec<(&str, f64)> = names
            .iter()
            .map(String::as_str)
            .zip(self.metric.coeffs.iter().copied())
            .collect();
        let mut st = s.serialize_struct("EinsteinSolution", 4)?;
        st.serialize_field("rule_id", &self.rule_id)?;
        st.serialize_field("provenance", &self.provenance)?;
        st.serialize_field("coefficients", &coeffs)?;
        st.serialize_field("defect", &self.defect)?;
        st.end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GroupStatus {
    /// The normalized Einstein constant differs from every solution outside the group.
    ProvenDistinct,
    /// Members are related by stored isometries and no outside solution shares the constant.
    WitnessedEquivalent,
    /// Some outside solution shares the constant and no isometry is known.
    Undecided,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceGroup {
    pub members: Vec<usize>,
    pub status: GroupStatus,
    /// `(from, to, map)` links that merged members.
    pub witnesses: Vec<(usize, usize, String)>,
    /// Other groups with an equal normalized constant.
    pub undecided_with: Vec<usize>,
}

/// Relation between two solutions after screening.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Equivalent,
    ProvenDistinct,
    Undecided,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossCheck {
    pub reference: usize,
    pub numeric: usize,
    /// Largest relative coefficient gap between matched solutions.
    pub max_gap: f64,
    pub agrees: bool,
}

#[derive(Clone, Debug)]
pub struct SolutionSet {
    pub flag: FlagSpec,
    pub solutions: Vec<EinsteinSolution>,
    pub equivalence_groups: Vec<EquivalenceGroup>,
    /// Closed-form catalog against the numeric roots.
    pub catalog_check: Option<CrossCheck>,
    /// Resultant elimination against the numeric roots.
    pub polynomial_check: Option<CrossCheck>,
}

impl SolutionSet {
    pub fn count(&self) -> usize {
        self.solutions.len()
    }

    pub fn index_of(&self, rule_id: &str) -> Option<usize> {
        self.solutions.iter().position(|s| s.rule_id == rule_id)
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.equivalence_groups
            .iter()
            .position(|g| g.members.contains(&i))
            .expect("screened sets cover every solution")
    }

    pub fn relation(&self, i: usize, j: usize) -> Relation {
        if self.group_of(i) == self.group_of(j) {
            return Relation::Equivalent;
        }
        let (a, b) = (
            self.solutions[i].defect.normalized_constant,
            self.solutions[j].defect.normalized_constant,
        );
        if same_constant(a, b) {
            Relation::Undecided
        } else {
            Relation::ProvenDistinct
        }
    }
}

impl Serialize for SolutionSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("SolutionSet", 5)?;
        st.serialize_field("flag", &self.flag.canonical())?;
        st.serialize_field("solutions", &self.solutions)?;
        st.serialize_field("equivalence_groups", &self.equivalence_groups)?;
        st.serialize_field("catalog_check", &self.catalog_check)?;
        st.serialize_field("polynomial_check", &self.polynomial_check)?;
        st.end()
    }
}

fn same_constant(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONSTANT_TOLERANCE * a.abs().max(b.abs()).max(1e-300)
}

// ---------------------------------------------------------------------------
// Families of the classification table

/// The flag families with two or three isotropy summands.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TableFamily {
    /// SO(4)/S(O(2)xO(2))
    So4Grassmann,
    /// (SO(l)xSO(l+1))/(SO(l-1)xSO(l))
    BPointed { l: usize },
    /// (SO(l)xSO(l+1))/SO(l), l != 4
    BDiagonal { l: usize },
    /// U(l)/O(l)
    CLagrangian { l: usize },
    /// U(l)/(O(1)xU(l-1))
    CPointed { l: usize },
    /// (SO(4)xSO(4))/SO(4)
    DFour,
    /// SO(4)/S(O(2)xO(1)xO(1))
    AThreeFour,
    /// SO(l+1)/S(O(l1)xO(l2)xO(l3)), l != 3
    AThreePart { parts: [usize; 3] },
    /// (SO(4)xSO(5))/SO(4)
    BFour,
    /// (SO(l)xSO(l+1))/(SO(d)xSO(l-d)xSO(l-d+1))
    BThreePart { l: usize, d: usize },
    /// U(l)/(O(d)xU(l-d))
    CThreePart { l: usize, d: usize },
    /// (SO(l)xSO(l))/S(O(l-1)xO(1))
    DPointed { l: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExpectedCount {
    Exactly(usize),
    AtMost(usize),
}

impl ExpectedCount {
    pub fn admits(self, n: usize) -> bool {
        match self {
            ExpectedCount::Exactly(k) => n == k,
            ExpectedCount::AtMost(k) => n <= k,
        }
    }
}

impl fmt::Display for ExpectedCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpectedCount::Exactly(k) => write!(f, "{k}"),
            ExpectedCount::AtMost(k) => write!(f, "<={k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExpectedRow {
    pub summands: usize,
    pub equivalent_summands: bool,
    pub count: ExpectedCount,
    pub normal_einstein: bool,
}

impl TableFamily {
    pub fn classify(spec: &FlagSpec) -> Option<TableFamily> {
        let l = spec.rank();
        let p = spec.partition.as_slice();
        let last = spec.includes_last_root;
        use TableFamily::*;
        Some(match spec.family() {
            Family::A if p.len() == 2 && l == 3 && p == [2, 2] => So4Grassmann,
            Family::A if p.len() == 3 && l == 3 => AThreeFour,
            Family::A if p.len() == 3 => AThreePart {
                parts: [p[0], p[1], p[2]],
            },
            Family::B if l >= 3 && last && p == [1, l - 1] => BPointed { l },
            Family::B if l == 4 && !last && p == [4] => BFour,
            Family::B if l >= 3 && !last && p == [l] => BDiagonal { l },
            Family::B if last && p.len() == 2 && p[0] >= 2 => BThreePart { l, d: p[0] },
            Family::C if l >= 3 && !last && p == [l] => CLagrangian { l },
            Family::C if l >= 3 && last && p == [1, l - 1] => CPointed { l },
            Family::C if l >= 3 && last && p.len() == 2 && p[0] >= 2 => CThreePart { l, d: p[0] },
            Family::D if l == 4 && ((!last && p == [4]) || (last && p == [3, 1])) => DFour,
            Family::D if l >= 4 && !last && (p == [l - 1, 1] || p == [1, l - 1]) => DPointed { l },
            Family::D if l >= 5 && last && p.len() == 3 && p[0] == 1 && p[2] == 1 => DPointed { l },
            _ => return None,
        })
    }

    pub fn title(&self) -> String {
        use TableFamily::*;
        match *self {
            So4Grassmann => "SO(4)/S(O(2)xO(2))".into(),
            BPointed { l } => format!("SO({l})xSO({})/SO({})xSO({l})", l + 1, l - 1),
            BDiagonal { l } => format!("SO({l})xSO({})/SO({l})", l + 1),
            CLagrangian { l } => format!("U({l})/O({l})"),
            CPointed { l } => format!("U({l})/O(1)xU({})", l - 1),
            DFour => "SO(4)xSO(4)/SO(4)".into(),
            AThreeFour => "SO(4)/S(O(2)xO(1)xO(1))".into(),
            AThreePart { parts: [a, b, c] } => format!("SO({})/S(O({a})xO({b})xO({c}))", a + b + c),
            BFour => "SO(4)xSO(5)/SO(4)".into(),
            BThreePart { l, d } => format!("SO({l})xSO({})/SO({d})xSO({})xSO({})", l + 1, l - d, l - d + 1),
            CThreePart { l, d } => format!("U({l})/O({d})xU({})", l - d),
            DPointed { l } => format!("SO({l})xSO({l})/S(O({})xO(1))", l - 1),
        }
    }

    pub fn expected(&self) -> ExpectedRow {
        use ExpectedCount::*;
        use TableFamily::*;
        let row = |summands, equivalent_summands, count, normal_einstein| ExpectedRow {
            summands,
            equivalent_summands,
            count,
            normal_einstein,
        };
        match *self {
            So4Grassmann => row(2, false, Exactly(1), true),
            BPointed { .. } => row(2, false, Exactly(1), false),
            BDiagonal { .. } => row(2, false, Exactly(2), false),
            CLagrangian { .. } => row(2, false, Exactly(0), false),
            CPointed { .. } => row(2, false, Exactly(1), false),
            DFour => row(2, false, Exactly(1), true),
            AThreeFour => row(3, true, Exactly(5), false),
            AThreePart { .. } => row(3, false, AtMost(4), false),
            BFour => row(3, false, Exactly(2), true),
            BThreePart { d, .. } => row(3, false, AtMost(if d == 2 { 3 } else { 4 }), false),
            CThreePart { .. } => row(3, false, AtMost(2), false),
            DPointed { l } => row(3, true, Exactly(if l == 4 { 5 } else { 6 }), l == 4),
        }
    }
}

// ---------------------------------------------------------------------------
// Ambient maps between flags

fn permutation_matrix(images: &[usize]) -> DMatrix<f64> {
    // column j is e_{images[j]}
    let n = images.len();
    let mut m = DMatrix::zeros(n, n);
    for (j, &i) in images.iter().enumerate() {
        m[(i, j)] = 1.0;
    }
    m
}

/// Restriction of `Ad(g)` as a map from the tangent space of `from` to that of `to`.
pub fn tangent_map(g: &DMatrix<f64>, from: &MetricSpace, to: &MetricSpace) -> Result<DMatrix<f64>> {
    let alg = from.algebra();
    let full = alg.adjoint_action(g)?;
    let (df, dt) = (&from.decomposition, &to.decomposition);
    let pos: HashMap<usize, usize> = dt.tangent_basis.iter().enumerate().map(|(p, &k)| (k, p)).collect();
    let mut m = DMatrix::zeros(dt.tangent_dim(), df.tangent_dim());
    let mut leak = 0.0f64;
    for (j, &c) in df.tangent_basis.iter().enumerate() {
        for r in 0..alg.dim() {
            let v = full[(r, c)];
            match pos.get(&r) {
                Some(&i) => m[(i, j)] = v * dt.unit[i] / df.unit[j],
                None => leak = leak.max(v.abs()),
            }
        }
    }
    if leak > 1e-10 {
        return Err(Error::GeneratorMismatch { index: 0, leak });
    }
    Ok(m)
}

/// Coefficients of the metric on `to` that `g` carries the metric `coeffs` on `from` to.
pub fn push_metric(g: &DMatrix<f64>, from: &MetricSpace, to: &MetricSpace, coeffs: &[f64]) -> Result<Vec<f64>> {
    let m = tangent_map(g, from, to)?;
    let a = from.operator(coeffs)?;
    let pushed = &m * a * m.transpose();
    let (c, residual) = to.coefficients_of(&pushed);
    if residual > 1e-9 * pushed.norm().max(1.0) {
        return Err(Error::GeneratorMismatch {
            index: 0,
            leak: residual,
        });
    }
    Ok(c)
}

/// Pullback of a metric on `space` by the diffeomorphism `kK -> g k g^T K`.
pub fn pull_back(g: &DMatrix<f64>, space: &MetricSpace, coeffs: &[f64]) -> Result<Vec<f64>> {
    let m = tangent_map(g, space, space)?;
    let a = space.operator(coeffs)?;
    let pulled = m.transpose() * a * &m;
    let (c, residual) = space.coefficients_of(&pulled);
    if residual > 1e-9 * pulled.norm().max(1.0) {
        return Err(Error::GeneratorMismatch {
            index: 0,
            leak: residual,
        });
    }
    Ok(c)
}

/// A reference flag with a catalog, and the ambient matrix carrying it onto `spec`.
struct Reference {
    base: FlagSpec,
    carry: DMatrix<f64>,
}

fn swap_matrix(n: usize, a: usize, b: usize) -> DMatrix<f64> {
    let mut images: Vec<usize> = (0..n).collect();
    images.swap(a, b);
    permutation_matrix(&images)
}

fn reference_for(spec: &FlagSpec, family: &TableFamily) -> Result<Option<Reference>> {
    let n = spec.algebra.ambient_dim;
    let same = |base: FlagSpec| Reference {
        base,
        carry: DMatrix::identity(n, n),
    };
    Ok(match *family {
        TableFamily::AThreeFour => {
            let base = make_flag(spec.algebra.clone(), &[2, 1, 1], false)?;
            let carry = match spec.partition.as_slice() {
                [2, 1, 1] => DMatrix::identity(4, 4),
                // transposes of the ambient matrices e_1, e_2
                [1, 2, 1] => permutation_matrix(&[2, 0, 1, 3]).transpose(),
                _ => permutation_matrix(&[2, 3, 0, 1]).transpose(),
            };
            Some(Reference { base, carry })
        }
        TableFamily::AThreePart { parts } => {
            let m = match parts {
                [a, b, c] if b == c => (a, b, 0),
                [a, b, c] if a == c => (b, a, 1),
                [a, b, c] if a == b => (c, a, 2),
                _ => return Ok(None),
            };
            let (l1, m, odd) = m;
            if m < 3 {
                return Ok(None);
            }
            let base = make_flag(spec.algebra.clone(), &[l1, m, m], false)?.with_inner_scale(spec.inner_scale);
            // block starts in the target
            let starts: Vec<usize> = parts
                .iter()
                .scan(0, |acc, &p| {
                    let s = *acc;
                    *acc += p;
                    Some(s)
                })
                .collect();
            let others: Vec<usize> = (0..3).filter(|&i| i != odd).collect();
            let mut images = Vec::with_capacity(n);
            images.extend((0..l1).map(|k| starts[odd] + k));
            for &blk in &others {
                images.extend((0..m).map(|k| starts[blk] + k));
            }
            Some(Reference {
                base,
                carry: permutation_matrix(&images),
            })
        }
        TableFamily::DPointed { l } => {
            let base = make_flag(spec.algebra.clone(), &[l - 1, 1], false)?;
            if spec.partition == [l - 1, 1] {
                return Ok(Some(same(base)));
            }
            let mut images: Vec<usize> = (0..l).rev().collect();
            images.extend((0..l).rev().map(|k| l + k));
            let rho = permutation_matrix(&images);
            let candidates = [
                rho.clone(),
                swap_matrix(n, l - 1, 2 * l - 1) * &rho,
                swap_matrix(n, 0, l) * &rho,
            ];
            let base_space = metric_space_for(&base)?;
            let target = metric_space_for(spec)?;
            let carry = candidates
                .into_iter()
                .find(|g| push_metric(g, &base_space, &target, &normal_metric(&base_space).coeffs).is_ok());
            carry.map(|carry| Reference { base, carry })
        }
        TableFamily::So4Grassmann
        | TableFamily::BPointed { .. }
        | TableFamily::BDiagonal { .. }
        | TableFamily::CLagrangian { .. }
        | TableFamily::CPointed { .. }
        | TableFamily::DFour
        | TableFamily::BFour => Some(same(spec.clone())),
        TableFamily::BThreePart { .. } | TableFamily::CThreePart { .. } => None,
    })
}

// ---------------------------------------------------------------------------
// Closed-form catalog

/// Rule id and coefficients (gauge: last diagonal coefficient 1) on the reference flag.
fn catalog_on_reference(family: &TableFamily) -> Vec<(String, Vec<f64>)> {
    let entry = |id: &str, c: Vec<f64>| (id.to_string(), c);
    match *family {
        TableFamily::So4Grassmann | TableFamily::DFour => vec![entry("normal", vec![1.0, 1.0])],
        TableFamily::BPointed { l } => {
            let l = l as f64;
            vec![entry("mu-rho", vec![(l - 2.0) / (l - 1.0), 1.0])]
        }
        TableFamily::BDiagonal { l } => {
            let lf = l as f64;
            vec![
                entry("mu-half", vec![0.5, 1.0]),
                entry("mu-ratio", vec![lf / (2.0 * lf - 4.0), 1.0]),
            ]
        }
        TableFamily::CLagrangian { .. } => Vec::new(),
        TableFamily::CPointed { .. } => vec![entry("mu0-double", vec![2.0, 1.0])],
        TableFamily::BFour => vec![
            entry("mu-half", vec![0.5, 1.0, 1.0]),
            entry("mu-equal", vec![1.0, 1.0, 1.0]),
        ],
        TableFamily::AThreeFour => vec![
            entry("E1", vec![4.0 / 3.0, 1.0, 1.0, 0.0]),
            entry("E2", vec![2.0 / 3.0, 1.0 / 3.0, 1.0, 1.0 / 3.0]),
            entry("E3", vec![2.0, 3.0, 1.0, 1.0]),
            entry("E4", vec![2.0 / 3.0, 1.0 / 3.0, 1.0, -1.0 / 3.0]),
            entry("E5", vec![2.0, 3.0, 1.0, -1.0]),
        ],
        TableFamily::AThreePart { parts } => {
            let (l1, m) = match parts {
                [a, b, c] if b == c => (a, b),
                [a, b, c] if a == c => (b, a),
                [_, b, c] => (c, b),
            };
            three_part_branches(l1, m)
        }
        TableFamily::DPointed { l } => {
            let lf = l as f64;
            let q = (lf * lf - 5.0 * lf + 4.0).sqrt() / (2.0 * (lf - 1.0));
            vec![
                entry("F1", vec![1.0 / (1.0 + q), (1.0 - q) / (1.0 + q), 1.0, 0.0]),
                entry("F2", vec![1.0 / (1.0 - q), (1.0 + q) / (1.0 - q), 1.0, 0.0]),
                entry("F3", vec![2.0 / 3.0, 1.0 / 3.0, 1.0, 1.0 / 3.0]),
                entry("F4", vec![2.0, 3.0, 1.0, 1.0]),
                entry("F5", vec![2.0 / 3.0, 1.0 / 3.0, 1.0, -1.0 / 3.0]),
                entry("F6", vec![2.0, 3.0, 1.0, -1.0]),
            ]
        }
        TableFamily::BThreePart { .. } | TableFamily::CThreePart { .. } => Vec::new(),
    }
}

/// Real positive branches `(mu21, mu31, 1)` for parts `(l1, m, m)`, `m >= 3`.
pub fn three_part_branches(l1: usize, m: usize) -> Vec<(String, Vec<f64>)> {
    if m < 3 {
        return Vec::new();
    }
    let (l1, m) = (l1 as f64, m as f64);
    let a1 = 2.0 * m + l1 - 2.0;
    let a2 = m * (m + l1 - 1.0) * (2.0 * m + l1 - 2.0);
    let d1 = l1 * l1 - 4.0 * (m - 1.0);
    let d2 = (m + l1 - 1.0) * (-l1 * l1 + l1 * (m - 2.0).powi(2) + m.powi(3) - 4.0 * m * m + 8.0 * m - 4.0);
    let mut out = Vec::new();
    if d1 >= 0.0 {
        let s = d1.sqrt();
        for (id, sign) in [("branch-1", 1.0), ("branch-2", -1.0)] {
            let x = (a1 + sign * s) / (4.0 * (m - 1.0));
            out.push((id.to_string(), vec![x, x, 1.0]));
        }
    }
    if d2 >= 0.0 {
        let s = m * d2.sqrt();
        let den = 2.0 * m * m * (m + l1 - 1.0);
        out.push(("branch-3".into(), vec![(a2 + s) / den, (a2 - s) / den, 1.0]));
        out.push(("branch-4".into(), vec![(a2 - s) / den, (a2 + s) / den, 1.0]));
    }
    out.retain(|(_, c)| c.iter().all(|&x| x > 0.0));
    out
}

/// Metrics of the closed-form catalog, one per branch, gauge-normalized.
pub fn closed_form_solutions(spec: &FlagSpec) -> Result<Vec<EinsteinSolution>> {
    let family = TableFamily::classify(spec).ok_or_else(|| Error::NoCatalogEntry(spec.canonical()))?;
    let reference = reference_for(spec, &family)?.ok_or_else(|| Error::NoCatalogEntry(spec.canonical()))?;
    let space = metric_space_for(spec)?;
    let base = metric_space_for(&reference.base)?;
    let gauge = space.gauge_index();
    let mut out = Vec::new();
    for (id, coeffs) in catalog_on_reference(&family) {
        let c = push_metric(&reference.carry, &base, &space, &coeffs)?;
        let c = normalize(&c, gauge);
        let metric = make_metric(&space, &c)?;
        out.push(EinsteinSolution::new(metric, Provenance::ClosedForm(id.clone()), id));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Numeric solver

pub fn normalize(coeffs: &[f64], gauge: usize) -> Vec<f64> {
    let g = coeffs[gauge];
    coeffs.iter().map(|c| c / g).collect()
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Homothety classes of coefficient vectors, normalized at `gauge` and sorted.
pub fn dedup_coefficients(mut sols: Vec<Vec<f64>>, gauge: usize) -> Vec<Vec<f64>> {
    for s in sols.iter_mut() {
        *s = normalize(s, gauge);
    }
    sols.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut out: Vec<Vec<f64>> = Vec::new();
    for s in sols {
        if !out.iter().any(|o| relative_gap(o, &s) < DEDUP_TOLERANCE) {
            out.push(s);
        }
    }
    out
}

/// Merges homothetic solutions, keeping the first representative of each class.
pub fn dedup_homothety(solutions: Vec<EinsteinSolution>) -> Vec<EinsteinSolution> {
    let mut out: Vec<EinsteinSolution> = Vec::new();
    for s in solutions {
        let gauge = s.metric.space.gauge_index();
        let c = normalize(&s.metric.coeffs, gauge);
        if out
            .iter()
            .any(|o| relative_gap(&normalize(&o.metric.coeffs, gauge), &c) < DEDUP_TOLERANCE)
        {
            continue;
        }
        let t = 1.0 / s.metric.coeffs[gauge];
        let metric = s.metric.scaled(t);
        out.push(EinsteinSolution {
            defect: einstein_defect(&metric),
            metric,
            ..s
        });
    }
    out
}

/// Coordinates of the solver: logs of free diagonal coefficients and
/// `atanh(b / sqrt(a a'))` for amplitudes.
struct Layout {
    gauge: usize,
    free: Vec<usize>,
    /// coefficient index -> the two diagonal coefficients of its pair
    pairs: HashMap<usize, (usize, usize)>,
    dim: usize,
}

impl Layout {
    fn new(space: &MetricSpace) -> Layout {
        let gauge = space.gauge_index();
        let diag_of = |sub: usize| {
            space
                .kinds
                .iter()
                .position(|k| *k == CoefficientKind::Diagonal { submodule: sub })
                .expect("every submodule has a diagonal coefficient")
        };
        let mut pairs = HashMap::new();
        for (i, k) in space.kinds.iter().enumerate() {
            if let CoefficientKind::Amplitude { first, second } = *k {
                pairs.insert(i, (diag_of(first), diag_of(second)));
            }
        }
        Layout {
            gauge,
            free: (0..space.dim()).filter(|&i| i != gauge).collect(),
            pairs,
            dim: space.dim(),
        }
    }

    fn coeffs(&self, z: &[f64]) -> Vec<f64> {
        let mut c = vec![1.0; self.dim];
        for (k, &i) in self.free.iter().enumerate() {
            if !self.pairs.contains_key(&i) {
                c[i] = z[k].exp();
            }
        }
        for (k, &i) in self.free.iter().enumerate() {
            if let Some(&(a, b)) = self.pairs.get(&i) {
                c[i] = z[k].tanh() * (c[a] * c[b]).sqrt();
            }
        }
        c
    }

    fn z_of(&self, c: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .map(|&i| match self.pairs.get(&i) {
                Some(&(a, b)) => (c[i] / (c[a] * c[b]).sqrt()).atanh(),
                None => c[i].ln(),
            })
            .collect()
    }

    fn starts(&self, points: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .free
            .iter()
            .map(|i| {
                (0..points)
                    .map(|k| {
                        let t = k as f64 / (points - 1) as f64;
                        if self.pairs.contains_key(i) {
                            (0.95 * (2.0 * t - 1.0)).atanh()
                        } else {
                            (10f64).ln() * (4.0 * t - 2.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn jacobian(eval: &dyn Fn(&[f64]) -> Vec<f64>, z: &[f64], f: &[f64], central: bool) -> DMatrix<f64> {
    let n = z.len();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = if central { 1e-5 } else { 1e-7 } * (1.0 + z[j].abs());
        let mut zh = z.to_vec();
        zh[j] += h;
        let fp = eval(&zh);
        let fm = if central {
            zh[j] = z[j] - h;
            eval(&zh)
        } else {
            f.to_vec()
        };
        let width = if central { 2.0 * h } else { h };
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / width;
        }
    }
    jac
}

/// Damped Newton from `z`; forward differences until the residual is small,
/// then central differences, which keeps multiple roots accurate.
fn newton(model: &ReducedModel, layout: &Layout, mut z: Vec<f64>) -> Option<Vec<f64>> {
    let system = |z: &[f64]| model.einstein_system(&layout.coeffs(z), layout.gauge);
    let eval = |z: &[f64]| system(z).0;
    let in_range = |z: &[f64]| {
        z.iter()
            .enumerate()
            .all(|(k, v)| v.is_finite() && (layout.pairs.contains_key(&layout.free[k]) || v.abs() <= 12.0))
    };
    let (mut f, mut lambda) = system(&z);
    let mut nf = norm(&f);
    let mut polishing = 0;
    for it in 0..80 {
        let scale = 1.0 + lambda.abs();
        if it == 25 && nf > 1e-4 * scale {
            return None;
        }
        let central = nf < 1e-8 * scale;
        if central {
            polishing += 1;
            if polishing > 30 || nf == 0.0 {
                break;
            }
        } else if nf <= 1e-13 * scale {
            break;
        }
        let jac = jacobian(&eval, &z, &f, central);
        let step = jac.lu().solve(&DVector::from_column_slice(&f))?;
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-3 {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a - t * d).collect();
            if in_range(&trial) {
                let (ft, lt) = system(&trial);
                let nt = norm(&ft);
                let enough = if central { nt < nf } else { nt < nf * (1.0 - 1e-4 * t) };
                if nt.is_finite() && enough {
                    z = trial;
                    f = ft;
                    lambda = lt;
                    nf = nt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
            if central {
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    (nf <= 1e-12 * (1.0 + lambda.abs())).then(|| layout.coeffs(&z))
}

fn acceptable(c: &[f64], layout: &Layout) -> bool {
    c.iter().enumerate().all(|(i, &x)| {
        if layout.pairs.contains_key(&i) {
            x.is_finite()
        } else {
            (1e-4..=1e4).contains(&x)
        }
    })
}

fn sweep(model: &ReducedModel, layout: &Layout, points: usize) -> Vec<Vec<f64>> {
    let found: Vec<Vec<f64>> = layout
        .starts(points)
        .into_par_iter()
        .filter_map(|z| newton(model, layout, z))
        .filter(|c| acceptable(c, layout))
        .collect();
    merge_degenerate(model, layout, dedup_coefficients(found, layout.gauge))
}

/// Merges nearby roots at which the Jacobian is numerically singular: the
/// converged points of a multiple root spread beyond the plain tolerance.
fn merge_degenerate(model: &ReducedModel, layout: &Layout, roots: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let eval = |z: &[f64]| model.einstein_system(&layout.coeffs(z), layout.gauge).0;
    let singular = |c: &[f64]| {
        let z = layout.z_of(c);
        let f = eval(&z);
        let sv = jacobian(&eval, &z, &f, true).singular_values();
        sv.min() <= 1e-3 * sv.max()
    };
    let residual = |c: &[f64]| norm(&model.einstein_system(c, layout.gauge).0);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for r in roots {
        let twin = out
            .iter()
            .position(|o| relative_gap(o, &r) < 1e-4 && singular(o) && singular(&r));
        match twin {
            Some(k) if residual(&r) < residual(&out[k]) => out[k] = r,
            Some(_) => {}
            None => out.push(r),
        }
    }
    out
}

/// Positive roots of the Einstein system, gauge-normalized, from two grid densities.
pub fn numeric_coefficients(space: &MetricSpace) -> Result<Vec<Vec<f64>>> {
    if space.dim() > MAX_PARAMETERS {
        return Err(Error::TooManyParameters {
            params: space.dim(),
            limit: MAX_PARAMETERS,
        });
    }
    let model = ReducedModel::new(space);
    let layout = Layout::new(space);
    if layout.free.is_empty() {
        // a single summand: every invariant metric is a multiple of the normal one
        return Ok(vec![vec![1.0]]);
    }
    let coarse = sweep(&model, &layout, GRID_POINTS);
    let fine = sweep(&model, &layout, FINE_GRID_POINTS);
    if coarse.len() != fine.len() {
        return Err(Error::ConvergenceGap {
            coarse: coarse.len(),
            fine: fine.len(),
        });
    }
    Ok(fine)
}

fn label_numeric(
    space: &Arc<MetricSpace>,
    roots: Vec<Vec<f64>>,
    catalog: &[EinsteinSolution],
) -> Result<Vec<EinsteinSolution>> {
    let gauge = space.gauge_index();
    roots
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            let id = catalog
                .iter()
                .find(|s| relative_gap(&normalize(s.coeffs(), gauge), &c) < DEDUP_TOLERANCE)
                .map(|s| s.rule_id.clone())
                .unwrap_or_else(|| format!("root-{}", k + 1));
            Ok(EinsteinSolution::new(
                make_metric(space, &c)?,
                Provenance::NumericRoot,
                id,
            ))
        })
        .collect()
}

/// Numeric Einstein metrics of the flag.
pub fn numeric_solutions(spec: &FlagSpec) -> Result<Vec<EinsteinSolution>> {
    let space = metric_space_for(spec)?;
    let roots = numeric_coefficients(&space)?;
    let catalog = closed_form_solutions(spec).unwrap_or_default();
    label_numeric(&space, roots, &catalog)
}

/// Diagonal three-summand solutions by resultant elimination, when applicable.
pub fn polynomial_coefficients(space: &MetricSpace) -> Option<Vec<Vec<f64>>> {
    let diagonal = space
        .kinds
        .iter()
        .all(|k| matches!(k, CoefficientKind::Diagonal { .. }));
    if !diagonal || space.dim() != 3 {
        return None;
    }
    let sols = polynomial::positive_solutions(&ReducedModel::new(space).wang_ziller())?;
    // class order equals coefficient order for diagonal spaces
    Some(dedup_coefficients(
        sols.into_iter().map(|s| s.to_vec()).collect(),
        space.gauge_index(),
    ))
}

fn cross_check(reference: &[Vec<f64>], numeric: &[Vec<f64>], tol: f64) -> CrossCheck {
    let mut max_gap = 0.0f64;
    let mut matched = 0;
    for r in reference {
        let best = numeric.iter().map(|n| relative_gap(r, n)).fold(f64::INFINITY, f64::min);
        if best.is_finite() {
            max_gap = max_gap.max(best);
        }
        if best <= tol {
            matched += 1;
        }
    }
    CrossCheck {
        reference: reference.len(),
        numeric: numeric.len(),
        max_gap,
        agrees: reference.len() == numeric.len() && matched == reference.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    ClosedForm,
    Numeric,
    Both,
}

/// All Einstein metrics of a flag, deduplicated and screened.
pub fn solve(spec: &FlagSpec, mode: SolveMode) -> Result<SolutionSet> {
    let space = metric_space_for(spec)?;
    let gauge = space.gauge_index();
    let catalog = match mode {
        SolveMode::Numeric => None,
        SolveMode::ClosedForm => Some(closed_form_solutions(spec)?),
        SolveMode::Both => match closed_form_solutions(spec) {
            Ok(c) => Some(c),
            Err(Error::NoCatalogEntry(_)) => None,
            Err(e) => return Err(e),
        },
    };
    let mut solutions = Vec::new();
    let mut catalog_check = None;
    let mut polynomial_check = None;
    if let Some(cat) = &catalog {
        solutions.extend(cat.iter().cloned());
    }
    if mode != SolveMode::ClosedForm {
        let roots = numeric_coefficients(&space)?;
        if let Some(cat) = &catalog {
            let reference = dedup_coefficients(cat.iter().map(|s| s.coeffs().to_vec()).collect(), gauge);
            catalog_check = Some(cross_check(&reference, &roots, 1e-7));
        }
        if let Some(poly) = polynomial_coefficients(&space) {
            polynomial_check = Some(cross_check(&poly, &roots, 1e-7));
        }
        solutions.extend(label_numeric(&space, roots, catalog.as_deref().unwrap_or(&[]))?);
    }
    let solutions = dedup_homothety(solutions);
    Ok(screen(SolutionSet {
        flag: spec.clone(),
        solutions,
        equivalence_groups: Vec::new(),
        catalog_check,
        polynomial_check,
    }))
}

// ---------------------------------------------------------------------------
// Equivalence screening

/// Ambient matrices `s` whose conjugation maps the flag to itself and that
/// are used as candidate isometries between Einstein metrics.
pub fn witness_maps(spec: &FlagSpec) -> Vec<(String, DMatrix<f64>)> {
    let Some(family) = TableFamily::classify(spec) else {
        return Vec::new();
    };
    let Ok(Some(reference)) = reference_for(spec, &family) else {
        return Vec::new();
    };
    let base: Vec<(String, DMatrix<f64>)> = match family {
        TableFamily::AThreeFour => vec![
            (
                "psi3".into(),
                DMatrix::from_row_slice(4, 4, &[1., 0., 0., 0., 0., -1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.]),
            ),
            (
                "psi4".into(),
                DMatrix::from_row_slice(4, 4, &[0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1.]),
            ),
            (
                "psi5".into(),
                DMatrix::from_row_slice(4, 4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.]),
            ),
        ],
        TableFamily::DPointed { l } => {
            let n = 2 * l;
            let mut tau = DMatrix::identity(n, n);
            for k in l..n {
                tau[(k, k)] = -1.0;
            }
            vec![("eta".into(), swap_matrix(n, l - 1, n - 1)), ("tau".into(), tau)]
        }
        _ => Vec::new(),
    };
    let Ok(space) = metric_space_for(spec) else {
        return Vec::new();
    };
    let g = &reference.carry;
    base.into_iter()
        .map(|(name, s)| (name, g * s * g.transpose()))
        .filter(|(_, s)| tangent_map(s, &space, &space).is_ok())
        .collect()
}

/// Groups solutions by normalized Einstein constant and stored isometries.
pub fn equivalence_screen(set: SolutionSet) -> SolutionSet {
    screen(set)
}

fn screen(mut set: SolutionSet) -> SolutionSet {
    let n = set.solutions.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let next = p[i];
            p[i] = r;
            i = next;
        }
        r
    }
    let constants: Vec<f64> = set.solutions.iter().map(|s| s.defect.normalized_constant).collect();
    let maps = witness_maps(&set.flag);
    let mut links = Vec::new();
    if let Some(space) = set.solutions.first().map(|s| s.metric.space.clone()) {
        let gauge = space.gauge_index();
        for i in 0..n {
            for (name, s) in &maps {
                let Ok(pulled) = pull_back(s, &space, set.solutions[i].coeffs()) else {
                    continue;
                };
                let pulled = normalize(&pulled, gauge);
                for j in 0..n {
                    if i == j || !same_constant(constants[i], constants[j]) {
                        continue;
                    }
                    if relative_gap(&pulled, &normalize(set.solutions[j].coeffs(), gauge)) < 1e-8 {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a] = b;
                            links.push((i, j, name.clone()));
                        }
                    }
                }
            }
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match roots.iter().position(|&x| x == r) {
            Some(k) => members[k].push(i),
            None => {
                roots.push(r);
                members.push(vec![i]);
            }
        }
    }
    let group_of = |i: usize| members.iter().position(|m| m.contains(&i)).unwrap();
    set.equivalence_groups = members
        .iter()
        .enumerate()
        .map(|(gi, m)| {
            let mut undecided_with: Vec<usize> = (0..n)
                .filter(|&j| !m.contains(&j) && m.iter().any(|&i| same_constant(constants[i], constants[j])))
                .map(group_of)
                .collect();
            undecided_with.dedup();
            let status = if !undecided_with.is_empty() {
                GroupStatus::Undecided
            } else if m.len() > 1 {
                GroupStatus::WitnessedEquivalent
            } else {
                GroupStatus::ProvenDistinct
            };
            let _ = gi;
            EquivalenceGroup {
                members: m.clone(),
                status,
                witnesses: links.iter().filter(|(i, _, _)| m.contains(i)).cloned().collect(),
                undecided_with,
            }
        })
        .collect();
    set
}

// ---------------------------------------------------------------------------
// Table reproduction

#[derive(Clone, Debug, Serialize)]
pub struct Table1Row {
    pub flag: String,
    pub manifold: String,
    pub summands: usize,
    pub equivalent_summands: bool,
    pub count: usize,
    pub normal_einstein: bool,
    pub expected: ExpectedRow,
    pub rules: Vec<String>,
    pub matches: bool,
}

pub fn table1_row(spec: &FlagSpec) -> Result<Table1Row> {
    table1_row_from(&solve(spec, SolveMode::Both)?)
}

/// Table row for an already solved flag.
pub fn table1_row_from(set: &SolutionSet) -> Result<Table1Row> {
    let spec = &set.flag;
    let family = TableFamily::classify(spec).ok_or_else(|| Error::NoCatalogEntry(spec.canonical()))?;
    let space = metric_space_for(spec)?;
    let summands = space.decomposition.submodules.len();
    let equivalent_summands = !space.decomposition.pairs().is_empty();
    let normal_einstein = einstein_defect(&normal_metric(&space)).residual < SOLUTION_TOLERANCE;
    let expected = family.expected();
    let count = set.count();
    let agrees = set.catalog_check.as_ref().is_none_or(|c| c.agrees)
        && set.polynomial_check.as_ref().is_none_or(|c| c.agrees)
        && set.solutions.iter().all(|s| s.defect.residual < SOLUTION_TOLERANCE);
    Ok(Table1Row {
        flag: spec.canonical(),
        manifold: family.title(),
        summands,
        equivalent_summands,
        count,
        normal_einstein,
        matches: agrees
            && summands == expected.summands
            && equivalent_summands == expected.equivalent_summands
            && expected.count.admits(count)
            && normal_einstein == expected.normal_einstein,
        rules: set.solutions.iter().map(|s| s.rule_id.clone()).collect(),
        expected,
    })
}

/// Flags of the classification table with rank at most `max_l`.
pub fn table1_flags(max_l: usize) -> Result<Vec<FlagSpec>> {
    let mut out = Vec::new();
    for family in [Family::A, Family::B, Family::C, Family::D] {
        for l in family.min_rank()..=max_l {
            for spec in enumerate_small_flags(family, l)? {
                if TableFamily::classify(&spec).is_some() {
                    out.push(spec);
                }
            }
        }
    }
    Ok(out)
}

pub fn table1(max_l: usize) -> Result<Vec<Table1Row>> {
    table1_flags(max_l)?.iter().map(table1_row).collect()
}
