//! Compact Lie algebras `k` of the split classical real forms, realized by
//! explicit skew-symmetric matrices.
//!
//! Basis conventions (all indices 1-based, `j < i`):
//!
//! * `A_l`: `w_ij = E_ij - E_ji` in `so(l+1)`.
//! * `B_l`: `v_k`, `w_ij`, `u_ij` in `so(l) + so(l+1)` inside `(2l+1) x (2l+1)` matrices.
//! * `C_l`: `u_kk`, `w_ij`, `u_ij` in `u(l)` inside `2l x 2l` matrices.
//! * `D_l`: `w_ij`, `u_ij` in `so(l) + so(l)` inside `2l x 2l` matrices.
//!
//! The ambient inner product is a fixed multiple of the Frobenius product
//! (which equals `-tr(XY)` on skew matrices): `n - 2` for `so(n)` (the negative
//! Killing form) and `1/4` for the other three families.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CLOSURE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    C,
    D,
}

impl Family {
    pub fn letter(self) -> char {
        match self {
            Family::A => 'A',
            Family::B => 'B',
            Family::C => 'C',
            Family::D => 'D',
        }
    }

    pub fn from_letter(c: char) -> Option<Family> {
        match c.to_ascii_uppercase() {
            'A' => Some(Family::A),
            'B' => Some(Family::B),
            'C' => Some(Family::C),
            'D' => Some(Family::D),
            _ => None,
        }
    }

    pub fn min_rank(self) -> usize {
        match self {
            Family::A => 1,
            Family::B | Family::C => 2,
            Family::D => 3,
        }
    }

    pub fn ambient_dim(self, rank: usize) -> usize {
        match self {
            Family::A => rank + 1,
            Family::B => 2 * rank + 1,
            Family::C | Family::D => 2 * rank,
        }
    }

    /// Number of root coordinates `λ_i`.
    pub fn weight_dim(self, rank: usize) -> usize {
        match self {
            Family::A => rank + 1,
            _ => rank,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Basis label. `U(k, k)` is the `C_l` element `u_kk`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    W(usize, usize),
    U(usize, usize),
    V(usize),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pair = |f: &mut fmt::Formatter<'_>, c: char, i: usize, j: usize| {
            if i < 10 && j < 10 {
                write!(f, "{c}{i}{j}")
            } else {
                write!(f, "{c}({i},{j})")
            }
        };
        match *self {
            Label::W(i, j) => pair(f, 'w', i, j),
            Label::U(i, j) => pair(f, 'u', i, j),
            Label::V(k) => write!(f, "v{k}"),
        }
    }
}

/// The root (in `λ` coordinates) whose compact root space a basis element spans.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootLabel {
    Root(Vec<i32>),
    CartanCompact,
}

#[derive(Clone, Debug)]
pub struct BasisElement {
    pub label: Label,
    pub matrix: DMatrix<f64>,
    pub root: RootLabel,
    entries: Vec<(usize, usize, f64)>,
}

impl BasisElement {
    fn new(label: Label, n: usize, entries: Vec<(usize, usize, f64)>, root: Vec<i32>) -> Self {
        let mut matrix = DMatrix::zeros(n, n);
        for &(i, j, x) in &entries {
            matrix[(i, j)] += x;
        }
        BasisElement {
            label,
            matrix,
            root: RootLabel::Root(root),
            entries,
        }
    }

    /// Nonzero ambient entries `(row, col, value)`, 0-based.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }
}

/// Coordinates over the basis of an [`AlgebraModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    pub coords: DVector<f64>,
}

impl AlgebraElement {
    pub fn zeros(dim: usize) -> Self {
        AlgebraElement {
            coords: DVector::zeros(dim),
        }
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        AlgebraElement {
            coords: DVector::from_vec(v),
        }
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

impl std::ops::Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            coords: &self.coords + &rhs.coords,
        }
    }
}

impl std::ops::Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            coords: &self.coords - &rhs.coords,
        }
    }
}

impl std::ops::Mul<f64> for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, t: f64) -> AlgebraElement {
        AlgebraElement {
            coords: &self.coords * t,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AlgebraModel {
    pub family: Family,
    pub rank: usize,
    pub ambient_dim: usize,
    pub basis: Vec<BasisElement>,
    pub gram: DMatrix<f64>,
    /// Sparse structure constants: entry `a * dim + b` lists `(c, t)` with
    /// `[b_a, b_b] = sum t b_c`.
    structure: Vec<Vec<(usize, f64)>>,
    killing: DMatrix<f64>,
    owner: HashMap<(usize, usize), (usize, f64)>,
    frobenius_scale: f64,
    index: HashMap<Label, usize>,
}

fn unit(dim: usize, positions: &[(usize, i32)]) -> Vec<i32> {
    let mut r = vec![0; dim];
    for &(p, c) in positions {
        r[p - 1] += c;
    }
    r
}

fn raw_basis(family: Family, l: usize) -> Vec<BasisElement> {
    let n = family.ambient_dim(l);
    let wd = family.weight_dim(l);
    // 1-based E_ij helper
    let e = |i: usize, j: usize, x: f64| (i - 1, j - 1, x);
    let mut out = Vec::new();
    match family {
        Family::A => {
            for i in 2..=n {
                for j in 1..i {
                    out.push(BasisElement::new(
                        Label::W(i, j),
                        n,
                        vec![e(i, j, 1.0), e(j, i, -1.0)],
                        unit(wd, &[(i, 1), (j, -1)]),
                    ));
                }
            }
        }
        Family::B => {
            for k in 1..=l {
                out.push(BasisElement::new(
                    Label::V(k),
                    n,
                    vec![
                        e(1 + k, 1, 1.0),
                        e(1, 1 + k, -1.0),
                        e(1 + l + k, 1, 1.0),
                        e(1, 1 + l + k, -1.0),
                    ],
                    unit(wd, &[(k, 1)]),
                ));
            }
            for i in 2..=l {
                for j in 1..i {
                    out.push(BasisElement::new(
                        Label::W(i, j),
                        n,
                        vec![
                            e(1 + i, 1 + j, 1.0),
                            e(1 + j, 1 + i, -1.0),
                            e(1 + l + i, 1 + l + j, 1.0),
                            e(1 + l + j, 1 + l + i, -1.0),
                        ],
                        unit(wd, &[(i, 1), (j, -1)]),
                    ));
                }
            }
            for i in 2..=l {
                for j in 1..i {
                    out.push(BasisElement::new(
                        Label::U(i, j),
                        n,
                        vec![
                            e(1 + l + i, 1 + j, 1.0),
                            e(1 + l + j, 1 + i, -1.0),
                            e(1 + i, 1 + l + j, 1.0),
                            e(1 + j, 1 + l + i, -1.0),
                        ],
                        unit(wd, &[(i, 1), (j, 1)]),
                    ));
                }
            }
        }
        Family::C => {
            for k in 1..=l {
                out.push(BasisElement::new(
                    Label::U(k, k),
                    n,
                    vec![e(l + k, k, 1.0), e(k, l + k, -1.0)],
                    unit(wd, &[(k, 2)]),
                ));
            }
            for i in 2..=l {
                for j in 1..i {
                    out.push(BasisElement::new(
                        Label::W(i, j),
                        n,
                        vec![e(i, j, 1.0), e(j, i, -1.0), e(l + i, l + j, 1.0), e(l + j, l + i, -1.0)],
                        unit(wd, &[(i, 1), (j, -1)]),
                    ));
                }
            }
            for i in 2..=l {
                for j in 1..i {
                    out.push(BasisElement::new(
                        Label::U(i, j),
                        n,
                        vec![e(l + i, j, 1.0), e(l + j, i, 1.0), e(i, l + j, -1.0), e(j, l + i, -1.0)],
                        unit(wd, &[(i, 1), (j, 1)]),
                    ));
                }
            }
        }
        Family::D => {
            for i in 2..=l {
                for j in 1..i {
                    out.push(BasisElement::new(
                        Label::W(i, j),
                        n,
                        vec![e(i, j, 1.0), e(j, i, -1.0), e(l + i, l + j, 1.0), e(l + j, l + i, -1.0)],
                        unit(wd, &[(i, 1), (j, -1)]),
                    ));
                }
            }
            for i in 2..=l {
                for j in 1..i {
                    out.push(BasisElement::new(
                        Label::U(i, j),
                        n,
                        vec![e(l + i, j, 1.0), e(l + j, i, -1.0), e(i, l + j, 1.0), e(j, l + i, -1.0)],
                        unit(wd, &[(i, 1), (j, 1)]),
                    ));
                }
            }
        }
    }
    out
}

fn sparse_commutator(a: &[(usize, usize, f64)], b: &[(usize, usize, f64)]) -> HashMap<(usize, usize), f64> {
    let mut out: HashMap<(usize, usize), f64> = HashMap::new();
    for &(i, k, x) in a {
        for &(k2, j, y) in b {
            if k == k2 {
                *out.entry((i, j)).or_insert(0.0) += x * y;
            }
        }
    }
    for &(i, k, x) in b {
        for &(k2, j, y) in a {
            if k == k2 {
                *out.entry((i, j)).or_insert(0.0) -= x * y;
            }
        }
    }
    out.retain(|_, v| v.abs() > 0.0);
    out
}

/// Rounds to the nearest quarter when already within round-off of it; the
/// structure constants of these bases are small dyadic rationals.
fn snap(x: f64) -> f64 {
    let q = (x * 4.0).round() / 4.0;
    if (x - q).abs() < 1e-12 {
        q
    } else {
        x
    }
}

/// Builds the compact algebra of the split real form of the given family.
pub fn build_algebra(family: Family, rank: usize) -> Result<AlgebraModel> {
    if rank < family.min_rank() {
        return Err(Error::UnsupportedRank {
            family: family.letter(),
            rank,
            min: family.min_rank(),
        });
    }
    let basis = raw_basis(family, rank);
    let dim = basis.len();
    let frobenius_scale = match family {
        Family::A => (family.ambient_dim(rank) as f64 - 2.0).max(1.0),
        _ => 0.25,
    };

    let mut owner = HashMap::new();
    for (k, b) in basis.iter().enumerate() {
        for &(i, j, x) in &b.entries {
            owner.insert((i, j), (k, x));
        }
    }
    let norms2: Vec<f64> = basis
        .iter()
        .map(|b| b.entries.iter().map(|e| e.2 * e.2).sum())
        .collect();

    let mut gram = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in a..dim {
            let mut s = 0.0;
            for &(i, j, x) in &basis[a].entries {
                if let Some(&(k, y)) = owner.get(&(i, j)) {
                    if k == b {
                        s += x * y;
                    }
                }
            }
            gram[(a, b)] = frobenius_scale * s;
            gram[(b, a)] = frobenius_scale * s;
        }
    }

    let mut structure = vec![Vec::new(); dim * dim];
    for a in 0..dim {
        for b in (a + 1)..dim {
            let comm = sparse_commutator(&basis[a].entries, &basis[b].entries);
            let mut coeffs: HashMap<usize, f64> = HashMap::new();
            for (&(i, j), &m) in &comm {
                if let Some(&(k, y)) = owner.get(&(i, j)) {
                    *coeffs.entry(k).or_insert(0.0) += m * y / norms2[k];
                }
            }
            let mut residual2 = 0.0;
            for (&(i, j), &m) in &comm {
                let recon = owner
                    .get(&(i, j))
                    .and_then(|&(k, y)| coeffs.get(&k).map(|c| c * y))
                    .unwrap_or(0.0);
                residual2 += (m - recon).powi(2);
            }
            if residual2.sqrt() > CLOSURE_TOL {
                return Err(Error::ClosureViolation {
                    a,
                    b,
                    residual: residual2.sqrt(),
                });
            }
            let mut list: Vec<(usize, f64)> = coeffs
                .into_iter()
                .map(|(k, c)| (k, snap(c)))
                .filter(|&(_, c)| c != 0.0)
                .collect();
            list.sort_by_key(|&(k, _)| k);
            structure[b * dim + a] = list.iter().map(|&(k, c)| (k, -c)).collect();
            structure[a * dim + b] = list;
        }
    }

    let index = basis.iter().enumerate().map(|(k, b)| (b.label, k)).collect();
    let mut model = AlgebraModel {
        family,
        rank,
        ambient_dim: family.ambient_dim(rank),
        basis,
        gram,
        structure,
        killing: DMatrix::zeros(0, 0),
        owner,
        frobenius_scale,
        index,
    };
    model.killing = model.ad_trace_form();
    Ok(model)
}

impl AlgebraModel {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, label: Label) -> Option<usize> {
        self.index.get(&label).copied()
    }

    /// Unit coordinate vector of a labeled basis element.
    pub fn element(&self, label: Label) -> Option<AlgebraElement> {
        let k = self.index_of(label)?;
        let mut e = AlgebraElement::zeros(self.dim());
        e.coords[k] = 1.0;
        Some(e)
    }

    /// `[b_a, b_b]` as a sparse list over the basis.
    pub fn structure(&self, a: usize, b: usize) -> &[(usize, f64)] {
        &self.structure[a * self.dim() + b]
    }

    pub fn killing_matrix(&self) -> &DMatrix<f64> {
        &self.killing
    }

    /// Ambient product as a multiple of the Frobenius product.
    pub fn frobenius_scale(&self) -> f64 {
        self.frobenius_scale
    }

    pub fn bracket(&self, a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        let dim = self.dim();
        let mut out = DVector::zeros(dim);
        for i in 0..dim {
            let x = a.coords[i];
            if x == 0.0 {
                continue;
            }
            for j in 0..dim {
                let y = b.coords[j];
                if y == 0.0 {
                    continue;
                }
                for &(k, t) in self.structure(i, j) {
                    out[k] += x * y * t;
                }
            }
        }
        AlgebraElement { coords: out }
    }

    pub fn matrix_of(&self, x: &AlgebraElement) -> DMatrix<f64> {
        let n = self.ambient_dim;
        let mut m = DMatrix::zeros(n, n);
        for (k, b) in self.basis.iter().enumerate() {
            let c = x.coords[k];
            if c != 0.0 {
                for &(i, j, v) in &b.entries {
                    m[(i, j)] += c * v;
                }
            }
        }
        m
    }

    /// Expands an ambient matrix in the basis, failing if it is not in the span.
    pub fn expand(&self, m: &DMatrix<f64>) -> Result<AlgebraElement> {
        let dim = self.dim();
        let mut coords = DVector::zeros(dim);
        for (k, b) in self.basis.iter().enumerate() {
            let mut s = 0.0;
            let mut nn = 0.0;
            for &(i, j, v) in &b.entries {
                s += m[(i, j)] * v;
                nn += v * v;
            }
            coords[k] = s / nn;
        }
        let x = AlgebraElement { coords };
        let residual = (self.matrix_of(&x) - m).norm();
        if residual > 1e-10 * (1.0 + m.norm()) {
            return Err(Error::ClosureViolation {
                a: usize::MAX,
                b: usize::MAX,
                residual,
            });
        }
        Ok(x)
    }

    /// Commutator computed from ambient matrices, then expanded.
    pub fn bracket_ambient(&self, a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
        let ma = self.matrix_of(a);
        let mb = self.matrix_of(b);
        self.expand(&(&ma * &mb - &mb * &ma))
    }

    pub fn ambient_inner(&self, a: &AlgebraElement, b: &AlgebraElement) -> f64 {
        (a.coords.transpose() * &self.gram * &b.coords)[(0, 0)]
    }

    pub fn killing(&self, a: &AlgebraElement, b: &AlgebraElement) -> f64 {
        (a.coords.transpose() * &self.killing * &b.coords)[(0, 0)]
    }

    /// Matrix of `ad x` on basis coordinates.
    pub fn ad(&self, x: &AlgebraElement) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let c = x.coords[i];
            if c == 0.0 {
                continue;
            }
            for j in 0..dim {
                for &(k, t) in self.structure(i, j) {
                    m[(k, j)] += c * t;
                }
            }
        }
        m
    }

    fn ad_trace_form(&self) -> DMatrix<f64> {
        let dim = self.dim();
        // ad_a as (c -> d, value) triples
        let triples: Vec<Vec<(usize, usize, f64)>> = (0..dim)
            .map(|a| {
                let mut v = Vec::new();
                for c in 0..dim {
                    for &(d, t) in self.structure(a, c) {
                        v.push((c, d, t));
                    }
                }
                v
            })
            .collect();
        let mut k = DMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in a..dim {
                // tr(ad_a ad_b) = sum_{c,d} (ad_a)_{dc} (ad_b)_{cd}
                let mut s = 0.0;
                for &(c, d, t) in &triples[a] {
                    for &(e, u) in self.structure(b, d) {
                        if e == c {
                            s += t * u;
                        }
                    }
                }
                k[(a, b)] = s;
                k[(b, a)] = s;
            }
        }
        k
    }

    /// Matrix of `Ad(g): X -> g X g^T` on basis coordinates, for an orthogonal
    /// ambient matrix `g` normalizing `k`.
    pub fn adjoint_action(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for (j, b) in self.basis.iter().enumerate() {
            let image = g * &b.matrix * g.transpose();
            let x = self.expand(&image)?;
            m.set_column(j, &x.coords);
        }
        Ok(m)
    }

    /// Simple roots `α_1..α_l` in `λ` coordinates.
    pub fn simple_roots(&self) -> Vec<Vec<i32>> {
        let l = self.rank;
        let wd = self.family.weight_dim(l);
        let mut out: Vec<Vec<i32>> = (1..l).map(|i| unit(wd, &[(i, 1), (i + 1, -1)])).collect();
        let last = match self.family {
            Family::A => unit(wd, &[(l, 1), (l + 1, -1)]),
            Family::B => unit(wd, &[(l, 1)]),
            Family::C => unit(wd, &[(l, 2)]),
            Family::D => unit(wd, &[(l - 1, 1), (l, 1)]),
        };
        out.push(last);
        out
    }

    /// Which ambient entry belongs to which basis element (each entry has at most one owner).
    pub fn entry_owner(&self, i: usize, j: usize) -> Option<(usize, f64)> {
        self.owner.get(&(i, j)).copied()
    }
}
