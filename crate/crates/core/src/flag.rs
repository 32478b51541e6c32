//! Flag specifications, the reductive splitting `k = k_Θ ⊕ m_Θ` and the
//! isotropy decomposition of `m_Θ`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::algebra::{build_algebra, AlgebraModel, Family, Label, RootLabel};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct FlagSpec {
    pub algebra: Arc<AlgebraModel>,
    pub partition: Vec<usize>,
    pub includes_last_root: bool,
    pub inner_scale: f64,
}

impl FlagSpec {
    pub fn family(&self) -> Family {
        self.algebra.family
    }

    pub fn rank(&self) -> usize {
        self.algebra.rank
    }

    /// 1-based inclusive ranges of the blocks of the partition.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let mut start = 1;
        self.partition
            .iter()
            .map(|&p| {
                let b = (start, start + p - 1);
                start += p;
                b
            })
            .collect()
    }

    /// Indices (1-based) of the simple roots in Θ.
    pub fn theta(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (lo, hi) in self.blocks() {
            out.extend(lo..hi);
        }
        if self.includes_last_root && !out.contains(&self.rank()) {
            out.push(self.rank());
        }
        out.sort_unstable();
        out
    }

    pub fn canonical(&self) -> String {
        let parts: Vec<String> = self.partition.iter().map(|p| p.to_string()).collect();
        format!(
            "{}:{}:[{}]:{}last",
            self.family().letter(),
            self.rank(),
            parts.join(","),
            if self.includes_last_root { '+' } else { '-' }
        )
    }

    pub fn with_inner_scale(mut self, scale: f64) -> Self {
        self.inner_scale = scale;
        self
    }
}

impl fmt::Display for FlagSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

fn default_inner_scale(family: Family, rank: usize, partition: &[usize]) -> f64 {
    if family == Family::A && partition.len() == 3 && rank > 1 {
        1.0 / (2.0 * (rank as f64 - 1.0))
    } else {
        1.0
    }
}

pub fn make_flag(algebra: Arc<AlgebraModel>, partition: &[usize], includes_last_root: bool) -> Result<FlagSpec> {
    let family = algebra.family;
    let rank = algebra.rank;
    let total = if family == Family::A { rank + 1 } else { rank };
    if partition.is_empty() || partition.contains(&0) {
        return Err(Error::BadPartition(format!(
            "parts must be positive, got {partition:?}"
        )));
    }
    let sum: usize = partition.iter().sum();
    if sum != total {
        return Err(Error::BadPartition(format!(
            "{partition:?} sums to {sum}, expected {total} for {family}_{rank}"
        )));
    }
    if family == Family::A && includes_last_root {
        return Err(Error::BadFlag("the last-root flag does not apply to family A".into()));
    }
    Ok(FlagSpec {
        inner_scale: default_inner_scale(family, rank, partition),
        algebra,
        partition: partition.to_vec(),
        includes_last_root,
    })
}

/// Parsed form of `FAMILY:l:[l_1,...,l_r]:(+|-)last`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlagText {
    pub family: Family,
    pub rank: usize,
    pub partition: Vec<usize>,
    pub includes_last_root: bool,
}

impl std::str::FromStr for FlagText {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Parse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let fields: Vec<&str> = compact.split(':').collect();
        if fields.len() != 4 {
            return Err(bad("expected four ':'-separated fields"));
        }
        let mut letters = fields[0].chars();
        let family = match (letters.next(), letters.next()) {
            (Some(c), None) => {
                Family::from_letter(c.to_ascii_uppercase()).ok_or_else(|| bad("family must be one of A, B, C, D"))?
            }
            _ => return Err(bad("family must be a single letter")),
        };
        let rank: usize = fields[1].parse().map_err(|_| bad("rank is not an integer"))?;
        let inner = fields[2]
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(|| bad("partition must be bracketed"))?;
        let partition = inner
            .split(',')
            .map(|p| p.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad("partition entries must be integers"))?;
        let includes_last_root = match fields[3] {
            "+" | "+last" => true,
            "-" | "-last" => false,
            _ => return Err(bad("last field must be +last or -last")),
        };
        Ok(FlagText {
            family,
            rank,
            partition,
            includes_last_root,
        })
    }
}

pub fn parse_flag(s: &str) -> Result<FlagSpec> {
    let t: FlagText = s.parse()?;
    let algebra = Arc::new(build_algebra(t.family, t.rank)?);
    make_flag(algebra, &t.partition, t.includes_last_root)
}

/// Returns `(isotropy indices, tangent indices)` into the algebra basis.
pub fn split_reductive(spec: &FlagSpec) -> (Vec<usize>, Vec<usize>) {
    let alg = &spec.algebra;
    let theta = spec.theta();
    let simple = alg.simple_roots();
    let wd = simple[0].len();
    let s = DMatrix::from_fn(wd, simple.len(), |i, j| simple[j][i] as f64);
    let pinv = s.clone().pseudo_inverse(1e-10).expect("simple roots have full rank");
    let mut iso = Vec::new();
    let mut tan = Vec::new();
    for (k, b) in alg.basis.iter().enumerate() {
        let inside = match &b.root {
            RootLabel::CartanCompact => true,
            RootLabel::Root(r) => {
                let rv = DVector::from_iterator(wd, r.iter().map(|&x| x as f64));
                let c = &pinv * &rv;
                (0..simple.len()).all(|i| theta.contains(&(i + 1)) || c[i].abs() < 1e-9)
            }
        };
        if inside {
            iso.push(k);
        } else {
            tan.push(k);
        }
    }
    (iso, tan)
}

#[derive(Clone, Debug)]
pub struct Submodule {
    pub name: String,
    /// Coefficient vectors over the tangent basis elements.
    pub span: Vec<DVector<f64>>,
    /// Orthonormal basis (columns) in unit tangent coordinates; column 0 is
    /// parallel to the first span vector.
    pub frame: DMatrix<f64>,
}

impl Submodule {
    pub fn dim(&self) -> usize {
        self.span.len()
    }
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub isotropy_basis: Vec<usize>,
    pub tangent_basis: Vec<usize>,
    /// Ambient norm of each tangent basis element; unit coordinates are
    /// coefficients on `b_a / |b_a|`.
    pub unit: Vec<f64>,
    pub submodules: Vec<Submodule>,
    pub equiv_classes: Vec<Vec<usize>>,
}

impl Decomposition {
    pub fn tangent_dim(&self) -> usize {
        self.tangent_basis.len()
    }

    pub fn class_of(&self, sub: usize) -> usize {
        self.equiv_classes
            .iter()
            .position(|c| c.contains(&sub))
            .expect("every submodule has a class")
    }

    /// Declared equivalent pairs `(W, W')` in submodule order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.equiv_classes
            .iter()
            .filter(|c| c.len() == 2)
            .map(|c| (c[0], c[1]))
            .collect()
    }

    /// Action of `ad x` (x an algebra basis element) on the tangent space in
    /// unit coordinates, together with the norm of its k_Θ component.
    pub fn ad_on_tangent(&self, alg: &AlgebraModel, x: usize) -> (DMatrix<f64>, f64) {
        let n = self.tangent_dim();
        let pos = position_map(&self.tangent_basis);
        let mut m = DMatrix::zeros(n, n);
        let mut leak = 0.0f64;
        for (col, &a) in self.tangent_basis.iter().enumerate() {
            for &(c, t) in alg.structure(x, a) {
                match pos.get(&c) {
                    Some(&row) => m[(row, col)] += t * self.unit[row] / self.unit[col],
                    None => leak = leak.max(t.abs()),
                }
            }
        }
        (m, leak)
    }

    /// Restriction of `Ad(g)` to the tangent space, in unit coordinates.
    pub fn group_on_tangent(&self, alg: &AlgebraModel, g: &DMatrix<f64>, index: usize) -> Result<DMatrix<f64>> {
        let full = alg.adjoint_action(g)?;
        let n = self.tangent_dim();
        let mut leak = 0.0f64;
        for &r in &self.isotropy_basis {
            for &c in &self.tangent_basis {
                leak = leak.max(full[(r, c)].abs());
            }
        }
        if leak > 1e-10 {
            return Err(Error::GeneratorMismatch { index, leak });
        }
        Ok(DMatrix::from_fn(n, n, |i, j| {
            full[(self.tangent_basis[i], self.tangent_basis[j])] * self.unit[i] / self.unit[j]
        }))
    }
}

fn position_map(indices: &[usize]) -> HashMap<usize, usize> {
    indices.iter().enumerate().map(|(p, &k)| (k, p)).collect()
}

type Terms = Vec<(Label, f64)>;

struct Builder<'a> {
    spec: &'a FlagSpec,
    subs: Vec<(String, Vec<Terms>)>,
    pairs: Vec<(usize, usize)>,
}

impl<'a> Builder<'a> {
    fn new(spec: &'a FlagSpec) -> Self {
        Builder {
            spec,
            subs: Vec::new(),
            pairs: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, span: Vec<Terms>) -> Option<usize> {
        if span.is_empty() {
            return None;
        }
        self.subs.push((name.into(), span));
        Some(self.subs.len() - 1)
    }

    fn pair(&mut self, a: Option<usize>, b: Option<usize>) {
        if let (Some(a), Some(b)) = (a, b) {
            self.pairs.push((a, b));
        }
    }

    fn block(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        let (lo, hi) = self.spec.blocks()[i - 1];
        lo..=hi
    }
}

fn single(l: Label) -> Terms {
    vec![(l, 1.0)]
}

fn cross(b: &Builder, m: usize, n: usize, f: impl Fn(usize, usize) -> Terms) -> Vec<Terms> {
    let mut out = Vec::new();
    for s in b.block(m) {
        for t in b.block(n) {
            out.push(f(s, t));
        }
    }
    out
}

fn inner(b: &Builder, i: usize, f: impl Fn(usize, usize) -> Terms) -> Vec<Terms> {
    let mut out = Vec::new();
    for s in b.block(i) {
        for t in b.block(i) {
            if t < s {
                out.push(f(s, t));
            }
        }
    }
    out
}

fn unimplemented(spec: &FlagSpec) -> Error {
    Error::UnimplementedCase(format!(
        "{} (Θ = {:?}) has no decomposition rule",
        spec.canonical(),
        spec.theta()
    ))
}

fn rules_a(spec: &FlagSpec, b: &mut Builder) -> Result<()> {
    let r = spec.partition.len();
    let w = |s: usize, t: usize| single(Label::W(s, t));
    if spec.rank() == 3 && spec.partition == [2, 2] {
        b.push(
            "M1",
            vec![
                vec![(Label::W(3, 1), 1.0), (Label::W(4, 2), -1.0)],
                vec![(Label::W(4, 1), 1.0), (Label::W(3, 2), 1.0)],
            ],
        );
        b.push(
            "M2",
            vec![
                vec![(Label::W(3, 1), 1.0), (Label::W(4, 2), 1.0)],
                vec![(Label::W(4, 1), 1.0), (Label::W(3, 2), -1.0)],
            ],
        );
        return Ok(());
    }
    if spec.rank() == 3 && r == 3 {
        let big = spec.partition.iter().position(|&p| p == 2).unwrap() + 1;
        let all = [(2, 1), (3, 1), (3, 2)];
        let lone = *all.iter().find(|&&(m, n)| m != big && n != big).unwrap();
        let touching: Vec<(usize, usize)> = all.iter().copied().filter(|&p| p != lone).collect();
        let name = |(m, n): (usize, usize)| format!("M{m}{n}");
        b.push(name(lone), cross(b, lone.0, lone.1, w));
        let (p, q) = (touching[0], touching[1]);
        let first = b.push(name(p), cross(b, p.0, p.1, w));
        let mut second_span = cross(b, q.0, q.1, w);
        if big == 1 {
            // w42 before w41 so that the intertwiner sends w31 to w42
            second_span.reverse();
        }
        let second = b.push(name(q), second_span);
        b.pair(first, second);
        return Ok(());
    }
    if spec.rank() == 3 && r == 4 {
        let mut idx = HashMap::new();
        for m in 2..=4 {
            for n in 1..m {
                idx.insert((m, n), b.push(format!("M{m}{n}"), cross(b, m, n, w)));
            }
        }
        for (p, q) in [((2, 1), (4, 3)), ((3, 1), (4, 2)), ((4, 1), (3, 2))] {
            b.pair(idx[&p], idx[&q]);
        }
        return Ok(());
    }
    for m in 2..=r {
        for n in 1..m {
            b.push(format!("M{m}{n}"), cross(b, m, n, w));
        }
    }
    Ok(())
}

fn rules_b(spec: &FlagSpec, b: &mut Builder) -> Result<()> {
    let l = spec.rank();
    let r = spec.partition.len();
    let last = spec.includes_last_root;
    let w = |s: usize, t: usize| single(Label::W(s, t));
    let u = |s: usize, t: usize| single(Label::U(s, t));
    let v_block = |b: &Builder, i: usize| -> Vec<Terms> { b.block(i).map(|k| single(Label::V(k))).collect() };

    if l == 4 && !last && r == 1 {
        b.push("V1", v_block(b, 1));
        b.push(
            "T1",
            vec![
                vec![(Label::U(2, 1), 1.0), (Label::U(4, 3), 1.0)],
                vec![(Label::U(3, 1), 1.0), (Label::U(4, 2), -1.0)],
                vec![(Label::U(4, 1), 1.0), (Label::U(3, 2), 1.0)],
            ],
        );
        b.push(
            "T2",
            vec![
                vec![(Label::U(2, 1), 1.0), (Label::U(4, 3), -1.0)],
                vec![(Label::U(3, 1), 1.0), (Label::U(4, 2), 1.0)],
                vec![(Label::U(4, 1), 1.0), (Label::U(3, 2), -1.0)],
            ],
        );
        return Ok(());
    }
    let whitelisted = (last && spec.partition == [1, l - 1]) || (!last && r == 1);
    if l < 5 && !(l >= 3 && whitelisted) {
        return Err(unimplemented(spec));
    }

    if !last {
        for i in 1..=r {
            b.push(format!("V{i}"), v_block(b, i));
        }
        for m in 2..=r {
            for n in 1..m {
                let p = b.push(format!("W{m}{n}"), cross(b, m, n, w));
                let q = b.push(format!("U{m}{n}"), cross(b, m, n, u));
                b.pair(p, q);
            }
        }
        for i in 1..=r {
            b.push(format!("U{i}"), inner(b, i, u));
        }
    } else {
        for i in 1..r {
            b.push(format!("U{i}"), inner(b, i, u));
        }
        for i in 1..r {
            let minus = cross(b, r, i, |s, t| vec![(Label::W(s, t), 1.0), (Label::U(s, t), -1.0)]);
            let mut plus: Vec<Terms> = b.block(i).map(|t| single(Label::V(t))).collect();
            plus.extend(cross(b, r, i, |s, t| {
                vec![(Label::W(s, t), 1.0), (Label::U(s, t), 1.0)]
            }));
            b.push(format!("(V{i})1"), minus);
            b.push(format!("(V{i})2"), plus);
        }
        for m in 2..r {
            for n in 1..m {
                let p = b.push(format!("W{m}{n}"), cross(b, m, n, w));
                let q = b.push(format!("U{m}{n}"), cross(b, m, n, u));
                b.pair(p, q);
            }
        }
    }
    Ok(())
}

fn rules_c(spec: &FlagSpec, b: &mut Builder) -> Result<()> {
    let l = spec.rank();
    let r = spec.partition.len();
    let last = spec.includes_last_root;
    if l == 4 && !((!last && r == 1) || (last && spec.partition == [1, 3])) {
        return Err(unimplemented(spec));
    }
    let open = if last { r - 1 } else { r };
    if open >= 2 {
        return Err(Error::UnimplementedCase(format!(
            "{}: {} pairwise equivalent one-dimensional summands V_i",
            spec.canonical(),
            open
        )));
    }
    let w = |s: usize, t: usize| single(Label::W(s, t));
    let u = |s: usize, t: usize| single(Label::U(s, t));
    for i in 1..=open {
        let v: Terms = b.block(i).map(|k| (Label::U(k, k), 1.0)).collect();
        b.push(format!("V{i}"), vec![v]);
    }
    for i in 1..=open {
        let range: Vec<usize> = b.block(i).collect();
        let mut span: Vec<Terms> = range
            .windows(2)
            .map(|p| vec![(Label::U(p[0], p[0]), 1.0), (Label::U(p[1], p[1]), -1.0)])
            .collect();
        span.extend(inner(b, i, u));
        b.push(format!("U{i}"), span);
    }
    for m in 2..=open {
        for n in 1..m {
            let p = b.push(format!("W{m}{n}"), cross(b, m, n, w));
            let q = b.push(format!("U{m}{n}"), cross(b, m, n, u));
            b.pair(p, q);
        }
    }
    if last {
        for n in 1..r {
            let mut span = cross(b, r, n, w);
            span.extend(cross(b, r, n, u));
            b.push(format!("M{r}{n}"), span);
        }
    }
    Ok(())
}

fn rules_d(spec: &FlagSpec, b: &mut Builder) -> Result<()> {
    let l = spec.rank();
    let r = spec.partition.len();
    let last = spec.includes_last_root;
    let w = |s: usize, t: usize| single(Label::W(s, t));
    let u = |s: usize, t: usize| single(Label::U(s, t));
    if l == 4 {
        let t1 = vec![
            vec![(Label::U(2, 1), 1.0), (Label::U(4, 3), 1.0)],
            vec![(Label::U(3, 1), 1.0), (Label::U(4, 2), -1.0)],
            vec![(Label::U(4, 1), 1.0), (Label::U(3, 2), 1.0)],
        ];
        let s1 = vec![
            vec![(Label::U(4, 3), 1.0), (Label::U(2, 1), -1.0)],
            vec![(Label::U(3, 1), 1.0), (Label::U(4, 2), 1.0)],
            vec![(Label::U(4, 1), 1.0), (Label::U(3, 2), -1.0)],
        ];
        if !last && spec.partition == [4] {
            b.push("T1", t1);
            b.push("S1", s1);
            return Ok(());
        }
        if last && spec.partition == [3, 1] {
            let swap = |t: Terms| -> Terms {
                t.into_iter()
                    .map(|(lab, c)| match lab {
                        Label::W(4, j) => (Label::U(4, j), c),
                        Label::U(4, j) => (Label::W(4, j), c),
                        other => (other, c),
                    })
                    .collect()
            };
            b.push("T1", t1.into_iter().map(swap).collect());
            b.push("S1", s1.into_iter().map(swap).collect());
            return Ok(());
        }
        if !(!last && spec.partition == [3, 1]) {
            return Err(unimplemented(spec));
        }
    } else if l < 4 {
        return Err(unimplemented(spec));
    }

    let lr = spec.partition[r - 1];
    let mut singles = Vec::new();
    let mut paired = Vec::new();
    let wu_pairs = |b: &Builder, upto: usize, paired: &mut Vec<_>| {
        for m in 2..=upto {
            for n in 1..m {
                paired.push((
                    (format!("W{m}{n}"), cross(b, m, n, w)),
                    (format!("U{m}{n}"), cross(b, m, n, u)),
                ));
            }
        }
    };
    if !last {
        for i in 1..=r {
            singles.push((format!("U{i}"), inner(b, i, u)));
        }
        wu_pairs(b, r, &mut paired);
    } else if lr > 1 {
        for i in 1..r {
            singles.push((format!("U{i}"), inner(b, i, u)));
        }
        for n in 1..r {
            let mut span = cross(b, r, n, w);
            span.extend(cross(b, r, n, u));
            singles.push((format!("M{r}{n}"), span));
        }
        wu_pairs(b, r - 1, &mut paired);
    } else {
        if r < 2 {
            return Err(unimplemented(spec));
        }
        for i in 1..r - 1 {
            singles.push((format!("U{i}"), inner(b, i, u)));
        }
        let mut v = inner(b, r - 1, u);
        v.extend(b.block(r - 1).map(|t| single(Label::W(l, t))));
        singles.push((format!("V{}", r - 1), v));
        for n in 1..r - 1 {
            let mut m_span = cross(b, r - 1, n, w);
            m_span.extend(b.block(n).map(|t| single(Label::U(l, t))));
            let mut n_span = cross(b, r - 1, n, u);
            n_span.extend(b.block(n).map(|t| single(Label::W(l, t))));
            paired.push(((format!("M{n}"), m_span), (format!("N{n}"), n_span)));
        }
        wu_pairs(b, r - 2, &mut paired);
    }
    for (name, span) in singles {
        b.push(name, span);
    }
    for ((n1, s1), (n2, s2)) in paired {
        let p = b.push(n1, s1);
        let q = b.push(n2, s2);
        b.pair(p, q);
    }
    Ok(())
}

pub fn decompose_isotropy(spec: &FlagSpec) -> Result<Decomposition> {
    let alg = &spec.algebra;
    let (iso, tan) = split_reductive(spec);
    let mut b = Builder::new(spec);
    match spec.family() {
        Family::A => rules_a(spec, &mut b)?,
        Family::B => rules_b(spec, &mut b)?,
        Family::C => rules_c(spec, &mut b)?,
        Family::D => rules_d(spec, &mut b)?,
    }

    // singletons first, then declared pairs, preserving rule order otherwise
    let paired: Vec<usize> = b.pairs.iter().flat_map(|&(p, q)| [p, q]).collect();
    let mut order: Vec<usize> = (0..b.subs.len()).filter(|i| !paired.contains(i)).collect();
    order.extend(paired.iter().copied());
    let new_index: HashMap<usize, usize> = order.iter().enumerate().map(|(new, &old)| (old, new)).collect();

    let pos = position_map(&tan);
    let unit: Vec<f64> = tan.iter().map(|&a| alg.gram[(a, a)].sqrt()).collect();
    let n = tan.len();
    let mut submodules = Vec::new();
    for &old in &order {
        let (name, terms) = &b.subs[old];
        let mut span = Vec::new();
        for t in terms {
            let mut v = DVector::zeros(n);
            for &(lab, c) in t {
                let k = alg
                    .index_of(lab)
                    .ok_or_else(|| Error::BadFlag(format!("{lab} is not a basis element of {}", spec.canonical())))?;
                let p = *pos.get(&k).ok_or_else(|| {
                    Error::BadFlag(format!("{lab} lies in the isotropy algebra of {}", spec.canonical()))
                })?;
                v[p] += c;
            }
            span.push(v);
        }
        let raw = DMatrix::from_fn(n, span.len(), |i, j| span[j][i] * unit[i]);
        let frame = orthonormal_columns(&raw);
        submodules.push(Submodule {
            name: name.clone(),
            span,
            frame,
        });
    }
    let mut equiv_classes: Vec<Vec<usize>> = Vec::new();
    for (i, &old) in order.iter().enumerate().take(submodules.len()) {
        if let Some(&(p, q)) = b.pairs.iter().find(|&&(p, _)| p == old) {
            equiv_classes.push(vec![new_index[&p], new_index[&q]]);
        } else if !paired.contains(&old) {
            equiv_classes.push(vec![i]);
        }
    }
    let dec = Decomposition {
        isotropy_basis: iso,
        tangent_basis: tan,
        unit,
        submodules,
        equiv_classes,
    };
    verify(spec, &dec)?;
    Ok(dec)
}

/// Gram-Schmidt on the columns (twice, for stability).
pub fn orthonormal_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let d = q.column(i).dot(&q.column(j));
                let ci = q.column(i).clone_owned();
                q.column_mut(j).axpy(-d, &ci, 1.0);
            }
        }
        let nrm = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / nrm);
    }
    q
}

fn verify(spec: &FlagSpec, dec: &Decomposition) -> Result<()> {
    let alg = &spec.algebra;
    let fail = |what: String| Err(Error::BadFlag(format!("{}: {what}", spec.canonical())));
    let total: usize = dec.submodules.iter().map(|s| s.dim()).sum();
    if total != dec.tangent_dim() {
        return fail(format!(
            "summands have total dimension {total}, tangent space has {}",
            dec.tangent_dim()
        ));
    }
    if total > 0 {
        let all = DMatrix::from_columns(
            &dec.submodules
                .iter()
                .flat_map(|s| s.frame.column_iter().map(|c| c.clone_owned()))
                .collect::<Vec<_>>(),
        );
        let gram = all.transpose() * &all;
        let dev = (gram - DMatrix::identity(total, total)).amax();
        if dev > 1e-12 {
            return fail(format!("summands are not orthogonal (deviation {dev:e})"));
        }
    }
    for &x in &dec.isotropy_basis {
        let (ad, leak) = dec.ad_on_tangent(alg, x);
        if leak > 1e-12 {
            return fail(format!("[k, m] is not contained in m (leak {leak:e})"));
        }
        for s in &dec.submodules {
            let image = &ad * &s.frame;
            let rest = &image - &s.frame * (s.frame.transpose() * &image);
            let res = rest.amax();
            if res > 1e-12 {
                return fail(format!("{} is not invariant (residual {res:e})", s.name));
            }
        }
    }
    for c in &dec.equiv_classes {
        if c.iter().any(|&i| dec.submodules[i].dim() != dec.submodules[c[0]].dim()) {
            return fail("equivalent summands differ in dimension".into());
        }
    }
    Ok(())
}

/// Ambient sign matrices generating the component group of `K_Θ` used for
/// invariance: pairwise sign flips (single flips for `C`).
pub fn discrete_generators(spec: &FlagSpec) -> Vec<DMatrix<f64>> {
    let l = spec.rank();
    let n = spec.algebra.ambient_dim;
    let mut out = Vec::new();
    let mut diag = |signs: Vec<f64>| out.push(DMatrix::from_diagonal(&DVector::from_vec(signs)));
    match spec.family() {
        Family::A => {
            for i in 0..l {
                let mut d = vec![1.0; n];
                d[i] = -1.0;
                d[i + 1] = -1.0;
                diag(d);
            }
        }
        Family::B => {
            for i in 0..l.saturating_sub(1) {
                let mut d = vec![1.0; n];
                for off in [1, 1 + l] {
                    d[off + i] = -1.0;
                    d[off + i + 1] = -1.0;
                }
                diag(d);
            }
        }
        Family::C => {
            for i in 0..l {
                let mut d = vec![1.0; n];
                d[i] = -1.0;
                d[l + i] = -1.0;
                diag(d);
            }
        }
        Family::D => {
            for i in 0..l - 1 {
                let mut d = vec![1.0; n];
                for off in [0, l] {
                    d[off + i] = -1.0;
                    d[off + i + 1] = -1.0;
                }
                diag(d);
            }
        }
    }
    out
}

fn compositions(total: usize) -> Vec<Vec<usize>> {
    if total == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 1..=total {
        for mut rest in compositions(total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Every flag of the given algebra whose isotropy representation has two or
/// three summands under the implemented rules.
pub fn enumerate_small_flags(family: Family, rank: usize) -> Result<Vec<FlagSpec>> {
    let algebra = Arc::new(build_algebra(family, rank)?);
    let total = if family == Family::A { rank + 1 } else { rank };
    let lasts: &[bool] = if family == Family::A { &[false] } else { &[false, true] };
    let mut out = Vec::new();
    for p in compositions(total) {
        for &last in lasts {
            let spec = make_flag(algebra.clone(), &p, last)?;
            match decompose_isotropy(&spec) {
                Ok(dec) if (2..=3).contains(&dec.submodules.len()) => out.push(spec),
                Ok(_) | Err(Error::UnimplementedCase(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}
