//! Invariant metrics: the commutant of the isotropy action, metric operators
//! and adapted orthonormal frames.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::algebra::{AlgebraModel, Family};
use crate::error::{Error, Result};
use crate::flag::{decompose_isotropy, discrete_generators, Decomposition, FlagSpec};

/// Blocks of the commutant system with more unknowns than this are not solved.
pub const COMMUTANT_UNKNOWN_LIMIT: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CoefficientKind {
    Diagonal { submodule: usize },
    Amplitude { first: usize, second: usize },
}

/// One equivalence class of summands with the coefficient slots that act on it.
#[derive(Clone, Debug)]
pub struct ClassBlock {
    pub submodules: Vec<usize>,
    /// `[a]` for a singleton, `[a, a', b]` for a pair.
    pub coefficients: Vec<usize>,
    /// Orthogonal intertwiner from the first summand to the second, in the
    /// summands' frames (pairs only).
    pub intertwiner: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutantBlock {
    pub first: String,
    pub second: String,
    /// `None` when the block exceeded the unknown limit.
    pub dim: Option<usize>,
    pub expected: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutantReport {
    pub expected: usize,
    pub blocks: Vec<CommutantBlock>,
}

impl CommutantReport {
    /// Commutant dimension over the solved blocks.
    pub fn found(&self) -> usize {
        self.blocks.iter().map(|b| b.dim.unwrap_or(b.expected)).sum()
    }

    pub fn fully_verified(&self) -> bool {
        self.blocks.iter().all(|b| b.dim.is_some())
    }

    /// Blocks whose computed dimension differs from the declared structure.
    pub fn extra_dims(&self) -> Vec<&CommutantBlock> {
        self.blocks
            .iter()
            .filter(|b| b.dim.is_some_and(|d| d != b.expected))
            .collect()
    }

    pub fn matches(&self) -> bool {
        self.extra_dims().is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct MetricSpace {
    pub flag: FlagSpec,
    pub decomposition: Decomposition,
    /// Self-adjoint operators on `m_Θ` in unit tangent coordinates.
    pub operator_basis: Vec<DMatrix<f64>>,
    pub kinds: Vec<CoefficientKind>,
    pub names: Vec<String>,
    pub classes: Vec<ClassBlock>,
    pub commutant: CommutantReport,
    /// `ad x` on the tangent space for each isotropy basis element.
    pub isotropy_action: Vec<DMatrix<f64>>,
    /// Tangent actions of the discrete generators.
    pub generator_action: Vec<DMatrix<f64>>,
}

impl MetricSpace {
    pub fn dim(&self) -> usize {
        self.operator_basis.len()
    }

    pub fn tangent_dim(&self) -> usize {
        self.decomposition.tangent_dim()
    }

    pub fn algebra(&self) -> &AlgebraModel {
        &self.flag.algebra
    }

    pub fn operator(&self, coeffs: &[f64]) -> Result<DMatrix<f64>> {
        if coeffs.len() != self.dim() {
            return Err(Error::CoefficientLength {
                got: coeffs.len(),
                expected: self.dim(),
            });
        }
        let n = self.tangent_dim();
        let mut a = DMatrix::zeros(n, n);
        for (c, b) in coeffs.iter().zip(&self.operator_basis) {
            a += b * *c;
        }
        Ok(a)
    }

    /// Least-squares coefficients of an operator together with the residual
    /// of the projection.
    pub fn coefficients_of(&self, a: &DMatrix<f64>) -> (Vec<f64>, f64) {
        let coeffs: Vec<f64> = self
            .operator_basis
            .iter()
            .map(|b| a.dot(b) / b.norm_squared())
            .collect();
        let back = self.operator(&coeffs).expect("length matches");
        (coeffs, (a - back).norm())
    }

    /// Index of the coefficient fixed to 1 by the homothety gauge.
    pub fn gauge_index(&self) -> usize {
        self.kinds
            .iter()
            .rposition(|k| matches!(k, CoefficientKind::Diagonal { .. }))
            .expect("at least one summand")
    }

    /// The 2x2 (or 1x1) block of the metric operator on a class.
    pub fn class_matrix(&self, class: usize, coeffs: &[f64]) -> DMatrix<f64> {
        let c = &self.classes[class].coefficients;
        if c.len() == 1 {
            DMatrix::from_element(1, 1, coeffs[c[0]])
        } else {
            DMatrix::from_row_slice(2, 2, &[coeffs[c[0]], coeffs[c[2]], coeffs[c[2]], coeffs[c[1]]])
        }
    }

    /// Orthonormal (unit coordinate) vectors adapted to a class: copy `p` of
    /// basis vector `k` is `q_k` for the first summand and `J q_k` for the
    /// second.
    pub fn adapted_vector(&self, class: usize, copy: usize, k: usize) -> DVector<f64> {
        let cb = &self.classes[class];
        let first = &self.decomposition.submodules[cb.submodules[0]].frame;
        if copy == 0 {
            first.column(k).clone_owned()
        } else {
            let second = &self.decomposition.submodules[cb.submodules[1]].frame;
            let x = cb.intertwiner.as_ref().expect("pair has an intertwiner");
            second * x.column(k)
        }
    }

    /// Largest violation of `[ρ, B] = 0` over the basis operators.
    pub fn equivariance_residual(&self, a: &DMatrix<f64>) -> f64 {
        self.isotropy_action
            .iter()
            .chain(&self.generator_action)
            .map(|r| (r * a - a * r).amax())
            .fold(0.0, f64::max)
    }
}

fn kron_constraint(rho: &DMatrix<f64>, rho2: &DMatrix<f64>) -> DMatrix<f64> {
    // vec(ρ' X - X ρ) for X of shape d' x d, column-major
    let d = rho.nrows();
    let d2 = rho2.nrows();
    let mut c = DMatrix::zeros(d * d2, d * d2);
    for j in 0..d {
        for i in 0..d2 {
            let row = j * d2 + i;
            for k in 0..d2 {
                c[(row, j * d2 + k)] += rho2[(i, k)];
            }
            for k in 0..d {
                c[(row, k * d2 + i)] -= rho[(k, j)];
            }
        }
    }
    c
}

/// Basis of `{X : ρ'(x) X = X ρ(x)}` over the supplied action pairs.
fn hom_kernel(pairs: &[(DMatrix<f64>, DMatrix<f64>)]) -> Vec<DMatrix<f64>> {
    let (d, d2) = (pairs[0].0.nrows(), pairs[0].1.nrows());
    let m = d * d2;
    let mut normal = DMatrix::zeros(m, m);
    for (rho, rho2) in pairs {
        let c = kron_constraint(rho, rho2);
        normal += c.transpose() * &c;
    }
    let eig = SymmetricEigen::new(normal);
    let top = eig.eigenvalues.amax().max(1.0);
    (0..m)
        .filter(|&i| eig.eigenvalues[i] < 1e-8 * top)
        .map(|i| DMatrix::from_column_slice(d2, d, eig.eigenvectors.column(i).as_slice()))
        .collect()
}

struct ActionData<'a> {
    iso: &'a [DMatrix<f64>],
    gens: &'a [DMatrix<f64>],
}

impl ActionData<'_> {
    fn restricted(&self, q: &DMatrix<f64>, q2: &DMatrix<f64>, probe: bool) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
        let restrict = |a: &DMatrix<f64>| (q.transpose() * a * q, q2.transpose() * a * q2);
        let mut out: Vec<_> = self.gens.iter().map(restrict).collect();
        if probe {
            // a few fixed generic combinations of the isotropy algebra
            for j in 0..3 {
                let mut x = DMatrix::zeros(q.nrows(), q.nrows());
                for (k, a) in self.iso.iter().enumerate() {
                    x += a * ((1.3 * k as f64 + 0.7 * j as f64 + 0.4).sin() + 0.05 * j as f64);
                }
                out.push(restrict(&x));
            }
        } else {
            out.extend(self.iso.iter().map(restrict));
        }
        out
    }

    /// Hom space between two summands; solved on generic probes first and
    /// confirmed against every isotropy element.
    fn hom(&self, q: &DMatrix<f64>, q2: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let probe = self.restricted(q, q2, true);
        if probe.is_empty() {
            return vec![];
        }
        let ker = hom_kernel(&probe);
        let all = self.restricted(q, q2, false);
        let ok = ker.iter().all(|x| {
            all.iter()
                .all(|(r, r2)| (r2 * x - x * r).amax() < 1e-9 * (1.0 + x.amax()))
        });
        if ok {
            ker
        } else {
            hom_kernel(&all)
        }
    }
}

fn symmetric_rank(mats: &[DMatrix<f64>]) -> usize {
    if mats.is_empty() {
        return 0;
    }
    let cols: Vec<DVector<f64>> = mats
        .iter()
        .map(|x| {
            let s = (x + x.transpose()) * 0.5;
            DVector::from_column_slice(s.as_slice())
        })
        .collect();
    let m = DMatrix::from_columns(&cols);
    let sv = m.singular_values();
    let top = sv.amax().max(1e-300);
    sv.iter().filter(|&&s| s > 1e-6 * top).count()
}

pub fn invariant_metric_space(
    spec: &FlagSpec,
    dec: &Decomposition,
    generators: &[DMatrix<f64>],
) -> Result<MetricSpace> {
    let alg = &spec.algebra;
    let n = dec.tangent_dim();
    let mut iso = Vec::with_capacity(dec.isotropy_basis.len());
    for &x in &dec.isotropy_basis {
        iso.push(dec.ad_on_tangent(alg, x).0);
    }
    let mut gens = Vec::with_capacity(generators.len());
    for (i, g) in generators.iter().enumerate() {
        let t = dec.group_on_tangent(alg, g, i)?;
        for s in &dec.submodules {
            let image = &t * &s.frame;
            let rest = &image - &s.frame * (s.frame.transpose() * &image);
            if rest.amax() > 1e-10 {
                return Err(Error::BadFlag(format!(
                    "{}: generator {i} does not preserve {}",
                    spec.canonical(),
                    s.name
                )));
            }
        }
        gens.push(t);
    }
    let actions = ActionData { iso: &iso, gens: &gens };

    let subs = &dec.submodules;
    let mut blocks = Vec::new();
    let mut expected_total = 0;
    let mut intertwiners = std::collections::HashMap::new();
    for i in 0..subs.len() {
        for j in i..subs.len() {
            let same_class = dec.class_of(i) == dec.class_of(j);
            let expected = if i == j || same_class { 1 } else { 0 };
            expected_total += expected;
            let unknowns = subs[i].dim() * subs[j].dim();
            let is_pair = i != j && same_class;
            let dim = if unknowns <= COMMUTANT_UNKNOWN_LIMIT || is_pair {
                let ker = actions.hom(&subs[i].frame, &subs[j].frame);
                let d = if i == j { symmetric_rank(&ker) } else { ker.len() };
                if is_pair {
                    intertwiners.insert((i, j), ker);
                }
                Some(d)
            } else {
                None
            };
            blocks.push(CommutantBlock {
                first: subs[i].name.clone(),
                second: subs[j].name.clone(),
                dim,
                expected,
            });
        }
    }
    let commutant = CommutantReport {
        expected: expected_total,
        blocks,
    };

    let mut operator_basis = Vec::new();
    let mut kinds = Vec::new();
    for (k, s) in subs.iter().enumerate() {
        operator_basis.push(&s.frame * s.frame.transpose());
        kinds.push(CoefficientKind::Diagonal { submodule: k });
    }
    let mut classes = Vec::new();
    for c in &dec.equiv_classes {
        if c.len() == 1 {
            classes.push(ClassBlock {
                submodules: c.clone(),
                coefficients: vec![c[0]],
                intertwiner: None,
            });
            continue;
        }
        let (i, j) = (c[0], c[1]);
        let ker = &intertwiners[&(i, j)];
        let Some(x) = ker.first() else {
            return Err(Error::UnimplementedCase(format!(
                "{}: no intertwiner between {} and {}",
                spec.canonical(),
                subs[i].name,
                subs[j].name
            )));
        };
        let d = subs[i].dim() as f64;
        let mut x = x * (d / x.norm_squared()).sqrt();
        let lead = x.column(0).iter().copied().find(|v| v.abs() > 1e-8).unwrap_or(1.0);
        if lead < 0.0 {
            x = -x;
        }
        let j_op = &subs[j].frame * &x * subs[i].frame.transpose();
        operator_basis.push(&j_op + j_op.transpose());
        kinds.push(CoefficientKind::Amplitude { first: i, second: j });
        classes.push(ClassBlock {
            submodules: vec![i, j],
            coefficients: vec![i, j, operator_basis.len() - 1],
            intertwiner: Some(x),
        });
    }
    debug_assert!(operator_basis.iter().all(|b| b.nrows() == n));
    let names = coefficient_names(spec, dec, &kinds);
    Ok(MetricSpace {
        flag: spec.clone(),
        decomposition: dec.clone(),
        operator_basis,
        kinds,
        names,
        classes,
        commutant,
        isotropy_action: iso,
        generator_action: gens,
    })
}

/// Decomposes the flag and builds its metric space with the default generators.
pub fn metric_space_for(spec: &FlagSpec) -> Result<Arc<MetricSpace>> {
    let dec = decompose_isotropy(spec)?;
    let gens = discrete_generators(spec);
    Ok(Arc::new(invariant_metric_space(spec, &dec, &gens)?))
}

fn coefficient_names(spec: &FlagSpec, dec: &Decomposition, kinds: &[CoefficientKind]) -> Vec<String> {
    let l = spec.rank();
    let p = &spec.partition;
    let last = spec.includes_last_root;
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let special = match spec.family() {
        Family::A if l == 3 && p.len() == 3 => Some(s(&["mu0", "mu1", "mu2", "b"])),
        Family::A if l == 3 && p.as_slice() == [2, 2] => Some(s(&["mu1", "mu2"])),
        Family::A if p.len() == 3 => Some(s(&["mu21", "mu31", "mu32"])),
        Family::B if l == 4 && !last && p.len() == 1 => Some(s(&["mu", "gamma1", "gamma2"])),
        Family::B if !last && p.len() == 1 => Some(s(&["mu", "gamma"])),
        Family::B if last && p.len() == 2 && p[0] == 1 => Some(s(&["rho", "mu"])),
        Family::B if last && p.len() == 2 => Some(s(&["gamma", "rho", "mu"])),
        Family::C if !last && p.len() == 1 => Some(s(&["mu0", "mu1"])),
        Family::C if last && p.len() == 2 && p[0] == 1 => Some(s(&["mu0", "mu21"])),
        Family::C if last && p.len() == 2 => Some(s(&["mu0", "mu1", "mu21"])),
        Family::D if l == 4 && dec.submodules.len() == 2 => Some(s(&["mu1", "mu2"])),
        Family::D if !last && p.len() == 2 && p[1] == 1 => Some(s(&["gamma", "lambda1", "lambda2", "b"])),
        _ => None,
    };
    match special {
        Some(v) if v.len() == kinds.len() => v,
        _ => kinds
            .iter()
            .map(|k| match *k {
                CoefficientKind::Diagonal { submodule } => format!("x[{}]", dec.submodules[submodule].name),
                CoefficientKind::Amplitude { first, second } => {
                    format!("b[{},{}]", dec.submodules[first].name, dec.submodules[second].name)
                }
            })
            .collect(),
    }
}

#[derive(Clone, Debug)]
pub struct InvariantMetric {
    pub space: Arc<MetricSpace>,
    pub coeffs: Vec<f64>,
    pub operator: DMatrix<f64>,
}

impl InvariantMetric {
    /// Metric with all coefficients multiplied by `t`.
    pub fn scaled(&self, t: f64) -> InvariantMetric {
        InvariantMetric {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * t).collect(),
            operator: &self.operator * t,
        }
    }

    /// `g(x, y) = s (A x, y)` on unit tangent coordinates.
    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.space.flag.inner_scale * (&self.operator * x).dot(y)
    }
}

pub fn make_metric(space: &Arc<MetricSpace>, coeffs: &[f64]) -> Result<InvariantMetric> {
    let operator = space.operator(coeffs)?;
    let mut min_eigenvalue = f64::INFINITY;
    for c in 0..space.classes.len() {
        let m = space.class_matrix(c, coeffs);
        let e = SymmetricEigen::new(m).eigenvalues.min();
        min_eigenvalue = min_eigenvalue.min(e);
    }
    // NaN coefficients must fail too
    if min_eigenvalue.is_nan() || min_eigenvalue <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    }
    Ok(InvariantMetric {
        space: space.clone(),
        coeffs: coeffs.to_vec(),
        operator,
    })
}

pub fn normal_metric(space: &Arc<MetricSpace>) -> InvariantMetric {
    let coeffs: Vec<f64> = space
        .kinds
        .iter()
        .map(|k| match k {
            CoefficientKind::Diagonal { .. } => 1.0,
            CoefficientKind::Amplitude { .. } => 0.0,
        })
        .collect();
    make_metric(space, &coeffs).expect("identity operator is positive")
}

#[derive(Clone, Debug)]
pub struct Frame {
    /// Columns are the frame vectors in unit tangent coordinates.
    pub unit_vectors: DMatrix<f64>,
    /// Operator eigenvalue of each frame vector.
    pub eigenvalues: Vec<f64>,
    /// Class of each frame vector.
    pub class_of: Vec<usize>,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Frame vector `i` as coefficients over the full algebra basis.
    pub fn algebra_vector(&self, space: &MetricSpace, i: usize) -> DVector<f64> {
        let dec = &space.decomposition;
        let mut v = DVector::zeros(space.algebra().dim());
        for (p, &a) in dec.tangent_basis.iter().enumerate() {
            v[a] = self.unit_vectors[(p, i)] / dec.unit[p];
        }
        v
    }
}

/// Eigenvectors `(c_1, c_2)` of a class block in ascending order, with the
/// first nonzero entry made positive.
pub fn class_eigen(m: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    if m.nrows() == 1 {
        return (vec![m[(0, 0)]], vec![DVector::from_element(1, 1.0)]);
    }
    let (a, a2, b) = (m[(0, 0)], m[(1, 1)], m[(0, 1)]);
    if b.abs() <= 1e-15 * (a.abs() + a2.abs()) {
        let e0 = DVector::from_vec(vec![1.0, 0.0]);
        let e1 = DVector::from_vec(vec![0.0, 1.0]);
        return if a <= a2 {
            (vec![a, a2], vec![e0, e1])
        } else {
            (vec![a2, a], vec![e1, e0])
        };
    }
    let mean = 0.5 * (a + a2);
    let rad = (0.25 * (a - a2).powi(2) + b * b).sqrt();
    let vals = [mean - rad, mean + rad];
    let vecs = vals
        .iter()
        .map(|&xi| {
            // (A - ξ) v = 0 with v = (b, ξ - a) or (ξ - a2, b)
            let v1 = DVector::from_vec(vec![b, xi - a]);
            let v2 = DVector::from_vec(vec![xi - a2, b]);
            let mut v = if v1.norm() >= v2.norm() { v1 } else { v2 };
            v /= v.norm();
            if v.iter().copied().find(|x| x.abs() > 1e-14).unwrap_or(1.0) < 0.0 {
                v = -v;
            }
            v
        })
        .collect();
    (vals.to_vec(), vecs)
}

/// g-orthonormal frame ordered by class, then eigenvalue, then summand basis.
pub fn orthonormal_frame(metric: &InvariantMetric) -> Frame {
    let space = &metric.space;
    let s = space.flag.inner_scale;
    let n = space.tangent_dim();
    let mut cols = Vec::with_capacity(n);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut class_of = Vec::with_capacity(n);
    for (ci, cb) in space.classes.iter().enumerate() {
        let (vals, vecs) = class_eigen(&space.class_matrix(ci, &metric.coeffs));
        let d = space.decomposition.submodules[cb.submodules[0]].dim();
        for (xi, v) in vals.iter().zip(&vecs) {
            for k in 0..d {
                let mut x = space.adapted_vector(ci, 0, k) * v[0];
                if v.len() == 2 {
                    x += space.adapted_vector(ci, 1, k) * v[1];
                }
                cols.push(x / (s * xi).sqrt());
                eigenvalues.push(*xi);
                class_of.push(ci);
            }
        }
    }
    Frame {
        unit_vectors: if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        },
        eigenvalues,
        class_of,
    }
}
