//! Ricci and scalar curvature of invariant metrics.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::invariant::{class_eigen, orthonormal_frame, CoefficientKind, Frame, InvariantMetric, MetricSpace};

/// Projected structure constants `[e_a, e_b]_m = Σ t e_c` on unit tangent
/// coordinates, as `(a, b, c, t)`.
pub fn tangent_structure(space: &MetricSpace) -> Vec<(usize, usize, usize, f64)> {
    let dec = &space.decomposition;
    let alg = space.algebra();
    let pos: std::collections::HashMap<usize, usize> =
        dec.tangent_basis.iter().enumerate().map(|(p, &k)| (k, p)).collect();
    let mut out = Vec::new();
    for (pa, &a) in dec.tangent_basis.iter().enumerate() {
        for (pb, &b) in dec.tangent_basis.iter().enumerate() {
            for &(c, t) in alg.structure(a, b) {
                if let Some(&pc) = pos.get(&c) {
                    out.push((pa, pb, pc, t * dec.unit[pc] / (dec.unit[pa] * dec.unit[pb])));
                }
            }
        }
    }
    out
}

/// `[x, y]_m` in unit tangent coordinates.
pub fn bracket_m(space: &MetricSpace, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    for (a, b, c, t) in tangent_structure(space) {
        out[c] += x[a] * y[b] * t;
    }
    out
}

/// Killing form on unit tangent coordinates.
pub fn tangent_killing(space: &MetricSpace) -> DMatrix<f64> {
    let dec = &space.decomposition;
    let k = space.algebra().killing_matrix();
    let n = dec.tangent_dim();
    DMatrix::from_fn(n, n, |i, j| {
        k[(dec.tangent_basis[i], dec.tangent_basis[j])] / (dec.unit[i] * dec.unit[j])
    })
}

/// Structure constants in the basis given by the columns of `basis`:
/// `C[(i n + j) n + k] = (dual [B_i, B_j]_m)_k`, where `dual` is the inverse of `basis`.
fn structure_in_basis(
    n: usize,
    sparse: &[(usize, usize, usize, f64)],
    basis: &DMatrix<f64>,
    dual: &DMatrix<f64>,
) -> Vec<f64> {
    let mut out = vec![0.0; n * n * n];
    let bt = basis.transpose();
    let dt = dual.transpose();
    let mut x = DMatrix::zeros(n, n);
    for i in 0..n {
        x.fill(0.0);
        for &(a, b, c, t) in sparse {
            let w = basis[(a, i)];
            if w != 0.0 {
                x[(b, c)] += w * t;
            }
        }
        let c_i = &bt * &x * &dt;
        for j in 0..n {
            for k in 0..n {
                out[(i * n + j) * n + k] = c_i[(j, k)];
            }
        }
    }
    out
}

/// `U(x, y)` for unit tangent vectors, returned in unit tangent coordinates.
pub fn u_map(metric: &InvariantMetric, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let space = &metric.space;
    let frame = orthonormal_frame(metric);
    let mut out = DVector::zeros(x.len());
    for i in 0..frame.len() {
        let w = frame.unit_vectors.column(i).clone_owned();
        let c = 0.5 * (metric.inner(&bracket_m(space, &w, x), y) + metric.inner(&bracket_m(space, &w, y), x));
        out += w * c;
    }
    out
}

#[derive(Clone, Debug)]
pub struct RicciForm {
    /// `Ric(X_i, X_j)` over the frame.
    pub matrix: DMatrix<f64>,
    pub frame: Frame,
    /// Scalar curvature from the structure-constant formula, independent of the trace.
    pub scalar: f64,
}

/// Ricci form over the metric's g-orthonormal frame.
pub fn ricci_form(metric: &InvariantMetric) -> RicciForm {
    let frame = orthonormal_frame(metric);
    let space = &metric.space;
    let n = frame.len();
    if n == 0 {
        return RicciForm {
            matrix: DMatrix::zeros(0, 0),
            frame,
            scalar: 0.0,
        };
    }
    let f = &frame.unit_vectors;
    // g-orthonormality gives F^{-1} = s F^T A
    let dual = (f.transpose() * &metric.operator) * space.flag.inner_scale;
    let c = structure_in_basis(n, &tangent_structure(space), f, &dual);
    ricci_from_structure(n, &c, &(f.transpose() * tangent_killing(space) * f), frame)
}

/// `Ric(F_i, F_j)` for an arbitrary g-orthonormal basis given as columns of `f`.
pub fn ricci_in_basis(metric: &InvariantMetric, f: &DMatrix<f64>) -> DMatrix<f64> {
    let space = &metric.space;
    let n = f.ncols();
    let dual = (f.transpose() * &metric.operator) * space.flag.inner_scale;
    let c = structure_in_basis(n, &tangent_structure(space), f, &dual);
    let frame = Frame {
        unit_vectors: f.clone(),
        eigenvalues: vec![1.0; n],
        class_of: vec![0; n],
    };
    ricci_from_structure(n, &c, &(f.transpose() * tangent_killing(space) * f), frame).matrix
}

fn ricci_from_structure(n: usize, c: &[f64], killing: &DMatrix<f64>, frame: Frame) -> RicciForm {
    // rows (i,k) for fixed p, and rows k for fixed (i,j)
    let by_p = DMatrix::from_column_slice(n * n, n, c);
    let by_k = DMatrix::from_column_slice(n, n * n, c);
    let first = by_p.transpose() * &by_p;
    let third = &by_k * by_k.transpose();
    let z: Vec<f64> = (0..n).map(|k| (0..n).map(|i| c[(k * n + i) * n + i]).sum()).collect();
    let mut ric = first * -0.5 - killing * 0.5 + third * 0.25;
    let mut z_norm2 = 0.0;
    for k in 0..n {
        if z[k] == 0.0 {
            continue;
        }
        z_norm2 += z[k] * z[k];
        for p in 0..n {
            for q in 0..n {
                let u = 0.5 * (c[(k * n + p) * n + q] + c[(k * n + q) * n + p]);
                ric[(p, q)] -= z[k] * u;
            }
        }
    }
    let brackets: f64 = c.iter().map(|x| x * x).sum();
    let scalar = -0.25 * brackets - 0.5 * killing.trace() - z_norm2;
    RicciForm {
        matrix: ric,
        frame,
        scalar,
    }
}

pub fn scalar_curvature(metric: &InvariantMetric) -> f64 {
    ricci_form(metric).scalar
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EinsteinDefect {
    pub c_best: f64,
    pub residual: f64,
    pub normalized_constant: f64,
}

pub fn einstein_defect(metric: &InvariantMetric) -> EinsteinDefect {
    defect_of(&ricci_form(metric))
}

/// Einstein defect from an already computed Ricci form.
pub fn defect_of(ric: &RicciForm) -> EinsteinDefect {
    let n = ric.matrix.nrows().max(1);
    let c_best = ric.matrix.trace() / n as f64;
    let residual = (&ric.matrix - DMatrix::identity(ric.matrix.nrows(), ric.matrix.ncols()) * c_best).norm();
    let log_det: f64 = ric.frame.eigenvalues.iter().map(|x| x.ln()).sum();
    EinsteinDefect {
        c_best,
        residual,
        normalized_constant: c_best * (log_det / n as f64).exp(),
    }
}

/// Class-block Ricci model: brackets are contracted once in an adapted
/// orthonormal basis, so each evaluation only rotates small tensors.
#[derive(Clone, Debug)]
pub struct ReducedModel {
    scale: f64,
    dims: Vec<usize>,
    copies: Vec<usize>,
    /// `r[(κ λ μ)][(p p' q q' r r')]`, copy indices with stride 2.
    r: Vec<[f64; 64]>,
    killing: Vec<[[f64; 2]; 2]>,
    /// For each coefficient: (class, copy, copy).
    slots: Vec<(usize, usize, usize)>,
}

fn r_index(p: usize, pp: usize, q: usize, qq: usize, r: usize, rr: usize) -> usize {
    ((((p * 2 + pp) * 2 + q) * 2 + qq) * 2 + r) * 2 + rr
}

impl ReducedModel {
    pub fn new(space: &MetricSpace) -> ReducedModel {
        let n = space.tangent_dim();
        let nc = space.classes.len();
        let mut dims = Vec::new();
        let mut copies = Vec::new();
        let mut offsets = Vec::new();
        let mut cols = Vec::with_capacity(n);
        for (ci, cb) in space.classes.iter().enumerate() {
            let d = space.decomposition.submodules[cb.submodules[0]].dim();
            dims.push(d);
            copies.push(cb.submodules.len());
            let mut offs = [0; 2];
            for (p, off) in offs.iter_mut().enumerate().take(cb.submodules.len()) {
                *off = cols.len();
                for k in 0..d {
                    cols.push(space.adapted_vector(ci, p, k));
                }
            }
            offsets.push(offs);
        }
        let basis = DMatrix::from_columns(&cols);
        let t = structure_in_basis(n, &tangent_structure(space), &basis, &basis.transpose());
        let idx = |c: usize, p: usize, k: usize| offsets[c][p] + k;
        let mut r = vec![[0.0; 64]; nc * nc * nc];
        for ka in 0..nc {
            for la in 0..nc {
                for mu in 0..nc {
                    let entry = &mut r[(ka * nc + la) * nc + mu];
                    for p in 0..copies[ka] {
                        for pp in 0..copies[ka] {
                            for q in 0..copies[la] {
                                for qq in 0..copies[la] {
                                    for rr0 in 0..copies[mu] {
                                        for rr1 in 0..copies[mu] {
                                            let mut s = 0.0;
                                            for k in 0..dims[ka] {
                                                for l in 0..dims[la] {
                                                    let a = (idx(ka, p, k) * n + idx(la, q, l)) * n;
                                                    let b = (idx(ka, pp, k) * n + idx(la, qq, l)) * n;
                                                    for m in 0..dims[mu] {
                                                        s += t[a + idx(mu, rr0, m)] * t[b + idx(mu, rr1, m)];
                                                    }
                                                }
                                            }
                                            entry[r_index(p, pp, q, qq, rr0, rr1)] = s;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let kill = basis.transpose() * tangent_killing(space) * &basis;
        let killing = (0..nc)
            .map(|c| {
                let mut m = [[0.0; 2]; 2];
                for p in 0..copies[c] {
                    for pp in 0..copies[c] {
                        let mut s = 0.0;
                        for k in 0..dims[c] {
                            s += kill[(idx(c, p, k), idx(c, pp, k))];
                        }
                        m[p][pp] = s / dims[c] as f64;
                    }
                }
                m
            })
            .collect();
        let slots = space
            .kinds
            .iter()
            .map(|k| match *k {
                CoefficientKind::Diagonal { submodule } => {
                    let c = space.decomposition.class_of(submodule);
                    let p = space.classes[c]
                        .submodules
                        .iter()
                        .position(|&s| s == submodule)
                        .unwrap();
                    (c, p, p)
                }
                CoefficientKind::Amplitude { first, .. } => (space.decomposition.class_of(first), 0, 1),
            })
            .collect();
        ReducedModel {
            scale: space.flag.inner_scale,
            dims,
            copies,
            r,
            killing,
            slots,
        }
    }

    pub fn classes(&self) -> usize {
        self.dims.len()
    }

    fn class_block(&self, c: usize, coeffs: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.copies[c], self.copies[c]);
        for (i, &(cl, p, q)) in self.slots.iter().enumerate() {
            if cl == c {
                m[(p, q)] = coeffs[i];
                m[(q, p)] = coeffs[i];
            }
        }
        m
    }

    /// Ricci form on each class in the adapted basis, `Ric(f_(κ p k), f_(κ p' k))`.
    pub fn ricci_blocks(&self, coeffs: &[f64]) -> Vec<[[f64; 2]; 2]> {
        let nc = self.classes();
        let s = self.scale;
        let mut xi = Vec::with_capacity(nc);
        let mut rot = Vec::with_capacity(nc);
        for c in 0..nc {
            let (vals, vecs) = class_eigen(&self.class_block(c, coeffs));
            let mut o = [[0.0; 2]; 2];
            for (a, v) in vecs.iter().enumerate() {
                for p in 0..v.len() {
                    o[p][a] = v[p];
                }
            }
            let mut x = [1.0; 2];
            x[..vals.len()].copy_from_slice(&vals);
            xi.push(x);
            rot.push(o);
        }
        let mut out = Vec::with_capacity(nc);
        for ka in 0..nc {
            let ck = self.copies[ka];
            let mut t1 = [[0.0; 2]; 2];
            let mut t3 = [[0.0; 2]; 2];
            for la in 0..nc {
                for mu in 0..nc {
                    let r = &self.r[(ka * nc + la) * nc + mu];
                    let (cl, cm) = (self.copies[la], self.copies[mu]);
                    // contract the μ and λ slots with their eigenvectors
                    let mut part = [[[[0.0; 2]; 2]; 2]; 2]; // [p][pp][β][γ]
                    for p in 0..ck {
                        for pp in 0..ck {
                            for beta in 0..cl {
                                for gamma in 0..cm {
                                    let mut acc = 0.0;
                                    for q in 0..cl {
                                        for qq in 0..cl {
                                            let wq = rot[la][q][beta] * rot[la][qq][beta];
                                            if wq == 0.0 {
                                                continue;
                                            }
                                            for r0 in 0..cm {
                                                for r1 in 0..cm {
                                                    acc += wq
                                                        * rot[mu][r0][gamma]
                                                        * rot[mu][r1][gamma]
                                                        * r[r_index(p, pp, q, qq, r0, r1)];
                                                }
                                            }
                                        }
                                    }
                                    part[p][pp][beta][gamma] = acc;
                                }
                            }
                        }
                    }
                    for a in 0..ck {
                        for aa in 0..ck {
                            for beta in 0..cl {
                                for gamma in 0..cm {
                                    let mut v = 0.0;
                                    for p in 0..ck {
                                        for pp in 0..ck {
                                            v += rot[ka][p][a] * rot[ka][pp][aa] * part[p][pp][beta][gamma];
                                        }
                                    }
                                    let (xl, xm) = (xi[la][beta], xi[mu][gamma]);
                                    t1[a][aa] += v * xm / xl;
                                    t3[a][aa] += v / (xl * xm);
                                }
                            }
                        }
                    }
                }
            }
            let d = self.dims[ka] as f64;
            let kq = &self.killing[ka];
            let mut ric = [[0.0; 2]; 2];
            for a in 0..ck {
                for aa in 0..ck {
                    let mut kt = 0.0;
                    for p in 0..ck {
                        for pp in 0..ck {
                            kt += rot[ka][p][a] * rot[ka][pp][aa] * kq[p][pp];
                        }
                    }
                    let g = (xi[ka][a] * xi[ka][aa]).sqrt();
                    let val = -0.5 * t1[a][aa] / (s * d * g) - 0.5 * kt / (s * g) + 0.25 * g * t3[a][aa] / (s * d);
                    // back to the adapted basis: f = Σ O √(s ξ) X
                    ric[a][aa] = val * (s * xi[ka][a]).sqrt() * (s * xi[ka][aa]).sqrt();
                }
            }
            let mut back = [[0.0; 2]; 2];
            for p in 0..ck {
                for pp in 0..ck {
                    let mut v = 0.0;
                    for a in 0..ck {
                        for aa in 0..ck {
                            v += rot[ka][p][a] * ric[a][aa] * rot[ka][pp][aa];
                        }
                    }
                    back[p][pp] = v;
                }
            }
            out.push(back);
        }
        out
    }

    /// Ricci coefficients aligned with the metric coefficients; the metric is
    /// Einstein with constant `c` iff these equal `c s` times the coefficients.
    pub fn ricci_coefficients(&self, coeffs: &[f64]) -> Vec<f64> {
        let blocks = self.ricci_blocks(coeffs);
        self.slots.iter().map(|&(c, p, q)| blocks[c][p][q]).collect()
    }

    /// Square Einstein system in the gauge of coefficient `gauge`.
    pub fn einstein_equations(&self, coeffs: &[f64], gauge: usize) -> Vec<f64> {
        self.einstein_system(coeffs, gauge).0
    }

    /// Einstein system together with `λ = ρ_gauge / a_gauge`.
    pub fn einstein_system(&self, coeffs: &[f64], gauge: usize) -> (Vec<f64>, f64) {
        let rho = self.ricci_coefficients(coeffs);
        let lambda = rho[gauge] / coeffs[gauge];
        let mut out = Vec::with_capacity(coeffs.len() - 1);
        for (i, &(c, p, q)) in self.slots.iter().enumerate() {
            if i == gauge {
                continue;
            }
            if p == q {
                out.push(rho[i] / coeffs[i] - lambda);
            } else {
                let (a, b) = self.pair_diagonals(c);
                out.push((rho[i] - lambda * coeffs[i]) / (coeffs[a] * coeffs[b]).sqrt());
            }
        }
        (out, lambda)
    }

    fn pair_diagonals(&self, class: usize) -> (usize, usize) {
        let find = |p| {
            self.slots
                .iter()
                .position(|&(c, a, b)| c == class && a == p && b == p)
                .unwrap()
        };
        (find(0), find(1))
    }

    /// Bracket sums `[ijk]` (g_0-normalized) and Killing constants `b_k` for
    /// diagonal metrics, in class order.
    pub fn wang_ziller(&self) -> WangZiller {
        let nc = self.classes();
        let s = self.scale;
        let mut brackets = vec![0.0; nc * nc * nc];
        for (i, b) in brackets.iter_mut().enumerate() {
            *b = self.r[i][0] / s;
        }
        WangZiller {
            dims: self.dims.clone(),
            brackets,
            b: self.killing.iter().zip(&self.dims).map(|(k, _)| -k[0][0] / s).collect(),
        }
    }
}

/// Data of the diagonal Ricci formula `r_k = b_k/(2x_k) + ...`.
#[derive(Clone, Debug)]
pub struct WangZiller {
    pub dims: Vec<usize>,
    /// `[ijk]` at index `(i n + j) n + k`.
    pub brackets: Vec<f64>,
    pub b: Vec<f64>,
}

impl WangZiller {
    pub fn bracket(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dims.len();
        self.brackets[(i * n + j) * n + k]
    }

    /// Ricci eigenvalue ratios `r_k` of the diagonal metric `x` (relative to g_0).
    pub fn ricci(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dims.len();
        (0..n)
            .map(|k| {
                let d = self.dims[k] as f64;
                let mut r = self.b[k] / (2.0 * x[k]);
                for i in 0..n {
                    for j in 0..n {
                        let t = self.bracket(i, j, k);
                        r += t * x[k] / (4.0 * d * x[i] * x[j]) - t * x[j] / (2.0 * d * x[k] * x[i]);
                    }
                }
                r
            })
            .collect()
    }

    /// Scalar curvature of the diagonal metric `x` (relative to g_0).
    pub fn scalar(&self, x: &[f64]) -> f64 {
        let n = self.dims.len();
        let mut s = 0.0;
        for k in 0..n {
            s += 0.5 * self.dims[k] as f64 * self.b[k] / x[k];
            for i in 0..n {
                for j in 0..n {
                    s -= 0.25 * self.bracket(i, j, k) * x[k] / (x[i] * x[j]);
                }
            }
        }
        s
    }
}
