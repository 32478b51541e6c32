//! Bivariate polynomial elimination for diagonal three-summand Einstein systems.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix};

use crate::curvature::WangZiller;

/// Sparse polynomial in `(x, y)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly2 {
    terms: BTreeMap<(u32, u32), f64>,
}

impl Poly2 {
    pub fn from_terms(terms: impl IntoIterator<Item = ((u32, u32), f64)>) -> Poly2 {
        let mut p = Poly2::default();
        for (e, c) in terms {
            *p.terms.entry(e).or_insert(0.0) += c;
        }
        p
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), c)| c * x.powi(i as i32) * y.powi(j as i32))
            .sum()
    }

    fn eval_grad(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let mut v = 0.0;
        let mut dx = 0.0;
        let mut dy = 0.0;
        for (&(i, j), c) in &self.terms {
            let (i, j) = (i as i32, j as i32);
            v += c * x.powi(i) * y.powi(j);
            if i > 0 {
                dx += c * i as f64 * x.powi(i - 1) * y.powi(j);
            }
            if j > 0 {
                dy += c * j as f64 * x.powi(i) * y.powi(j - 1);
            }
        }
        (v, dx, dy)
    }

    pub fn degree_x(&self) -> usize {
        self.terms.keys().map(|k| k.0 as usize).max().unwrap_or(0)
    }

    pub fn degree_y(&self) -> usize {
        self.terms.keys().map(|k| k.1 as usize).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Drops relatively negligible terms and divides out the largest monomial factor.
    fn cleaned(&self) -> Poly2 {
        let top = self.terms.values().fold(0.0f64, |m, c| m.max(c.abs()));
        let kept: BTreeMap<_, _> = self
            .terms
            .iter()
            .filter(|(_, c)| c.abs() > 1e-12 * top)
            .map(|(k, c)| (*k, *c))
            .collect();
        let mx = kept.keys().map(|k| k.0).min().unwrap_or(0);
        let my = kept.keys().map(|k| k.1).min().unwrap_or(0);
        Poly2 {
            terms: kept.into_iter().map(|((i, j), c)| ((i - mx, j - my), c)).collect(),
        }
    }

    /// Coefficients in `y` (ascending) evaluated at a complex `x`.
    fn in_y(&self, x: Complex<f64>) -> Vec<Complex<f64>> {
        let mut out = vec![Complex::new(0.0, 0.0); self.degree_y() + 1];
        for (&(i, j), &c) in &self.terms {
            out[j as usize] += x.powu(i) * c;
        }
        out
    }
}

/// Numerators `r_i - r_j` of the diagonal Einstein system after clearing
/// `(x_1 x_2 x_3)^2`, in the gauge `x_3 = 1`.
pub fn einstein_polynomials(wz: &WangZiller) -> Option<(Poly2, Poly2)> {
    if wz.dims.len() != 3 {
        return None;
    }
    let ricci_numerator = |k: usize| {
        let d = wz.dims[k] as f64;
        let mut terms: Vec<([i32; 3], f64)> = Vec::new();
        let mono = |pos: &[(usize, i32)]| {
            let mut e = [2; 3];
            for &(v, p) in pos {
                e[v] += p;
            }
            e
        };
        terms.push((mono(&[(k, -1)]), wz.b[k] / 2.0));
        for i in 0..3 {
            for j in 0..3 {
                let t = wz.bracket(i, j, k);
                if t == 0.0 {
                    continue;
                }
                terms.push((mono(&[(k, 1), (i, -1), (j, -1)]), t / (4.0 * d)));
                terms.push((mono(&[(j, 1), (k, -1), (i, -1)]), -t / (2.0 * d)));
            }
        }
        terms
    };
    let to_xy = |terms: Vec<([i32; 3], f64)>| {
        Poly2::from_terms(terms.into_iter().map(|(e, c)| {
            debug_assert!(e[0] >= 0 && e[1] >= 0);
            ((e[0] as u32, e[1] as u32), c)
        }))
    };
    let p: Vec<Vec<([i32; 3], f64)>> = (0..3).map(ricci_numerator).collect();
    let diff = |a: usize, b: usize| {
        let mut t = p[a].clone();
        t.extend(p[b].iter().map(|&(e, c)| (e, -c)));
        to_xy(t).cleaned()
    };
    Some((diff(0, 1), diff(1, 2)))
}

fn sylvester_det(f: &[Complex<f64>], g: &[Complex<f64>]) -> Complex<f64> {
    let (m, n) = (f.len() - 1, g.len() - 1);
    let size = m + n;
    if size == 0 {
        return Complex::new(1.0, 0.0);
    }
    let mut s = DMatrix::from_element(size, size, Complex::new(0.0, 0.0));
    for r in 0..n {
        for (k, c) in f.iter().rev().enumerate() {
            s[(r, r + k)] = *c;
        }
    }
    for r in 0..m {
        for (k, c) in g.iter().rev().enumerate() {
            s[(n + r, r + k)] = *c;
        }
    }
    s.determinant()
}

/// Resultant of `f` and `g` with respect to `y`, as ascending coefficients in `x`,
/// by evaluation at roots of unity and an inverse DFT.
pub fn resultant_y(f: &Poly2, g: &Poly2) -> Vec<f64> {
    let bound = g.degree_y() * f.degree_x() + f.degree_y() * g.degree_x();
    let n = bound + 1;
    let samples: Vec<Complex<f64>> = (0..n)
        .map(|k| {
            let x = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            sylvester_det(&f.in_y(x), &g.in_y(x))
        })
        .collect();
    (0..n)
        .map(|j| {
            let mut acc = Complex::new(0.0, 0.0);
            for (k, s) in samples.iter().enumerate() {
                let w = Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64);
                acc += s * w;
            }
            acc.re / n as f64
        })
        .collect()
}

/// Real roots of an ascending coefficient list via the companion matrix.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let top = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if top == 0.0 {
        return Vec::new();
    }
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.last().is_some_and(|x| x.abs() <= 1e-10 * top) {
        c.pop();
    }
    // zero roots carry no information for positive solutions
    while c.first().is_some_and(|x| x.abs() <= 1e-14 * top) {
        c.remove(0);
    }
    let deg = c.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let mut comp = DMatrix::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    comp.complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-6 * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect()
}

fn polish(f: &Poly2, g: &Poly2, mut x: f64, mut y: f64) -> Option<(f64, f64)> {
    for _ in 0..50 {
        let (fv, fx, fy) = f.eval_grad(x, y);
        let (gv, gx, gy) = g.eval_grad(x, y);
        let det = fx * gy - fy * gx;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (fv * gy - fy * gv) / det;
        let dy = (fx * gv - fv * gx) / det;
        x -= dx;
        y -= dy;
        if dx.abs() <= 1e-15 * x.abs() && dy.abs() <= 1e-15 * y.abs() {
            break;
        }
    }
    let scale = |p: &Poly2| p.terms.values().fold(0.0f64, |m, c| m.max(c.abs()));
    let ok = f.eval(x, y).abs() <= 1e-9 * scale(f) * (1.0 + x.abs() + y.abs()).powi(6)
        && g.eval(x, y).abs() <= 1e-9 * scale(g) * (1.0 + x.abs() + y.abs()).powi(6);
    let positive = |v: f64| (1e-4..=1e4).contains(&v);
    (ok && positive(x) && positive(y)).then_some((x, y))
}

/// Solutions `(x_1, x_2, 1)` with `x_i` in `[1e-4, 1e4]` of the diagonal Einstein system by elimination.
pub fn positive_solutions(wz: &WangZiller) -> Option<Vec<[f64; 3]>> {
    let (f, g) = einstein_polynomials(wz)?;
    if f.is_zero() || g.is_zero() {
        return None;
    }
    let res = resultant_y(&f, &g);
    let top = res.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if top < 1e-9 {
        return None;
    }
    let mut out: Vec<[f64; 3]> = Vec::new();
    for x in real_roots(&res).into_iter().filter(|&x| x > 0.0) {
        let fy: Vec<f64> = f.in_y(Complex::new(x, 0.0)).iter().map(|c| c.re).collect();
        let mut ys = real_roots(&fy);
        let gy: Vec<f64> = g.in_y(Complex::new(x, 0.0)).iter().map(|c| c.re).collect();
        ys.extend(real_roots(&gy));
        for y in ys.into_iter().filter(|&y| y > 0.0) {
            if let Some((px, py)) = polish(&f, &g, x, y) {
                let dup = out
                    .iter()
                    .any(|s| (s[0] - px).abs() <= 1e-8 * px.max(1.0) && (s[1] - py).abs() <= 1e-8 * py.max(1.0));
                if !dup {
                    out.push([px, py, 1.0]);
                }
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(out)
}
