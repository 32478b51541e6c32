#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DVector;
use realflag::{
    metric_space_for, parse_flag, ricci_form, solve, FlagSpec, InvariantMetric, Label, MetricSpace, SolutionSet,
    SolveMode,
};

pub fn flag(s: &str) -> FlagSpec {
    parse_flag(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

pub fn space(s: &str) -> Arc<MetricSpace> {
    metric_space_for(&flag(s)).unwrap_or_else(|e| panic!("{s}: {e}"))
}

/// Solved flags, shared by every test of one binary.
pub fn solved(s: &str) -> Arc<SolutionSet> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<SolutionSet>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(set) = cache.lock().unwrap().get(s) {
        return set.clone();
    }
    let set = Arc::new(solve(&flag(s), SolveMode::Both).unwrap_or_else(|e| panic!("{s}: {e}")));
    cache.lock().unwrap().insert(s.to_string(), set.clone());
    set
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Unit tangent coordinates of an algebra basis element.
pub fn tangent_vector(space: &MetricSpace, label: Label) -> DVector<f64> {
    let dec = &space.decomposition;
    let k = space.algebra().index_of(label).expect("label in basis");
    let p = dec
        .tangent_basis
        .iter()
        .position(|&a| a == k)
        .expect("label in tangent space");
    let mut x = DVector::zeros(space.tangent_dim());
    x[p] = dec.unit[p];
    x
}

/// `Ric(x, y)` for tangent vectors in unit coordinates.
pub fn ricci_bilinear(metric: &InvariantMetric, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let ric = ricci_form(metric);
    let f = &ric.frame.unit_vectors;
    // F^{-1} = s F^T A
    let finv = f.transpose() * &metric.operator * metric.space.flag.inner_scale;
    ((&finv * x).transpose() * &ric.matrix * (&finv * y))[(0, 0)]
}

/// Coefficients scaled so the gauge coefficient is 1.
pub fn gauged(space: &MetricSpace, coeffs: &[f64]) -> Vec<f64> {
    let g = coeffs[space.gauge_index()];
    coeffs.iter().map(|c| c / g).collect()
}
