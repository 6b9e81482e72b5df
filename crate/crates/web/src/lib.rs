//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The page never ships data across the boundary: every export regenerates
//! the same seeded two-dimensional scene and returns its answer as JSON.

use protoselect::kernel::{kernel_matrix, mean_map, median_bandwidth};
use protoselect::selectors::{criticisms, select};
use protoselect::synthetic::mixture;
use protoselect::{Dataset, KernelMatrix, KernelSpec, MeanMap, Method, SelectionConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;
use wasm_bindgen::prelude::*;

pub const SOURCE_ROWS: usize = 150;
pub const TARGET_ROWS: usize = 100;
const SPREAD: f64 = 1.0;

fn centers() -> Vec<Vec<f64>> {
    vec![vec![-3.0, -1.5], vec![3.0, -1.5], vec![0.0, 3.5]]
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Core(#[from] protoselect::Error),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("skew must lie in [0, 1], got {0}")]
    Skew(f64),
}

type Result<T> = std::result::Result<T, DemoError>;

#[derive(Debug, Clone, Serialize)]
pub struct Scene {
    pub source: Vec<[f64; 2]>,
    pub source_labels: Vec<usize>,
    pub target: Vec<[f64; 2]>,
    pub target_labels: Vec<usize>,
    /// Median pairwise distance over the source rows.
    pub median_sigma: f64,
}

/// Source rows split evenly over three clusters; a `skew` share of the
/// target comes from the first cluster and the rest is split between the others.
pub fn scene(seed: u64, skew: f64) -> Result<Scene> {
    if !(0.0..=1.0).contains(&skew) {
        return Err(DemoError::Skew(skew));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let even = SOURCE_ROWS / 3;
    let (source, source_labels) = mixture(
        &mut rng,
        &centers(),
        SPREAD,
        &[even, even, SOURCE_ROWS - 2 * even],
    )?;
    let first = (skew * TARGET_ROWS as f64).round() as usize;
    let rest = TARGET_ROWS - first;
    let (target, target_labels) = mixture(
        &mut rng,
        &centers(),
        SPREAD,
        &[first, rest / 2, rest - rest / 2],
    )?;
    Ok(Scene {
        median_sigma: median_bandwidth(&source)?,
        source: points(&source),
        source_labels,
        target: points(&target),
        target_labels,
    })
}

fn points(data: &Dataset) -> Vec<[f64; 2]> {
    data.iter_rows().map(|r| [r[0], r[1]]).collect()
}

fn instance(scene: &Scene, sigma: f64) -> Result<(KernelMatrix, MeanMap, f64)> {
    let sigma = if sigma > 0.0 {
        sigma
    } else {
        scene.median_sigma
    };
    let spec = KernelSpec::gaussian(sigma)?;
    let source = Dataset::from_rows(&scene.source)?;
    let target = Dataset::from_rows(&scene.target)?;
    Ok((
        kernel_matrix(&source, &spec)?,
        mean_map(&target, &source, &spec)?,
        sigma,
    ))
}

pub fn parse_method(name: &str) -> Result<Method> {
    match name {
        "protodash" => Ok(Method::ProtoDash),
        "protogreedy" => Ok(Method::ProtoGreedy),
        "l2c_equal" => Ok(Method::L2cEqual),
        "l2c_adapted" => Ok(Method::L2cAdapted),
        "random_w" => Ok(Method::RandomW),
        other => Err(DemoError::UnknownMethod(other.to_string())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub sigma: f64,
    pub indices: Vec<usize>,
    /// Weight of each selected index, in selection order.
    pub weights: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub criticisms: Vec<usize>,
}

/// Prototypes and criticisms for one method. A non-positive `sigma` means
/// the median bandwidth.
pub fn prototypes(
    seed: u64,
    skew: f64,
    method: Method,
    m: usize,
    sigma: f64,
    critics: usize,
) -> Result<Selection> {
    let scene = scene(seed, skew)?;
    let (kernel, mean, sigma) = instance(&scene, sigma)?;
    let result = select(
        method,
        &kernel,
        &mean,
        &SelectionConfig::sparsity(m).with_seed(seed),
    )?;
    let critics = critics.min(kernel.size() - result.len());
    let found = criticisms(&result, &kernel, &mean, critics)?;
    Ok(Selection {
        sigma,
        weights: result
            .indices
            .iter()
            .map(|j| result.weights.get(j))
            .collect(),
        indices: result.indices.as_slice().to_vec(),
        objective_trace: result.objective_trace,
        criticisms: found.indices,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub method: Method,
    pub objective_trace: Vec<f64>,
}

/// Objective traces of every method on the same scene.
pub fn compare(seed: u64, skew: f64, m: usize, sigma: f64) -> Result<Vec<Trace>> {
    let scene = scene(seed, skew)?;
    let (kernel, mean, _) = instance(&scene, sigma)?;
    let cfg = SelectionConfig::sparsity(m).with_seed(seed);
    Method::ALL
        .into_iter()
        .map(|method| {
            let r = select(method, &kernel, &mean, &cfg)?;
            Ok(Trace {
                method,
                objective_trace: r.objective_trace,
            })
        })
        .collect()
}

fn to_js<T: Serialize>(value: Result<T>) -> std::result::Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = scene)]
pub fn scene_json(seed: u32, skew: f64) -> std::result::Result<String, JsError> {
    to_js(scene(seed.into(), skew))
}

#[wasm_bindgen(js_name = prototypes)]
pub fn prototypes_json(
    seed: u32,
    skew: f64,
    method: &str,
    m: usize,
    sigma: f64,
    critics: usize,
) -> std::result::Result<String, JsError> {
    to_js(
        parse_method(method)
            .and_then(|method| prototypes(seed.into(), skew, method, m, sigma, critics)),
    )
}

#[wasm_bindgen(js_name = compare)]
pub fn compare_json(
    seed: u32,
    skew: f64,
    m: usize,
    sigma: f64,
) -> std::result::Result<String, JsError> {
    to_js(compare(seed.into(), skew, m, sigma))
}
