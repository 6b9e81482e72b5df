//! Non-negative maximization of `l(w) = w'mu - 0.5 w'Kw` on a support set.
//!
//! The solver is a Lawson–Hanson active-set method applied to the Gram
//! (normal-equation) form of the equivalent NNLS problem: the passive set
//! `P` holds the strictly positive coordinates, `K_PP w_P = mu_P` is solved
//! through a Cholesky factor that grows one row at a time, and a step-length
//! rule keeps every iterate feasible. Each accepted step increases `l`, so a
//! warm start is never worsened.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SolverFailure};
use crate::kernel::{KernelMatrix, MeanMap};

/// Ordered set of distinct source indices. Iteration follows insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    pub fn new(indices: Vec<usize>, n2: usize) -> Result<Self> {
        let mut seen = vec![false; n2];
        for &j in &indices {
            if j >= n2 {
                return Err(Error::InvalidInput(format!(
                    "support index {j} out of range for {n2} source rows"
                )));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidInput(format!("duplicate support index {j}")));
            }
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.contains(&j)
    }

    pub(crate) fn from_vec_unchecked(indices: Vec<usize>) -> Self {
        Self { indices }
    }
}

/// Non-negative weights over a support set inside an `n2`-dimensional space.
/// Coordinates outside the support are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    dim: usize,
    support: SupportSet,
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            support: SupportSet::empty(),
            weights: Vec::new(),
        }
    }

    pub fn new(support: SupportSet, weights: Vec<f64>, dim: usize) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                found: weights.len(),
            });
        }
        if let Some(j) = support.iter().find(|&j| j >= dim) {
            return Err(Error::InvalidInput(format!(
                "support index {j} out of range for dimension {dim}"
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "weights must be finite and non-negative, got {w}"
            )));
        }
        Ok(Self {
            dim,
            support,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    /// Weights aligned with [`Self::support`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, j: usize) -> f64 {
        self.support
            .iter()
            .position(|i| i == j)
            .map_or(0.0, |pos| self.weights[pos])
    }

    /// `(index, weight)` pairs with strictly positive weight.
    pub fn positive(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support
            .iter()
            .zip(self.weights.iter().copied())
            .filter(|&(_, w)| w > 0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, w) in self.support.iter().zip(&self.weights) {
            out[j] = *w;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kkt_tolerance: f64,
    /// Cap on active-set iterations; `None` means `10 * |L| + 100`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-8,
            max_iterations: None,
        }
    }
}

impl SolverConfig {
    pub fn iteration_limit(&self, support_len: usize) -> usize {
        self.max_iterations.unwrap_or(10 * support_len + 100)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tolerance > 0.0 && self.kkt_tolerance.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kkt_tolerance must be positive, got {}",
                self.kkt_tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidInput(
                "max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn check_dims(dim: usize, kernel: &KernelMatrix, mean: &MeanMap) -> Result<()> {
    if kernel.size() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: kernel.size(),
            found: mean.len(),
        });
    }
    if dim != kernel.size() {
        return Err(Error::DimensionMismatch {
            expected: kernel.size(),
            found: dim,
        });
    }
    Ok(())
}

pub(crate) fn objective_sparse(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    indices: &[usize],
    weights: &[f64],
) -> f64 {
    let mut linear = 0.0;
    let mut quadratic = 0.0;
    for (&i, &wi) in indices.iter().zip(weights) {
        if wi == 0.0 {
            continue;
        }
        linear += wi * mean.get(i);
        let row = kernel.row(i);
        let inner: f64 = indices
            .iter()
            .zip(weights)
            .map(|(&j, &wj)| row[j] * wj)
            .sum();
        quadratic += wi * inner;
    }
    linear - 0.5 * quadratic
}

#[inline]
pub(crate) fn gradient_sparse(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    indices: &[usize],
    weights: &[f64],
    j: usize,
) -> f64 {
    let row = kernel.row(j);
    let kw: f64 = indices.iter().zip(weights).map(|(&i, &w)| row[i] * w).sum();
    mean.get(j) - kw
}

/// `w'mu - 0.5 w'Kw` over the support of `w`.
pub fn objective(w: &WeightVector, kernel: &KernelMatrix, mean: &MeanMap) -> Result<f64> {
    check_dims(w.dim, kernel, mean)?;
    Ok(objective_sparse(
        kernel,
        mean,
        w.support.as_slice(),
        &w.weights,
    ))
}

/// Full gradient `mu - Kw`, length `n2`.
pub fn gradient(w: &WeightVector, kernel: &KernelMatrix, mean: &MeanMap) -> Result<Vec<f64>> {
    check_dims(w.dim, kernel, mean)?;
    Ok((0..kernel.size())
        .map(|j| gradient_sparse(kernel, mean, w.support.as_slice(), &w.weights, j))
        .collect())
}

/// Largest violation of the KKT conditions of the problem restricted to `support`.
pub fn kkt_residual(
    w: &WeightVector,
    kernel: &KernelMatrix,
    mean: &MeanMap,
    support: &SupportSet,
) -> Result<f64> {
    check_dims(w.dim, kernel, mean)?;
    if let Some((j, _)) = w.positive().find(|&(j, _)| !support.contains(j)) {
        return Err(Error::InvalidInput(format!(
            "weight index {j} lies outside the support set"
        )));
    }
    let mut residual = 0.0f64;
    for j in support.iter() {
        let g = gradient_sparse(kernel, mean, w.support.as_slice(), &w.weights, j);
        let wj = w.get(j);
        let violation = if wj > 0.0 { g.abs() } else { g.max(0.0) };
        residual = residual.max(violation);
    }
    let min_weight = w.weights.iter().copied().fold(0.0, f64::min);
    Ok(residual + (-min_weight).max(0.0))
}

/// Computes `zeta^(L)`, the maximizer of `l` over non-negative weights
/// supported on `support`, from a cold start.
pub fn solve_restricted(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    support: &SupportSet,
    cfg: &SolverConfig,
) -> Result<WeightVector> {
    solve_restricted_from(
        kernel,
        mean,
        support,
        &WeightVector::zeros(kernel.size()),
        cfg,
    )
}

/// Like [`solve_restricted`], starting from a feasible `warm` iterate whose
/// positive coordinates lie in `support`.
pub fn solve_restricted_from(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    support: &SupportSet,
    warm: &WeightVector,
    cfg: &SolverConfig,
) -> Result<WeightVector> {
    check_dims(warm.dim, kernel, mean)?;
    cfg.validate()?;
    if let Some(j) = support.iter().find(|&j| j >= kernel.size()) {
        return Err(Error::InvalidInput(format!(
            "support index {j} out of range"
        )));
    }
    let mut start = Vec::with_capacity(support.len());
    for j in support.iter() {
        start.push(warm.get(j));
    }
    if let Some((j, _)) = warm.positive().find(|&(j, _)| !support.contains(j)) {
        return Err(Error::InvalidInput(format!(
            "warm start has weight at index {j} outside the support set"
        )));
    }
    let mut state = ActiveSet::with_weights(kernel, mean, support.as_slice(), &start);
    state.solve(cfg)?;
    Ok(state.to_weight_vector())
}

/// Packed lower-triangular Cholesky factor that grows by bordering.
#[derive(Debug, Clone, Default)]
struct Cholesky {
    dim: usize,
    packed: Vec<f64>,
}

impl Cholesky {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.packed[start..start + i + 1]
    }

    /// Appends a row/column with off-diagonal `cross` and diagonal `diag`.
    /// Returns `false` (leaving the factor untouched) if the bordered matrix
    /// is not numerically positive definite.
    fn push(&mut self, cross: &[f64], diag: f64) -> bool {
        debug_assert_eq!(cross.len(), self.dim);
        let mut x = cross.to_vec();
        for i in 0..self.dim {
            let row = self.row(i);
            let partial: f64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - partial) / row[i];
        }
        let pivot = diag - x.iter().map(|v| v * v).sum::<f64>();
        if !pivot.is_finite() || pivot <= diag.abs() * f64::EPSILON {
            return false;
        }
        self.packed.extend_from_slice(&x);
        self.packed.push(pivot.sqrt());
        self.dim += 1;
        true
    }

    fn pop(&mut self) {
        debug_assert!(self.dim > 0);
        self.dim -= 1;
        self.packed.truncate(self.dim * (self.dim + 1) / 2);
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let row = self.row(i);
            let partial: f64 = row[..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - partial) / row[i];
        }
        for i in (0..n).rev() {
            let tail: f64 = ((i + 1)..n).map(|k| self.row(k)[i] * y[k]).sum();
            y[i] = (y[i] - tail) / self.row(i)[i];
        }
        y
    }
}

/// Incremental solver state shared by the selectors.
#[derive(Debug, Clone)]
pub(crate) struct ActiveSet<'a> {
    kernel: &'a KernelMatrix,
    mean: &'a MeanMap,
    support: Vec<usize>,
    weights: Vec<f64>,
    /// Positions into `support` of the positive coordinates, in factor order.
    passive: Vec<usize>,
    factor: Cholesky,
    /// `weights` are already optimal on the passive set.
    settled: bool,
}

impl<'a> ActiveSet<'a> {
    pub(crate) fn new(kernel: &'a KernelMatrix, mean: &'a MeanMap) -> Self {
        Self {
            kernel,
            mean,
            support: Vec::new(),
            weights: Vec::new(),
            passive: Vec::new(),
            factor: Cholesky::default(),
            settled: true,
        }
    }

    fn with_weights(
        kernel: &'a KernelMatrix,
        mean: &'a MeanMap,
        support: &[usize],
        weights: &[f64],
    ) -> Self {
        let mut state = Self::new(kernel, mean);
        state.support = support.to_vec();
        state.weights = weights.to_vec();
        state.passive = (0..support.len()).filter(|&p| weights[p] > 0.0).collect();
        state.settled = state.passive.is_empty();
        state.rebuild_factor();
        state
    }

    /// Adds `j` to the support with zero weight.
    pub(crate) fn push(&mut self, j: usize) {
        debug_assert!(!self.support.contains(&j));
        self.support.push(j);
        self.weights.push(0.0);
    }

    pub(crate) fn objective(&self) -> f64 {
        objective_sparse(self.kernel, self.mean, &self.support, &self.weights)
    }

    /// Gradient coordinate `j` at the current weights.
    pub(crate) fn gradient(&self, j: usize) -> f64 {
        let row = self.kernel.row(j);
        let kw: f64 = self
            .passive
            .iter()
            .map(|&p| row[self.support[p]] * self.weights[p])
            .sum();
        self.mean.get(j) - kw
    }

    /// `(index, weight)` pairs of the positive coordinates.
    pub(crate) fn positive(&self) -> Vec<(usize, f64)> {
        self.passive
            .iter()
            .map(|&p| (self.support[p], self.weights[p]))
            .collect()
    }

    pub(crate) fn to_weight_vector(&self) -> WeightVector {
        WeightVector {
            dim: self.kernel.size(),
            support: SupportSet::from_vec_unchecked(self.support.clone()),
            weights: self.weights.clone(),
        }
    }

    fn kkt_residual(&self) -> f64 {
        let mut in_passive = vec![false; self.support.len()];
        for &p in &self.passive {
            in_passive[p] = true;
        }
        self.support
            .iter()
            .enumerate()
            .map(|(p, &j)| {
                let g = self.gradient(j);
                if in_passive[p] {
                    g.abs()
                } else {
                    g.max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    fn rebuild_factor(&mut self) {
        let mut factor = Cholesky::default();
        let mut kept = Vec::with_capacity(self.passive.len());
        for &p in &self.passive {
            let j = self.support[p];
            let row = self.kernel.row(j);
            let cross: Vec<f64> = kept.iter().map(|&q: &usize| row[self.support[q]]).collect();
            if factor.push(&cross, row[j]) {
                kept.push(p);
            } else {
                // Numerically dependent column: drop it from the passive set.
                self.weights[p] = 0.0;
                self.settled = false;
            }
        }
        self.passive = kept;
        self.factor = factor;
    }

    /// Solves `K_PP s = mu_P` with one or two rounds of iterative refinement.
    fn passive_solution(&self, tol: f64) -> Vec<f64> {
        let rhs: Vec<f64> = self
            .passive
            .iter()
            .map(|&p| self.mean.get(self.support[p]))
            .collect();
        let mut sol = self.factor.solve(&rhs);
        for _ in 0..2 {
            let residual: Vec<f64> = self
                .passive
                .iter()
                .zip(&rhs)
                .map(|(&p, b)| {
                    let row = self.kernel.row(self.support[p]);
                    let ks: f64 = self
                        .passive
                        .iter()
                        .zip(&sol)
                        .map(|(&q, s)| row[self.support[q]] * s)
                        .sum();
                    b - ks
                })
                .collect();
            if residual.iter().all(|r| r.abs() <= 1e-3 * tol) {
                break;
            }
            let correction = self.factor.solve(&residual);
            sol.iter_mut().zip(correction).for_each(|(s, c)| *s += c);
        }
        sol
    }

    /// Inner loop: moves feasibly towards the unconstrained optimum on the
    /// passive set, dropping coordinates that hit zero, until it is reached.
    fn settle(
        &mut self,
        mut sol: Vec<f64>,
        tol: f64,
        iterations: &mut usize,
        limit: usize,
    ) -> std::result::Result<(), SolverFailure> {
        loop {
            if sol.iter().all(|&s| s > 0.0) {
                for (&p, s) in self.passive.iter().zip(sol) {
                    self.weights[p] = s;
                }
                self.settled = true;
                return Ok(());
            }
            *iterations += 1;
            if *iterations > limit {
                return Err(self.failure(*iterations));
            }
            let mut step = 1.0;
            let mut blocking = None;
            for (a, (&p, &s)) in self.passive.iter().zip(&sol).enumerate() {
                if s <= 0.0 {
                    let w = self.weights[p];
                    let t = w / (w - s);
                    if t < step || blocking.is_none() {
                        step = t.min(step);
                        blocking = Some(a);
                    }
                }
            }
            for (&p, &s) in self.passive.iter().zip(&sol) {
                let w = self.weights[p];
                self.weights[p] = w + step * (s - w);
            }
            if let Some(a) = blocking {
                let p = self.passive[a];
                self.weights[p] = 0.0;
            }
            for &p in &self.passive {
                if self.weights[p] <= 0.0 {
                    self.weights[p] = 0.0;
                }
            }
            self.passive.retain(|&p| self.weights[p] > 0.0);
            self.rebuild_factor();
            sol = self.passive_solution(tol);
        }
    }

    fn failure(&self, iterations: usize) -> SolverFailure {
        SolverFailure {
            best: self.to_weight_vector(),
            residual: self.kkt_residual(),
            iterations,
        }
    }

    /// Runs the active-set iteration to a KKT point within `cfg.kkt_tolerance`.
    pub(crate) fn solve(&mut self, cfg: &SolverConfig) -> std::result::Result<(), SolverFailure> {
        let tol = cfg.kkt_tolerance;
        let limit = cfg.iteration_limit(self.support.len());
        let mut iterations = 0;
        if !self.settled {
            let sol = self.passive_solution(tol);
            self.settle(sol, tol, &mut iterations, limit)?;
        }
        // Positions whose entry failed numerically; cleared whenever weights move.
        let mut blocked = vec![false; self.support.len()];
        loop {
            let mut in_passive = vec![false; self.support.len()];
            for &p in &self.passive {
                in_passive[p] = true;
            }
            let mut best: Option<(usize, f64)> = None;
            for (p, &j) in self.support.iter().enumerate() {
                if in_passive[p] || blocked[p] {
                    continue;
                }
                let g = self.gradient(j);
                if g <= tol {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((q, gq)) => g > gq || (g == gq && j < self.support[q]),
                };
                if better {
                    best = Some((p, g));
                }
            }
            let Some((p, _)) = best else {
                break;
            };
            iterations += 1;
            if iterations > limit {
                return Err(self.failure(iterations));
            }
            let j = self.support[p];
            let row = self.kernel.row(j);
            let cross: Vec<f64> = self.passive.iter().map(|&q| row[self.support[q]]).collect();
            if !self.factor.push(&cross, row[j]) {
                blocked[p] = true;
                continue;
            }
            self.passive.push(p);
            let sol = self.passive_solution(tol);
            if sol.last().is_none_or(|&s| s <= 0.0) {
                self.passive.pop();
                self.factor.pop();
                blocked[p] = true;
                continue;
            }
            self.settle(sol, tol, &mut iterations, limit)?;
            blocked.iter_mut().for_each(|b| *b = false);
        }
        let residual = self.kkt_residual();
        if residual > tol {
            return Err(SolverFailure {
                best: self.to_weight_vector(),
                residual,
                iterations,
            });
        }
        Ok(())
    }
}
