//! Prototype selection: ProtoDash, ProtoGreedy, the equal-weight L2C
//! baselines, RandomW, oversample-then-truncate and criticisms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::error::{Error, Result, SolverFailure};
use crate::kernel::{KernelMatrix, MeanMap};
use crate::nnqp::{gradient_sparse, ActiveSet, SolverConfig, SupportSet, WeightVector};
use crate::par::map_indices;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Stop once `m` prototypes are selected.
    Sparsity(usize),
    /// Stop before adding a prototype whose realized objective increase is below epsilon.
    Epsilon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub termination: Termination,
    pub solver: SolverConfig,
    /// Seed for RandomW.
    pub seed: u64,
    /// Select `oversample * m` prototypes, then keep the `m` heaviest.
    pub oversample: usize,
}

impl SelectionConfig {
    pub fn sparsity(m: usize) -> Self {
        Self {
            termination: Termination::Sparsity(m),
            solver: SolverConfig::default(),
            seed: 0,
            oversample: 1,
        }
    }

    pub fn epsilon(epsilon: f64) -> Self {
        Self {
            termination: Termination::Epsilon(epsilon),
            ..Self::sparsity(0)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_oversample(mut self, factor: usize) -> Self {
        self.oversample = factor;
        self
    }

    pub fn with_solver(mut self, solver: SolverConfig) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self, n2: usize) -> Result<()> {
        self.solver.validate()?;
        match self.termination {
            Termination::Sparsity(m) if m > n2 => {
                return Err(Error::InvalidInput(format!(
                    "sparsity {m} exceeds the {n2} available source rows"
                )))
            }
            Termination::Epsilon(eps) if !(eps > 0.0 && eps.is_finite()) => {
                return Err(Error::InvalidInput(format!(
                    "epsilon must be positive, got {eps}"
                )))
            }
            _ => {}
        }
        if self.oversample == 0 {
            return Err(Error::InvalidInput("oversample factor must be >= 1".into()));
        }
        Ok(())
    }

    fn sparsity_only(&self, method: &str) -> Result<usize> {
        match self.termination {
            Termination::Sparsity(m) => Ok(m),
            Termination::Epsilon(_) => Err(Error::InvalidInput(format!(
                "{method} supports only sparsity termination"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "protodash")]
    ProtoDash,
    #[serde(rename = "protogreedy")]
    ProtoGreedy,
    #[serde(rename = "l2c_equal")]
    L2cEqual,
    #[serde(rename = "l2c_adapted")]
    L2cAdapted,
    #[serde(rename = "random_w")]
    RandomW,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::ProtoDash,
        Method::ProtoGreedy,
        Method::L2cEqual,
        Method::L2cAdapted,
        Method::RandomW,
    ];

    pub fn learns_weights(self) -> bool {
        !matches!(self, Method::L2cEqual | Method::L2cAdapted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    /// Selected indices in selection order.
    pub indices: SupportSet,
    pub weights: WeightVector,
    /// Objective after each selection step.
    pub objective_trace: Vec<f64>,
    /// Gradient of the selected coordinate at the moment it was chosen.
    pub gradient_trace: Vec<f64>,
    /// Seconds spent in each step.
    pub wall_times: Vec<f64>,
    /// Stopped early because no remaining candidate had a positive gradient.
    pub exhausted: bool,
}

impl SelectionResult {
    fn empty(method: Method, n2: usize) -> Self {
        Self {
            method,
            indices: SupportSet::empty(),
            weights: WeightVector::zeros(n2),
            objective_trace: Vec::new(),
            gradient_trace: Vec::new(),
            wall_times: Vec::new(),
            exhausted: false,
        }
    }

    fn record(&mut self, index: usize, value: f64, gradient: f64, seconds: f64) {
        let mut indices = self.indices.as_slice().to_vec();
        indices.push(index);
        self.indices = SupportSet::from_vec_unchecked(indices);
        self.objective_trace.push(value);
        self.gradient_trace.push(gradient);
        self.wall_times.push(seconds);
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Final objective value, zero for an empty selection.
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

fn check_instance(kernel: &KernelMatrix, mean: &MeanMap) -> Result<usize> {
    if kernel.size() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: kernel.size(),
            found: mean.len(),
        });
    }
    Ok(kernel.size())
}

fn abort(failure: SolverFailure, partial: SelectionResult) -> Error {
    Error::Selection {
        source: failure,
        partial: Box::new(partial),
    }
}

/// Index of the largest value among unmasked entries; ties go to the lowest index.
fn argmax_unselected(values: &[f64], selected: &[bool]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&v, &taken)) in values.iter().zip(selected).enumerate() {
        if taken {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best
}

fn sparsity_reached(termination: Termination, count: usize) -> bool {
    matches!(termination, Termination::Sparsity(m) if count >= m)
}

/// ProtoDash: add the candidate with the largest gradient `mu_j - K_j. zeta`,
/// then re-optimize the weights on the enlarged support.
pub fn proto_dash(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    let n2 = check_instance(kernel, mean)?;
    cfg.validate(n2)?;
    let tol = cfg.solver.kkt_tolerance;
    let mut result = SelectionResult::empty(Method::ProtoDash, n2);
    let mut state = ActiveSet::new(kernel, mean);
    let mut selected = vec![false; n2];
    let mut grad = mean.as_slice().to_vec();
    let mut current = 0.0;

    while !sparsity_reached(cfg.termination, result.len()) && result.len() < n2 {
        let timer = Stopwatch::start();
        let Some((j, g)) = argmax_unselected(&grad, &selected) else {
            break;
        };
        if g <= tol {
            result.exhausted = true;
            break;
        }
        let mut next = state.clone();
        next.push(j);
        if let Err(failure) = next.solve(&cfg.solver) {
            result.weights = state.to_weight_vector();
            return Err(abort(failure, result));
        }
        let value = next.objective();
        if let Termination::Epsilon(eps) = cfg.termination {
            if value - current < eps {
                break;
            }
        }
        state = next;
        selected[j] = true;
        current = value;

        let positive = state.positive();
        grad = map_indices(n2, |i| {
            if selected[i] {
                return f64::NEG_INFINITY;
            }
            let row = kernel.row(i);
            mean.get(i) - positive.iter().map(|&(s, w)| row[s] * w).sum::<f64>()
        });
        result.record(j, value, g, timer.seconds());
    }
    result.weights = state.to_weight_vector();
    Ok(result)
}

/// ProtoGreedy: add the candidate whose inclusion (with re-optimized weights)
/// increases the objective the most.
pub fn proto_greedy(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    let n2 = check_instance(kernel, mean)?;
    cfg.validate(n2)?;
    let mut result = SelectionResult::empty(Method::ProtoGreedy, n2);
    let mut state = ActiveSet::new(kernel, mean);
    let mut selected = vec![false; n2];
    let mut current = 0.0;

    while !sparsity_reached(cfg.termination, result.len()) && result.len() < n2 {
        let timer = Stopwatch::start();
        let trials = map_indices(n2, |j| {
            if selected[j] {
                return Ok(f64::NEG_INFINITY);
            }
            // A non-positive gradient leaves the optimum unchanged.
            if state.gradient(j) <= cfg.solver.kkt_tolerance {
                return Ok(0.0);
            }
            let mut trial = state.clone();
            trial.push(j);
            trial
                .solve(&cfg.solver)
                .map(|()| trial.objective() - current)
        });
        let mut gains = Vec::with_capacity(n2);
        for trial in trials {
            match trial {
                Ok(v) => gains.push(v),
                Err(failure) => {
                    result.weights = state.to_weight_vector();
                    return Err(abort(failure, result));
                }
            }
        }
        let Some((j, gain)) = argmax_unselected(&gains, &selected) else {
            break;
        };
        if gain <= 0.0 {
            result.exhausted = true;
            break;
        }
        if let Termination::Epsilon(eps) = cfg.termination {
            if gain < eps {
                break;
            }
        }
        let g = state.gradient(j);
        state.push(j);
        if let Err(failure) = state.solve(&cfg.solver) {
            return Err(abort(failure, result));
        }
        selected[j] = true;
        current = state.objective();
        result.record(j, current, g, timer.seconds());
    }
    result.weights = state.to_weight_vector();
    Ok(result)
}

/// Equal-weight greedy baseline: every selected prototype carries weight
/// `1/|S|` and the next prototype maximizes `l` at those uniform weights.
/// The trace reports `l` at the uniform weights after each step.
pub fn l2c_equal(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    uniform_greedy(kernel, mean, cfg, Method::L2cEqual)
}

/// [`l2c_equal`] applied across datasets: the mean map comes from a target
/// other than the source. The computation is identical; only the label differs.
pub fn l2c_adapted(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    uniform_greedy(kernel, mean, cfg, Method::L2cAdapted)
}

fn uniform_greedy(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    cfg: &SelectionConfig,
    method: Method,
) -> Result<SelectionResult> {
    let n2 = check_instance(kernel, mean)?;
    cfg.validate(n2)?;
    let m = cfg.sparsity_only("the equal-weight baseline")?;
    let mut result = SelectionResult::empty(method, n2);
    let mut selected = vec![false; n2];
    // sum over S of mu, sum over S x S of K, and per-row sums over S
    let mut mu_sum = 0.0;
    let mut k_sum = 0.0;
    let mut row_sums = vec![0.0; n2];

    for step in 1..=m {
        let timer = Stopwatch::start();
        let t = step as f64;
        let values: Vec<f64> = (0..n2)
            .map(|j| {
                if selected[j] {
                    return f64::NEG_INFINITY;
                }
                (mu_sum + mean.get(j)) / t
                    - (k_sum + 2.0 * row_sums[j] + kernel.get(j, j)) / (2.0 * t * t)
            })
            .collect();
        let Some((j, value)) = argmax_unselected(&values, &selected) else {
            break;
        };
        let g = if step == 1 {
            mean.get(j)
        } else {
            mean.get(j) - row_sums[j] / (t - 1.0)
        };
        selected[j] = true;
        mu_sum += mean.get(j);
        k_sum += 2.0 * row_sums[j] + kernel.get(j, j);
        for (i, r) in row_sums.iter_mut().enumerate() {
            *r += kernel.get(i, j);
        }
        result.record(j, value, g, timer.seconds());
    }
    let count = result.len();
    let weights = vec![1.0 / count.max(1) as f64; count];
    result.weights = WeightVector::new(result.indices.clone(), weights, n2)?;
    Ok(result)
}

/// RandomW: `m` uniformly drawn prototypes with optimized weights.
pub fn random_w(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    let n2 = check_instance(kernel, mean)?;
    cfg.validate(n2)?;
    let m = cfg.sparsity_only("RandomW")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let order = rand::seq::index::sample(&mut rng, n2, m).into_vec();
    weigh_in_order(kernel, mean, &order, &cfg.solver, Method::RandomW)
}

/// Adds `order` one index at a time, re-solving the weights after each.
fn weigh_in_order(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    order: &[usize],
    solver: &SolverConfig,
    method: Method,
) -> Result<SelectionResult> {
    let n2 = kernel.size();
    let mut result = SelectionResult::empty(method, n2);
    let mut state = ActiveSet::new(kernel, mean);
    for &j in order {
        let timer = Stopwatch::start();
        let g = state.gradient(j);
        state.push(j);
        if let Err(failure) = state.solve(solver) {
            return Err(abort(failure, result));
        }
        result.record(j, state.objective(), g, timer.seconds());
    }
    result.weights = state.to_weight_vector();
    Ok(result)
}

/// Keeps the `m` most heavily weighted prototypes of `result` (ties favour
/// earlier selections), preserves their selection order and re-optimizes
/// the weights. The trace is recomputed over prefixes of the kept support,
/// so its last entry is the final objective.
pub fn top_m_by_weight(
    result: &SelectionResult,
    m: usize,
    kernel: &KernelMatrix,
    mean: &MeanMap,
    solver: &SolverConfig,
) -> Result<SelectionResult> {
    check_instance(kernel, mean)?;
    if m > result.len() {
        return Err(Error::InvalidInput(format!(
            "cannot keep {m} of {} prototypes",
            result.len()
        )));
    }
    let weights: Vec<f64> = result
        .indices
        .iter()
        .map(|j| result.weights.get(j))
        .collect();
    let mut ranked: Vec<usize> = (0..result.len()).collect();
    ranked.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut kept = ranked[..m].to_vec();
    kept.sort_unstable();
    let order: Vec<usize> = kept.iter().map(|&p| result.indices.as_slice()[p]).collect();
    weigh_in_order(kernel, mean, &order, solver, result.method)
}

/// Runs `method`, applying oversample-then-truncate when `cfg.oversample > 1`.
pub fn select(
    method: Method,
    kernel: &KernelMatrix,
    mean: &MeanMap,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    let n2 = check_instance(kernel, mean)?;
    cfg.validate(n2)?;
    let run = |cfg: &SelectionConfig| match method {
        Method::ProtoDash => proto_dash(kernel, mean, cfg),
        Method::ProtoGreedy => proto_greedy(kernel, mean, cfg),
        Method::L2cEqual => l2c_equal(kernel, mean, cfg),
        Method::L2cAdapted => l2c_adapted(kernel, mean, cfg),
        Method::RandomW => random_w(kernel, mean, cfg),
    };
    if cfg.oversample == 1 {
        return run(cfg);
    }
    if !method.learns_weights() {
        return Err(Error::InvalidInput(
            "oversampling needs learned weights; equal-weight baselines cannot be truncated".into(),
        ));
    }
    let m = cfg.sparsity_only("oversampling")?;
    let wide = SelectionConfig {
        termination: Termination::Sparsity((m * cfg.oversample).min(n2)),
        ..*cfg
    };
    let oversampled = run(&wide)?;
    top_m_by_weight(
        &oversampled,
        m.min(oversampled.len()),
        kernel,
        mean,
        &cfg.solver,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticismResult {
    pub indices: Vec<usize>,
    /// Witness deviations `|mu_j - K_j. zeta|`, non-increasing.
    pub scores: Vec<f64>,
}

/// The `count` non-prototypes least well represented by the weighted
/// prototypes, ranked by witness deviation (ties to the lower index).
pub fn criticisms(
    result: &SelectionResult,
    kernel: &KernelMatrix,
    mean: &MeanMap,
    count: usize,
) -> Result<CriticismResult> {
    let n2 = check_instance(kernel, mean)?;
    let available = n2 - result.len();
    if count > available {
        return Err(Error::InvalidInput(format!(
            "requested {count} criticisms but only {available} non-prototypes exist"
        )));
    }
    let support = result.weights.support().as_slice();
    let weights = result.weights.weights();
    let mut prototype = vec![false; n2];
    for j in result.indices.iter() {
        prototype[j] = true;
    }
    let mut scored: Vec<(usize, f64)> = (0..n2)
        .filter(|&j| !prototype[j])
        .map(|j| (j, gradient_sparse(kernel, mean, support, weights, j).abs()))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(count);
    Ok(CriticismResult {
        indices: scored.iter().map(|s| s.0).collect(),
        scores: scored.iter().map(|s| s.1).collect(),
    })
}
