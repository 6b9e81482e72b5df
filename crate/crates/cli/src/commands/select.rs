use std::path::Path;
use std::time::Instant;

use protoselect::kernel::{kernel_eval, kernel_matrix, mean_map};
use protoselect::nnqp::objective;
use protoselect::selectors::{criticisms, select, CriticismResult};
use protoselect::{
    Dataset, Error, KernelSpec, Method, SelectionConfig, SelectionResult, SolverConfig, Termination,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{emit, fixed_kernel, load_all, path_strings, to_json};
use crate::args::{CriticizeArgs, KernelArg, SelectArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::{BandwidthRule, RunManifest, Timings, SCHEMA_VERSION};

/// Held-out score of one candidate bandwidth: the share of the held-out
/// mean embedding's squared norm captured by the prototypes, `2 l / |mu|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub sigma: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectOutput {
    pub schema_version: u32,
    pub method: Method,
    /// 0-based source rows in selection order.
    pub indices: Vec<usize>,
    /// Weight of each entry of `indices`.
    pub weights: Vec<f64>,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub gradient_trace: Vec<f64>,
    pub exhausted: bool,
    /// Per-step wall time, only with `--timings`.
    pub step_seconds: Option<Vec<f64>>,
    /// Set when the solver failed; the fields above then hold the partial result.
    pub error: Option<String>,
    pub cv: Option<Vec<CvScore>>,
    pub criticisms: Option<CriticismResult>,
    pub manifest: RunManifest,
}

impl SelectOutput {
    fn new(result: &SelectionResult, manifest: RunManifest, timings: bool) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            method: result.method,
            indices: result.indices.as_slice().to_vec(),
            weights: result
                .indices
                .iter()
                .map(|j| result.weights.get(j))
                .collect(),
            objective: result.objective(),
            objective_trace: result.objective_trace.clone(),
            gradient_trace: result.gradient_trace.clone(),
            exhausted: result.exhausted,
            step_seconds: timings.then(|| result.wall_times.clone()),
            error: None,
            cv: None,
            criticisms: None,
            manifest,
        }
    }
}

fn selection_config(args: &SelectArgs) -> SelectionConfig {
    let termination = match (args.m, args.epsilon) {
        (Some(m), _) => Termination::Sparsity(m),
        (None, Some(eps)) => Termination::Epsilon(eps),
        (None, None) => Termination::Sparsity(0),
    };
    SelectionConfig {
        termination,
        solver: SolverConfig {
            kkt_tolerance: args.kkt_tolerance,
            max_iterations: args.max_iterations,
        },
        seed: args.seed,
        oversample: args.oversample,
    }
}

fn rows_of(data: &Dataset, rows: &[usize]) -> protoselect::Result<Dataset> {
    let picked: Vec<&[f64]> = rows.iter().map(|&i| data.row(i)).collect();
    Dataset::from_rows(&picked)
}

fn cross_validate(
    target: &Dataset,
    source: &Dataset,
    candidates: &[f64],
    jitter: f64,
    method: Method,
    cfg: &SelectionConfig,
) -> CliResult<(KernelSpec, Vec<CvScore>)> {
    if target.rows() < 2 {
        return Err(CliError::Usage(
            "--cv needs at least two target rows".into(),
        ));
    }
    let mut order: Vec<usize> = (0..target.rows()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let (fit_rows, held_rows) = order.split_at(target.rows().div_ceil(2));
    let fit = rows_of(target, fit_rows)?;
    let held = rows_of(target, held_rows)?;

    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(KernelSpec, f64)> = None;
    for &sigma in candidates {
        let spec = KernelSpec::gaussian(sigma)?.with_jitter(jitter)?;
        let kernel = kernel_matrix(source, &spec)?;
        let result = select(method, &kernel, &mean_map(&fit, source, &spec)?, cfg)?;
        let held_mean = mean_map(&held, source, &spec)?;
        let value = objective(&result.weights, &kernel, &held_mean)?;
        let mut norm = 0.0;
        for x in held.iter_rows() {
            for y in held.iter_rows() {
                norm += kernel_eval(x, y, &spec)?;
            }
        }
        norm /= (held.rows() * held.rows()) as f64;
        let score = 2.0 * value / norm;
        scores.push(CvScore { sigma, score });
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((spec, score));
        }
    }
    let (spec, _) = best.ok_or_else(|| CliError::Usage("--cv needs candidates".into()))?;
    Ok((spec, scores))
}

/// Runs a selection, adding `criticisms` worst-represented rows when asked.
/// A solver failure still yields an output (with `error` set) alongside the
/// error, so the partial result can be written.
pub fn build_select(
    args: &SelectArgs,
    criticism_count: Option<usize>,
) -> Result<SelectOutput, (CliError, Option<Box<SelectOutput>>)> {
    let start = Instant::now();
    let cfg = selection_config(args);
    let method = Method::from(args.method);
    let paths = [args.target.as_path(), args.source.as_path()];
    let sets = load_all(&paths, &args.data).map_err(|e| (e, None))?;
    let (target, source) = (&sets[0], &sets[1]);

    let mut cv_scores = None;
    let (spec, rule) = match (&args.kernel.cv, args.kernel.kernel) {
        (Some(candidates), KernelArg::Gaussian) => {
            let (spec, scores) =
                cross_validate(target, source, candidates, args.kernel.jitter, method, &cfg)
                    .map_err(|e| (e, None))?;
            cv_scores = Some(scores);
            let rule = BandwidthRule::CrossValidated {
                candidates: candidates.clone(),
            };
            (spec, rule)
        }
        _ => fixed_kernel(&args.kernel, source).map_err(|e| (e, None))?,
    };

    let subcommand = if criticism_count.is_some() {
        "criticize"
    } else {
        "select"
    };
    let mut manifest = RunManifest::new(subcommand);
    if let Some(count) = criticism_count {
        manifest = manifest.option("count", count);
    }
    manifest.inputs = path_strings(&paths);
    manifest.header = args.data.header;
    manifest.standardize = args.data.standardize;
    manifest.bandwidth = Some(rule);
    manifest.kernel = Some(spec);
    manifest.method = Some(method);
    manifest.selection = Some(cfg);
    manifest.seed = args.seed;

    let kernel_start = Instant::now();
    let built =
        kernel_matrix(source, &spec).and_then(|k| Ok((k, mean_map(target, source, &spec)?)));
    let (kernel, mean) = built.map_err(|e| (e.into(), None))?;
    let kernel_seconds = kernel_start.elapsed().as_secs_f64();

    let select_start = Instant::now();
    let outcome = select(method, &kernel, &mean, &cfg);
    manifest.timings = args.timings.then(|| Timings {
        kernel_seconds,
        selection_seconds: select_start.elapsed().as_secs_f64(),
        total_seconds: start.elapsed().as_secs_f64(),
    });

    match outcome {
        Ok(result) => {
            let mut output = SelectOutput::new(&result, manifest, args.timings);
            output.cv = cv_scores;
            if let Some(count) = criticism_count {
                let found = criticisms(&result, &kernel, &mean, count);
                output.criticisms = Some(found.map_err(|e| (e.into(), None))?);
            }
            Ok(output)
        }
        Err(Error::Selection { source, partial }) => {
            let mut output = SelectOutput::new(&partial, manifest, args.timings);
            output.error = Some(source.to_string());
            output.cv = cv_scores;
            let err = Error::Selection { source, partial };
            Err((err.into(), Some(Box::new(output))))
        }
        Err(e) => Err((e.into(), None)),
    }
}

fn finish(
    outcome: Result<SelectOutput, (CliError, Option<Box<SelectOutput>>)>,
    out: Option<&Path>,
) -> CliResult<SelectOutput> {
    match outcome {
        Ok(output) => {
            emit(out, &to_json(&output))?;
            Ok(output)
        }
        Err((err, partial)) => {
            if let Some(partial) = partial {
                emit(out, &to_json(&partial))?;
            }
            Err(err)
        }
    }
}

pub fn run_select(args: &SelectArgs) -> CliResult<SelectOutput> {
    finish(build_select(args, None), args.out.as_deref())
}

pub fn run_criticize(args: &CriticizeArgs) -> CliResult<SelectOutput> {
    finish(
        build_select(&args.select, Some(args.count)),
        args.select.out.as_deref(),
    )
}
