//! Subcommand implementations.

mod bench;
mod rank;
mod select;
mod verify;

use std::io::Write;
use std::path::Path;

use protoselect::kernel::{median_bandwidth, Standardizer};
use protoselect::{Dataset, KernelSpec};

use crate::args::{DataArgs, KernelArg, KernelArgs};
use crate::error::{CliError, CliResult};
use crate::input::load_csv;
use crate::manifest::BandwidthRule;

pub use bench::{bench_rows, run_bench, BenchRow};
pub use rank::{rank_outputs, run_rank, RankOutputs};
pub use select::{build_select, run_criticize, run_select, CvScore, SelectOutput};
pub use verify::{run_verify, sweep, InstanceReport};

/// Writes `text` to `out`, or to stdout when no path is given.
pub(crate) fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    text
}

/// Loads every file and optionally standardizes with pooled statistics.
pub(crate) fn load_all(paths: &[&Path], data: &DataArgs) -> CliResult<Vec<Dataset>> {
    let sets = paths
        .iter()
        .map(|p| load_csv(p, data.header))
        .collect::<CliResult<Vec<_>>>()?;
    if let Some(bad) = sets.iter().find(|d| d.cols() != sets[0].cols()) {
        return Err(CliError::Core(protoselect::Error::DimensionMismatch {
            expected: sets[0].cols(),
            found: bad.cols(),
        }));
    }
    if !data.standardize {
        return Ok(sets);
    }
    let refs: Vec<&Dataset> = sets.iter().collect();
    let scaler = Standardizer::fit(&refs)?;
    Ok(sets
        .iter()
        .map(|d| scaler.transform(d))
        .collect::<protoselect::Result<Vec<_>>>()?)
}

/// Resolves a kernel without cross-validation; the median rule runs on `reference`.
pub(crate) fn fixed_kernel(
    args: &KernelArgs,
    reference: &Dataset,
) -> CliResult<(KernelSpec, BandwidthRule)> {
    match args.kernel {
        KernelArg::Linear => {
            if args.sigma.is_some() || args.median_bandwidth || args.cv.is_some() {
                return Err(CliError::Usage(
                    "bandwidth options apply only to the gaussian kernel".into(),
                ));
            }
            Ok((
                KernelSpec::linear().with_jitter(args.jitter)?,
                BandwidthRule::None,
            ))
        }
        KernelArg::Gaussian => {
            let (sigma, rule) = match args.sigma {
                Some(s) => (s, BandwidthRule::Fixed),
                None => (median_bandwidth(reference)?, BandwidthRule::Median),
            };
            Ok((KernelSpec::gaussian(sigma)?.with_jitter(args.jitter)?, rule))
        }
    }
}

pub(crate) fn path_strings(paths: &[&Path]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}
