use std::time::Instant;

use protoselect::kernel::{kernel_matrix, mean_map, median_bandwidth};
use protoselect::selectors::{proto_dash, proto_greedy};
use protoselect::synthetic::blob;
use protoselect::{KernelSpec, SelectionConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::emit;
use crate::args::BenchArgs;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n2: usize,
    pub m: usize,
    pub t_dash: f64,
    pub t_greedy: f64,
    pub ratio: f64,
}

/// Times both selectors on every `(n2, m)` pair with `m <= n2`. Source rows
/// come from a standard normal and target rows from one shifted by 0.5 in
/// every coordinate; the bandwidth is the source median.
pub fn bench_rows(args: &BenchArgs) -> CliResult<Vec<BenchRow>> {
    if args.dim == 0 {
        return Err(CliError::Usage("dim must be positive".into()));
    }
    let mut rows = Vec::new();
    for &n2 in &args.sizes {
        if n2 < 2 {
            return Err(CliError::Usage(format!("size {n2} is below 2")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let source = blob(&mut rng, &vec![0.0; args.dim], 1.0, n2)?;
        let target = blob(&mut rng, &vec![0.5; args.dim], 1.0, args.n1.unwrap_or(n2))?;
        let spec = KernelSpec::gaussian(median_bandwidth(&source)?)?;
        let kernel = kernel_matrix(&source, &spec)?;
        let mean = mean_map(&target, &source, &spec)?;
        for &m in args.ms.iter().filter(|&&m| m <= n2) {
            let cfg = SelectionConfig::sparsity(m);
            let start = Instant::now();
            proto_dash(&kernel, &mean, &cfg)?;
            let t_dash = start.elapsed().as_secs_f64();
            let start = Instant::now();
            proto_greedy(&kernel, &mean, &cfg)?;
            let t_greedy = start.elapsed().as_secs_f64();
            rows.push(BenchRow {
                n2,
                m,
                t_dash,
                t_greedy,
                ratio: t_greedy / t_dash,
            });
        }
    }
    Ok(rows)
}

pub fn run_bench(args: &BenchArgs) -> CliResult<Vec<BenchRow>> {
    let rows = bench_rows(args)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Usage(format!("writing CSV: {e}"));
    for row in &rows {
        writer.serialize(row).map_err(io)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    emit(args.out.as_deref(), &String::from_utf8_lossy(&bytes))?;
    Ok(rows)
}
