use std::path::Path;

use protoselect::kernel::median_bandwidth;
use protoselect::ranking::{
    average_ranks, export_graph, rank_sources, AverageRank, GraphDocument, RankConfig,
};
use protoselect::{Dataset, KernelSpec, WeightVector};
use serde::{Deserialize, Serialize};

use super::{load_all, path_strings, to_json};
use crate::args::RankArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::{BandwidthRule, RunManifest, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototypes {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl From<&WeightVector> for Prototypes {
    fn from(w: &WeightVector) -> Self {
        Self {
            indices: w.support().as_slice().to_vec(),
            weights: w.weights().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDocument {
    pub schema_version: u32,
    pub names: Vec<String>,
    /// `objective[i][j]`: dataset j's prototypes evaluated on dataset i.
    pub objective: Vec<Vec<Option<f64>>>,
    /// `rank[i][j]`: rank of j among the representers of i, 1 = best.
    pub rank: Vec<Vec<Option<usize>>>,
    pub self_fit: Vec<f64>,
    pub prototypes: Vec<Prototypes>,
    pub manifest: RunManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragesDocument {
    pub schema_version: u32,
    pub averages: Vec<AverageRank>,
}

/// Contents of the four files `rank` writes.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOutputs {
    pub rank: RankDocument,
    pub averages: AveragesDocument,
    pub graph: GraphDocument,
}

fn default_names(paths: &[&Path]) -> Vec<String> {
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("dataset{i}"))
        })
        .collect()
}

pub fn rank_outputs(args: &RankArgs) -> CliResult<RankOutputs> {
    let paths: Vec<&Path> = args.datasets.iter().map(|p| p.as_path()).collect();
    let names = match &args.names {
        Some(names) if names.len() != paths.len() => {
            return Err(CliError::Usage(format!(
                "{} names given for {} datasets",
                names.len(),
                paths.len()
            )))
        }
        Some(names) => names.clone(),
        None => default_names(&paths),
    };
    let sets = load_all(&paths, &args.data)?;
    let (sigma, rule) = match args.sigma {
        Some(s) => (s, BandwidthRule::Fixed),
        None => {
            let refs: Vec<&Dataset> = sets.iter().collect();
            (
                median_bandwidth(&Dataset::concat(&refs)?)?,
                BandwidthRule::Median,
            )
        }
    };
    let spec = KernelSpec::gaussian(sigma)?.with_jitter(args.jitter)?;
    let mut cfg = RankConfig::new(args.m);
    cfg.reweight = !args.frozen_weights;

    let rm = rank_sources(&names, &sets, &spec, &cfg)?;
    let graph = export_graph(&rm, args.top)?;

    let mut manifest = RunManifest::new("rank")
        .option("frozen_weights", args.frozen_weights)
        .option("m", args.m)
        .option("names", &names)
        .option("top", args.top);
    manifest.inputs = path_strings(&paths);
    manifest.header = args.data.header;
    manifest.standardize = args.data.standardize;
    manifest.bandwidth = Some(rule);
    manifest.kernel = Some(spec);
    manifest.method = Some(protoselect::Method::ProtoDash);
    manifest.selection = Some(cfg.selection);

    Ok(RankOutputs {
        averages: AveragesDocument {
            schema_version: SCHEMA_VERSION,
            averages: average_ranks(&rm),
        },
        rank: RankDocument {
            schema_version: SCHEMA_VERSION,
            prototypes: rm.prototypes.iter().map(Prototypes::from).collect(),
            names: rm.names,
            objective: rm.objective,
            rank: rm.rank,
            self_fit: rm.self_fit,
            manifest,
        },
        graph,
    })
}

pub fn run_rank(args: &RankArgs) -> CliResult<RankOutputs> {
    let outputs = rank_outputs(args)?;
    let dir = &args.out_dir;
    let io = |source| CliError::Io {
        path: dir.clone(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    for (name, text) in [
        ("rank.json", to_json(&outputs.rank)),
        ("averages.json", to_json(&outputs.averages)),
        ("graph.json", to_json(&outputs.graph)),
        ("graph.dot", outputs.graph.to_dot()),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
    }
    Ok(outputs)
}
