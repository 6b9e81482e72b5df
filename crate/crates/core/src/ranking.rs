//! Cross-dataset representation ranking.
//!
//! Each dataset first summarizes itself with ProtoDash. Its prototypes are
//! then scored against every other dataset (the target), and for each target
//! the other datasets are ranked by how well their prototypes represent it.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, mean_map, Dataset, KernelSpec};
use crate::nnqp::{objective, solve_restricted_from, WeightVector};
use crate::par::map_indices;
use crate::selectors::{proto_dash, SelectionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankConfig {
    /// Prototypes per dataset.
    pub m: usize,
    /// Re-optimize weights for every target on the source's support. When
    /// false, the self-fit weights are evaluated as they are.
    pub reweight: bool,
    pub selection: SelectionConfig,
}

impl RankConfig {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            reweight: true,
            selection: SelectionConfig::sparsity(m),
        }
    }
}

/// One evaluation of dataset `source`'s prototypes on dataset `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEvaluation {
    pub target: usize,
    pub source: usize,
    pub weights: WeightVector,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMatrix {
    pub names: Vec<String>,
    /// `objective[i][j]`: value of dataset j's prototypes on target i; the
    /// diagonal is `None`.
    pub objective: Vec<Vec<Option<f64>>>,
    /// `rank[i][j]`: rank of j among the representers of i, 1 = best.
    pub rank: Vec<Vec<Option<usize>>>,
    /// Self-fit value of each dataset's own prototypes.
    pub self_fit: Vec<f64>,
    /// Self-fit prototypes of each dataset.
    pub prototypes: Vec<WeightVector>,
    /// Every off-diagonal evaluation, ordered by (target, source).
    pub evaluations: Vec<CrossEvaluation>,
}

impl RankMatrix {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Builds ranks from an objective table. Higher objective ranks better;
    /// ties go to the earlier dataset.
    pub fn from_objective(names: Vec<String>, objective: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let k = names.len();
        if objective.len() != k || objective.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidInput(format!(
                "objective table must be {k}x{k}"
            )));
        }
        let mut rank = vec![vec![None; k]; k];
        for i in 0..k {
            let mut others: Vec<(usize, f64)> = Vec::with_capacity(k - 1);
            for j in (0..k).filter(|&j| j != i) {
                let v = objective[i][j].ok_or_else(|| {
                    Error::InvalidInput(format!("missing objective for ({i}, {j})"))
                })?;
                others.push((j, v));
            }
            others.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (r, (j, _)) in others.into_iter().enumerate() {
                rank[i][j] = Some(r + 1);
            }
        }
        Ok(Self {
            names,
            objective,
            rank,
            self_fit: vec![],
            prototypes: vec![],
            evaluations: vec![],
        })
    }
}

pub fn rank_sources(
    names: &[String],
    datasets: &[Dataset],
    spec: &KernelSpec,
    cfg: &RankConfig,
) -> Result<RankMatrix> {
    let k = datasets.len();
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "ranking needs at least two datasets, got {k}"
        )));
    }
    if names.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: names.len(),
        });
    }
    let d = datasets[0].cols();
    if let Some(bad) = datasets.iter().find(|ds| ds.cols() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.cols(),
        });
    }
    let selection = SelectionConfig {
        termination: crate::selectors::Termination::Sparsity(cfg.m),
        ..cfg.selection
    };

    let context =
        |i: usize, j: usize, e: Error| Error::InvalidInput(format!("target {i} / source {j}: {e}"));

    let fits = map_indices(k, |j| -> Result<_> {
        let kernel = kernel_matrix(&datasets[j], spec)?;
        let mu = mean_map(&datasets[j], &datasets[j], spec)?;
        let m = cfg.m.min(kernel.size());
        let sel = SelectionConfig {
            termination: crate::selectors::Termination::Sparsity(m),
            ..selection
        };
        let result = proto_dash(&kernel, &mu, &sel)?;
        Ok((kernel, result))
    })
    .into_iter()
    .enumerate()
    .map(|(j, r)| r.map_err(|e| context(j, j, e)))
    .collect::<Result<Vec<_>>>()?;

    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let evaluations = map_indices(pairs.len(), |p| -> Result<CrossEvaluation> {
        let (i, j) = pairs[p];
        let (kernel, fit) = &fits[j];
        let mu = mean_map(&datasets[i], &datasets[j], spec)?;
        let weights = if cfg.reweight {
            solve_restricted_from(kernel, &mu, &fit.indices, &fit.weights, &selection.solver)?
        } else {
            fit.weights.clone()
        };
        let value = objective(&weights, kernel, &mu)?;
        Ok(CrossEvaluation {
            target: i,
            source: j,
            weights,
            objective: value,
        })
    })
    .into_iter()
    .zip(&pairs)
    .map(|(r, &(i, j))| r.map_err(|e| context(i, j, e)))
    .collect::<Result<Vec<_>>>()?;

    let mut table = vec![vec![None; k]; k];
    for e in &evaluations {
        table[e.target][e.source] = Some(e.objective);
    }
    let mut rm = RankMatrix::from_objective(names.to_vec(), table)?;
    rm.self_fit = fits.iter().map(|(_, r)| r.objective()).collect();
    rm.prototypes = fits.into_iter().map(|(_, r)| r.weights).collect();
    rm.evaluations = evaluations;
    Ok(rm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRank {
    pub index: usize,
    pub name: String,
    pub average: f64,
}

/// Column means of the rank table (diagonal excluded), ascending; equal
/// averages keep dataset order.
pub fn average_ranks(rm: &RankMatrix) -> Vec<AverageRank> {
    let k = rm.len();
    let mut out: Vec<AverageRank> = (0..k)
        .map(|j| {
            let ranks: Vec<f64> = (0..k)
                .filter_map(|i| rm.rank[i][j])
                .map(|r| r as f64)
                .collect();
            AverageRank {
                index: j,
                name: rm.names[j].clone(),
                average: ranks.iter().sum::<f64>() / ranks.len().max(1) as f64,
            }
        })
        .collect();
    out.sort_by(|a, b| a.average.total_cmp(&b.average));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub rank: usize,
    pub objective: f64,
}

/// Directed "represents" graph: an edge `j -> i` when j ranks within the
/// top `top_t` representers of i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub nodes: Vec<String>,
    pub edges: Vec<GraphEdge>,
}

pub fn export_graph(rm: &RankMatrix, top_t: usize) -> Result<GraphDocument> {
    let k = rm.len();
    if top_t == 0 || top_t + 1 > k {
        return Err(Error::InvalidInput(format!(
            "top_t must lie in 1..={}, got {top_t}",
            k.saturating_sub(1)
        )));
    }
    let mut edges = Vec::new();
    for i in 0..k {
        let mut row: Vec<(usize, usize)> = (0..k)
            .filter_map(|j| rm.rank[i][j].map(|r| (r, j)))
            .filter(|&(r, _)| r <= top_t)
            .collect();
        row.sort_unstable();
        for (r, j) in row {
            edges.push(GraphEdge {
                from: rm.names[j].clone(),
                to: rm.names[i].clone(),
                rank: r,
                objective: rm.objective[i][j].unwrap_or(f64::NAN),
            });
        }
    }
    Ok(GraphDocument {
        nodes: rm.names.clone(),
        edges,
    })
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl GraphDocument {
    /// Graphviz DOT rendering with nodes `n0..n{k-1}` labelled by name.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph representation {\n");
        let id = |name: &str| self.nodes.iter().position(|n| n == name).unwrap_or(0);
        for (i, name) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "  n{i} [label=\"{}\"];", dot_escape(name));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  n{} -> n{} [label=\"{}\"];",
                id(&e.from),
                id(&e.to),
                e.rank
            );
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cluster(rng: &mut ChaCha8Rng, center: f64, n: usize) -> Dataset {
        let noise = Normal::new(0.0, 0.5).unwrap();
        let rows: Vec<[f64; 1]> = (0..n).map(|_| [center + noise.sample(rng)]).collect();
        Dataset::from_rows(&rows).unwrap()
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("d{i}")).collect()
    }

    #[test]
    fn identical_pair_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = cluster(&mut rng, 0.0, 15);
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let rm = rank_sources(&names(2), &[a.clone(), a], &spec, &RankConfig::new(3)).unwrap();
        assert_eq!(rm.objective[0][1], rm.objective[1][0]);
        assert_eq!(rm.rank[0][1], Some(1));
        assert_eq!(rm.rank[1][0], Some(1));
        let avg = average_ranks(&rm);
        assert!(avg.iter().all(|a| a.average == 1.0));
    }

    #[test]
    fn near_clusters_rank_each_other_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sets = vec![
            cluster(&mut rng, 0.0, 20),
            cluster(&mut rng, 0.1, 20),
            cluster(&mut rng, 10.0, 20),
        ];
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let rm = rank_sources(&names(3), &sets, &spec, &RankConfig::new(5)).unwrap();
        assert_eq!(rm.rank[0][1], Some(1));
        assert_eq!(rm.rank[1][0], Some(1));
        assert_eq!(rm.rank[0][2], Some(2));
        assert_eq!(rm.rank[1][2], Some(2));
    }

    #[test]
    fn rank_rows_are_permutations_and_objectives_recompute() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sets: Vec<Dataset> = (0..3)
            .map(|_| {
                let c = rng.random_range(-1.0..1.0);
                cluster(&mut rng, c, 12)
            })
            .collect();
        let spec = KernelSpec::gaussian(0.8).unwrap();
        let rm = rank_sources(&names(3), &sets, &spec, &RankConfig::new(4)).unwrap();
        for i in 0..3 {
            let mut row: Vec<usize> = rm.rank[i].iter().flatten().copied().collect();
            row.sort_unstable();
            assert_eq!(row, vec![1, 2]);
            assert!(rm.rank[i][i].is_none() && rm.objective[i][i].is_none());
        }
        for e in &rm.evaluations {
            let k = kernel_matrix(&sets[e.source], &spec).unwrap();
            let mu = mean_map(&sets[e.target], &sets[e.source], &spec).unwrap();
            let mut direct = 0.0;
            for (a, wa) in e.weights.support().iter().zip(e.weights.weights()) {
                direct += wa * mu.get(a);
                for (b, wb) in e.weights.support().iter().zip(e.weights.weights()) {
                    direct -= 0.5 * wa * wb * k.get(a, b);
                }
            }
            assert!((direct - e.objective).abs() <= 1e-9);
        }
    }

    #[test]
    fn frozen_weights_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sets = vec![cluster(&mut rng, 0.0, 10), cluster(&mut rng, 1.0, 10)];
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let mut cfg = RankConfig::new(3);
        cfg.reweight = false;
        let rm = rank_sources(&names(2), &sets, &spec, &cfg).unwrap();
        assert_eq!(rm.evaluations[0].weights, rm.prototypes[1]);
    }

    #[test]
    fn average_rank_arithmetic() {
        let nan = None;
        let table = vec![
            vec![nan, Some(0.9), Some(0.5), Some(0.1)],
            vec![Some(0.9), nan, Some(0.5), Some(0.4)],
            vec![Some(0.2), Some(0.3), nan, Some(0.8)],
            vec![Some(0.7), Some(0.6), Some(0.5), nan],
        ];
        let rm = RankMatrix::from_objective(names(4), table.clone()).unwrap();
        // column 0 ranks: row1 -> 1, row2 -> 3, row3 -> 1
        let avg = average_ranks(&rm);
        for a in &avg {
            let col: Vec<f64> = (0..4)
                .filter(|&i| i != a.index)
                .map(|i| rm.rank[i][a.index].unwrap() as f64)
                .collect();
            assert_eq!(a.average, col.iter().sum::<f64>() / 3.0);
        }
        assert!(avg.windows(2).all(|w| w[0].average <= w[1].average));
        assert_eq!(rm.rank[1][0], Some(1));
        assert_eq!(rm.rank[2][0], Some(3));
    }

    #[test]
    fn graph_edge_counts_and_determinism() {
        let table = vec![
            vec![None, Some(0.9), Some(0.5)],
            vec![Some(0.4), None, Some(0.5)],
            vec![Some(0.2), Some(0.3), None],
        ];
        let rm =
            RankMatrix::from_objective(vec!["a".into(), "b\"q".into(), "c".into()], table).unwrap();
        assert_eq!(export_graph(&rm, 2).unwrap().edges.len(), 6);
        let g = export_graph(&rm, 1).unwrap();
        assert_eq!(g.edges.len(), 3);
        assert_eq!(g.to_dot(), export_graph(&rm, 1).unwrap().to_dot());
        assert!(g.to_dot().contains("label=\"b\\\"q\""));
        assert!(export_graph(&rm, 3).is_err());
        assert!(export_graph(&rm, 0).is_err());
    }
}
