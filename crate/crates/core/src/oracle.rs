//! Brute-force verification of the approximation theory on small instances:
//! exhaustive optimal subsets, submodularity ratios, sparse eigenvalue
//! bounds and the ProtoDash / ProtoGreedy guarantee checks.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelMatrix, MeanMap};
use crate::nnqp::{objective, solve_restricted, SolverConfig, SupportSet, WeightVector};
use crate::par::map_indices;
use crate::selectors::{proto_dash, proto_greedy, SelectionConfig};

/// Largest source size accepted by the enumeration routines.
pub const MAX_ENUMERATION_SIZE: usize = 20;
/// Largest number of subsets any single enumeration may visit.
pub const MAX_SUBSETS: u64 = 1_000_000;
/// Joint gains at or below this are excluded from the submodularity ratio.
pub const RATIO_DENOMINATOR_FLOOR: f64 = 1e-12;
/// Slack applied when deciding whether a guarantee holds.
pub const GUARANTEE_SLACK: f64 = 1e-9;

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| {
        acc.saturating_mul((n - i) as u64) / (i as u64 + 1)
    })
}

fn guard(n2: usize, sizes: impl Iterator<Item = usize>, what: &str) -> Result<()> {
    if n2 > MAX_ENUMERATION_SIZE {
        return Err(Error::Guard(format!(
            "{what}: {n2} source rows exceeds the limit of {MAX_ENUMERATION_SIZE}"
        )));
    }
    let total: u64 = sizes.map(|k| binomial(n2, k)).fold(0, u64::saturating_add);
    if total > MAX_SUBSETS {
        return Err(Error::Guard(format!(
            "{what}: {total} subsets exceeds the limit of {MAX_SUBSETS}"
        )));
    }
    Ok(())
}

fn f_value(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    indices: Vec<usize>,
    solver: &SolverConfig,
) -> Result<f64> {
    let support = SupportSet::new(indices, kernel.size())?;
    let zeta = solve_restricted(kernel, mean, &support, solver)?;
    objective(&zeta, kernel, mean)
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

/// Best support of size at most `m` by full enumeration, with its value.
/// Ties prefer fewer elements, then the lexicographically smallest subset.
pub fn exhaustive_optimal(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    m: usize,
) -> Result<(SupportSet, f64)> {
    let n2 = check_instance(kernel, mean)?;
    let m = m.min(n2);
    guard(n2, 0..=m, "exhaustive_optimal")?;
    let solver = SolverConfig::default();
    let subsets: Vec<Vec<usize>> = (0..=m).flat_map(|k| (0..n2).combinations(k)).collect();
    let values = map_indices(subsets.len(), |s| {
        f_value(kernel, mean, subsets[s].clone(), &solver)
    });
    let mut best: Option<(usize, f64)> = None;
    for (s, value) in values.into_iter().enumerate() {
        let value = value?;
        if best.is_none_or(|(_, b)| value > b) {
            best = Some((s, value));
        }
    }
    let (s, value) = best.expect("the empty subset is always enumerated");
    Ok((SupportSet::new(subsets[s].clone(), n2)?, value))
}

/// `gamma_{L,r}`: the smallest ratio of summed singleton gains to the joint
/// gain over non-empty `S` disjoint from `base` with `|S| <= r`.
pub fn submodularity_ratio(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    base: &SupportSet,
    r: usize,
) -> Result<f64> {
    let n2 = check_instance(kernel, mean)?;
    let free: Vec<usize> = (0..n2).filter(|&j| !base.contains(j)).collect();
    let r = r.min(free.len());
    if n2 > MAX_ENUMERATION_SIZE {
        return Err(Error::Guard(format!(
            "submodularity_ratio: {n2} source rows exceeds the limit of {MAX_ENUMERATION_SIZE}"
        )));
    }
    let total: u64 = (1..=r).map(|k| binomial(free.len(), k)).sum();
    if total > MAX_SUBSETS {
        return Err(Error::Guard(format!(
            "submodularity_ratio: {total} subsets exceeds the limit of {MAX_SUBSETS}"
        )));
    }
    ratio_for_base(kernel, mean, base, &free, r, &SolverConfig::default())?
        .ok_or_else(|| Error::Degenerate("no subset strictly increases the objective".into()))
}

fn ratio_for_base(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    base: &SupportSet,
    free: &[usize],
    r: usize,
    solver: &SolverConfig,
) -> Result<Option<f64>> {
    let with = |extra: &[usize]| {
        let mut idx = base.as_slice().to_vec();
        idx.extend_from_slice(extra);
        idx
    };
    let f_base = f_value(kernel, mean, with(&[]), solver)?;
    let singles = map_indices(free.len(), |a| {
        f_value(kernel, mean, with(&[free[a]]), solver).map(|v| v - f_base)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let subsets: Vec<Vec<usize>> = (1..=r)
        .flat_map(|k| (0..free.len()).combinations(k))
        .collect();
    let ratios = map_indices(subsets.len(), |s| -> Result<Option<f64>> {
        let picks = &subsets[s];
        let joint = if picks.len() == 1 {
            singles[picks[0]]
        } else {
            let extra: Vec<usize> = picks.iter().map(|&a| free[a]).collect();
            f_value(kernel, mean, with(&extra), solver)? - f_base
        };
        if joint <= RATIO_DENOMINATOR_FLOOR {
            return Ok(None);
        }
        let summed: f64 = picks.iter().map(|&a| singles[a]).sum();
        Ok(Some(summed / joint))
    });
    let mut min: Option<f64> = None;
    for ratio in ratios {
        if let Some(v) = ratio? {
            min = Some(min.map_or(v, |m| m.min(v)));
        }
    }
    Ok(min)
}

/// `gamma_{U,r}` with the outer minimum restricted to the prefixes of the
/// ordered set `selected` (including the empty prefix and `selected` itself).
pub fn prefix_submodularity_ratio(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    selected: &SupportSet,
    r: usize,
) -> Result<f64> {
    let n2 = check_instance(kernel, mean)?;
    if n2 > MAX_ENUMERATION_SIZE {
        return Err(Error::Guard(format!(
            "prefix_submodularity_ratio: {n2} source rows exceeds the limit of {MAX_ENUMERATION_SIZE}"
        )));
    }
    let mut total = 0u64;
    for t in 0..=selected.len() {
        let free = n2 - t;
        total = total.saturating_add((1..=r.min(free)).map(|k| binomial(free, k)).sum());
    }
    if total > MAX_SUBSETS {
        return Err(Error::Guard(format!(
            "prefix_submodularity_ratio: {total} subsets exceeds the limit of {MAX_SUBSETS}"
        )));
    }
    let solver = SolverConfig::default();
    let mut min: Option<f64> = None;
    for t in 0..=selected.len() {
        let base = SupportSet::new(selected.as_slice()[..t].to_vec(), n2)?;
        let free: Vec<usize> = (0..n2).filter(|&j| !base.contains(j)).collect();
        let r_eff = r.min(free.len());
        if let Some(v) = ratio_for_base(kernel, mean, &base, &free, r_eff, &solver)? {
            min = Some(min.map_or(v, |m| m.min(v)));
        }
    }
    min.ok_or_else(|| Error::Degenerate("no subset strictly increases the objective".into()))
}

/// Extreme eigenvalues over all `k x k` principal submatrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseEigenBounds {
    pub k: usize,
    /// Smallest eigenvalue of any k-sparse principal submatrix (RSC).
    pub c: f64,
    /// Largest eigenvalue of any k-sparse principal submatrix (RSM).
    pub big_c: f64,
    /// Smoothness along single coordinates: the largest diagonal entry.
    pub c_tilde_1: f64,
}

pub fn rsc_rsm_bounds(kernel: &KernelMatrix, k: usize) -> Result<SparseEigenBounds> {
    let n2 = kernel.size();
    if k == 0 || k > n2 {
        return Err(Error::InvalidInput(format!(
            "sparsity k must lie in 1..={n2}, got {k}"
        )));
    }
    if k != n2 {
        guard(n2, std::iter::once(k), "rsc_rsm_bounds")?;
    }
    let subsets: Vec<Vec<usize>> = (0..n2).combinations(k).collect();
    let extremes = map_indices(subsets.len(), |s| {
        let eig = kernel.eigenvalues(&subsets[s]);
        (eig[0], eig[eig.len() - 1])
    });
    let (c, big_c) = extremes
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
            (lo.min(a), hi.max(b))
        });
    Ok(SparseEigenBounds {
        k,
        c,
        big_c,
        c_tilde_1: kernel.max_diagonal(),
    })
}

/// Outcome of checking `f(L^D) >= (1 - exp(-3 c gamma / (4 C))) f(L*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub m: usize,
    pub f_dash: f64,
    pub f_opt: f64,
    pub gamma: f64,
    /// `c_m`, smallest m-sparse eigenvalue.
    pub c: f64,
    /// `C~_1`, single-coordinate smoothness (largest diagonal entry).
    pub c_tilde: f64,
    /// Bound using `c_m` and `C~_1`; this is the one checked.
    pub bound: f64,
    pub satisfied: bool,
    /// `C_m`, largest m-sparse eigenvalue.
    pub c_big_m: f64,
    /// Bound with `C_m` in place of `C~_1`; never larger than `bound`.
    pub bound_with_c_m: f64,
    pub dash_indices: SupportSet,
    pub opt_indices: SupportSet,
    /// No subset strictly increased the objective; gamma is reported as 1.
    pub degenerate_gamma: bool,
}

/// Outcome of checking `f(L^G) >= (1 - exp(-gamma)) f(L*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyGuaranteeReport {
    pub m: usize,
    pub f_greedy: f64,
    pub f_opt: f64,
    pub gamma: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub greedy_indices: SupportSet,
    pub degenerate_gamma: bool,
}

fn gamma_or_unit(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    selected: &SupportSet,
    m: usize,
) -> Result<(f64, bool)> {
    match prefix_submodularity_ratio(kernel, mean, selected, m) {
        Ok(g) => Ok((g, false)),
        Err(Error::Degenerate(_)) => Ok((1.0, true)),
        Err(e) => Err(e),
    }
}

/// Runs ProtoDash and the exhaustive oracles on one instance.
pub fn verify_guarantee(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    m: usize,
) -> Result<GuaranteeReport> {
    let n2 = check_instance(kernel, mean)?;
    if m == 0 || m > n2 {
        return Err(Error::InvalidInput(format!(
            "m must lie in 1..={n2}, got {m}"
        )));
    }
    let dash = proto_dash(kernel, mean, &SelectionConfig::sparsity(m))?;
    let (opt_indices, f_opt) = exhaustive_optimal(kernel, mean, m)?;
    let (gamma, degenerate_gamma) = gamma_or_unit(kernel, mean, &dash.indices, m)?;
    let eig = rsc_rsm_bounds(kernel, m)?;
    let f_dash = dash.objective();
    let bound = (1.0 - (-3.0 * eig.c * gamma / (4.0 * eig.c_tilde_1)).exp()) * f_opt;
    let bound_with_c_m = (1.0 - (-3.0 * eig.c * gamma / (4.0 * eig.big_c)).exp()) * f_opt;
    Ok(GuaranteeReport {
        m,
        f_dash,
        f_opt,
        gamma,
        c: eig.c,
        c_tilde: eig.c_tilde_1,
        bound,
        satisfied: f_dash >= bound - GUARANTEE_SLACK,
        c_big_m: eig.big_c,
        bound_with_c_m,
        dash_indices: dash.indices,
        opt_indices,
        degenerate_gamma,
    })
}

/// Runs ProtoGreedy against the exhaustive optimum, with gamma taken over
/// the prefixes of the greedy selection.
pub fn verify_greedy_guarantee(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    m: usize,
) -> Result<GreedyGuaranteeReport> {
    let n2 = check_instance(kernel, mean)?;
    if m == 0 || m > n2 {
        return Err(Error::InvalidInput(format!(
            "m must lie in 1..={n2}, got {m}"
        )));
    }
    let greedy = proto_greedy(kernel, mean, &SelectionConfig::sparsity(m))?;
    let (_, f_opt) = exhaustive_optimal(kernel, mean, m)?;
    let (gamma, degenerate_gamma) = gamma_or_unit(kernel, mean, &greedy.indices, m)?;
    let f_greedy = greedy.objective();
    let bound = (1.0 - (-gamma).exp()) * f_opt;
    Ok(GreedyGuaranteeReport {
        m,
        f_greedy,
        f_opt,
        gamma,
        bound,
        satisfied: f_greedy >= bound - GUARANTEE_SLACK,
        greedy_indices: greedy.indices,
        degenerate_gamma,
    })
}

/// Largest disagreement between central differences of `l` and its
/// analytic gradient. Relative error is used where the gradient exceeds
/// 1e-8 in magnitude, absolute error otherwise. Coordinates checked are the
/// support of `w`, or all coordinates when the support is empty.
pub fn finite_difference_check(
    kernel: &KernelMatrix,
    mean: &MeanMap,
    w: &WeightVector,
    step: f64,
) -> Result<f64> {
    let n2 = check_instance(kernel, mean)?;
    if step.is_nan() || step <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "step must be positive, got {step}"
        )));
    }
    let grad = crate::nnqp::gradient(w, kernel, mean)?;
    let coords: Vec<usize> = if w.support().is_empty() {
        (0..n2).collect()
    } else {
        w.support().as_slice().to_vec()
    };
    let mut support = w.support().as_slice().to_vec();
    let mut base = w.weights().to_vec();
    let mut worst = 0.0f64;
    for j in coords {
        let pos = match support.iter().position(|&i| i == j) {
            Some(p) => p,
            None => {
                support.push(j);
                base.push(0.0);
                support.len() - 1
            }
        };
        let eval = |delta: f64| {
            let mut wts = base.clone();
            wts[pos] += delta;
            crate::nnqp::objective_sparse(kernel, mean, &support, &wts)
        };
        let fd = (eval(step) - eval(-step)) / (2.0 * step);
        let g = grad[j];
        let err = if g.abs() > 1e-8 {
            (fd - g).abs() / g.abs()
        } else {
            (fd - g).abs()
        };
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{kernel_matrix, mean_map, Dataset, KernelSpec};
    use crate::selectors::{select, Method};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_instance(seed: u64, n1: usize, n2: usize) -> (KernelMatrix, MeanMap) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
                .collect();
            Dataset::from_rows(&rows).unwrap()
        };
        let src = draw(n2);
        let tgt = draw(n1);
        let spec = KernelSpec::gaussian(1.2).unwrap();
        (
            kernel_matrix(&src, &spec).unwrap(),
            mean_map(&tgt, &src, &spec).unwrap(),
        )
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(20, 10), 184_756);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
    }

    #[test]
    fn exhaustive_full_support_is_unrestricted_optimum() {
        let (k, mu) = gaussian_instance(1, 6, 5);
        let (s, v) = exhaustive_optimal(&k, &mu, 5).unwrap();
        let all = SupportSet::new((0..5).collect(), 5).unwrap();
        let z = solve_restricted(&k, &mu, &all, &SolverConfig::default()).unwrap();
        assert!((v - objective(&z, &k, &mu).unwrap()).abs() < 1e-12);
        assert!(s.len() <= 5);
    }

    #[test]
    fn exhaustive_identity_singleton() {
        let k = KernelMatrix::identity(3);
        let mu = MeanMap::new(vec![0.9, 0.5, 0.1], 1).unwrap();
        let (s, v) = exhaustive_optimal(&k, &mu, 1).unwrap();
        assert_eq!(s.as_slice(), &[0]);
        assert!((v - 0.405).abs() < 1e-15);
    }

    #[test]
    fn exhaustive_dominates_selectors() {
        let (k, mu) = gaussian_instance(2, 10, 8);
        let (_, best) = exhaustive_optimal(&k, &mu, 3).unwrap();
        for method in Method::ALL {
            let r = select(method, &k, &mu, &SelectionConfig::sparsity(3)).unwrap();
            let f = if method.learns_weights() {
                r.objective()
            } else {
                objective(&r.weights, &k, &mu).unwrap()
            };
            assert!(best >= f - 1e-12, "{method:?}");
        }
    }

    #[test]
    fn guard_rejects_large_instances() {
        let k = KernelMatrix::identity(21);
        let mu = MeanMap::new(vec![0.1; 21], 1).unwrap();
        assert!(matches!(
            exhaustive_optimal(&k, &mu, 2),
            Err(Error::Guard(_))
        ));
        assert!(matches!(rsc_rsm_bounds(&k, 3), Err(Error::Guard(_))));
        // full spectrum is allowed at any size
        assert!(rsc_rsm_bounds(&k, 21).is_ok());
    }

    #[test]
    fn modular_case_has_unit_ratio() {
        let k = KernelMatrix::identity(5);
        let mu = MeanMap::new(vec![0.3, 0.8, 0.1, 0.5, 0.6], 1).unwrap();
        for base in [vec![], vec![1], vec![0, 3]] {
            let base = SupportSet::new(base, 5).unwrap();
            for r in 1..=3 {
                let g = submodularity_ratio(&k, &mu, &base, r).unwrap();
                assert!((g - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singleton_ratio_is_one() {
        let (k, mu) = gaussian_instance(3, 8, 7);
        let base = SupportSet::new(vec![2], 7).unwrap();
        let g = submodularity_ratio(&k, &mu, &base, 1).unwrap();
        assert_eq!(g, 1.0);
    }

    #[test]
    fn ratio_matches_independent_enumeration() {
        let (k, mu) = gaussian_instance(4, 9, 8);
        let base = SupportSet::new(vec![0, 5], 8).unwrap();
        let g = submodularity_ratio(&k, &mu, &base, 2).unwrap();
        let f = |idx: &[usize]| {
            let mut all = vec![0, 5];
            all.extend_from_slice(idx);
            let s = SupportSet::new(all, 8).unwrap();
            let z = solve_restricted(&k, &mu, &s, &SolverConfig::default()).unwrap();
            objective(&z, &k, &mu).unwrap()
        };
        let f0 = f(&[]);
        let free = [1, 2, 3, 4, 6, 7];
        let mut expected = f64::INFINITY;
        for (a, &i) in free.iter().enumerate() {
            let gi = f(&[i]) - f0;
            if gi > 1e-12 {
                expected = expected.min(1.0);
            }
            for &j in &free[a + 1..] {
                let joint = f(&[i, j]) - f0;
                if joint > 1e-12 {
                    expected = expected.min((gi + f(&[j]) - f0) / joint);
                }
            }
        }
        assert!(g > 0.0);
        assert!((g - expected).abs() < 1e-12);
    }

    #[test]
    fn eigen_bounds_examples() {
        let id = KernelMatrix::identity(4);
        for k in 1..=4 {
            let b = rsc_rsm_bounds(&id, k).unwrap();
            assert!((b.c - 1.0).abs() < 1e-12 && (b.big_c - 1.0).abs() < 1e-12);
        }
        let (k, _) = gaussian_instance(5, 3, 6);
        let b1 = rsc_rsm_bounds(&k, 1).unwrap();
        let diag: Vec<f64> = (0..6).map(|i| k.get(i, i)).collect();
        assert_eq!(b1.c, diag.iter().copied().fold(f64::INFINITY, f64::min));
        assert_eq!(
            b1.big_c,
            diag.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        );
    }

    #[test]
    fn eigen_bounds_match_minor_enumeration() {
        let (k, _) = gaussian_instance(6, 3, 6);
        let b = rsc_rsm_bounds(&k, 3).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in 0..6 {
            for c in a + 1..6 {
                for d in c + 1..6 {
                    let sub = k.submatrix(&[a, c, d]);
                    let eig = nalgebra::SymmetricEigen::new(sub).eigenvalues;
                    lo = lo.min(eig.min());
                    hi = hi.max(eig.max());
                }
            }
        }
        assert!((b.c - lo).abs() < 1e-12);
        assert!((b.big_c - hi).abs() < 1e-12);
        assert!(b.c > 0.0 && b.c <= b.big_c);
    }

    #[test]
    fn identity_guarantee_is_tight() {
        let k = KernelMatrix::identity(5);
        let mu = MeanMap::new(vec![0.3, 0.8, 0.1, 0.5, 0.6], 1).unwrap();
        let r = verify_guarantee(&k, &mu, 2).unwrap();
        assert!((r.gamma - 1.0).abs() < 1e-12);
        assert!((r.f_dash - r.f_opt).abs() < 1e-15);
        assert!(r.satisfied);
    }

    #[test]
    fn full_sparsity_guarantee() {
        let (k, mu) = gaussian_instance(7, 8, 5);
        let r = verify_guarantee(&k, &mu, 5).unwrap();
        assert!((r.f_dash - r.f_opt).abs() < 1e-10);
        assert!(r.satisfied);
        let g = verify_greedy_guarantee(&k, &mu, 5).unwrap();
        assert!(g.satisfied);
    }

    #[test]
    fn ratio_respects_eigen_lower_bound() {
        for seed in 0..10 {
            let (k, mu) = gaussian_instance(100 + seed, 8, 7);
            let dash = proto_dash(&k, &mu, &SelectionConfig::sparsity(2)).unwrap();
            let gamma = prefix_submodularity_ratio(&k, &mu, &dash.indices, 2).unwrap();
            // every (L, S) pair here has |L| + |S| <= 4
            let b = rsc_rsm_bounds(&k, 4).unwrap();
            assert!(gamma >= b.c / b.c_tilde_1 - 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn finite_differences() {
        let (k, mu) = gaussian_instance(8, 8, 6);
        let s = SupportSet::new(vec![0, 2, 4], 6).unwrap();
        let w = WeightVector::new(s, vec![0.3, 0.1, 0.6], 6).unwrap();
        assert!(finite_difference_check(&k, &mu, &w, 1e-6).unwrap() <= 1e-5);
        assert!(finite_difference_check(&k, &mu, &WeightVector::zeros(6), 1e-6).unwrap() <= 1e-5);

        let id = KernelMatrix::identity(2);
        let mu = MeanMap::new(vec![0.4, 0.7], 1).unwrap();
        let all = SupportSet::new(vec![0, 1], 2).unwrap();
        let w = WeightVector::new(all, vec![0.4, 0.7], 2).unwrap();
        assert!(finite_difference_check(&id, &mu, &w, 1e-6).unwrap() <= 1e-9);
    }
}
