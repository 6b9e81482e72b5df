use proptest::prelude::*;
use protoselect::nnqp::{gradient, objective, solve_restricted};
use protoselect::oracle::{
    exhaustive_optimal, prefix_submodularity_ratio, rsc_rsm_bounds, verify_greedy_guarantee,
    verify_guarantee,
};
use protoselect::selectors::{l2c_adapted, l2c_equal, proto_dash, proto_greedy, select};
use protoselect::synthetic::{gaussian_instance, identity_instance, Instance, InstanceShape};
use protoselect::{Method, SelectionConfig, SolverConfig, SupportSet};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_instance(&mut rng, &InstanceShape::default()).unwrap()
}

fn f_of(inst: &Instance, indices: &[usize]) -> f64 {
    let support = SupportSet::new(indices.to_vec(), inst.kernel.size()).unwrap();
    let w = solve_restricted(&inst.kernel, &inst.mean, &support, &SolverConfig::default()).unwrap();
    objective(&w, &inst.kernel, &inst.mean).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_takes_the_best_increment_each_step(seed in any::<u64>()) {
        let inst = instance(seed);
        let n2 = inst.kernel.size();
        let result = proto_greedy(&inst.kernel, &inst.mean, &SelectionConfig::sparsity(inst.m)).unwrap();
        let chosen = result.indices.as_slice();
        for t in 0..chosen.len() {
            let prefix = &chosen[..t];
            let base = f_of(&inst, prefix);
            let gain = |j: usize| {
                let mut s = prefix.to_vec();
                s.push(j);
                f_of(&inst, &s) - base
            };
            let taken = gain(chosen[t]);
            for j in (0..n2).filter(|j| !prefix.contains(j)) {
                prop_assert!(taken >= gain(j) - 1e-12);
            }
        }
    }

    #[test]
    fn dash_maximizes_the_single_coordinate_lower_bound(seed in any::<u64>()) {
        // With a unit diagonal, the gain from adding j alone is max(g_j, 0)^2 / 2.
        let inst = instance(seed);
        let n2 = inst.kernel.size();
        let result = proto_dash(&inst.kernel, &inst.mean, &SelectionConfig::sparsity(inst.m)).unwrap();
        let chosen = result.indices.as_slice();
        for t in 0..chosen.len() {
            let support = SupportSet::new(chosen[..t].to_vec(), n2).unwrap();
            let w = solve_restricted(&inst.kernel, &inst.mean, &support, &SolverConfig::default()).unwrap();
            let g = gradient(&w, &inst.kernel, &inst.mean).unwrap();
            let bound = |j: usize| g[j].max(0.0).powi(2) / (2.0 * inst.kernel.get(j, j));
            for j in (0..n2).filter(|&j| !support.contains(j)) {
                prop_assert!(bound(chosen[t]) >= bound(j) - 1e-12);
            }
        }
    }

    #[test]
    fn learned_weight_traces_never_decrease(seed in any::<u64>(), oversample in 1usize..3) {
        let inst = instance(seed);
        let n2 = inst.kernel.size();
        for method in [Method::ProtoDash, Method::ProtoGreedy, Method::RandomW] {
            let m = (inst.m * 2).min(n2 / oversample);
            let cfg = SelectionConfig::sparsity(m).with_seed(seed).with_oversample(oversample);
            let r = select(method, &inst.kernel, &inst.mean, &cfg).unwrap();
            prop_assert_eq!(r.objective_trace.len(), r.len());
            prop_assert!(r.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-10));
        }
    }

    #[test]
    fn exhaustive_optimum_dominates_every_selector(seed in any::<u64>()) {
        let inst = instance(seed);
        let (_, best) = exhaustive_optimal(&inst.kernel, &inst.mean, inst.m).unwrap();
        for method in Method::ALL {
            let cfg = SelectionConfig::sparsity(inst.m).with_seed(seed);
            let r = select(method, &inst.kernel, &inst.mean, &cfg).unwrap();
            prop_assert!(r.objective() <= best + 1e-10, "{:?}", method);
        }
    }

    #[test]
    fn zero_gradient_candidates_add_nothing(seed in any::<u64>()) {
        let inst = instance(seed);
        let n2 = inst.kernel.size();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let size = rng.random_range(1..n2);
        let base = sample(&mut rng, n2, size).into_vec();
        let support = SupportSet::new(base.clone(), n2).unwrap();
        let w = solve_restricted(&inst.kernel, &inst.mean, &support, &SolverConfig::default()).unwrap();
        let g = gradient(&w, &inst.kernel, &inst.mean).unwrap();
        let f = objective(&w, &inst.kernel, &inst.mean).unwrap();
        for j in (0..n2).filter(|&j| !support.contains(j) && g[j] <= 0.0) {
            let mut wider = base.clone();
            wider.push(j);
            let wider = SupportSet::new(wider, n2).unwrap();
            let next = solve_restricted(&inst.kernel, &inst.mean, &wider, &SolverConfig::default()).unwrap();
            prop_assert_eq!(next.get(j), 0.0);
            prop_assert!((objective(&next, &inst.kernel, &inst.mean).unwrap() - f).abs() <= 1e-8);
        }
    }

    #[test]
    fn curvature_lies_between_sparse_eigenvalues(seed in any::<u64>()) {
        let inst = instance(seed);
        let n2 = inst.kernel.size();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..=n2);
        let bounds = rsc_rsm_bounds(&inst.kernel, k).unwrap();
        let idx = sample(&mut rng, n2, k).into_vec();
        let d: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut quad = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                quad += d[a] * d[b] * inst.kernel.get(i, j);
            }
        }
        let norm: f64 = d.iter().map(|v| v * v).sum();
        prop_assert!(quad >= bounds.c * norm - 1e-9);
        prop_assert!(quad <= bounds.big_c * norm + 1e-9);
    }

    #[test]
    fn guarantees_hold(seed in any::<u64>()) {
        let inst = instance(seed);
        let dash = verify_guarantee(&inst.kernel, &inst.mean, inst.m).unwrap();
        prop_assert!(dash.satisfied);
        prop_assert!(dash.c > 0.0 && dash.c <= dash.c_tilde + 1e-12);
        prop_assert!(dash.gamma > 0.0);
        prop_assert!(dash.bound_with_c_m <= dash.bound + 1e-12);
        prop_assert!(verify_greedy_guarantee(&inst.kernel, &inst.mean, inst.m).unwrap().satisfied);
    }

    #[test]
    fn ratio_is_at_least_curvature_quotient(seed in any::<u64>()) {
        let inst = instance(seed);
        let dash = proto_dash(&inst.kernel, &inst.mean, &SelectionConfig::sparsity(inst.m)).unwrap();
        if let Ok(gamma) = prefix_submodularity_ratio(&inst.kernel, &inst.mean, &dash.indices, inst.m) {
            let bounds = rsc_rsm_bounds(&inst.kernel, (dash.len() + inst.m).min(inst.kernel.size())).unwrap();
            prop_assert!(gamma >= bounds.c / bounds.c_tilde_1 - 1e-9);
        }
    }

    #[test]
    fn identity_kernel_dash_is_optimal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = identity_instance(&mut rng, &InstanceShape::default()).unwrap();
        let report = verify_guarantee(&inst.kernel, &inst.mean, inst.m).unwrap();
        prop_assert!((report.f_dash - report.f_opt).abs() <= 1e-12);
        prop_assert!((report.gamma - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn adapted_baseline_equals_equal_weight_baseline_on_same_mean_map() {
    for seed in 0..20 {
        let inst = instance(seed);
        let cfg = SelectionConfig::sparsity(inst.m);
        let a = l2c_equal(&inst.kernel, &inst.mean, &cfg).unwrap();
        let b = l2c_adapted(&inst.kernel, &inst.mean, &cfg).unwrap();
        assert_eq!(a.indices, b.indices);
        assert_eq!(a.objective_trace, b.objective_trace);
    }
}

#[test]
fn results_are_bit_identical_across_runs() {
    for seed in 0..10 {
        let inst = instance(seed);
        for method in Method::ALL {
            let cfg = SelectionConfig::sparsity(inst.m).with_seed(seed);
            let mut a = select(method, &inst.kernel, &inst.mean, &cfg).unwrap();
            let mut b = select(method, &inst.kernel, &inst.mean, &cfg).unwrap();
            a.wall_times.clear();
            b.wall_times.clear();
            assert_eq!(a, b);
        }
    }
}
