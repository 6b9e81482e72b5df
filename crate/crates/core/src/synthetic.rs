//! Seeded synthetic data for verification sweeps, benchmarks and demos.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernel::{kernel_matrix, mean_map, Dataset, KernelMatrix, KernelSpec, MeanMap};

/// Isotropic gaussian blob: `n` rows around `center` with standard deviation `spread`.
pub fn blob<R: Rng + ?Sized>(
    rng: &mut R,
    center: &[f64],
    spread: f64,
    n: usize,
) -> Result<Dataset> {
    let d = center.len();
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        for c in center {
            let z: f64 = StandardNormal.sample(rng);
            values.push(c + spread * z);
        }
    }
    Dataset::new(values, n, d)
}

/// Gaussian mixture sample with `counts[c]` rows from component `c`.
/// Rows are grouped by component; the returned labels give each row's component.
pub fn mixture<R: Rng + ?Sized>(
    rng: &mut R,
    centers: &[Vec<f64>],
    spread: f64,
    counts: &[usize],
) -> Result<(Dataset, Vec<usize>)> {
    let mut parts = Vec::new();
    let mut labels = Vec::new();
    for (c, (center, &n)) in centers.iter().zip(counts).enumerate() {
        if n == 0 {
            continue;
        }
        parts.push(blob(rng, center, spread, n)?);
        labels.extend(std::iter::repeat_n(c, n));
    }
    let refs: Vec<&Dataset> = parts.iter().collect();
    Ok((Dataset::concat(&refs)?, labels))
}

/// Random centers drawn uniformly from `[-scale, scale]^dim`.
pub fn random_centers<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    dim: usize,
    scale: f64,
) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| (0..dim).map(|_| rng.random_range(-scale..=scale)).collect())
        .collect()
}

/// Shape of the random instances used by the guarantee sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceShape {
    pub max_n1: usize,
    pub max_n2: usize,
    pub max_m: usize,
    pub min_sigma: f64,
    pub max_sigma: f64,
    pub dim: usize,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self {
            max_n1: 15,
            max_n2: 10,
            max_m: 3,
            min_sigma: 0.5,
            max_sigma: 2.0,
            dim: 2,
        }
    }
}

/// A kernelized instance together with the data it came from.
#[derive(Debug, Clone)]
pub struct Instance {
    pub target: Option<Dataset>,
    pub source: Option<Dataset>,
    pub spec: Option<KernelSpec>,
    pub kernel: KernelMatrix,
    pub mean: MeanMap,
    pub m: usize,
}

/// Gaussian-kernel instance: source rows from a standard normal, target rows
/// from a standard normal around a random shift, so the two samples differ.
pub fn gaussian_instance<R: Rng + ?Sized>(rng: &mut R, shape: &InstanceShape) -> Result<Instance> {
    let n1 = rng.random_range(2..=shape.max_n1.max(2));
    let n2 = rng.random_range(2..=shape.max_n2.max(2));
    let m = rng.random_range(1..=shape.max_m.clamp(1, n2));
    let sigma = rng.random_range(shape.min_sigma..=shape.max_sigma);
    let shift: Vec<f64> = (0..shape.dim)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let source = blob(rng, &vec![0.0; shape.dim], 1.0, n2)?;
    let target = blob(rng, &shift, 1.0, n1)?;
    let spec = KernelSpec::gaussian(sigma)?;
    Ok(Instance {
        kernel: kernel_matrix(&source, &spec)?,
        mean: mean_map(&target, &source, &spec)?,
        target: Some(target),
        source: Some(source),
        spec: Some(spec),
        m,
    })
}

/// Identity-kernel instance with mean-map entries drawn from `[-0.2, 1]`.
/// The objective is separable, so every submodularity ratio equals one.
pub fn identity_instance<R: Rng + ?Sized>(rng: &mut R, shape: &InstanceShape) -> Result<Instance> {
    let n2 = rng.random_range(2..=shape.max_n2.max(2));
    let m = rng.random_range(1..=shape.max_m.clamp(1, n2));
    let entries = (0..n2).map(|_| rng.random_range(-0.2..=1.0)).collect();
    Ok(Instance {
        target: None,
        source: None,
        spec: None,
        kernel: KernelMatrix::identity(n2),
        mean: MeanMap::new(entries, 1)?,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn instances_respect_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let shape = InstanceShape::default();
        for _ in 0..50 {
            let inst = gaussian_instance(&mut rng, &shape).unwrap();
            let n2 = inst.kernel.size();
            assert!((2..=10).contains(&n2));
            assert!(inst.m >= 1 && inst.m <= 3.min(n2));
            assert!(inst.target.as_ref().unwrap().rows() <= 15);
            let sigma = inst.spec.unwrap().bandwidth().unwrap();
            assert!((0.5..=2.0).contains(&sigma));
            assert!(inst.mean.as_slice().iter().all(|&v| v > 0.0 && v <= 1.0));
        }
    }

    #[test]
    fn mixture_labels_follow_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let centers = random_centers(&mut rng, 3, 2, 5.0);
        let (data, labels) = mixture(&mut rng, &centers, 0.5, &[2, 0, 3]).unwrap();
        assert_eq!(data.rows(), 5);
        assert_eq!(labels, vec![0, 0, 2, 2, 2]);
    }
}
