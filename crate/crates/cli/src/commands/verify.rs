use protoselect::oracle::{
    verify_greedy_guarantee, verify_guarantee, GreedyGuaranteeReport, GuaranteeReport,
};
use protoselect::synthetic::{gaussian_instance, identity_instance, InstanceShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::emit;
use crate::args::VerifyArgs;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub instance: usize,
    pub n1: Option<usize>,
    pub n2: usize,
    pub sigma: Option<f64>,
    pub dash: GuaranteeReport,
    pub greedy: GreedyGuaranteeReport,
}

impl InstanceReport {
    pub fn satisfied(&self) -> bool {
        self.dash.satisfied && self.greedy.satisfied
    }
}

fn shape(args: &VerifyArgs) -> CliResult<InstanceShape> {
    if args.max_n2 < 2 || args.max_n1 < 2 || args.max_m == 0 || args.dim == 0 {
        return Err(CliError::Usage(
            "instance sizes need max-n1, max-n2 >= 2 and max-m, dim >= 1".into(),
        ));
    }
    if !(args.min_sigma > 0.0 && args.min_sigma <= args.max_sigma) {
        return Err(CliError::Usage("need 0 < min-sigma <= max-sigma".into()));
    }
    Ok(InstanceShape {
        max_n1: args.max_n1,
        max_n2: args.max_n2,
        max_m: args.max_m,
        min_sigma: args.min_sigma,
        max_sigma: args.max_sigma,
        dim: args.dim,
    })
}

/// Generates and checks every instance. Instance `i` draws from stream `i`
/// of the seeded generator, so reports do not depend on scheduling.
pub fn sweep(args: &VerifyArgs) -> CliResult<Vec<InstanceReport>> {
    let shape = shape(args)?;
    (0..args.instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            rng.set_stream(i as u64);
            let inst = if args.identity_kernel {
                identity_instance(&mut rng, &shape)?
            } else {
                gaussian_instance(&mut rng, &shape)?
            };
            Ok(InstanceReport {
                instance: i,
                n1: inst.target.as_ref().map(|t| t.rows()),
                n2: inst.kernel.size(),
                sigma: inst.spec.and_then(|s| s.bandwidth()),
                dash: verify_guarantee(&inst.kernel, &inst.mean, inst.m)?,
                greedy: verify_greedy_guarantee(&inst.kernel, &inst.mean, inst.m)?,
            })
        })
        .collect::<protoselect::Result<Vec<_>>>()
        .map_err(CliError::from)
}

/// Writes one JSON line per instance and a final `violations: N` line.
pub fn run_verify(args: &VerifyArgs) -> CliResult<Vec<InstanceReport>> {
    let reports = sweep(args)?;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&serde_json::to_string(r).expect("reports serialize"));
        text.push('\n');
    }
    let violations = reports.iter().filter(|r| !r.satisfied()).count();
    text.push_str(&format!("violations: {violations}\n"));
    emit(args.out.as_deref(), &text)?;
    if violations > 0 {
        return Err(CliError::Violations(violations));
    }
    Ok(reports)
}
