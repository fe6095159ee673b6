use serde::Serialize;

use super::lemma::{check_lemma_hypotheses, Lemma, LemmaReport};
use super::setb::{random_member, set_b_membership, SetBSpec};
use crate::dynamics::{Response, ResponseKind};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::operator::Operator;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InvarianceStatus {
    /// Hypotheses hold and every sample stayed in the set.
    Preserved,
    /// Hypotheses hold but some sample left the set.
    Violated,
    /// The lemma does not apply; the sample outcome is informative only.
    HypothesisUnmet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub status: InvarianceStatus,
    pub lemma: LemmaReport,
    pub spec: SetBSpec,
    pub samples: usize,
    pub all_preserved: bool,
    pub worst_violation: f64,
    /// Seed of the sample with the worst violation.
    pub worst_seed: u64,
}

/// Samples `n_samples` members of the lemma's set (seeds `seed..seed+n`),
/// applies `f(T)` and re-tests membership with tolerance
/// `1e-6 + 2 h max|bK|`.
pub fn verify_ft_invariance(
    kernel: &Kernel,
    grid: &Grid,
    response: &Response,
    lemma: Lemma,
    n_samples: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    let tol = 1e-6 + 2.0 * grid.spacing() * kernel.max_abs() * response.b.abs();
    let spec = SetBSpec::new(lemma.set_b(kernel), tol);
    verify_ft_invariance_with(kernel, grid, response, lemma, &spec, n_samples, seed)
}

pub fn verify_ft_invariance_with(
    kernel: &Kernel,
    grid: &Grid,
    response: &Response,
    lemma: Lemma,
    spec: &SetBSpec,
    n_samples: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    if response.kind != ResponseKind::Saturation {
        return Err(Error::invalid("invariance lemmas are stated for the saturation response"));
    }
    // clamp(b T u) is the b = 1 map for the kernel b K
    let lemma_report = check_lemma_hypotheses(&kernel.scaled(response.b), lemma)?;
    let op = Operator::new(kernel, grid)?;
    let seeds: Vec<u64> = (0..n_samples as u64).map(|i| seed.wrapping_add(i)).collect();
    let outcomes = par::map_slice(&seeds, |&sd| -> Result<f64> {
        let u = random_member(grid, spec.variant, sd)?;
        let image = op.apply(u.values());
        let v: Vec<f64> = image.iter().map(|&t| response.apply(t)).collect();
        let v = crate::field::Field::from_values(*grid, v)?;
        Ok(set_b_membership(&v, spec)?.worst)
    });
    let mut worst = 0.0f64;
    let mut worst_seed = seed;
    for (sd, outcome) in seeds.iter().zip(outcomes) {
        let w = outcome?;
        if w > worst {
            worst = w;
            worst_seed = *sd;
        }
    }
    let all_preserved = worst <= spec.tolerance;
    let status = if !lemma_report.applicable {
        InvarianceStatus::HypothesisUnmet
    } else if all_preserved {
        InvarianceStatus::Preserved
    } else {
        InvarianceStatus::Violated
    };
    Ok(InvarianceReport {
        status,
        lemma: lemma_report,
        spec: *spec,
        samples: n_samples,
        all_preserved,
        worst_violation: worst,
        worst_seed,
    })
}
