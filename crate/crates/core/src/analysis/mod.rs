//! Verification and post-processing: lemma hypotheses, invariant-set
//! membership, `f(T)`-invariance sampling, Newton refinement, branch scans
//! and stripe wavelengths.

mod bifurcation;
mod invariance;
mod lemma;
mod newton;
mod setb;
mod wavelength;

pub use bifurcation::{bifurcation_scan, BranchPoint, ScanOptions};
pub use invariance::{verify_ft_invariance, verify_ft_invariance_with, InvarianceReport, InvarianceStatus};
pub use lemma::{check_lemma_hypotheses, Hypothesis, Lemma, LemmaReport};
pub use newton::{newton_refine, newton_refine_with, residual, NewtonReport, NEWTON_CAP};
pub use setb::{random_member, set_b_membership, Membership, SetBSpec, SetBVariant, Violation, ViolationKind};
pub use wavelength::{stripe_wavelength, Wavelength, MIN_PROMINENCE};
