//! Closed-form multi-valued harmonic test functions and the diagnostics
//! run on them: branch sets, symmetric-part decay, frequency, boundary
//! kernel and Hardt–Simon quantities, reflection, homogeneity and
//! translation invariance.

mod blowup;
mod diagnostics;
mod fields;

use std::sync::Arc;

pub use blowup::{boundary_estimate_check, hardt_simon_check, BlowupCandidate, KernelCheck, MinusAffine, Rescaled};
pub use diagnostics::{
    average_at, average_symmetric_split, branch_set_detect, frequency_function, good_decay_check,
    homogeneity_deviation, laplacian_defect, linearity_classify, observed_orders, outer_mass_fraction,
    translation_invariance_set, wall_directions, wall_laplacian_audit, DecayRatio, FrequencyRung,
    GoodDecayReport, Homogeneity, Invariance, Linearity,
};
pub use fields::{
    jacobian_at, odd_reflection, BranchPower, Components, Cone, LinearTuple, Monomial, Reflected, SumOf,
    ZeroTraceBranch,
};

use crate::aq::QField;

/// The named planar functions of the lab, for library-wide sweeps.
pub fn library() -> Vec<(&'static str, Arc<dyn QField>)> {
    let bp = |q, p, c| Arc::new(BranchPower::new(2, q, p, c).expect("valid")) as Arc<dyn QField>;
    vec![
        ("branch_power_2_3", bp(2, 3, Components::Both)),
        ("branch_power_2_3_re", bp(2, 3, Components::Re)),
        ("branch_power_3_4_re", bp(3, 4, Components::Re)),
        ("branch_power_2_5_re", bp(2, 5, Components::Re)),
        (
            "linear_tuple",
            Arc::new(LinearTuple::new(2, vec![1.0, -1.0]).expect("valid")),
        ),
        (
            "linear_tuple_3",
            Arc::new(LinearTuple::balanced(2, vec![2.0, 0.5, -1.0]).expect("valid")),
        ),
        ("zero_trace", Arc::new(ZeroTraceBranch { c: 0.5 })),
        (
            "sum_of",
            Arc::new(
                SumOf::new(
                    Arc::new(Monomial { n: 2, degree: 2, imaginary: false }),
                    bp(2, 3, Components::Re),
                )
                .expect("valid"),
            ),
        ),
    ]
}
