//! Closed-form tail-confusion analysis with its simulation oracle, and the
//! network operation count.

mod confusion;
mod flops;

pub use confusion::{
    binomial, dangerous_set, hit_intensity, mc_no_hit, mc_tail_confusion, p_dangerous, p_delta, prob_no_hit,
    q_dangerous, tail_confusion_prob, DangerousSet, Estimate, VictimReplica, ENUMERATION_LIMIT,
};
pub use flops::{cnn_flops, conv_flops, dense_flops, output_flops, CnnArchitecture, FlopReport, FlopRow};
