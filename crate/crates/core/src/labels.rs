//! Prediction targets: success, yards and progress.

use serde::{Deserialize, Serialize};

use crate::playparse::{PlayFeatures, PlayOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayLabels {
    pub success: bool,
    pub yards: f64,
    pub progress: f64,
}

/// A play succeeds when it reaches the line to gain or scores.
pub fn success_label(outcome: &PlayOutcome, togo: u32) -> bool {
    outcome.touchdown || outcome.gained >= togo as i32
}

/// Down-aware progress towards a first down, in `[0, 1]`.
///
/// Conversions score 1. A failed third or fourth down scores 0. On first
/// and second down the fraction of the distance gained is raised to the
/// power of the down, so the same gain is worth less on second down.
/// Losses are clamped to 0 before exponentiation.
pub fn progress(down: u8, togo: u32, gained: i32) -> f64 {
    let togo = togo.max(1) as i64;
    let gained = gained as i64;
    if gained >= togo {
        return 1.0;
    }
    if down >= 3 || gained <= 0 {
        return 0.0;
    }
    // integer powers then one division keeps worked values exact (49/100)
    let exp = down as u32;
    gained.pow(exp) as f64 / togo.pow(exp) as f64
}

pub fn label_play(features: &PlayFeatures, outcome: &PlayOutcome) -> PlayLabels {
    let success = success_label(outcome, features.togo);
    let progress = if outcome.touchdown { 1.0 } else { progress(features.down, features.togo, outcome.gained) };
    PlayLabels { success, yards: outcome.gained as f64, progress }
}
