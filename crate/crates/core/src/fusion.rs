//! Decision fusion across receive antennas.
//!
//! Each antenna's probability vector is first reduced to a hard label (ties
//! within 1e-9 broken uniformly at random), then the labels are combined by
//! plurality vote or by an n-out-of-N_r rule.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cnn::DecisionVector;
use crate::error::{Error, Result};

/// Probabilities within this distance of the maximum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionRule {
    /// Plurality vote; ties broken at random.
    #[default]
    Majority,
    /// A class is declared once at least `n` antennas agree on it.
    NOutOf(usize),
    /// Average the decision vectors, then take the argmax. Not a hard-label
    /// rule; kept for comparison experiments.
    SoftAverage,
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionRule::Majority => f.write_str("majority"),
            FusionRule::NOutOf(n) => write!(f, "{n}-out-of"),
            FusionRule::SoftAverage => f.write_str("soft-average"),
        }
    }
}

impl FromStr for FusionRule {
    type Err = Error;

    /// Accepts `majority`, `soft-average`, `N-out-of` and `n-out-of:N`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "majority" => return Ok(FusionRule::Majority),
            "soft-average" | "soft_average" => return Ok(FusionRule::SoftAverage),
            _ => {}
        }
        let n = s
            .strip_prefix("n-out-of:")
            .or_else(|| s.strip_suffix("-out-of"))
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or_else(|| Error::config(format!("unknown fusion rule `{s}`")))?;
        Ok(FusionRule::NOutOf(n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutcome<L> {
    /// `None` exactly when `undecided`.
    pub final_label: Option<L>,
    pub per_antenna_labels: Vec<L>,
    pub tie_broken: bool,
    pub undecided: bool,
}

/// Label with the largest probability; ties are resolved uniformly at random
/// and reported.
pub fn decide_single<R: Rng + ?Sized>(d: &DecisionVector, rng: &mut R) -> (usize, bool) {
    let probs = d.probs();
    let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..probs.len())
        .filter(|&k| probs[k] >= max - TIE_TOLERANCE)
        .collect();
    if tied.len() == 1 {
        (tied[0], false)
    } else {
        (*tied.choose(rng).unwrap(), true)
    }
}

/// Distinct labels with their vote counts, in order of first appearance.
fn tally<L: Copy + PartialEq>(labels: &[L]) -> Vec<(L, usize)> {
    let mut counts: Vec<(L, usize)> = Vec::new();
    for &l in labels {
        match counts.iter_mut().find(|(c, _)| *c == l) {
            Some((_, n)) => *n += 1,
            None => counts.push((l, 1)),
        }
    }
    counts
}

/// Combines per-antenna hard labels.
pub fn fuse<L: Copy + PartialEq, R: Rng + ?Sized>(labels: &[L], rule: FusionRule, rng: &mut R) -> Result<FusionOutcome<L>> {
    if labels.is_empty() {
        return Err(Error::data("no labels to fuse"));
    }
    let counts = tally(labels);
    let decided = |label: L, tie_broken: bool| FusionOutcome {
        final_label: Some(label),
        per_antenna_labels: labels.to_vec(),
        tie_broken,
        undecided: false,
    };
    match rule {
        FusionRule::Majority | FusionRule::SoftAverage => {
            let top = counts.iter().map(|c| c.1).max().unwrap();
            let tied: Vec<L> = counts.iter().filter(|c| c.1 == top).map(|c| c.0).collect();
            if tied.len() == 1 {
                Ok(decided(tied[0], false))
            } else {
                Ok(decided(*tied.choose(rng).unwrap(), true))
            }
        }
        FusionRule::NOutOf(n) => {
            if n == 0 || n > labels.len() {
                return Err(Error::config(format!(
                    "n-out-of rule needs 1 <= n <= {}, got {n}",
                    labels.len()
                )));
            }
            Ok(match counts.iter().find(|c| c.1 >= n) {
                Some(&(label, _)) => decided(label, false),
                None => FusionOutcome {
                    final_label: None,
                    per_antenna_labels: labels.to_vec(),
                    tie_broken: false,
                    undecided: true,
                },
            })
        }
    }
}

/// Per-antenna decision vectors to a fused class index.
pub fn fuse_decisions<R: Rng + ?Sized>(
    decisions: &[DecisionVector],
    rule: FusionRule,
    rng: &mut R,
) -> Result<FusionOutcome<usize>> {
    if decisions.is_empty() {
        return Err(Error::data("no decision vectors to fuse"));
    }
    let k = decisions[0].len();
    if decisions.iter().any(|d| d.len() != k) {
        return Err(Error::data("decision vectors differ in length"));
    }
    let mut any_tie = false;
    let labels: Vec<usize> = decisions
        .iter()
        .map(|d| {
            let (l, tie) = decide_single(d, rng);
            any_tie |= tie;
            l
        })
        .collect();
    if rule == FusionRule::SoftAverage {
        let mut mean = vec![0.0; k];
        for d in decisions {
            mean.iter_mut().zip(d.probs()).for_each(|(m, p)| *m += p / decisions.len() as f64);
        }
        let (label, tie) = decide_single(&DecisionVector::new(mean)?, rng);
        return Ok(FusionOutcome {
            final_label: Some(label),
            per_antenna_labels: labels,
            tie_broken: tie,
            undecided: false,
        });
    }
    let mut outcome = fuse(&labels, rule, rng)?;
    outcome.tie_broken |= any_tie;
    Ok(outcome)
}
