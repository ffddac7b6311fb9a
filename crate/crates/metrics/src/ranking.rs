//! Per-experiment scores over the two evaluation scopes and their ranking.

use std::fmt;
use std::str::FromStr;

use crate::error::{MetricsError, Result};

/// Evaluation scope: both collections, or the Mediterranean one only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    AB,
    B,
}

impl Scope {
    pub const ALL: [Scope; 2] = [Scope::AB, Scope::B];

    pub fn label(self) -> &'static str {
        match self {
            Scope::AB => "A,B",
            Scope::B => "B",
        }
    }
}

impl FromStr for Scope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace(' ', "").as_str() {
            "A,B" | "AB" => Ok(Scope::AB),
            "B" => Ok(Scope::B),
            _ => Err(format!("unknown scope '{s}' (\"A,B\" or \"B\")")),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Accuracies as fractions in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScopeScores {
    pub at1: f64,
    pub at5: f64,
    pub nat1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentScores {
    pub id: u32,
    pub scopes: Vec<(Scope, ScopeScores)>,
}

impl ExperimentScores {
    pub fn get(&self, scope: Scope) -> Option<&ScopeScores> {
        self.scopes.iter().find(|(s, _)| *s == scope).map(|(_, v)| v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedExperiment {
    pub id: u32,
    /// AT1 + AT5 over both scopes, in percentage points.
    pub total: f64,
}

/// Experiments ordered by descending total; the first one is the best.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    pub entries: Vec<RankedExperiment>,
}

impl Ranking {
    pub fn best(&self) -> Option<u32> {
        self.entries.first().map(|e| e.id)
    }
}

/// Sums AT1 and AT5 (as percentages) over scopes "A,B" and "B" for every
/// experiment and ranks by that sum, descending; equal sums rank the lower
/// experiment id first.
pub fn aggregate_experiment_scores(results: &[ExperimentScores]) -> Result<Ranking> {
    let mut entries = Vec::with_capacity(results.len());
    for r in results {
        let mut total = 0.0;
        for scope in Scope::ALL {
            let s = r.get(scope).ok_or_else(|| {
                MetricsError::Validation(format!("experiment {} has no \"{scope}\" scores", r.id))
            })?;
            total += 100.0 * s.at1 + 100.0 * s.at5;
        }
        entries.push(RankedExperiment { id: r.id, total });
    }
    entries.sort_by(|a, b| {
        b.total
            .partial_cmp(&a.total)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.id.cmp(&b.id))
    });
    Ok(Ranking { entries })
}

/// Table 4 of the reference study: `(id, [(AT1, AT5, NAT1) for "A,B"], [.. for "B"])`
/// in percent.
pub const PUBLISHED_TABLE4: [(u32, [f64; 3], [f64; 3]); 6] = [
    (1, [68.07, 89.53, 59.08], [50.02, 81.82, 44.25]),
    (2, [62.41, 86.81, 57.91], [48.94, 81.63, 44.44]),
    (3, [67.16, 89.27, 58.57], [49.66, 82.07, 44.31]),
    (4, [61.28, 86.52, 56.99], [48.85, 80.92, 44.44]),
    (5, [67.74, 89.28, 58.18], [48.12, 81.03, 42.34]),
    (6, [65.16, 88.94, 60.74], [50.59, 83.40, 46.53]),
];

/// [`PUBLISHED_TABLE4`] as fractional scores.
pub fn published_table4() -> Vec<ExperimentScores> {
    let frac = |v: [f64; 3]| ScopeScores {
        at1: v[0] / 100.0,
        at5: v[1] / 100.0,
        nat1: v[2] / 100.0,
    };
    PUBLISHED_TABLE4
        .iter()
        .map(|&(id, ab, b)| ExperimentScores {
            id,
            scopes: vec![(Scope::AB, frac(ab)), (Scope::B, frac(b))],
        })
        .collect()
}
