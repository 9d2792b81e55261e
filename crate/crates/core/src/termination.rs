//! Stopping rules: search length, clustering (diversity loss) and
//! convergence of the best value.

use std::collections::VecDeque;
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceCriterion {
    pub epsilon: f64,
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct TerminationConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diversity_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceCriterion>,
}

impl TerminationConfig {
    pub fn search_length(t_max: u64) -> Self {
        Self { t_max: Some(t_max), ..Self::default() }
    }

    /// Problems as `(field, message)` pairs.
    pub fn validate(&self) -> Vec<(&'static str, String)> {
        let mut errs = Vec::new();
        if self.t_max.is_none() && self.diversity_threshold.is_none() && self.convergence.is_none() {
            errs.push(("", "at least one termination criterion must be enabled".to_string()));
        }
        if self.t_max == Some(0) {
            errs.push(("t_max", "must be at least 1".to_string()));
        }
        if let Some(d) = self.diversity_threshold {
            if !(d >= 0.0 && d.is_finite()) {
                errs.push(("diversity_threshold", format!("must be finite and nonnegative, got {d}")));
            }
        }
        if let Some(c) = self.convergence {
            if !(c.epsilon >= 0.0 && c.epsilon.is_finite()) {
                errs.push(("convergence.epsilon", format!("must be finite and nonnegative, got {}", c.epsilon)));
            }
            if c.window == 0 {
                errs.push(("convergence.window", "must be at least 1".to_string()));
            }
        }
        errs
    }

    pub fn window(&self) -> usize {
        self.convergence.map_or(0, |c| c.window)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmStatistics {
    pub iteration: u64,
    pub best_memory_objective: f64,
    pub swarm_diversity: f64,
    /// Last `W` best values, oldest first.
    pub best_history: VecDeque<f64>,
}

impl SwarmStatistics {
    pub fn new(iteration: u64, best: f64, diversity: f64) -> Self {
        Self { iteration, best_memory_objective: best, swarm_diversity: diversity, best_history: VecDeque::from([best]) }
    }

    /// Advances to `iteration`, keeping at most `window` best values.
    pub fn record(&mut self, iteration: u64, best: f64, diversity: f64, window: usize) {
        self.iteration = iteration;
        self.best_memory_objective = best;
        self.swarm_diversity = diversity;
        self.best_history.push_back(best);
        while self.best_history.len() > window.max(1) {
            self.best_history.pop_front();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    SearchLength,
    Clustering,
    Convergence,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::SearchLength => "SearchLength",
            StopReason::Clustering => "Clustering",
            StopReason::Convergence => "Convergence",
        })
    }
}

/// Mean Euclidean distance to the centroid; 0 for an empty swarm.
pub fn swarm_diversity<P: AsRef<[f64]>>(positions: &[P]) -> f64 {
    let m = positions.len();
    if m == 0 {
        return 0.0;
    }
    let d = positions[0].as_ref().len();
    let mut centroid = vec![0.0; d];
    for x in positions {
        for (c, v) in centroid.iter_mut().zip(x.as_ref()) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= m as f64);
    positions.iter().map(|x| x.as_ref().iter().zip(&centroid).map(|(v, c)| (v - c) * (v - c)).sum::<f64>().sqrt()).sum::<f64>() / m as f64
}

/// Checks search length, clustering and convergence, in that order.
/// Convergence needs a full window: improvement is the oldest minus the
/// newest best value in the history.
pub fn should_stop(stats: &SwarmStatistics, config: &TerminationConfig) -> Option<StopReason> {
    if config.t_max.is_some_and(|t| stats.iteration >= t) {
        return Some(StopReason::SearchLength);
    }
    if config.diversity_threshold.is_some_and(|th| stats.swarm_diversity < th) {
        return Some(StopReason::Clustering);
    }
    if let Some(c) = config.convergence {
        let h = &stats.best_history;
        if h.len() >= c.window {
            if let (Some(first), Some(last)) = (h.front(), h.back()) {
                if first - last < c.epsilon {
                    return Some(StopReason::Convergence);
                }
            }
        }
    }
    None
}
