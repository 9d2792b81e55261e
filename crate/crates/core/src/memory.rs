//! Information gathering, social-attractor selection, memory update and the
//! constraint-handling techniques (CHTs) that decide what "better" means.
//!
//! The CHT is a particle attribute: every comparison is made with the
//! comparator of the particle doing the choosing, so two particles may rank
//! the same pair of locations differently.

use std::cmp::Ordering;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sociometry::ConnectivityMatrix;

/// Absolute tolerance on each constraint violation.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MemoryError {
    #[error("both evaluations are infeasible and the preserving-feasibility handler cannot rank them")]
    IncomparableInfeasible,
    #[error("no feasible candidate in the neighbourhood")]
    NoValidAttractor,
    #[error("no candidates to choose from")]
    NoCandidates,
}

/// Objective value (minimised) and constraint violation magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub objective: f64,
    pub violations: Vec<f64>,
    pub feasible: bool,
}

impl Evaluation {
    pub fn new(objective: f64, violations: Vec<f64>) -> Self {
        let feasible = violations.iter().all(|&v| v <= FEASIBILITY_TOLERANCE);
        Self { objective, violations, feasible }
    }

    pub fn unconstrained(objective: f64) -> Self {
        Self::new(objective, Vec::new())
    }

    pub fn total_violation(&self) -> f64 {
        self.violations.iter().sum()
    }
}

/// A position together with its evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub position: Vec<f64>,
    pub evaluation: Evaluation,
}

impl Experience {
    pub fn new(position: Vec<f64>, evaluation: Evaluation) -> Self {
        Self { position, evaluation }
    }
}

/// Coefficient lookup for the penalty method. Only the static schedule is
/// provided; adaptive schemes plug in here.
pub trait PenaltySchedule {
    fn coefficient(&self, constraint: usize, iteration: u64) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintHandler {
    /// Infeasible experiences never enter memory.
    PreservingFeasibility,
    /// `f + Σ c_k · v_kᵉ`. A single coefficient applies to every constraint.
    Penalty {
        coefficients: Vec<f64>,
        #[serde(default = "default_exponent")]
        exponent: f64,
    },
    /// Feasible beats infeasible, then objective among feasibles and total
    /// violation among infeasibles.
    #[default]
    PriorityRules,
}

fn default_exponent() -> f64 {
    1.0
}

/// Static penalty coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticPenalty<'a>(pub &'a [f64]);

impl PenaltySchedule for StaticPenalty<'_> {
    fn coefficient(&self, constraint: usize, _iteration: u64) -> f64 {
        self.0.get(constraint).or(self.0.last()).copied().unwrap_or(0.0)
    }
}

impl ConstraintHandler {
    pub fn validate(&self, constraints: usize) -> Result<(), String> {
        if let Self::Penalty { coefficients, exponent } = self {
            if !(exponent.is_finite() && *exponent >= 1.0) {
                return Err(format!("penalty exponent must be >= 1, got {exponent}"));
            }
            if coefficients.iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err("penalty coefficients must be finite and nonnegative".into());
            }
            if !(coefficients.len() == 1 || coefficients.len() == constraints) {
                return Err(format!("penalty needs 1 or {constraints} coefficients, got {}", coefficients.len()));
            }
        }
        Ok(())
    }
}

pub fn penalised_value(e: &Evaluation, coefficients: &[f64], exponent: f64) -> f64 {
    penalised_value_with(e, &StaticPenalty(coefficients), exponent, 0)
}

pub fn penalised_value_with(e: &Evaluation, schedule: &dyn PenaltySchedule, exponent: f64, iteration: u64) -> f64 {
    e.objective
        + e.violations
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(k, &v)| schedule.coefficient(k, iteration) * v.powf(exponent))
            .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preference {
    FirstBetter,
    SecondBetter,
    Tie,
}

impl From<Ordering> for Preference {
    /// `Less` means the first value is smaller, hence better.
    fn from(o: Ordering) -> Self {
        match o {
            Ordering::Less => Preference::FirstBetter,
            Ordering::Greater => Preference::SecondBetter,
            Ordering::Equal => Preference::Tie,
        }
    }
}

fn by_value(a: f64, b: f64) -> Preference {
    a.partial_cmp(&b).map(Preference::from).unwrap_or(Preference::Tie)
}

fn priority_rules(a: &Evaluation, b: &Evaluation) -> Preference {
    match (a.feasible, b.feasible) {
        (true, false) => Preference::FirstBetter,
        (false, true) => Preference::SecondBetter,
        (true, true) => by_value(a.objective, b.objective),
        (false, false) => by_value(a.total_violation(), b.total_violation()),
    }
}

pub fn compare(a: &Evaluation, b: &Evaluation, cht: &ConstraintHandler) -> Result<Preference, MemoryError> {
    match cht {
        ConstraintHandler::PreservingFeasibility => match (a.feasible, b.feasible) {
            (false, false) if a == b => Ok(Preference::Tie),
            (false, false) => Err(MemoryError::IncomparableInfeasible),
            _ => Ok(priority_rules(a, b)),
        },
        ConstraintHandler::Penalty { coefficients, exponent } => {
            Ok(by_value(penalised_value(a, coefficients, *exponent), penalised_value(b, coefficients, *exponent)))
        }
        ConstraintHandler::PriorityRules => Ok(priority_rules(a, b)),
    }
}

/// Replaces `memory` with `candidate` when the candidate is strictly
/// better; the incumbent keeps ties. Returns whether memory changed.
///
/// Under preserving feasibility an infeasible candidate is never admitted
/// once memory is feasible. A memory that starts infeasible is ranked by
/// the priority rules until the first feasible experience arrives.
pub fn update_memory(memory: &mut Experience, candidate: &Experience, cht: &ConstraintHandler) -> bool {
    let better = match cht {
        ConstraintHandler::PreservingFeasibility if memory.evaluation.feasible => {
            candidate.evaluation.feasible && candidate.evaluation.objective < memory.evaluation.objective
        }
        ConstraintHandler::PreservingFeasibility => priority_rules(&candidate.evaluation, &memory.evaluation) == Preference::FirstBetter,
        _ => compare(&candidate.evaluation, &memory.evaluation, cht) == Ok(Preference::FirstBetter),
    };
    if better {
        memory.clone_from(candidate);
    }
    better
}

/// Same ordering as [`update_memory`], for ranking fresh samples where no
/// incumbent exists yet (initialization). Infeasible pairs under preserving
/// feasibility fall back to the priority rules.
pub fn prefers(a: &Evaluation, b: &Evaluation, cht: &ConstraintHandler) -> Preference {
    match cht {
        ConstraintHandler::PreservingFeasibility => priority_rules(a, b),
        _ => compare(a, b, cht).unwrap_or(Preference::Tie),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum GatheringMode {
    #[default]
    MemorisedOnly,
    CurrentOnly,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum SynchronyMode {
    #[default]
    Synchronous,
    Asynchronous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum InformationKind {
    Memorised,
    Current,
}

/// Anything that exposes a particle's memorised and current information.
pub trait HeldInformation {
    fn memorised(&self) -> &Experience;
    fn current(&self) -> &Experience;
}

#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub source: usize,
    pub kind: InformationKind,
    pub experience: &'a Experience,
}

/// Collects what particle `i` can see through its row of the matrix.
pub fn gather<'a, P: HeldInformation>(i: usize, matrix: &ConnectivityMatrix, swarm: &'a [P], mode: GatheringMode) -> Vec<Candidate<'a>> {
    let mut out = Vec::new();
    for (j, &linked) in matrix.row(i).iter().enumerate() {
        if !linked {
            continue;
        }
        if mode != GatheringMode::CurrentOnly {
            out.push(Candidate { source: j, kind: InformationKind::Memorised, experience: swarm[j].memorised() });
        }
        if mode != GatheringMode::MemorisedOnly {
            out.push(Candidate { source: j, kind: InformationKind::Current, experience: swarm[j].current() });
        }
    }
    out
}

/// Best candidate under `cht`; ties go to the lowest source index, then to
/// memorised over current information.
pub fn select_social_attractor<'a>(candidates: &[Candidate<'a>], cht: &ConstraintHandler) -> Result<Candidate<'a>, MemoryError> {
    let eligible: Vec<&Candidate<'a>> = match cht {
        ConstraintHandler::PreservingFeasibility => {
            let feasible: Vec<_> = candidates.iter().filter(|c| c.experience.evaluation.feasible).collect();
            if feasible.is_empty() && !candidates.is_empty() {
                return Err(MemoryError::NoValidAttractor);
            }
            feasible
        }
        _ => candidates.iter().collect(),
    };
    let mut best: Option<&Candidate<'a>> = None;
    for c in eligible {
        best = match best {
            None => Some(c),
            Some(b) => {
                let pref = compare(&c.experience.evaluation, &b.experience.evaluation, cht)?;
                let earlier = (c.source, c.kind) < (b.source, b.kind);
                match pref {
                    Preference::FirstBetter => Some(c),
                    Preference::Tie if earlier => Some(c),
                    _ => Some(b),
                }
            }
        };
    }
    best.copied().ok_or(MemoryError::NoCandidates)
}
