//! Benchmark problems and a registry for user-defined ones.
//!
//! Builtins use the textbook definitions and bounds: sphere on [−100, 100],
//! Rosenbrock on [−30, 30], Rastrigin on [−5.12, 5.12]. The constrained
//! sphere adds `x₁ + x₂ ≥ 1` with violation `max(0, 1 − x₁ − x₂)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::memory::Evaluation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("problem {problem}: expected a {expected}-dimensional point, got {got}")]
    DimensionMismatch { problem: String, expected: usize, got: usize },
    #[error("problem {problem}: objective is NaN at {position:?}")]
    NotANumber { problem: String, position: Vec<f64> },
    #[error("unknown problem {0:?}")]
    Unknown(String),
    #[error("problem {name} does not support dimension {dimension}")]
    UnsupportedDimension { name: String, dimension: usize },
    #[error("invalid search bounds: {0}")]
    InvalidBounds(String),
}

/// Per-dimension box `[lower_j, upper_j]` with `lower_j < upper_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ProblemError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(ProblemError::InvalidBounds("lower and upper must be non-empty and of equal length".into()));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ProblemError::InvalidBounds(format!("dimension {j}: need finite lower < upper, got [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(dimension: usize, lo: f64, hi: f64) -> Result<Self, ProblemError> {
        Self::new(vec![lo; dimension], vec![hi; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn range(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension() && x.iter().enumerate().all(|(j, &v)| v >= self.lower[j] && v <= self.upper[j])
    }
}

pub type Objective = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Returns the violation magnitude, 0 when satisfied.
pub type Constraint = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub bounds: SearchBounds,
    pub objective: Objective,
    pub constraints: Vec<Constraint>,
    pub known_optimum: Option<(Vec<f64>, f64)>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dimension", &self.dimension())
            .field("constraints", &self.constraints.len())
            .field("known_optimum", &self.known_optimum)
            .finish()
    }
}

impl Problem {
    pub fn dimension(&self) -> usize {
        self.bounds.dimension()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation, ProblemError> {
        if x.len() != self.dimension() {
            return Err(ProblemError::DimensionMismatch { problem: self.name.clone(), expected: self.dimension(), got: x.len() });
        }
        let objective = (self.objective)(x);
        if objective.is_nan() {
            return Err(ProblemError::NotANumber { problem: self.name.clone(), position: x.to_vec() });
        }
        let violations = self.constraints.iter().map(|g| g(x).max(0.0)).collect();
        Ok(Evaluation::new(objective, violations))
    }
}

pub fn sphere(dimension: usize) -> Problem {
    Problem {
        name: "sphere".into(),
        bounds: SearchBounds::uniform(dimension, -100.0, 100.0).expect("static bounds"),
        objective: Arc::new(|x| x.iter().map(|v| v * v).sum()),
        constraints: Vec::new(),
        known_optimum: Some((vec![0.0; dimension], 0.0)),
    }
}

pub fn rosenbrock(dimension: usize) -> Problem {
    Problem {
        name: "rosenbrock".into(),
        bounds: SearchBounds::uniform(dimension, -30.0, 30.0).expect("static bounds"),
        objective: Arc::new(|x| x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()),
        constraints: Vec::new(),
        known_optimum: Some((vec![1.0; dimension], 0.0)),
    }
}

pub fn rastrigin(dimension: usize) -> Problem {
    Problem {
        name: "rastrigin".into(),
        bounds: SearchBounds::uniform(dimension, -5.12, 5.12).expect("static bounds"),
        objective: Arc::new(|x| x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos() + 10.0).sum()),
        constraints: Vec::new(),
        known_optimum: Some((vec![0.0; dimension], 0.0)),
    }
}

/// Sphere subject to `x₁ + x₂ ≥ 1`; needs at least two dimensions.
pub fn constrained_sphere(dimension: usize) -> Result<Problem, ProblemError> {
    if dimension < 2 {
        return Err(ProblemError::UnsupportedDimension { name: "constrained_sphere".into(), dimension });
    }
    let mut optimum = vec![0.0; dimension];
    optimum[0] = 0.5;
    optimum[1] = 0.5;
    Ok(Problem {
        name: "constrained_sphere".into(),
        bounds: SearchBounds::uniform(dimension, -100.0, 100.0)?,
        objective: Arc::new(|x| x.iter().map(|v| v * v).sum()),
        constraints: vec![Arc::new(|x| (1.0 - x[0] - x[1]).max(0.0))],
        known_optimum: Some((optimum, 0.5)),
    })
}

type Factory = Arc<dyn Fn(usize) -> Result<Problem, ProblemError> + Send + Sync>;

/// Name → problem factory (dimension in, problem out).
#[derive(Clone)]
pub struct ProblemRegistry {
    factories: BTreeMap<String, Factory>,
}

impl fmt::Debug for ProblemRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for ProblemRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ProblemRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("sphere", |d| Ok(sphere(d)));
        r.register("rosenbrock", |d| {
            if d < 2 {
                return Err(ProblemError::UnsupportedDimension { name: "rosenbrock".into(), dimension: d });
            }
            Ok(rosenbrock(d))
        });
        r.register("rastrigin", |d| Ok(rastrigin(d)));
        r.register("constrained_sphere", constrained_sphere);
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(usize) -> Result<Problem, ProblemError> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, dimension: usize) -> Result<Problem, ProblemError> {
        if dimension == 0 {
            return Err(ProblemError::UnsupportedDimension { name: name.to_string(), dimension });
        }
        let factory = self.factories.get(name).ok_or_else(|| ProblemError::Unknown(name.to_string()))?;
        factory(dimension)
    }
}

/// Every builtin at dimension `d` (the constrained sphere at `max(d, 2)`).
pub fn builtin_suite(dimension: usize) -> Vec<Problem> {
    let d = dimension.max(1);
    vec![sphere(d), rosenbrock(d.max(2)), rastrigin(d), constrained_sphere(d.max(2)).expect("dimension at least 2")]
}
