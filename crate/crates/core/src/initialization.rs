//! Swarm initialization: where the samples come from, how the populations
//! relate, and which sample becomes x(1), x(0) and the memory xm(1).

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::{prefers, ConstraintHandler, Evaluation, Experience, Preference};
use crate::problems::SearchBounds;
use crate::stochastic::RandomStream;

/// Perturbation radius as a fraction of each dimension's range.
pub const DEFAULT_PERTURBATION_RADIUS: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("cannot sample zero points")]
    NoPoints,
    #[error("perturbation radius fraction must lie in (0, 1], got {0}")]
    InvalidRadius(f64),
    #[error("one constraint handler per particle required ({expected}), got {got}")]
    HandlerCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    #[default]
    UniformRandom,
    LatinHypercube,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// x(1) = x(0) = xm(1): motion starts from cooperation alone.
    #[default]
    Stagnation,
    /// The better of two samples is x(1) and xm(1), the other x(0).
    TwoPositions,
    /// The better of two samples is xm(1), the other x(1) = x(0).
    OnePositionOneMemory,
    /// The best of three is xm(1); the better of the rest is x(1).
    TwoPositionsOneMemory,
}

impl InitialCondition {
    /// Samples (and evaluations) needed per particle.
    pub fn samples_per_particle(&self) -> usize {
        match self {
            InitialCondition::Stagnation => 1,
            InitialCondition::TwoPositions | InitialCondition::OnePositionOneMemory => 2,
            InitialCondition::TwoPositionsOneMemory => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleRelation {
    /// Extra samples are the primary sample plus a uniform offset of at most
    /// `radius_fraction` of the range per dimension, clamped to bounds.
    Perturbation { radius_fraction: f64 },
    /// Each population is sampled on its own.
    Independent,
    /// One sampling of `m × samples` points, dealt round-robin.
    Simultaneous,
}

impl Default for SampleRelation {
    fn default() -> Self {
        SampleRelation::Perturbation { radius_fraction: DEFAULT_PERTURBATION_RADIUS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    pub method: SamplingMethod,
    pub condition: InitialCondition,
    pub relation: SampleRelation,
}

pub fn sample_positions(
    method: SamplingMethod,
    n: usize,
    bounds: &SearchBounds,
    rng: &mut RandomStream,
) -> Result<Vec<Vec<f64>>, InitError> {
    if n == 0 {
        return Err(InitError::NoPoints);
    }
    let d = bounds.dimension();
    let (lo, hi) = (bounds.lower(), bounds.upper());
    Ok(match method {
        SamplingMethod::UniformRandom => (0..n).map(|_| (0..d).map(|j| lo[j] + rng.uniform() * (hi[j] - lo[j])).collect()).collect(),
        SamplingMethod::LatinHypercube => {
            let mut points = vec![vec![0.0; d]; n];
            let mut strata: Vec<usize> = (0..n).collect();
            for j in 0..d {
                rng.shuffle(&mut strata);
                for (point, &k) in points.iter_mut().zip(&strata) {
                    let mut t = (k as f64 + rng.uniform()) / n as f64;
                    // Keep t strictly inside its stratum despite rounding.
                    let top = (k + 1) as f64 / n as f64;
                    if t >= top {
                        t = f64::from_bits(top.to_bits() - 1);
                    }
                    point[j] = lo[j] + t * (hi[j] - lo[j]);
                }
            }
            points
        }
    })
}

/// `x` plus a uniform offset in `±radius_fraction·range` per dimension, clamped.
pub fn perturb(x: &[f64], radius_fraction: f64, bounds: &SearchBounds, rng: &mut RandomStream) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(j, &v)| {
            let r = radius_fraction * bounds.range(j);
            (v + rng.uniform_in(-r, r)).clamp(bounds.lower()[j], bounds.upper()[j])
        })
        .collect()
}

/// `populations` sets of `n` points related as `relation` says.
/// Population 0 is the primary sample.
pub fn sample_populations(
    relation: SampleRelation,
    method: SamplingMethod,
    n: usize,
    populations: usize,
    bounds: &SearchBounds,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>, InitError> {
    if n == 0 || populations == 0 {
        return Err(InitError::NoPoints);
    }
    match relation {
        SampleRelation::Simultaneous => {
            let all = sample_positions(method, n * populations, bounds, &mut RandomStream::for_population(seed, 0))?;
            let mut out = vec![Vec::with_capacity(n); populations];
            for (q, point) in all.into_iter().enumerate() {
                out[q % populations].push(point);
            }
            Ok(out)
        }
        SampleRelation::Independent => {
            (0..populations).map(|k| sample_positions(method, n, bounds, &mut RandomStream::for_population(seed, k))).collect()
        }
        SampleRelation::Perturbation { radius_fraction } => {
            if !(radius_fraction > 0.0 && radius_fraction <= 1.0) {
                return Err(InitError::InvalidRadius(radius_fraction));
            }
            let primary = sample_positions(method, n, bounds, &mut RandomStream::for_population(seed, 0))?;
            let mut out = Vec::with_capacity(populations);
            for k in 1..populations {
                let mut rng = RandomStream::for_population(seed, k);
                out.push(primary.iter().map(|x| perturb(x, radius_fraction, bounds, &mut rng)).collect());
            }
            out.insert(0, primary);
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitializedParticle {
    pub x1: Experience,
    pub x0: Experience,
    pub memory: Experience,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub particles: Vec<InitializedParticle>,
    pub evaluations: usize,
}

/// Samples, evaluates and assigns x(1), x(0), xm(1) for `m` particles,
/// ranking with each particle's own handler. Ties go to the sample with the
/// lower population index.
pub fn initialize_swarm<E, F>(
    spec: &InitSpec,
    bounds: &SearchBounds,
    handlers: &[ConstraintHandler],
    seed: u64,
    mut evaluate: F,
) -> Result<Initialization, E>
where
    F: FnMut(&[f64]) -> Result<Evaluation, E>,
    E: From<InitError>,
{
    let m = handlers.len();
    let per = spec.condition.samples_per_particle();
    let populations = sample_populations(spec.relation, spec.method, m, per, bounds, seed)?;
    let mut evaluations = 0;
    let mut particles = Vec::with_capacity(m);
    for (i, cht) in handlers.iter().enumerate() {
        let mut samples = Vec::with_capacity(per);
        for pop in &populations {
            let x = pop[i].clone();
            let e = evaluate(&x)?;
            evaluations += 1;
            samples.push(Experience::new(x, e));
        }
        particles.push(assign(spec.condition, samples, cht));
    }
    Ok(Initialization { particles, evaluations })
}

fn better_first(a: &Experience, b: &Experience, cht: &ConstraintHandler) -> bool {
    prefers(&a.evaluation, &b.evaluation, cht) != Preference::SecondBetter
}

fn assign(condition: InitialCondition, mut s: Vec<Experience>, cht: &ConstraintHandler) -> InitializedParticle {
    match condition {
        InitialCondition::Stagnation => {
            let x = s.pop().expect("one sample");
            InitializedParticle { x1: x.clone(), x0: x.clone(), memory: x }
        }
        InitialCondition::TwoPositions => {
            let b = s.pop().expect("two samples");
            let a = s.pop().expect("two samples");
            let (best, other) = if better_first(&a, &b, cht) { (a, b) } else { (b, a) };
            InitializedParticle { x1: best.clone(), x0: other, memory: best }
        }
        InitialCondition::OnePositionOneMemory => {
            let b = s.pop().expect("two samples");
            let a = s.pop().expect("two samples");
            let (best, other) = if better_first(&a, &b, cht) { (a, b) } else { (b, a) };
            InitializedParticle { x1: other.clone(), x0: other, memory: best }
        }
        InitialCondition::TwoPositionsOneMemory => {
            let mut best = 0;
            for k in 1..s.len() {
                if !better_first(&s[best], &s[k], cht) {
                    best = k;
                }
            }
            let memory = s.remove(best);
            let b = s.pop().expect("three samples");
            let a = s.pop().expect("three samples");
            let (x1, x0) = if better_first(&a, &b, cht) { (a, b) } else { (b, a) };
            InitializedParticle { x1, x0, memory }
        }
    }
}
