//! The iteration loop. Each particle gathers what its sociometry lets it
//! see, picks a social attractor with its own CHT, forms the overall
//! attractor, samples its coefficients, moves, is evaluated and updates its
//! memory.
//!
//! Synchronous iterations read a snapshot taken before the first particle
//! moves; asynchronous ones run in ascending index order and each particle
//! sees whatever the earlier ones already committed. Every particle owns a
//! random sub-stream, so the result does not depend on the order particles
//! are processed in synchronous mode.

use std::fmt::Write as _;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ParticleAttributes, RunConfig};
use crate::initialization::{initialize_swarm, InitError};
use crate::memory::{
    gather, prefers, select_social_attractor, update_memory, ConstraintHandler, Evaluation, Experience, HeldInformation, MemoryError,
    Preference, SynchronyMode,
};
use crate::output::{format_float, DUMP_HEADER, TRACE_HEADER};
use crate::problems::{Problem, ProblemError, ProblemRegistry, SearchBounds};
use crate::sociometry::{assemble_connectivity, ConnectivityMatrix, SociometryError};
use crate::stochastic::{combine_attractors, sample_scaled_coefficients, AttractorCombiner, RandomStream, StochasticError};
use crate::termination::{should_stop, swarm_diversity, StopReason, SwarmStatistics};
use crate::trajectory::advance;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Sociometry(#[from] SociometryError),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error("iteration {iteration}, particle {particle}: {source}")]
    Evaluation { iteration: u64, particle: usize, source: ProblemError },
    #[error("iteration {iteration}, particle {particle}: {source}")]
    Memory { iteration: u64, particle: usize, source: MemoryError },
    #[error("iteration {iteration}, particle {particle}: {source}")]
    Stochastic { iteration: u64, particle: usize, source: StochasticError },
    #[error("particle {0} out of range")]
    NoSuchParticle(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    /// Leave positions alone; the problem sees whatever the trajectory gives.
    None,
    #[default]
    Clamp,
    /// Mirror the overshoot about the violated bound once, then clamp.
    Reflect,
}

pub fn apply_boundary_policy(mut x: Vec<f64>, bounds: &SearchBounds, policy: BoundaryPolicy) -> Vec<f64> {
    if policy == BoundaryPolicy::None {
        return x;
    }
    for (j, v) in x.iter_mut().enumerate() {
        let (lo, hi) = (bounds.lower()[j], bounds.upper()[j]);
        if policy == BoundaryPolicy::Reflect {
            if *v > hi {
                *v = hi - (*v - hi);
            } else if *v < lo {
                *v = lo + (lo - *v);
            }
        }
        *v = v.clamp(lo, hi);
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub index: usize,
    /// x(t) and its evaluation.
    pub current: Experience,
    /// x(t−1).
    pub x_prev: Vec<f64>,
    pub memory: Experience,
    pub attributes: ParticleAttributes,
    /// Social attractor used by the latest step.
    pub last_social: Option<Vec<f64>>,
}

impl HeldInformation for ParticleState {
    fn memorised(&self) -> &Experience {
        &self.memory
    }

    fn current(&self) -> &Experience {
        &self.current
    }
}

pub struct Swarm {
    problem: Problem,
    particles: Vec<ParticleState>,
    matrix: ConnectivityMatrix,
    rngs: Vec<RandomStream>,
    synchrony: SynchronyMode,
    boundary: BoundaryPolicy,
    displacement_cap: Option<f64>,
    iteration: u64,
    evaluations: usize,
    best: Experience,
}

const REPORTING: ConstraintHandler = ConstraintHandler::PriorityRules;

fn better_than(candidate: &Experience, incumbent: &Experience) -> bool {
    prefers(&candidate.evaluation, &incumbent.evaluation, &REPORTING) == Preference::FirstBetter
}

impl Swarm {
    /// Builds and initializes the swarm described by `config` on `problem`.
    /// The config is assumed validated.
    pub fn initialize(config: &RunConfig, problem: Problem) -> Result<Self, EngineError> {
        let attributes = config.attributes();
        let specs: Vec<_> = attributes.iter().map(|a| a.sociometry).collect();
        let matrix = assemble_connectivity(&specs)?;
        let handlers: Vec<_> = attributes.iter().map(|a| a.constraint_handler.clone()).collect();
        let seed = config.swarm.seed;
        let init = initialize_swarm(&config.init, &problem.bounds, &handlers, seed, |x| {
            problem.evaluate(x).map_err(|source| EngineError::Evaluation { iteration: 0, particle: 0, source })
        })?;
        let particles: Vec<ParticleState> = init
            .particles
            .into_iter()
            .zip(attributes)
            .enumerate()
            .map(|(index, (p, attributes))| ParticleState {
                index,
                current: p.x1,
                x_prev: p.x0.position,
                memory: p.memory,
                attributes,
                last_social: None,
            })
            .collect();
        let rngs = (0..particles.len()).map(|i| RandomStream::for_particle(seed, i)).collect();
        let mut swarm = Self {
            best: particles[0].memory.clone(),
            problem,
            particles,
            matrix,
            rngs,
            synchrony: config.swarm.synchrony,
            boundary: config.swarm.boundary,
            displacement_cap: config.swarm.displacement_cap,
            iteration: 0,
            evaluations: init.evaluations,
        };
        swarm.rescan_best();
        Ok(swarm)
    }

    fn rescan_best(&mut self) {
        let mut best = self.particles[0].memory.clone();
        for p in &self.particles[1..] {
            if better_than(&p.memory, &best) {
                best = p.memory.clone();
            }
        }
        self.best = best;
    }

    pub fn particles(&self) -> &[ParticleState] {
        &self.particles
    }

    pub fn matrix(&self) -> &ConnectivityMatrix {
        &self.matrix
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Best committed memory so far under the priority rules; the earliest
    /// wins ties.
    pub fn best(&self) -> &Experience {
        &self.best
    }

    pub fn diversity(&self) -> f64 {
        let xs: Vec<&[f64]> = self.particles.iter().map(|p| p.current.position.as_slice()).collect();
        swarm_diversity(&xs)
    }

    /// Replaces particle `i`'s positions and memory (evaluated afresh) and
    /// recomputes the best memory from scratch.
    pub fn set_state(&mut self, i: usize, x_prev: Vec<f64>, x_curr: Vec<f64>, memory: Vec<f64>) -> Result<(), EngineError> {
        let eval = |x: &[f64]| {
            self.problem.evaluate(x).map_err(|source| EngineError::Evaluation { iteration: self.iteration, particle: i, source })
        };
        let current = Experience::new(x_curr.clone(), eval(&x_curr)?);
        let memory = Experience::new(memory.clone(), eval(&memory)?);
        let p = self.particles.get_mut(i).ok_or(EngineError::NoSuchParticle(i))?;
        p.x_prev = x_prev;
        p.current = current;
        p.memory = memory;
        self.rescan_best();
        Ok(())
    }

    /// One iteration over every particle.
    pub fn step(&mut self) -> Result<(), EngineError> {
        let iteration = self.iteration + 1;
        let snapshot = match self.synchrony {
            SynchronyMode::Synchronous => Some(self.particles.clone()),
            SynchronyMode::Asynchronous => None,
        };
        for i in 0..self.particles.len() {
            let view = snapshot.as_deref().unwrap_or(&self.particles);
            let mv = Move { matrix: &self.matrix, bounds: &self.problem.bounds, boundary: self.boundary, cap: self.displacement_cap };
            let (next, social) = mv.propose(i, view, &mut self.rngs[i]).map_err(|e| e.at(iteration, i))?;
            let evaluation = self.problem.evaluate(&next).map_err(|source| EngineError::Evaluation { iteration, particle: i, source })?;
            self.evaluations += 1;
            let p = &mut self.particles[i];
            let previous = std::mem::replace(&mut p.current, Experience::new(next, evaluation));
            p.x_prev = previous.position;
            p.last_social = Some(social);
            if update_memory(&mut p.memory, &p.current, &p.attributes.constraint_handler) && better_than(&p.memory, &self.best) {
                self.best = p.memory.clone();
            }
        }
        self.iteration = iteration;
        Ok(())
    }
}

enum StepFailure {
    Memory(MemoryError),
    Stochastic(StochasticError),
}

impl StepFailure {
    fn at(self, iteration: u64, particle: usize) -> EngineError {
        match self {
            StepFailure::Memory(source) => EngineError::Memory { iteration, particle, source },
            StepFailure::Stochastic(source) => EngineError::Stochastic { iteration, particle, source },
        }
    }
}

struct Move<'a> {
    matrix: &'a ConnectivityMatrix,
    bounds: &'a SearchBounds,
    boundary: BoundaryPolicy,
    cap: Option<f64>,
}

impl Move<'_> {
    /// Next position of particle `i` given what it can see in `view`, and
    /// the social attractor it chose.
    fn propose(&self, i: usize, view: &[ParticleState], rng: &mut RandomStream) -> Result<(Vec<f64>, Vec<f64>), StepFailure> {
        let me = &view[i];
        let a = &me.attributes;
        let candidates = gather(i, self.matrix, view, a.gathering);
        let social = match select_social_attractor(&candidates, &a.constraint_handler) {
            Ok(c) => c.experience.position.clone(),
            // Nobody feasible to follow: fall back on the particle's own memory.
            Err(MemoryError::NoValidAttractor) => me.memory.position.clone(),
            Err(e) => return Err(StepFailure::Memory(e)),
        };
        let x = &me.current.position;
        let xp = &me.x_prev;
        let xb = &me.memory.position;
        let d = x.len();
        let coefs = sample_scaled_coefficients(&a.omega, &a.phi, a.scaling, d, rng);
        let mut next: Vec<f64> = match &a.combiner {
            AttractorCombiner::CoupledClassical => {
                let parts = coefs.parts.as_ref().ok_or(StepFailure::Stochastic(StochasticError::MissingPhiParts))?;
                (0..d)
                    .map(|j| {
                        let (iota, sigma) = parts[j];
                        x[j] + coefs.omega[j] * (x[j] - xp[j]) + iota * (xb[j] - x[j]) + sigma * (social[j] - x[j])
                    })
                    .collect()
            }
            combiner => {
                let p =
                    combine_attractors(combiner, xb, &social, coefs.parts.as_deref(), a.scaling, rng).map_err(StepFailure::Stochastic)?;
                (0..d).map(|j| advance(x[j], xp[j], coefs.omega[j], coefs.phi[j], p[j])).collect()
            }
        };
        if let Some(cap) = self.cap {
            for (v, &from) in next.iter_mut().zip(x) {
                if (*v - from).abs() > cap {
                    *v = from + (*v - from).clamp(-cap, cap);
                }
            }
        }
        Ok((apply_boundary_policy(next, self.bounds, self.boundary), social))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub best_objective: f64,
    pub diversity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpRow {
    pub iteration: u64,
    pub particle: usize,
    pub dim: usize,
    pub x: f64,
    pub xm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub best: Experience,
    pub iterations: u64,
    pub termination: StopReason,
    pub trace: Vec<TraceRow>,
    pub dump: Option<Vec<DumpRow>>,
    pub seed: u64,
    pub evaluations: usize,
    pub warnings: Vec<String>,
}

impl RunResult {
    pub fn trace_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(TRACE_HEADER);
        s.push('\n');
        for r in &self.trace {
            let _ = writeln!(s, "{},{},{}", r.iteration, format_float(r.best_objective), format_float(r.diversity));
        }
        s
    }

    pub fn dump_csv(&self) -> Option<String> {
        let rows = self.dump.as_ref()?;
        let mut s = String::new();
        s.push_str(DUMP_HEADER);
        s.push('\n');
        for r in rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.iteration, r.particle, r.dim, format_float(r.x), format_float(r.xm));
        }
        Some(s)
    }

    pub fn summary(&self) -> String {
        let e = &self.best.evaluation;
        let position: Vec<String> = self.best.position.iter().map(|&v| format_float(v)).collect();
        format!(
            "termination: {}\niterations: {}\nevaluations: {}\nseed: {}\nbest_objective: {}\nbest_feasible: {}\nbest_total_violation: {}\nbest_position: [{}]\n",
            self.termination,
            self.iterations,
            self.evaluations,
            self.seed,
            format_float(e.objective),
            e.feasible,
            format_float(e.total_violation()),
            position.join(", ")
        )
    }
}

fn dump_rows(swarm: &Swarm, out: &mut Vec<DumpRow>) {
    for p in swarm.particles() {
        for (dim, (&x, &xm)) in p.current.position.iter().zip(&p.memory.position).enumerate() {
            out.push(DumpRow { iteration: swarm.iteration(), particle: p.index, dim, x, xm });
        }
    }
}

/// Validates `config`, builds its problem from the builtin registry and runs it.
pub fn run(config: &RunConfig) -> Result<RunResult, EngineError> {
    run_with_registry(config, &ProblemRegistry::builtin())
}

pub fn run_with_registry(config: &RunConfig, registry: &ProblemRegistry) -> Result<RunResult, EngineError> {
    let warnings = config.validate(registry)?;
    let problem = registry.build(&config.problem.name, config.problem.dimension)?;
    let mut result = run_on(config, problem)?;
    result.warnings = warnings;
    Ok(result)
}

/// Runs on an already-built problem. Only the problem section of `config`
/// is ignored.
pub fn run_on(config: &RunConfig, problem: Problem) -> Result<RunResult, EngineError> {
    let mut swarm = Swarm::initialize(config, problem)?;
    let window = config.termination.window();
    let mut stats = SwarmStatistics::new(0, swarm.best().evaluation.objective, swarm.diversity());
    let mut trace = vec![TraceRow { iteration: 0, best_objective: stats.best_memory_objective, diversity: stats.swarm_diversity }];
    let mut dump = config.output.dump.as_ref().map(|_| Vec::new());
    if let Some(d) = dump.as_mut() {
        dump_rows(&swarm, d);
    }
    let termination = loop {
        if let Some(reason) = should_stop(&stats, &config.termination) {
            break reason;
        }
        swarm.step()?;
        stats.record(swarm.iteration(), swarm.best().evaluation.objective, swarm.diversity(), window);
        trace.push(TraceRow { iteration: stats.iteration, best_objective: stats.best_memory_objective, diversity: stats.swarm_diversity });
        if let Some(d) = dump.as_mut() {
            dump_rows(&swarm, d);
        }
    };
    Ok(RunResult {
        best: swarm.best().clone(),
        iterations: swarm.iteration(),
        termination,
        trace,
        dump,
        seed: config.swarm.seed,
        evaluations: swarm.evaluations(),
        warnings: Vec::new(),
    })
}

/// The initial swarm as CSV: `particle,x1_*,x0_*,xm_*`.
pub fn init_preview_csv(config: &RunConfig, registry: &ProblemRegistry) -> Result<String, EngineError> {
    config.validate(registry)?;
    let problem = registry.build(&config.problem.name, config.problem.dimension)?;
    let d = problem.dimension();
    let swarm = Swarm::initialize(config, problem)?;
    let mut s = String::from("particle");
    for role in ["x1", "x0", "xm"] {
        for j in 0..d {
            let _ = write!(s, ",{role}_{j}");
        }
    }
    s.push('\n');
    for p in swarm.particles() {
        let _ = write!(s, "{}", p.index);
        for v in p.current.position.iter().chain(&p.x_prev).chain(&p.memory.position) {
            let _ = write!(s, ",{}", format_float(*v));
        }
        s.push('\n');
    }
    Ok(s)
}

/// Evaluation of `x` on `problem`, for callers assembling states by hand.
pub fn evaluate(problem: &Problem, x: &[f64]) -> Result<Evaluation, ProblemError> {
    problem.evaluate(x)
}
