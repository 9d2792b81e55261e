//! Run configuration: the JSON document behind `repso run`, its
//! validation, and per-particle attribute resolution.

use std::fmt;
use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::BoundaryPolicy;
use crate::initialization::{InitSpec, SampleRelation};
use crate::memory::{ConstraintHandler, GatheringMode, SynchronyMode};
use crate::problems::ProblemRegistry;
use crate::sociometry::{assemble_connectivity, LocalSociometry};
use crate::stochastic::{AttractorCombiner, CoefficientDistribution, ScalingMode};
use crate::termination::TerminationConfig;
use crate::trajectory::ReferenceCoefficients;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldError>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: String,
    pub dimension: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SwarmSection {
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub synchrony: SynchronyMode,
    #[serde(default)]
    pub boundary: BoundaryPolicy,
    /// Largest allowed |displacement| per component; off when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displacement_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump: Option<PathBuf>,
}

/// Everything that shapes one particle's behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleAttributes {
    pub omega: CoefficientDistribution,
    pub phi: CoefficientDistribution,
    pub scaling: ScalingMode,
    pub combiner: AttractorCombiner,
    pub sociometry: LocalSociometry,
    pub constraint_handler: ConstraintHandler,
    pub gathering: GatheringMode,
}

impl Default for ParticleAttributes {
    fn default() -> Self {
        Self {
            omega: CoefficientDistribution::point(0.7298),
            phi: CoefficientDistribution::sum2u(1.49618, 1.49618),
            scaling: ScalingMode::Component,
            combiner: AttractorCombiner::default(),
            sociometry: LocalSociometry::default(),
            constraint_handler: ConstraintHandler::PriorityRules,
            gathering: GatheringMode::MemorisedOnly,
        }
    }
}

/// Attributes replacing the defaults for the listed particles. Later
/// overrides win over earlier ones.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AttributeOverride {
    pub particles: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<CoefficientDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<CoefficientDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combiner: Option<AttractorCombiner>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sociometry: Option<LocalSociometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_handler: Option<ConstraintHandler>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gathering: Option<GatheringMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub swarm: SwarmSection,
    #[serde(default)]
    pub init: InitSpec,
    pub termination: TerminationConfig,
    #[serde(default)]
    pub defaults: ParticleAttributes,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<AttributeOverride>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Config path each resolved attribute came from.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Origins {
    omega: String,
    phi: String,
    combiner: String,
    sociometry: String,
    constraint_handler: String,
}

impl Origins {
    fn defaults() -> Self {
        Self {
            omega: "defaults.omega".into(),
            phi: "defaults.phi".into(),
            combiner: "defaults.combiner".into(),
            sociometry: "defaults.sociometry".into(),
            constraint_handler: "defaults.constraint_handler".into(),
        }
    }
}

impl RunConfig {
    /// A minimal config: all defaults, search length `t_max`.
    pub fn new(problem: &str, dimension: usize, size: usize, t_max: u64) -> Self {
        Self {
            problem: ProblemSection { name: problem.into(), dimension },
            swarm: SwarmSection {
                size,
                seed: 0,
                synchrony: SynchronyMode::default(),
                boundary: BoundaryPolicy::default(),
                displacement_cap: None,
            },
            init: InitSpec::default(),
            termination: TerminationConfig::search_length(t_max),
            defaults: ParticleAttributes::default(),
            overrides: Vec::new(),
            output: OutputSection::default(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse { path: e.path().to_string(), message: e.inner().to_string() })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// JSON Schema of the config document, as published in `config.schema.json`.
    pub fn json_schema() -> String {
        let mut s = serde_json::to_string_pretty(&schemars::schema_for!(RunConfig)).expect("schema serializes");
        s.push('\n');
        s
    }

    /// Per-particle attributes with overrides applied. Indices out of
    /// range are ignored here and rejected by [`RunConfig::validate`].
    pub fn attributes(&self) -> Vec<ParticleAttributes> {
        self.resolve().into_iter().map(|(a, _)| a).collect()
    }

    fn resolve(&self) -> Vec<(ParticleAttributes, Origins)> {
        let m = self.swarm.size;
        let mut out = vec![(self.defaults.clone(), Origins::defaults()); m];
        for (k, o) in self.overrides.iter().enumerate() {
            for &i in &o.particles {
                let Some((a, from)) = out.get_mut(i) else { continue };
                let at = |field: &str| format!("overrides[{k}].{field}");
                if let Some(v) = &o.omega {
                    a.omega = v.clone();
                    from.omega = at("omega");
                }
                if let Some(v) = &o.phi {
                    a.phi = v.clone();
                    from.phi = at("phi");
                }
                if let Some(v) = o.scaling {
                    a.scaling = v;
                }
                if let Some(v) = &o.combiner {
                    a.combiner = v.clone();
                    from.combiner = at("combiner");
                }
                if let Some(v) = o.sociometry {
                    a.sociometry = v;
                    from.sociometry = at("sociometry");
                }
                if let Some(v) = &o.constraint_handler {
                    a.constraint_handler = v.clone();
                    from.constraint_handler = at("constraint_handler");
                }
                if let Some(v) = o.gathering {
                    a.gathering = v;
                }
            }
        }
        out
    }

    /// Checks every field; returns warnings on success.
    pub fn validate(&self, registry: &ProblemRegistry) -> Result<Vec<String>, ConfigError> {
        let mut errs: Vec<FieldError> = Vec::new();
        fn push(errs: &mut Vec<FieldError>, field: &str, message: String) {
            if !errs.iter().any(|e| e.field == field && e.message == message) {
                errs.push(FieldError { field: field.to_string(), message });
            }
        }

        let problem = match registry.build(&self.problem.name, self.problem.dimension) {
            Ok(p) => Some(p),
            Err(e) => {
                let field = if registry.names().any(|n| n == self.problem.name) { "problem.dimension" } else { "problem.name" };
                push(&mut errs, field, e.to_string());
                None
            }
        };
        let m = self.swarm.size;
        if m == 0 {
            push(&mut errs, "swarm.size", "must be at least 1".into());
        }
        if let Some(cap) = self.swarm.displacement_cap {
            if !(cap > 0.0 && cap.is_finite()) {
                push(&mut errs, "swarm.displacement_cap", format!("must be positive and finite, got {cap}"));
            }
        }
        if let SampleRelation::Perturbation { radius_fraction } = self.init.relation {
            if !(radius_fraction > 0.0 && radius_fraction <= 1.0) {
                push(&mut errs, "init.relation.radius_fraction", format!("must lie in (0, 1], got {radius_fraction}"));
            }
        }
        for (field, msg) in self.termination.validate() {
            let path = if field.is_empty() { "termination".to_string() } else { format!("termination.{field}") };
            push(&mut errs, &path, msg);
        }
        for (k, o) in self.overrides.iter().enumerate() {
            if o.particles.is_empty() {
                push(&mut errs, &format!("overrides[{k}].particles"), "must list at least one particle".into());
            }
            for &i in &o.particles {
                if i >= m {
                    push(&mut errs, &format!("overrides[{k}].particles"), format!("particle index {i} out of range for swarm of {m}"));
                }
            }
        }

        let mut warnings = Vec::new();
        if m > 0 {
            let resolved = self.resolve();
            let constraints = problem.as_ref().map(|p| p.constraints.len());
            for (i, (a, from)) in resolved.iter().enumerate() {
                for (dist, path) in [(&a.omega, &from.omega), (&a.phi, &from.phi)] {
                    if let Err(e) = dist.validate() {
                        push(&mut errs, path, e.to_string());
                    }
                }
                if a.phi.validate().is_ok() && a.phi.support().0 < 0.0 {
                    push(&mut errs, &from.phi, format!("support must be nonnegative, lower end is {}", a.phi.support().0));
                }
                if let AttractorCombiner::DecoupledConvex { lambda } = &a.combiner {
                    if let Err(e) = lambda.validate() {
                        push(&mut errs, &format!("{}.lambda", from.combiner), e.to_string());
                    } else if lambda.support().0 < 0.0 || lambda.support().1 > 1.0 {
                        push(&mut errs, &format!("{}.lambda", from.combiner), "support must lie within [0, 1]".into());
                    }
                }
                if a.combiner == AttractorCombiner::CoupledClassical && !matches!(a.phi, CoefficientDistribution::Sum2u { .. }) {
                    push(&mut errs, &from.combiner, "coupled_classical needs phi of kind sum2u".into());
                }
                if let Err(e) = a.sociometry.validate(i, m) {
                    push(&mut errs, &from.sociometry, e.to_string());
                }
                if let Some(nc) = constraints {
                    if let Err(e) = a.constraint_handler.validate(nc) {
                        push(&mut errs, &from.constraint_handler, e);
                    }
                }
                if a.omega.validate().is_ok() && a.phi.validate().is_ok() {
                    let inside =
                        ReferenceCoefficients::new(a.omega.mean(), a.phi.mean()).map(|c| c.inside_convergence_triangle()).unwrap_or(false);
                    if !inside {
                        let w = format!(
                            "{}/{}: mean coefficients (omega {}, phi {}) lie outside the convergence triangle",
                            from.omega,
                            from.phi,
                            a.omega.mean(),
                            a.phi.mean()
                        );
                        if !warnings.contains(&w) {
                            warnings.push(w);
                        }
                    }
                }
            }
            if errs.iter().all(|e| !e.field.contains("sociometry")) {
                let specs: Vec<LocalSociometry> = resolved.iter().map(|(a, _)| a.sociometry).collect();
                if let Err(e) = assemble_connectivity(&specs) {
                    push(&mut errs, "defaults.sociometry", e.to_string());
                }
            }
        }

        if errs.is_empty() {
            Ok(warnings)
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sociometry::Topology;

    fn registry() -> ProblemRegistry {
        ProblemRegistry::builtin()
    }

    fn fields(e: ConfigError) -> Vec<String> {
        match e {
            ConfigError::Invalid(v) => v.into_iter().map(|f| f.field).collect(),
            other => panic!("expected validation errors, got {other}"),
        }
    }

    #[test]
    fn minimal_document_parses_with_defaults() {
        let c = RunConfig::from_json_str(
            r#"{"problem": {"name": "sphere", "dimension": 3},
                "swarm": {"size": 4, "seed": 7},
                "termination": {"t_max": 10}}"#,
        )
        .unwrap();
        assert_eq!(c.defaults, ParticleAttributes::default());
        assert_eq!(c.swarm.boundary, BoundaryPolicy::Clamp);
        assert!(c.validate(&registry()).unwrap().is_empty());
    }

    #[test]
    fn missing_problem_name_names_the_field() {
        let err =
            RunConfig::from_json_str(r#"{"problem": {"dimension": 3}, "swarm": {"size": 4}, "termination": {"t_max": 1}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("problem") && msg.contains("name"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected_with_path() {
        let err = RunConfig::from_json_str(
            r#"{"problem": {"name": "sphere", "dimension": 3}, "swarm": {"size": 4, "sed": 1}, "termination": {"t_max": 1}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("swarm"), "{err}");
        let err = RunConfig::from_json_str(
            r#"{"problem": {"name": "sphere", "dimension": 3}, "swarm": {"size": 4},
                "defaults": {"phi": {"kind": "sum2u", "iw": 1, "sw": 1, "x": 2}},
                "termination": {"t_max": 1}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("defaults.phi"), "{err}");
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::new("rastrigin", 5, 8, 100);
        c.overrides.push(AttributeOverride {
            particles: vec![0, 3],
            sociometry: Some(LocalSociometry::new(Topology::Ring { k: 1 }, false)),
            constraint_handler: Some(ConstraintHandler::Penalty { coefficients: vec![10.0], exponent: 2.0 }),
            ..Default::default()
        });
        c.defaults.combiner = AttractorCombiner::CoupledClassical;
        c.output.trace = Some("trace.csv".into());
        let back = RunConfig::from_json_str(&c.to_json_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides_resolve_in_order() {
        let mut c = RunConfig::new("sphere", 2, 3, 10);
        c.overrides.push(AttributeOverride {
            particles: vec![1, 2],
            omega: Some(CoefficientDistribution::point(0.5)),
            ..Default::default()
        });
        c.overrides.push(AttributeOverride { particles: vec![2], omega: Some(CoefficientDistribution::point(0.1)), ..Default::default() });
        let a = c.attributes();
        assert_eq!(a[0].omega, CoefficientDistribution::point(0.7298));
        assert_eq!(a[1].omega, CoefficientDistribution::point(0.5));
        assert_eq!(a[2].omega, CoefficientDistribution::point(0.1));
        assert_eq!(a[2].phi, c.defaults.phi);
    }

    #[test]
    fn validation_reports_field_paths() {
        let mut c = RunConfig::new("nope", 2, 0, 0);
        c.overrides.push(AttributeOverride { particles: vec![9], ..Default::default() });
        let f = fields(c.validate(&registry()).unwrap_err());
        assert!(f.contains(&"problem.name".to_string()));
        assert!(f.contains(&"swarm.size".to_string()));
        assert!(f.contains(&"termination.t_max".to_string()));
        assert!(f.contains(&"overrides[0].particles".to_string()));

        let mut c = RunConfig::new("sphere", 2, 5, 10);
        c.overrides.push(AttributeOverride {
            particles: vec![1],
            sociometry: Some(LocalSociometry::new(Topology::Ring { k: 5 }, true)),
            ..Default::default()
        });
        assert_eq!(fields(c.validate(&registry()).unwrap_err()), vec!["overrides[0].sociometry"]);

        let mut c = RunConfig::new("sphere", 2, 5, 10);
        c.defaults.combiner = AttractorCombiner::CoupledClassical;
        c.defaults.phi = CoefficientDistribution::uniform(0.0, 2.0);
        assert_eq!(fields(c.validate(&registry()).unwrap_err()), vec!["defaults.combiner"]);

        let mut c = RunConfig::new("constrained_sphere", 2, 5, 10);
        c.defaults.constraint_handler = ConstraintHandler::Penalty { coefficients: vec![1.0, 2.0], exponent: 1.0 };
        assert_eq!(fields(c.validate(&registry()).unwrap_err()), vec!["defaults.constraint_handler"]);

        let mut c = RunConfig::new("rosenbrock", 1, 5, 10);
        c.termination = TerminationConfig::default();
        let f = fields(c.validate(&registry()).unwrap_err());
        assert_eq!(f, vec!["problem.dimension", "termination"]);
    }

    #[test]
    fn negative_phi_support_rejected() {
        let mut c = RunConfig::new("sphere", 2, 3, 10);
        c.defaults.phi = CoefficientDistribution::Custom { name: "normalish".into(), quantiles: vec![-0.5, 1.0, 2.5] };
        assert_eq!(fields(c.validate(&registry()).unwrap_err()), vec!["defaults.phi"]);
    }

    #[test]
    fn orphan_detected() {
        let mut c = RunConfig::new("sphere", 2, 1, 10);
        c.defaults.sociometry = LocalSociometry::new(Topology::Global, false);
        assert_eq!(fields(c.validate(&registry()).unwrap_err()), vec!["defaults.sociometry"]);
    }

    #[test]
    fn divergent_means_warn() {
        let mut c = RunConfig::new("sphere", 2, 3, 10);
        c.defaults.omega = CoefficientDistribution::point(1.0);
        c.defaults.phi = CoefficientDistribution::sum2u(2.0, 2.0);
        let w = c.validate(&registry()).unwrap();
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("convergence triangle"));
    }
}
