//! Stochastic features of the trajectory: coefficient distributions,
//! vector/component scaling and generation of the overall attractor.
//!
//! Draw order is part of the reproducibility contract. For one position
//! update of one particle the stream is consumed as
//!
//! 1. per draw slot (one slot in vector scaling, one per dimension in
//!    component scaling): ω, then φ (`sum2u` draws ι before σ);
//! 2. then, for the decoupled combiner, one λ per draw slot.
//!
//! Point masses consume nothing.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochasticError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("attractor weights sum to zero")]
    DegenerateWeights,
    #[error("position vectors differ in dimension ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("coupled attractor generation needs the (iota, sigma) split of phi")]
    MissingPhiParts,
}

/// Seeded ChaCha8 stream (`rand_chacha`, 8 rounds).
///
/// Sub-streams share the 64-bit seed and differ in the ChaCha stream id,
/// so particles and initialization populations never share draws.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

/// Generator identity reported alongside results.
pub const GENERATOR: &str = "chacha8/seed_from_u64";

/// Stream id base for initialization populations; particle `i` uses id `i`.
pub const INIT_STREAM_BASE: u64 = 1 << 63;

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn for_particle(seed: u64, particle: usize) -> Self {
        Self::substream(seed, particle as u64)
    }

    pub fn for_population(seed: u64, population: usize) -> Self {
        Self::substream(seed, INIT_STREAM_BASE + population as u64)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// U[0, 1) with 53 random mantissa bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.uniform() * (hi - lo)
    }

    /// Unbiased integer in `0..n` by rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Fisher–Yates.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Distribution of one trajectory coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CoefficientDistribution {
    Point {
        value: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `φ = ι + σ` with `ι ~ U(0, iw)` and `σ ~ U(0, sw)`.
    Sum2u {
        iw: f64,
        sw: f64,
    },
    /// Inverse CDF given as quantiles at evenly spaced probabilities
    /// `0, 1/(n−1), …, 1`, linearly interpolated.
    Custom {
        name: String,
        quantiles: Vec<f64>,
    },
}

/// One draw, with the (ι, σ) split kept when the distribution is `sum2u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub value: f64,
    pub parts: Option<(f64, f64)>,
}

impl CoefficientDistribution {
    pub fn point(value: f64) -> Self {
        Self::Point { value }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self::Uniform { lo, hi }
    }

    pub fn sum2u(iw: f64, sw: f64) -> Self {
        Self::Sum2u { iw, sw }
    }

    pub fn validate(&self) -> Result<(), StochasticError> {
        let bad = |msg: String| Err(StochasticError::InvalidDistribution(msg));
        match self {
            Self::Point { value } if !value.is_finite() => bad(format!("point value {value} is not finite")),
            Self::Uniform { lo, hi } if !lo.is_finite() || !hi.is_finite() || lo > hi => {
                bad(format!("uniform bounds must be finite with lo <= hi, got [{lo}, {hi}]"))
            }
            Self::Sum2u { iw, sw } if !(iw.is_finite() && sw.is_finite() && *iw >= 0.0 && *sw >= 0.0) => {
                bad(format!("sum2u weights must be finite and nonnegative, got iw={iw}, sw={sw}"))
            }
            Self::Custom { name, quantiles } => {
                if quantiles.len() < 2 {
                    return bad(format!("custom distribution {name:?} needs at least two quantiles"));
                }
                if quantiles.iter().any(|q| !q.is_finite()) || quantiles.windows(2).any(|w| w[0] > w[1]) {
                    return bad(format!("custom distribution {name:?} quantiles must be finite and nondecreasing"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Closed support `[min, max]`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Point { value } => (*value, *value),
            Self::Uniform { lo, hi } => (*lo, *hi),
            Self::Sum2u { iw, sw } => (0.0, iw + sw),
            Self::Custom { quantiles, .. } => (quantiles[0], quantiles[quantiles.len() - 1]),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Point { value } => *value,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Sum2u { iw, sw } => 0.5 * (iw + sw),
            Self::Custom { quantiles, .. } => {
                let n = quantiles.len() - 1;
                quantiles.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() / n as f64
            }
        }
    }

    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        self.draw(rng).value
    }

    pub fn draw(&self, rng: &mut RandomStream) -> Draw {
        match self {
            Self::Point { value } => Draw { value: *value, parts: None },
            Self::Uniform { lo, hi } => Draw { value: rng.uniform_in(*lo, *hi), parts: None },
            Self::Sum2u { iw, sw } => {
                let iota = iw * rng.uniform();
                let sigma = sw * rng.uniform();
                Draw { value: iota + sigma, parts: Some((iota, sigma)) }
            }
            Self::Custom { quantiles, .. } => {
                let pos = rng.uniform() * (quantiles.len() - 1) as f64;
                let k = (pos.floor() as usize).min(quantiles.len() - 2);
                let frac = pos - k as f64;
                Draw { value: quantiles[k] + frac * (quantiles[k + 1] - quantiles[k]), parts: None }
            }
        }
    }
}

pub fn sample_coefficient(dist: &CoefficientDistribution, rng: &mut RandomStream) -> f64 {
    dist.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    /// One draw per position update, shared by every dimension.
    Vector,
    /// A fresh draw per dimension.
    #[default]
    Component,
}

impl ScalingMode {
    pub fn slots(&self, dims: usize) -> usize {
        match self {
            ScalingMode::Vector => 1,
            ScalingMode::Component => dims,
        }
    }
}

/// Per-dimension coefficients for one position update.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledCoefficients {
    pub omega: Vec<f64>,
    pub phi: Vec<f64>,
    /// (ι, σ) per dimension when φ came from `sum2u`.
    pub parts: Option<Vec<(f64, f64)>>,
}

pub fn sample_scaled_coefficients(
    omega_dist: &CoefficientDistribution,
    phi_dist: &CoefficientDistribution,
    mode: ScalingMode,
    dims: usize,
    rng: &mut RandomStream,
) -> ScaledCoefficients {
    let slots = mode.slots(dims);
    let mut omega = Vec::with_capacity(slots);
    let mut phi = Vec::with_capacity(slots);
    let mut parts = Vec::with_capacity(slots);
    for _ in 0..slots {
        omega.push(omega_dist.sample(rng));
        let d = phi_dist.draw(rng);
        phi.push(d.value);
        parts.push(d.parts);
    }
    let parts: Option<Vec<(f64, f64)>> = parts.into_iter().collect();
    if slots == dims {
        return ScaledCoefficients { omega, phi, parts };
    }
    ScaledCoefficients { omega: vec![omega[0]; dims], phi: vec![phi[0]; dims], parts: parts.map(|p| vec![p[0]; dims]) }
}

/// How the overall attractor is formed from the particle's own memory and
/// the social attractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttractorCombiner {
    /// `p = (ι·xb_i + σ·xb_k)/(ι + σ)`, sharing the draws that build φ.
    CoupledClassical,
    /// `p = λ·xb_i + (1 − λ)·xb_k` with λ drawn independently of φ.
    DecoupledConvex { lambda: CoefficientDistribution },
}

impl Default for AttractorCombiner {
    fn default() -> Self {
        Self::DecoupledConvex { lambda: CoefficientDistribution::uniform(0.0, 1.0) }
    }
}

pub fn combine_attractors(
    combiner: &AttractorCombiner,
    xb_i: &[f64],
    xb_k: &[f64],
    phi_parts: Option<&[(f64, f64)]>,
    mode: ScalingMode,
    rng: &mut RandomStream,
) -> Result<Vec<f64>, StochasticError> {
    if xb_i.len() != xb_k.len() {
        return Err(StochasticError::DimensionMismatch(xb_i.len(), xb_k.len()));
    }
    let dims = xb_i.len();
    match combiner {
        AttractorCombiner::CoupledClassical => {
            let parts = phi_parts.ok_or(StochasticError::MissingPhiParts)?;
            if parts.len() != dims {
                return Err(StochasticError::DimensionMismatch(dims, parts.len()));
            }
            xb_i.iter()
                .zip(xb_k)
                .zip(parts)
                .map(|((&a, &b), &(iota, sigma))| {
                    let phi = iota + sigma;
                    if phi == 0.0 {
                        return Err(StochasticError::DegenerateWeights);
                    }
                    Ok(within(a, b, (iota * a + sigma * b) / phi))
                })
                .collect()
        }
        AttractorCombiner::DecoupledConvex { lambda } => {
            let lambdas: Vec<f64> = (0..mode.slots(dims)).map(|_| lambda.sample(rng)).collect();
            Ok(xb_i
                .iter()
                .zip(xb_k)
                .enumerate()
                .map(|(j, (&a, &b))| {
                    let l = if lambdas.len() == 1 { lambdas[0] } else { lambdas[j] };
                    within(a, b, l * a + (1.0 - l) * b)
                })
                .collect())
        }
    }
}

// Rounding can push a convex combination one ulp past its ends.
fn within(a: f64, b: f64, v: f64) -> f64 {
    v.clamp(a.min(b), a.max(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut r = RandomStream::new(42);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RandomStream::new(42);
            (0..8).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        let mut p1 = RandomStream::for_particle(42, 1);
        let mut p2 = RandomStream::for_particle(42, 2);
        assert_ne!(p1.next_u64(), p2.next_u64());
        let mut other = RandomStream::new(43);
        assert_ne!(other.next_u64(), a[0]);
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = RandomStream::new(7);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = RandomStream::new(3);
        let mut v: Vec<usize> = (0..50).collect();
        r.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }

    #[test]
    fn point_mass_is_constant() {
        let mut r = RandomStream::new(1);
        let d = CoefficientDistribution::point(1.494);
        assert!((0..100).all(|_| d.sample(&mut r) == 1.494));
    }

    #[test]
    fn sum2u_moments() {
        let mut r = RandomStream::new(11);
        let d = CoefficientDistribution::sum2u(2.0, 2.0);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut below_one = 0usize;
        for _ in 0..n {
            let x = d.sample(&mut r);
            assert!((0.0..=4.0).contains(&x));
            sum += x;
            if x < 1.0 {
                below_one += 1;
            }
        }
        assert!((sum / n as f64 - 2.0).abs() < 0.01);
        assert!((below_one as f64 / n as f64 - 0.125).abs() < 0.005);
    }

    #[test]
    fn triangular_probability_by_convolution() {
        // P(ι + σ < 1) for ι, σ ~ U(0, 2): brute-force over a midpoint grid.
        let n = 2000;
        let h = 2.0 / n as f64;
        let mut hits = 0usize;
        for i in 0..n {
            for j in 0..n {
                if (i as f64 + 0.5) * h + (j as f64 + 0.5) * h < 1.0 {
                    hits += 1;
                }
            }
        }
        let p = hits as f64 / (n * n) as f64;
        assert!((p - 0.125).abs() < 1e-3);
    }

    #[test]
    fn custom_quantiles_interpolate() {
        let d = CoefficientDistribution::Custom { name: "ramp".into(), quantiles: vec![0.0, 1.0, 3.0] };
        d.validate().unwrap();
        assert_eq!(d.support(), (0.0, 3.0));
        let mut r = RandomStream::new(5);
        for _ in 0..1000 {
            let x = d.sample(&mut r);
            assert!((0.0..=3.0).contains(&x));
        }
        assert!(CoefficientDistribution::Custom { name: "bad".into(), quantiles: vec![2.0, 1.0] }.validate().is_err());
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(CoefficientDistribution::uniform(2.0, 1.0).validate().is_err());
        assert!(CoefficientDistribution::sum2u(-1.0, 1.0).validate().is_err());
        assert!(CoefficientDistribution::point(f64::NAN).validate().is_err());
    }

    #[test]
    fn vector_scaling_broadcasts() {
        let mut r = RandomStream::new(9);
        let s = sample_scaled_coefficients(
            &CoefficientDistribution::point(0.7),
            &CoefficientDistribution::point(1.5),
            ScalingMode::Vector,
            3,
            &mut r,
        );
        assert_eq!(s.omega, vec![0.7; 3]);
        assert_eq!(s.phi, vec![1.5; 3]);

        let s = sample_scaled_coefficients(
            &CoefficientDistribution::point(0.7),
            &CoefficientDistribution::uniform(0.0, 4.0),
            ScalingMode::Vector,
            5,
            &mut r,
        );
        assert!(s.phi.iter().all(|&x| x == s.phi[0]));
    }

    #[test]
    fn component_scaling_draws_are_uncorrelated() {
        let mut r = RandomStream::new(13);
        let n = 100_000;
        let s = sample_scaled_coefficients(
            &CoefficientDistribution::point(0.7),
            &CoefficientDistribution::uniform(0.0, 4.0),
            ScalingMode::Component,
            n,
            &mut r,
        );
        // Lag-1 correlation across dimensions.
        let x = &s.phi[..n - 1];
        let y = &s.phi[1..];
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (mean(x), mean(y));
        let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        let rho = cov / (vx * vy).sqrt();
        assert!(rho.abs() < 0.01, "rho = {rho}");
    }

    #[test]
    fn sum2u_parts_are_kept() {
        let mut r = RandomStream::new(21);
        let s = sample_scaled_coefficients(
            &CoefficientDistribution::point(0.7),
            &CoefficientDistribution::sum2u(1.0, 3.0),
            ScalingMode::Component,
            4,
            &mut r,
        );
        let parts = s.parts.unwrap();
        for (phi, (i, sg)) in s.phi.iter().zip(parts) {
            assert_eq!(*phi, i + sg);
            assert!((0.0..=1.0).contains(&i) && (0.0..=3.0).contains(&sg));
        }
    }

    #[test]
    fn combine_examples() {
        let mut r = RandomStream::new(0);
        let half = AttractorCombiner::DecoupledConvex { lambda: CoefficientDistribution::point(0.5) };
        let p = combine_attractors(&half, &[0.0, 0.0], &[2.0, 4.0], None, ScalingMode::Vector, &mut r).unwrap();
        assert_eq!(p, vec![1.0, 2.0]);

        let coupled = AttractorCombiner::CoupledClassical;
        let p = combine_attractors(&coupled, &[1.5, -2.0], &[9.0, 7.0], Some(&[(2.0, 0.0), (2.0, 0.0)]), ScalingMode::Component, &mut r)
            .unwrap();
        assert_eq!(p, vec![1.5, -2.0]);

        let p = combine_attractors(&coupled, &[0.0], &[4.0], Some(&[(1.0, 3.0)]), ScalingMode::Component, &mut r).unwrap();
        let direct = (1.0 * 0.0 + 3.0 * 4.0) / (1.0 + 3.0);
        assert_eq!(p, vec![direct]);
        assert_eq!(p, vec![3.0]);

        assert_eq!(
            combine_attractors(&coupled, &[0.0], &[4.0], Some(&[(0.0, 0.0)]), ScalingMode::Component, &mut r),
            Err(StochasticError::DegenerateWeights)
        );
        assert_eq!(
            combine_attractors(&coupled, &[0.0], &[4.0], None, ScalingMode::Component, &mut r),
            Err(StochasticError::MissingPhiParts)
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn attractor_is_convex(
                seed in any::<u64>(),
                pairs in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6, 0.0f64..5.0, 0.0f64..5.0), 1..8),
                coupled in any::<bool>(),
                vector in any::<bool>(),
            ) {
                let a: Vec<f64> = pairs.iter().map(|t| t.0).collect();
                let b: Vec<f64> = pairs.iter().map(|t| t.1).collect();
                let parts: Vec<(f64, f64)> = pairs.iter().map(|t| (t.2 + 1e-3, t.3)).collect();
                let combiner = if coupled { AttractorCombiner::CoupledClassical } else { AttractorCombiner::default() };
                let mode = if vector { ScalingMode::Vector } else { ScalingMode::Component };
                let mut r = RandomStream::new(seed);
                let p = combine_attractors(&combiner, &a, &b, Some(&parts), mode, &mut r).unwrap();
                for j in 0..a.len() {
                    prop_assert!(p[j] >= a[j].min(b[j]) && p[j] <= a[j].max(b[j]));
                }
            }
        }
    }
}
