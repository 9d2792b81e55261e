//! Deterministic trajectory mathematics for a single particle.
//!
//! With stochasticity removed, one coordinate of a particle obeys the
//! second-order linear recurrence
//!
//! ```text
//! x(t+1) = x(t) + ω̂ (x(t) − x(t−1)) + φ̂ (p − x(t))
//! ```
//!
//! whose characteristic polynomial `r² − (1 + ω̂ − φ̂) r + ω̂` decides
//! everything: the magnitude of the dominant root sets the convergence
//! speed and its sign (when the roots are real) sets the type of behaviour.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative threshold on `γ²` below which the roots are treated as repeated.
pub const REPEATED_ROOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("coefficient {name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("acceleration coefficient must be nonnegative, got {0}")]
    NegativeAcceleration(f64),
    #[error("convergence speed must lie in [0, 1], got {0}")]
    SpeedOutOfRange(f64),
    #[error("phi fraction must lie in the open interval (0, 1), got {0}")]
    PhiFractionOutOfRange(f64),
    #[error("{0:?} behaviour cannot be produced with zero convergence speed")]
    ZeroSpeedSector(BehaviourKind),
    #[error("could not place coefficients inside the {0:?} sector")]
    SectorNotReached(BehaviourKind),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("internal inconsistency: complex roots with nonpositive inertia {0}")]
    Inconsistent(f64),
}

/// The deterministic pair (ω̂, φ̂) governing one particle's trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCoefficients {
    omega_hat: f64,
    phi_hat: f64,
}

impl ReferenceCoefficients {
    pub fn new(omega_hat: f64, phi_hat: f64) -> Result<Self, TrajectoryError> {
        if !omega_hat.is_finite() {
            return Err(TrajectoryError::NonFinite { name: "omega_hat", value: omega_hat });
        }
        if !phi_hat.is_finite() {
            return Err(TrajectoryError::NonFinite { name: "phi_hat", value: phi_hat });
        }
        if phi_hat < 0.0 {
            return Err(TrajectoryError::NegativeAcceleration(phi_hat));
        }
        Ok(Self { omega_hat, phi_hat })
    }

    pub fn omega_hat(&self) -> f64 {
        self.omega_hat
    }

    pub fn phi_hat(&self) -> f64 {
        self.phi_hat
    }

    /// `1 + ω̂ − φ̂`, the sum of the characteristic roots.
    pub fn root_sum(&self) -> f64 {
        1.0 + self.omega_hat - self.phi_hat
    }

    /// Discriminant `γ² = (1 + ω̂ − φ̂)² − 4ω̂`.
    ///
    /// For ω̂ ≥ 0 the factored form `(φ̂ − (√ω̂−1)²)(φ̂ − (√ω̂+1)²)` is used,
    /// which keeps full relative accuracy next to the repeated-root curves.
    pub fn gamma_sq(&self) -> f64 {
        let (w, f) = (self.omega_hat, self.phi_hat);
        if w >= 0.0 {
            let s = w.sqrt();
            (f - (s - 1.0) * (s - 1.0)) * (f - (s + 1.0) * (s + 1.0))
        } else {
            let sum = 1.0 + w - f;
            sum * sum - 4.0 * w
        }
    }

    /// The three strict inequalities bounding the convergence triangle:
    /// `ω̂ < 1`, `φ̂ > 0` and `ω̂ > φ̂/2 − 1`.
    pub fn inside_convergence_triangle(&self) -> bool {
        self.omega_hat < 1.0 && self.phi_hat > 0.0 && self.omega_hat > self.phi_hat / 2.0 - 1.0
    }

    fn repeated_threshold(&self) -> f64 {
        REPEATED_ROOT_TOLERANCE * 1f64.max(self.phi_hat * self.phi_hat).max(self.omega_hat * self.omega_hat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootCase {
    RealDistinct,
    RealRepeated,
    ComplexConjugate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootSign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BehaviourKind {
    Oscillatory,
    Monotonic,
    Zigzagging,
}

impl BehaviourKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BehaviourKind::Oscillatory => "oscillatory",
            BehaviourKind::Monotonic => "monotonic",
            BehaviourKind::Zigzagging => "zigzagging",
        }
    }
}

/// Characteristic roots of one coefficient pair and what they imply.
///
/// For real roots `r1 ≥ r2` and `r1 − r2 = γ`; for complex roots `r1`
/// carries the positive imaginary part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootAnalysis {
    pub case: RootCase,
    pub r1: Complex64,
    pub r2: Complex64,
    pub gamma_sq: f64,
    pub dominant_magnitude: f64,
    /// `None` for complex roots and for the double root at zero.
    pub dominant_sign: Option<RootSign>,
    pub convergent: bool,
}

impl RootAnalysis {
    /// `γ = √γ²` for real roots, `γ' = √(−γ²)` for complex ones.
    pub fn gamma(&self) -> f64 {
        self.gamma_sq.abs().sqrt()
    }
}

pub fn characteristic_roots(c: &ReferenceCoefficients) -> RootAnalysis {
    let sum = c.root_sum();
    let gamma_sq = c.gamma_sq();

    if gamma_sq.abs() <= c.repeated_threshold() {
        let r = sum / 2.0;
        let magnitude = r.abs();
        return RootAnalysis {
            case: RootCase::RealRepeated,
            r1: Complex64::new(r, 0.0),
            r2: Complex64::new(r, 0.0),
            gamma_sq,
            dominant_magnitude: magnitude,
            dominant_sign: sign_of(r),
            convergent: magnitude < 1.0,
        };
    }

    if gamma_sq > 0.0 {
        let gamma = gamma_sq.sqrt();
        // Larger-magnitude root first, the other through Vieta to avoid cancellation.
        let big = if sum >= 0.0 { (sum + gamma) / 2.0 } else { (sum - gamma) / 2.0 };
        let small = c.omega_hat() / big;
        let (r1, r2) = if big >= small { (big, small) } else { (small, big) };
        // Ties (r1 = −r2) resolve toward r1, the nonnegative root.
        let dominant = if r1.abs() >= r2.abs() { r1 } else { r2 };
        let magnitude = dominant.abs();
        RootAnalysis {
            case: RootCase::RealDistinct,
            r1: Complex64::new(r1, 0.0),
            r2: Complex64::new(r2, 0.0),
            gamma_sq,
            dominant_magnitude: magnitude,
            dominant_sign: sign_of(dominant),
            convergent: magnitude < 1.0,
        }
    } else {
        let gamma_prime = (-gamma_sq).sqrt();
        let magnitude = c.omega_hat().max(0.0).sqrt();
        RootAnalysis {
            case: RootCase::ComplexConjugate,
            r1: Complex64::new(sum / 2.0, gamma_prime / 2.0),
            r2: Complex64::new(sum / 2.0, -gamma_prime / 2.0),
            gamma_sq,
            dominant_magnitude: magnitude,
            dominant_sign: None,
            convergent: magnitude < 1.0,
        }
    }
}

fn sign_of(r: f64) -> Option<RootSign> {
    if r > 0.0 {
        Some(RootSign::Positive)
    } else if r < 0.0 {
        Some(RootSign::Negative)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviourClass {
    pub kind: BehaviourKind,
    pub convergent: bool,
    pub rate: f64,
}

/// Type of behaviour from the sign of the dominant root, convergence from
/// the triangle inequalities.
///
/// A dominant root of exactly zero (only at ω̂ = 0, φ̂ = 1) has no sign and is
/// reported as oscillatory, like the complex case it borders.
pub fn classify_behaviour(c: &ReferenceCoefficients) -> BehaviourClass {
    let roots = characteristic_roots(c);
    let kind = match (roots.case, roots.dominant_sign) {
        (RootCase::ComplexConjugate, _) | (_, None) => BehaviourKind::Oscillatory,
        (_, Some(RootSign::Positive)) => BehaviourKind::Monotonic,
        (_, Some(RootSign::Negative)) => BehaviourKind::Zigzagging,
    };
    BehaviourClass { kind, convergent: c.inside_convergence_triangle(), rate: roots.dominant_magnitude }
}

/// One deterministic step: `x + ω̂(x − x_prev) + φ̂(p − x)`.
pub fn step_recurrence(x_curr: f64, x_prev: f64, c: &ReferenceCoefficients, p: f64) -> f64 {
    advance(x_curr, x_prev, c.omega_hat(), c.phi_hat(), p)
}

/// [`step_recurrence`] on raw coefficients.
///
/// Evaluated as offsets from the attractor, `p + (1+ω−φ)(x−p) − ω(x_prev−p)`,
/// so that a particle resting on its attractor stays there exactly and
/// (ω, φ) = (0, 1) lands on `p` exactly. Terms with a zero coefficient are
/// dropped, which keeps that landing exact even when `x − p` overflows.
#[inline]
pub fn advance(x_curr: f64, x_prev: f64, omega: f64, phi: f64, p: f64) -> f64 {
    let a = 1.0 + omega - phi;
    let mut d = 0.0;
    if a != 0.0 {
        d += a * (x_curr - p);
    }
    if omega != 0.0 {
        d -= omega * (x_prev - p);
    }
    p + d
}

/// Positions at t = 0 and t = 1 plus the stationary attractor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryInitialState {
    pub x0: f64,
    pub x1: f64,
    pub p: f64,
}

/// Closed-form position `x(t)` for a stationary attractor.
///
/// All three cases are evaluated through the same decomposition
///
/// ```text
/// x(t) = p + (x(1) − p) h(t) − ω̂ (x(0) − p) h(t−1),   h(t) = (r1ᵗ − r2ᵗ)/(r1 − r2)
/// ```
///
/// with `h(t) = t rᵗ⁻¹` for a double root and `h(t) = 2ρᵗ sin(θt)/γ'` for
/// complex roots (ρ = √ω̂, θ the root argument). This is the classical
/// closed form regrouped so that `h` can be computed without cancellation
/// when the roots are close.
pub fn closed_form_position(c: &ReferenceCoefficients, init: &TrajectoryInitialState, t: u64) -> Result<f64, TrajectoryError> {
    match t {
        0 => return Ok(init.x0),
        1 => return Ok(init.x1),
        _ => {}
    }
    let roots = characteristic_roots(c);
    if roots.case == RootCase::ComplexConjugate && c.omega_hat() <= 0.0 {
        return Err(TrajectoryError::Inconsistent(c.omega_hat()));
    }
    let h_prev = fundamental(c, &roots, t - 1);
    let h = fundamental(c, &roots, t);
    let y0 = init.x0 - init.p;
    let y1 = init.x1 - init.p;
    Ok(init.p + (y1 * h - c.omega_hat() * y0 * h_prev))
}

/// `h(t) = Σ_{k<t} r1ᵏ r2ᵗ⁻¹⁻ᵏ`, the fundamental solution with h(0) = 0, h(1) = 1.
fn fundamental(c: &ReferenceCoefficients, roots: &RootAnalysis, t: u64) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let tf = t as f64;
    match roots.case {
        RootCase::RealRepeated => {
            let r = roots.r1.re;
            tf * pow(r, t - 1)
        }
        RootCase::RealDistinct => {
            let (r1, r2) = (roots.r1.re, roots.r2.re);
            let gamma = roots.gamma();
            if r1 * r2 > 0.0 {
                // Same sign: base on r2 and write (r1/r2)ᵗ − 1 = expm1(t·ln(1 + γ/r2)).
                let eps = gamma / r2;
                pow(r2, t - 1) * (tf * eps.ln_1p()).exp_m1() / eps
            } else {
                (pow(r1, t) - pow(r2, t)) / gamma
            }
        }
        RootCase::ComplexConjugate => {
            let half_sum = c.root_sum() / 2.0;
            let half_gp = roots.gamma() / 2.0;
            let rho = c.omega_hat().sqrt();
            // sin(θt)/sin(θ); for θ past π/2 reflect θ → π − θ to keep sin(θt) accurate.
            let ratio = if half_sum >= 0.0 {
                let theta = half_gp.atan2(half_sum);
                (theta * tf).sin() / theta.sin()
            } else {
                let theta = half_gp.atan2(-half_sum);
                let s = (theta * tf).sin() / theta.sin();
                if t % 2 == 1 {
                    s
                } else {
                    -s
                }
            };
            pow(rho, t - 1) * ratio
        }
    }
}

fn pow(base: f64, exp: u64) -> f64 {
    if exp <= i32::MAX as u64 {
        base.powi(exp as i32)
    } else {
        base.powf(exp as f64)
    }
}

/// Root argument θ of complex roots, `acos((1+ω̂−φ̂)/(2√ω̂))`.
///
/// `None` unless the roots are complex; the discriminant decides, not the
/// domain of `acos`.
pub fn oscillation_angle(c: &ReferenceCoefficients) -> Option<f64> {
    let roots = characteristic_roots(c);
    (roots.case == RootCase::ComplexConjugate).then(|| (roots.gamma() / 2.0).atan2(c.root_sum() / 2.0))
}

/// Picks coefficients with a requested behaviour and convergence speed.
///
/// For oscillatory behaviour `ω̂ = speed²` and φ̂ is placed at `phi_fraction`
/// of the open interval `((√ω̂−1)², (√ω̂+1)²)`. For the real-root sectors the
/// dominant root is pinned at `±speed` and the other root at
/// `±phi_fraction·speed`; the pair is recovered from Vieta.
pub fn coefficients_for(kind: BehaviourKind, speed: f64, phi_fraction: f64) -> Result<ReferenceCoefficients, TrajectoryError> {
    if !(0.0..=1.0).contains(&speed) {
        return Err(TrajectoryError::SpeedOutOfRange(speed));
    }
    if !(phi_fraction > 0.0 && phi_fraction < 1.0) {
        return Err(TrajectoryError::PhiFractionOutOfRange(phi_fraction));
    }
    match kind {
        BehaviourKind::Oscillatory => {
            let omega = speed * speed;
            let lo = (speed - 1.0) * (speed - 1.0);
            let hi = (speed + 1.0) * (speed + 1.0);
            ReferenceCoefficients::new(omega, lo + phi_fraction * (hi - lo))
        }
        BehaviourKind::Monotonic | BehaviourKind::Zigzagging => {
            if speed == 0.0 {
                return Err(TrajectoryError::ZeroSpeedSector(kind));
            }
            let sign = if kind == BehaviourKind::Monotonic { 1.0 } else { -1.0 };
            let place = |fraction: f64| {
                let dominant = sign * speed;
                let other = sign * fraction * speed;
                let omega = dominant * other;
                ReferenceCoefficients::new(omega, 1.0 + omega - (dominant + other))
            };
            let mut fraction = phi_fraction;
            for _ in 0..64 {
                let c = place(fraction)?;
                if classify_behaviour(&c).kind == kind {
                    return Ok(c);
                }
                fraction = 0.5 * (fraction + 0.5);
            }
            Err(TrajectoryError::SectorNotReached(kind))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub omega: f64,
    pub phi: f64,
    pub rate: f64,
    pub kind: BehaviourKind,
    pub convergent: bool,
}

/// Inclusive, evenly spaced grid over the (ω̂, φ̂) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub omega: (f64, f64),
    pub phi: (f64, f64),
    pub omega_steps: usize,
    pub phi_steps: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        for (name, (lo, hi)) in [("omega", self.omega), ("phi", self.phi)] {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(TrajectoryError::InvalidGrid(format!("{name} range must satisfy lo < hi, got {lo}:{hi}")));
            }
        }
        if self.omega_steps < 2 || self.phi_steps < 2 {
            return Err(TrajectoryError::InvalidGrid("resolution must be at least 2 per axis".into()));
        }
        Ok(())
    }

    pub fn omega_at(&self, i: usize) -> f64 {
        linspace_at(self.omega, self.omega_steps, i)
    }

    pub fn phi_at(&self, j: usize) -> f64 {
        linspace_at(self.phi, self.phi_steps, j)
    }
}

fn linspace_at((lo, hi): (f64, f64), steps: usize, i: usize) -> f64 {
    if i + 1 == steps {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (steps - 1) as f64
    }
}

/// Row-major (ω̂ outer, φ̂ inner) classification grid. Points with φ̂ < 0
/// lie outside the model and are skipped.
pub fn dominant_root_grid(spec: &GridSpec) -> Result<Vec<GridCell>, TrajectoryError> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(spec.omega_steps * spec.phi_steps);
    for i in 0..spec.omega_steps {
        let omega = spec.omega_at(i);
        for j in 0..spec.phi_steps {
            let phi = spec.phi_at(j);
            if phi < 0.0 {
                continue;
            }
            let c = ReferenceCoefficients::new(omega, phi)?;
            let class = classify_behaviour(&c);
            cells.push(GridCell { omega, phi, rate: class.rate, kind: class.kind, convergent: class.convergent });
        }
    }
    Ok(cells)
}

/// Vertices (ω̂, φ̂) of the convergence triangle bounded by ω̂ = 1, φ̂ = 0 and
/// ω̂ = φ̂/2 − 1.
pub const CONVERGENCE_TRIANGLE: [(f64, f64); 3] = [(-1.0, 0.0), (1.0, 0.0), (1.0, 4.0)];

/// Number of steps in one full turn of a complex-root trajectory.
pub fn oscillation_period(c: &ReferenceCoefficients) -> Option<f64> {
    oscillation_angle(c).map(|theta| 2.0 * PI / theta)
}
