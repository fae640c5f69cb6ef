use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_3, PI};

use num_complex::Complex64 as C64;

use super::{EngineError, Result};
use crate::qmath::{self, CVector, ALGEBRA_TOL};
use crate::relativity::{Event, EventId};

/// How the external agents treat the friend's measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterpretationMode {
    /// The sealed lab evolves unitarily; only A's and W's measurements update
    /// the state, instantaneously in the executing frame.
    UnitaryLab,
    /// The friend's measurement collapses the state for every agent.
    ObjectiveCollapse,
}

impl InterpretationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InterpretationMode::UnitaryLab => "unitary_lab",
            InterpretationMode::ObjectiveCollapse => "objective_collapse",
        }
    }
}

/// What the external observer does with the two emitted qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasurementScheme {
    /// Couple to pointers, post-select on `+θ1`, `+θ2`, read positions.
    Weak,
    /// Q1 measured in the z basis, Q2 in the x basis.
    Projective,
}

impl MeasurementScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasurementScheme::Weak => "weak",
            MeasurementScheme::Projective => "projective",
        }
    }
}

/// Spin state `s0` the friend resets to after measuring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResetState {
    Plus,
    Minus,
    PlusX,
}

impl ResetState {
    pub fn ket(self) -> CVector {
        match self {
            ResetState::Plus => qmath::ket_plus(),
            ResetState::Minus => qmath::ket_minus(),
            ResetState::PlusX => qmath::ket_x(1),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ResetState::Plus => "plus",
            ResetState::Minus => "minus",
            ResetState::PlusX => "plus_x",
        }
    }
}

/// Rest-frame coordinates of the four events. E0–E2 sit at the lab (x = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub x_a: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { t0: 0.0, t1: 0.5, t2: 1.0, t3: 2.0, x_a: 10.0 }
    }
}

impl Geometry {
    pub fn events(&self) -> [Event; 4] {
        [
            Event::new(EventId::E0, self.t0, 0.0),
            Event::new(EventId::E1, self.t1, 0.0),
            Event::new(EventId::E2, self.t2, 0.0),
            Event::new(EventId::E3, self.t3, self.x_a),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub alpha: C64,
    pub beta: C64,
    pub s0: ResetState,
    pub theta1: f64,
    pub theta2: f64,
    /// Alice's measurement direction in the xz plane (0 = z, π/2 = x).
    pub alice_basis_angle: f64,
    pub g: f64,
    pub w: f64,
    pub geometry: Geometry,
    /// Velocity of the executing frame relative to the lab, in units of c.
    pub boost: f64,
    pub mode: InterpretationMode,
    pub scheme: MeasurementScheme,
    pub trials: u64,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            alpha: C64::new(FRAC_1_SQRT_2, 0.0),
            beta: C64::new(FRAC_1_SQRT_2, 0.0),
            s0: ResetState::Plus,
            theta1: FRAC_PI_3,
            theta2: FRAC_PI_3,
            alice_basis_angle: FRAC_PI_2,
            g: 0.1,
            w: 1.0,
            geometry: Geometry::default(),
            boost: 0.0,
            mode: InterpretationMode::UnitaryLab,
            scheme: MeasurementScheme::Weak,
            trials: 100_000,
            seed: 0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EngineError::Configuration(m));
        let n = self.alpha.norm_sqr() + self.beta.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() > ALGEBRA_TOL {
            return bad(format!("|alpha|² + |beta|² = {n}, must be 1"));
        }
        for (name, t) in [("theta1", self.theta1), ("theta2", self.theta2)] {
            if !(0.0..=PI).contains(&t) {
                return bad(format!("{name} = {t} outside [0, π]"));
            }
        }
        if !self.alice_basis_angle.is_finite() {
            return bad("alice_basis is not finite".into());
        }
        if !self.g.is_finite() {
            return bad("g is not finite".into());
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return bad(format!("w = {} must be positive", self.w));
        }
        if !(self.boost.abs() < 1.0) {
            return bad(format!("frame beta = {} must satisfy |beta| < 1", self.boost));
        }
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        let gm = &self.geometry;
        if [gm.t0, gm.t1, gm.t2, gm.t3, gm.x_a].iter().any(|v| !v.is_finite()) {
            return bad("geometry values must be finite".into());
        }
        Ok(())
    }

    pub fn with_boost(&self, boost: f64) -> Self {
        Self { boost, ..self.clone() }
    }

    pub fn with_mode(&self, mode: InterpretationMode) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn with_scheme(&self, scheme: MeasurementScheme) -> Self {
        Self { scheme, ..self.clone() }
    }

    pub fn with_angles(&self, theta1: f64, theta2: f64) -> Self {
        Self { theta1, theta2, ..self.clone() }
    }

    pub fn with_alice_basis(&self, angle: f64) -> Self {
        Self { alice_basis_angle: angle, ..self.clone() }
    }
}
