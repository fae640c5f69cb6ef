//! The friend's emission rule and record declaration.

use num_complex::Complex64 as C64;

use super::{EngineError, Result};
use crate::qmath::{self, re, CMatrix, CVector};
use crate::registers::{DiscreteState, ENV, READY, RECORD_MINUS, RECORD_PLUS};

/// Above this purity the environment holds a definite record.
pub const RECORD_PURITY: f64 = 1.0 - 1e-9;
/// Below this purity the lab is treated as entangled with the outside.
pub const MIXED_PURITY: f64 = 1.0 - 1e-6;
/// Population of `ε0` tolerated at emission time.
const READY_POPULATION_TOL: f64 = 1e-12;

/// How the two qubits were produced at E2.
#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    /// `ε± → ε± ⊗ |±⟩|±⟩`, the lab being entangled with the outside.
    Controlled,
    /// Both qubits prepared in `q = a|+⟩ + b|−⟩` matching the definite
    /// record `a ε+ + b ε−`.
    RecordConditioned(CVector),
}

impl Emission {
    pub fn label(&self) -> String {
        match self {
            Emission::Controlled => "controlled: e+ -> |+>|+>, e- -> |->|->".to_string(),
            Emission::RecordConditioned(q) => {
                let k = ket_label(q);
                format!("{k}{k}")
            }
        }
    }
}

/// Names `q` when it matches a z or x eigenstate up to phase.
pub fn ket_label(q: &CVector) -> String {
    let named = [
        ("|+>", qmath::ket_plus()),
        ("|->", qmath::ket_minus()),
        ("|+x>", qmath::ket_x(1)),
        ("|-x>", qmath::ket_x(-1)),
    ];
    for (name, k) in &named {
        if k.inner(q).norm_sqr() > RECORD_PURITY {
            return (*name).to_string();
        }
    }
    format!("({:.6}, {:.6})", q[0], q[1])
}

/// Reduced environment state restricted to `span{ε+, ε−}`, with the check
/// that no `ε0` population remains.
fn record_block(state: &DiscreteState) -> Result<CMatrix> {
    let rho = state.reduced_dm(&[ENV])?;
    if rho[(READY, READY)].re > READY_POPULATION_TOL {
        return Err(EngineError::ProtocolOrder(
            "environment still holds the pre-measurement state ε0; the friend has not measured".into(),
        ));
    }
    let idx = [RECORD_PLUS, RECORD_MINUS];
    let mut block = CMatrix::zeros(2, 2);
    for (i, &a) in idx.iter().enumerate() {
        for (j, &b) in idx.iter().enumerate() {
            block[(i, j)] = rho[(a, b)];
        }
    }
    Ok(block)
}

/// `Tr(ρ²)/Tr(ρ)²` of a block cut from a valid reduced density matrix.
fn block_purity(rho: &CMatrix) -> f64 {
    let tr = rho.trace().re;
    rho.entries().iter().map(|z| z.norm_sqr()).sum::<f64>() / (tr * tr)
}

/// Pure vector of a rank-one 2×2 density matrix, up to phase.
fn pure_vector(rho: &CMatrix) -> CVector {
    let k = if rho[(0, 0)].re >= rho[(1, 1)].re { 0 } else { 1 };
    let scale = re(1.0 / rho[(k, k)].re.sqrt());
    let v = CVector::new(vec![rho[(0, k)] * scale, rho[(1, k)] * scale]).expect("2 entries");
    v.normalized().expect("nonzero column")
}

/// Record-conditioned emission: if the friend's environment is in a definite
/// state `a ε+ + b ε−`, both qubits leave as `a|+⟩ + b|−⟩`; if the lab is
/// entangled with the outside, the controlled emission applies.
pub fn friend_send_qubits(state: &DiscreteState) -> Result<(DiscreteState, Emission)> {
    let block = record_block(state)?;
    let p = block_purity(&block);
    if p > RECORD_PURITY {
        let q = pure_vector(&block);
        Ok((state.append_qubits(&q, &q)?, Emission::RecordConditioned(q)))
    } else if p < MIXED_PURITY {
        Ok((state.controlled_emit()?, Emission::Controlled))
    } else {
        Err(EngineError::AmbiguousRecord(p))
    }
}

/// Matches the environment's pure state against `ε±` (basis z) and `ε±x`
/// (basis x), up to global phase.
pub fn declare_record(state: &DiscreteState) -> Result<(super::RecordBasis, i8)> {
    let rho = state.reduced_dm(&[ENV])?;
    let p = qmath::purity(&rho)?;
    if p <= RECORD_PURITY {
        return Err(EngineError::RecordUndefined(p));
    }
    if rho[(READY, READY)].re > READY_POPULATION_TOL {
        return Err(EngineError::Undeclarable);
    }
    let block = record_block(state)?;
    classify_record(&pure_vector(&block)).ok_or(EngineError::Undeclarable)
}

/// Matches a record vector `a ε+ + b ε−`, given as `(a, b)`, against the z
/// and x records up to global phase.
pub fn classify_record(e: &CVector) -> Option<(super::RecordBasis, i8)> {
    use super::RecordBasis;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let candidates: [(RecordBasis, i8, [C64; 2]); 4] = [
        (RecordBasis::Z, 1, [re(1.0), re(0.0)]),
        (RecordBasis::Z, -1, [re(0.0), re(1.0)]),
        (RecordBasis::X, 1, [re(h), re(h)]),
        (RecordBasis::X, -1, [re(h), re(-h)]),
    ];
    for (basis, value, c) in candidates {
        let overlap = c[0].conj() * e[0] + c[1].conj() * e[1];
        if overlap.norm_sqr() > RECORD_PURITY {
            return Some((basis, value));
        }
    }
    None
}
