//! Labeled tensor-product states for the discrete degrees of freedom.
//!
//! The protocol layout is `[S_F:2, M:3, E:3, A:2]` before emission and
//! `[S_F:2, M:3, E:3, A:2, Q1:2, Q2:2]` after. The apparatus `M` and the
//! environment `E` carry a pre-measurement state at index 0 and the two
//! record states at indices 1 (`+`) and 2 (`−`).

use num_complex::Complex64 as C64;
use rand::Rng;
use thiserror::Error;

use crate::qmath::{self, re, CMatrix, CVector, QmathError, ALGEBRA_TOL};

pub const SPIN_F: &str = "S_F";
pub const APPARATUS: &str = "M";
pub const ENV: &str = "E";
pub const ALICE: &str = "A";
pub const Q1: &str = "Q1";
pub const Q2: &str = "Q2";

/// Index of `m0` / `ε0` in the apparatus and environment registers.
pub const READY: usize = 0;
/// Index of `m+` / `ε+`.
pub const RECORD_PLUS: usize = 1;
/// Index of `m−` / `ε−`.
pub const RECORD_MINUS: usize = 2;

/// Amplitudes with modulus at or below this count as absent support.
pub const SUPPORT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegisterError {
    #[error("layout error: {0}")]
    Layout(String),
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("basis error: {0}")]
    Basis(String),
    #[error(transparent)]
    Qmath(#[from] QmathError),
}

pub type Result<T> = std::result::Result<T, RegisterError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub dim: usize,
}

/// Ordered list of named registers; the first is the most significant digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    registers: Vec<Register>,
    strides: Vec<usize>,
}

impl RegisterLayout {
    pub fn new<S: Into<String>>(registers: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let registers: Vec<Register> =
            registers.into_iter().map(|(name, dim)| Register { name: name.into(), dim }).collect();
        if registers.is_empty() {
            return Err(RegisterError::Layout("layout has no registers".into()));
        }
        for (i, r) in registers.iter().enumerate() {
            if r.dim < 2 {
                return Err(RegisterError::Layout(format!("register {} has dim {} < 2", r.name, r.dim)));
            }
            if registers[..i].iter().any(|o| o.name == r.name) {
                return Err(RegisterError::Layout(format!("duplicate register name {}", r.name)));
            }
        }
        let dims: Vec<usize> = registers.iter().map(|r| r.dim).collect();
        Ok(Self { strides: qmath::strides(&dims), registers })
    }

    /// `[S_F:2, M:3, E:3, A:2]`.
    pub fn protocol() -> Self {
        Self::new([(SPIN_F, 2), (APPARATUS, 3), (ENV, 3), (ALICE, 2)]).expect("static layout")
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.registers.iter().map(|r| r.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.registers.iter().map(|r| r.dim).product()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.registers.iter().any(|r| r.name == name)
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.registers
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| RegisterError::Layout(format!("unknown register {name}")))
    }

    pub fn dim_of(&self, name: &str) -> Result<usize> {
        Ok(self.registers[self.position(name)?].dim)
    }

    pub fn stride(&self, pos: usize) -> usize {
        self.strides[pos]
    }

    /// Digit of register `pos` within the flat index `idx`.
    #[inline]
    pub fn digit(&self, idx: usize, pos: usize) -> usize {
        (idx / self.strides[pos]) % self.registers[pos].dim
    }

    pub fn with_appended(&self, extra: &[(&str, usize)]) -> Result<Self> {
        let mut regs: Vec<(String, usize)> = self.registers.iter().map(|r| (r.name.clone(), r.dim)).collect();
        regs.extend(extra.iter().map(|(n, d)| (n.to_string(), *d)));
        Self::new(regs)
    }

    pub fn without(&self, pos: usize) -> Result<Self> {
        let regs: Vec<(String, usize)> = self
            .registers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pos)
            .map(|(_, r)| (r.name.clone(), r.dim))
            .collect();
        if regs.is_empty() {
            // Contracting the last register leaves a scalar amplitude.
            return Ok(Self { registers: Vec::new(), strides: Vec::new() });
        }
        Self::new(regs)
    }

    /// Flat index with the digit of register `pos` removed.
    #[inline]
    pub fn drop_digit(&self, idx: usize, pos: usize) -> usize {
        let s = self.strides[pos];
        let d = self.registers[pos].dim;
        let high = idx / (s * d);
        let low = idx % s;
        high * s + low
    }

    /// Flat index with the digit of register `pos` replaced by `digit`.
    #[inline]
    pub fn set_digit(&self, idx: usize, pos: usize, digit: usize) -> usize {
        idx - self.digit(idx, pos) * self.strides[pos] + digit * self.strides[pos]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    Normalized,
    /// An unnormalized branch produced by a projection.
    Branch,
}

/// A pure state of the discrete registers.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    layout: RegisterLayout,
    amplitudes: CVector,
    norm: Norm,
}

/// Label of a measurement basis, carried into records and reports.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisLabel {
    Z,
    X,
    /// Eigenbasis of `σ_θ`.
    Theta(f64),
    /// Friend's record basis `[ε+, ε−, ε0]` on the environment.
    Record,
}

/// Result of one projective measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub register: String,
    pub basis: BasisLabel,
    /// Position of the outcome in the basis list.
    pub index: usize,
    pub probability: f64,
}

impl MeasurementOutcome {
    /// `+1` for the first basis vector, `−1` for the second.
    pub fn value(&self) -> i8 {
        index_value(self.index)
    }
}

pub fn index_value(index: usize) -> i8 {
    match index {
        0 => 1,
        1 => -1,
        _ => 0,
    }
}

/// One outcome of a projective measurement together with its normalized
/// post-measurement state.
#[derive(Debug, Clone)]
pub struct Branch<S> {
    pub outcome: MeasurementOutcome,
    pub state: S,
}

/// The friend's record basis on `E`, ordered so that index 0 is `ε+` and
/// index 1 is `ε−`.
pub fn record_basis() -> Vec<CVector> {
    vec![CVector::basis(3, RECORD_PLUS), CVector::basis(3, RECORD_MINUS), CVector::basis(3, READY)]
}

/// Checks that `basis` is orthonormal and complete for dimension `dim`.
pub fn check_basis(basis: &[CVector], dim: usize) -> Result<()> {
    if basis.len() != dim {
        return Err(RegisterError::Basis(format!("{} vectors for dimension {dim}", basis.len())));
    }
    for (i, u) in basis.iter().enumerate() {
        if u.dim() != dim {
            return Err(RegisterError::Basis(format!("vector {i} has dimension {}", u.dim())));
        }
        for (j, v) in basis.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            if (u.inner(v) - re(target)).norm() > ALGEBRA_TOL {
                return Err(RegisterError::Basis(format!("vectors {i} and {j} are not orthonormal")));
            }
        }
    }
    Ok(())
}

impl DiscreteState {
    pub fn new(layout: RegisterLayout, amplitudes: CVector, norm: Norm) -> Result<Self> {
        if amplitudes.dim() != layout.total_dim() {
            return Err(RegisterError::Layout(format!(
                "{} amplitudes for a layout of dimension {}",
                amplitudes.dim(),
                layout.total_dim()
            )));
        }
        if norm == Norm::Normalized && !amplitudes.is_normalized() {
            return Err(RegisterError::Normalization(format!("norm² = {}", amplitudes.norm_sqr())));
        }
        Ok(Self { layout, amplitudes, norm })
    }

    /// Product state from one vector per register.
    pub fn product(layout: RegisterLayout, factors: &[CVector]) -> Result<Self> {
        if factors.len() != layout.len() {
            return Err(RegisterError::Layout(format!("{} factors for {} registers", factors.len(), layout.len())));
        }
        let mut amps = factors[0].clone();
        for f in &factors[1..] {
            amps = qmath::kron(&amps, f);
        }
        let norm = if amps.is_normalized() { Norm::Normalized } else { Norm::Branch };
        Self::new(layout, amps, norm)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm_flag(&self) -> Norm {
        self.norm
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_sqr()
    }

    /// Amplitude at the given per-register digits.
    pub fn amplitude(&self, digits: &[usize]) -> C64 {
        assert_eq!(digits.len(), self.layout.len());
        let idx: usize = digits.iter().enumerate().map(|(p, d)| d * self.layout.stride(p)).sum();
        self.amplitudes[idx]
    }

    /// Nonzero amplitudes as `(flat index, amplitude)`.
    pub fn support(&self) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.amplitudes.entries().iter().copied().enumerate().filter(|(_, a)| a.norm() > SUPPORT_EPS)
    }

    pub fn normalized(&self) -> Result<Self> {
        let amps = self
            .amplitudes
            .normalized()
            .ok_or_else(|| RegisterError::Normalization("cannot normalize a zero branch".into()))?;
        Ok(Self { layout: self.layout.clone(), amplitudes: amps, norm: Norm::Normalized })
    }

    /// `α|+, m0, ε0, +⟩ + β|−, m0, ε0, −⟩` on `[S_F, M, E, A]`.
    pub fn prepare_initial(alpha: C64, beta: C64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > ALGEBRA_TOL {
            return Err(RegisterError::Normalization(format!("|α|² + |β|² = {n}")));
        }
        let layout = RegisterLayout::protocol();
        let mut amps = CVector::zeros(layout.total_dim());
        let idx = |s: usize, a: usize| s * layout.stride(0) + READY * layout.stride(1) + READY * layout.stride(2) + a;
        amps[idx(0, 0)] = alpha;
        amps[idx(1, 1)] = beta;
        Self::new(layout, amps, Norm::Normalized)
    }

    /// Friend's measurement followed by reset, with the default `s0 = |+⟩`.
    pub fn friend_measure_and_reset(&self) -> Result<Self> {
        self.friend_measure_and_reset_with(&qmath::ket_plus())
    }

    /// Partial isometry `|±, m0, ε0⟩ → |s0, m0, ε±⟩` on `S_F ⊗ M ⊗ E`.
    pub fn friend_measure_and_reset_with(&self, s0: &CVector) -> Result<Self> {
        s0.ensure_normalized()?;
        let l = &self.layout;
        let (ps, pm, pe) = (l.position(SPIN_F)?, l.position(APPARATUS)?, l.position(ENV)?);
        if s0.dim() != l.registers()[ps].dim {
            return Err(RegisterError::Layout("s0 dimension does not match S_F".into()));
        }
        let mut out = CVector::zeros(l.total_dim());
        for (idx, amp) in self.support() {
            if l.digit(idx, pm) != READY || l.digit(idx, pe) != READY {
                return Err(RegisterError::Domain(
                    "friend measurement needs M in m0 and E in ε0 on every branch".into(),
                ));
            }
            let spin = l.digit(idx, ps);
            let record = match spin {
                0 => RECORD_PLUS,
                1 => RECORD_MINUS,
                _ => unreachable!("S_F has dim 2"),
            };
            let base = l.set_digit(idx, pe, record);
            for (k, s) in s0.entries().iter().enumerate() {
                out[l.set_digit(base, ps, k)] += amp * s;
            }
        }
        Self::new(l.clone(), out, self.norm)
    }

    /// Tensors `q1 ⊗ q2` onto the state as new registers `Q1`, `Q2`.
    pub fn append_qubits(&self, q1: &CVector, q2: &CVector) -> Result<Self> {
        q1.ensure_normalized()?;
        q2.ensure_normalized()?;
        if self.layout.contains(Q1) || self.layout.contains(Q2) {
            return Err(RegisterError::Layout("state already holds Q1/Q2".into()));
        }
        let layout = self.layout.with_appended(&[(Q1, q1.dim()), (Q2, q2.dim())])?;
        let amps = qmath::kron(&qmath::kron(&self.amplitudes, q1), q2);
        Self::new(layout, amps, self.norm)
    }

    /// Environment-controlled emission `ε± → ε± ⊗ |±⟩|±⟩`.
    pub fn controlled_emit(&self) -> Result<Self> {
        if self.layout.contains(Q1) || self.layout.contains(Q2) {
            return Err(RegisterError::Layout("state already holds Q1/Q2".into()));
        }
        let pe = self.layout.position(ENV)?;
        let layout = self.layout.with_appended(&[(Q1, 2), (Q2, 2)])?;
        let mut out = CVector::zeros(layout.total_dim());
        for (idx, amp) in self.support() {
            let q = match self.layout.digit(idx, pe) {
                RECORD_PLUS => 0,
                RECORD_MINUS => 1,
                _ => return Err(RegisterError::Domain("emission needs E supported on ε+, ε−".into())),
            };
            out[idx * 4 + q * 2 + q] = amp;
        }
        Self::new(layout, out, self.norm)
    }

    /// Reduced density matrix on the named registers, in layout order.
    /// Branch states are renormalized first.
    pub fn reduced_dm(&self, names: &[&str]) -> Result<CMatrix> {
        if names.is_empty() {
            return Err(RegisterError::Layout("empty register set".into()));
        }
        let keep = names.iter().map(|n| self.layout.position(n)).collect::<Result<Vec<_>>>()?;
        let rho = qmath::partial_trace_pure(&self.amplitudes, &self.layout.dims(), &keep)?;
        let n = self.norm_sqr();
        if n == 0.0 {
            return Err(RegisterError::Normalization("zero state".into()));
        }
        Ok(if self.norm == Norm::Normalized { rho } else { rho.scale(re(1.0 / n)) })
    }

    /// `(⟨v| ⊗ 1)|ψ⟩` with register `name` removed from the layout.
    pub fn contract(&self, name: &str, v: &CVector) -> Result<Self> {
        let pos = self.layout.position(name)?;
        if v.dim() != self.layout.registers()[pos].dim {
            return Err(RegisterError::Layout(format!("vector dim {} for register {name}", v.dim())));
        }
        let layout = self.layout.without(pos)?;
        let mut out = CVector::zeros(layout.total_dim());
        for (idx, amp) in self.support() {
            let d = self.layout.digit(idx, pos);
            out[self.layout.drop_digit(idx, pos)] += v[d].conj() * amp;
        }
        Self::new(layout, out, Norm::Branch)
    }

    /// `(|v⟩⟨v| ⊗ 1)|ψ⟩`, keeping the register.
    pub fn project(&self, name: &str, v: &CVector) -> Result<Self> {
        let pos = self.layout.position(name)?;
        if v.dim() != self.layout.registers()[pos].dim {
            return Err(RegisterError::Layout(format!("vector dim {} for register {name}", v.dim())));
        }
        let mut out = CVector::zeros(self.layout.total_dim());
        for (idx, amp) in self.support() {
            let w = v[self.layout.digit(idx, pos)].conj() * amp;
            for (k, vk) in v.entries().iter().enumerate() {
                out[self.layout.set_digit(idx, pos, k)] += vk * w;
            }
        }
        Self::new(self.layout.clone(), out, Norm::Branch)
    }

    /// Every outcome with nonzero Born probability, in basis order.
    pub fn branches(&self, name: &str, basis: &[CVector], label: BasisLabel) -> Result<Vec<Branch<DiscreteState>>> {
        check_basis(basis, self.layout.dim_of(name)?)?;
        let total = self.norm_sqr();
        let mut out = Vec::with_capacity(basis.len());
        for (index, v) in basis.iter().enumerate() {
            let projected = self.project(name, v)?;
            let p = projected.norm_sqr() / total;
            if p <= PROB_EPS {
                continue;
            }
            out.push(Branch {
                outcome: MeasurementOutcome { register: name.to_string(), basis: label.clone(), index, probability: p },
                state: projected.normalized()?,
            });
        }
        Ok(out)
    }

    /// Samples a projective measurement of register `name`.
    pub fn measure_projective<R: Rng + ?Sized>(
        &self,
        name: &str,
        basis: &[CVector],
        label: BasisLabel,
        rng: &mut R,
    ) -> Result<(MeasurementOutcome, DiscreteState)> {
        let branches = self.branches(name, basis, label)?;
        let chosen = sample_branch(branches, rng);
        Ok((chosen.outcome, chosen.state))
    }
}

/// Outcomes with Born probability at or below this are dropped.
pub const PROB_EPS: f64 = 1e-15;

/// Cumulative-probability inversion over branches in basis order.
pub fn sample_branch<S, R: Rng + ?Sized>(mut branches: Vec<Branch<S>>, rng: &mut R) -> Branch<S> {
    assert!(!branches.is_empty(), "no branch with nonzero probability");
    let probs: Vec<f64> = branches.iter().map(|b| b.outcome.probability).collect();
    branches.swap_remove(sample_index(&probs, rng))
}

/// Index drawn with probability proportional to `weights`, by inversion of
/// the cumulative sum with a single uniform draw.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    assert!(!weights.is_empty(), "no outcome to sample");
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
