//! Gaussian pointer model for the weak measurements of the emitted qubits.
//!
//! A pointer state is a finite superposition of shifted Gaussians
//! `φ_a(x) = (2πw²)^(−1/4) exp(−(x − a)²/(4w²))`, so every quantity the
//! protocol needs has a closed form:
//!
//! ```text
//! ⟨φ_a|φ_b⟩   = exp(−(a − b)²/(8w²))
//! ⟨φ_a|X|φ_b⟩ = (a + b)/2 · exp(−(a − b)²/(8w²))
//! ```
//!
//! The coupling `exp(−i g σ_z P)` is applied exactly: a term whose qubit digit
//! is `|+⟩` has its pointer shifted by `+g`, a `|−⟩` term by `−g`. Nothing is
//! expanded to first order in `g`.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::qmath::{self, re, CMatrix, CVector, QmathError};
use crate::registers::{
    check_basis, BasisLabel, Branch, DiscreteState, MeasurementOutcome, Norm, RegisterError, RegisterLayout, PROB_EPS,
    Q1, Q2,
};

/// Post-selection probabilities at or below this are treated as singular.
pub const SINGULAR_PROB: f64 = 1e-14;
/// Weak values are undefined when `|⟨post|pre⟩|` is at or below this.
pub const SINGULAR_OVERLAP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeakError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("singular post-selection (probability or overlap {0:e})")]
    Singular(f64),
    #[error(transparent)]
    Register(#[from] RegisterError),
    #[error(transparent)]
    Qmath(#[from] QmathError),
}

pub type Result<T> = std::result::Result<T, WeakError>;

/// `⟨post|O|pre⟩ / ⟨post|pre⟩`.
pub fn weak_value(pre: &CVector, post: &CVector, op: &CMatrix) -> Result<C64> {
    let overlap = post.inner(pre);
    if overlap.norm() <= SINGULAR_OVERLAP {
        return Err(WeakError::Singular(overlap.norm()));
    }
    Ok(post.inner(&op.apply(pre)) / overlap)
}

#[inline]
pub fn gaussian_overlap(a: f64, b: f64, w: f64) -> f64 {
    let d = a - b;
    (-d * d / (8.0 * w * w)).exp()
}

#[inline]
pub fn position_element(a: f64, b: f64, w: f64) -> f64 {
    0.5 * (a + b) * gaussian_overlap(a, b, w)
}

/// Which of the two pointers a qubit is coupled to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pointer {
    One,
    Two,
}

impl Pointer {
    fn slot(self) -> usize {
        match self {
            Pointer::One => 0,
            Pointer::Two => 1,
        }
    }
}

impl TryFrom<u8> for Pointer {
    type Error = WeakError;
    fn try_from(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Pointer::One),
            2 => Ok(Pointer::Two),
            _ => Err(WeakError::Parameter(format!("pointer index {i} is not 1 or 2"))),
        }
    }
}

/// One shifted Gaussian component of the two-pointer wavefunction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTerm {
    pub amp: C64,
    /// Pointer centres, position units.
    pub shift: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridTerm {
    /// Flat index into the discrete layout.
    pub index: usize,
    pub term: GaussianTerm,
}

/// Discrete registers entangled with the two continuous pointers.
///
/// Terms are kept sorted by discrete index so that same-index runs (the only
/// pairs with nonzero overlap) are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    layout: RegisterLayout,
    terms: Vec<HybridTerm>,
    width: f64,
}

/// Post-selection on the positive outcomes of `σ_θ1` (Q1) and `σ_θ2` (Q2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostSelection {
    pub theta1: f64,
    pub theta2: f64,
}

impl PostSelection {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        for (name, t) in [("theta1", theta1), ("theta2", theta2)] {
            if !(0.0..=std::f64::consts::PI).contains(&t) {
                return Err(WeakError::Parameter(format!("{name} = {t} outside [0, π]")));
            }
        }
        Ok(Self { theta1, theta2 })
    }
}

impl HybridState {
    /// Attaches two unshifted pointers of width `w` to every nonzero amplitude.
    pub fn attach(state: &DiscreteState, w: f64) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(WeakError::Parameter(format!("pointer width {w} must be positive")));
        }
        let terms = state
            .support()
            .map(|(index, amp)| HybridTerm { index, term: GaussianTerm { amp, shift: [0.0, 0.0] } })
            .collect();
        Ok(Self { layout: state.layout().clone(), terms, width: w })
    }

    pub fn from_terms(layout: RegisterLayout, mut terms: Vec<HybridTerm>, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(WeakError::Parameter(format!("pointer width {width} must be positive")));
        }
        let dim = layout.total_dim();
        if let Some(t) = terms.iter().find(|t| t.index >= dim) {
            return Err(WeakError::Parameter(format!("term index {} outside layout dim {dim}", t.index)));
        }
        terms.sort_by_key(|t| t.index);
        Ok(Self { layout, terms, width })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn terms(&self) -> &[HybridTerm] {
        &self.terms
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Same-index runs of terms.
    fn runs(&self) -> impl Iterator<Item = &[HybridTerm]> {
        self.terms.chunk_by(|a, b| a.index == b.index)
    }

    /// `Σ conj(a_t) a_t' δ(d_t, d_t') K(t, t')` over same-index pairs.
    fn quadratic_form(&self, kernel: impl Fn(&GaussianTerm, &GaussianTerm) -> f64) -> f64 {
        let mut total = 0.0;
        for run in self.runs() {
            for (i, a) in run.iter().enumerate() {
                total += a.term.amp.norm_sqr() * kernel(&a.term, &a.term);
                for b in &run[i + 1..] {
                    // off-diagonal pair counted twice; the kernel is symmetric
                    total += 2.0 * (a.term.amp.conj() * b.term.amp).re * kernel(&a.term, &b.term);
                }
            }
        }
        total
    }

    pub fn norm_sqr(&self) -> f64 {
        let inv = 1.0 / (8.0 * self.width * self.width);
        self.quadratic_form(|a, b| {
            let (d0, d1) = (a.shift[0] - b.shift[0], a.shift[1] - b.shift[1]);
            if d0 == 0.0 && d1 == 0.0 {
                1.0
            } else {
                (-(d0 * d0 + d1 * d1) * inv).exp()
            }
        })
    }

    /// Unnormalized `⟨X_i⟩` for one pointer.
    pub fn position_moment(&self, pointer: Pointer) -> f64 {
        let (w, i, j) = (self.width, pointer.slot(), 1 - pointer.slot());
        self.quadratic_form(|a, b| position_element(a.shift[i], b.shift[i], w) * gaussian_overlap(a.shift[j], b.shift[j], w))
    }

    /// Unnormalized `⟨X1 X2⟩`: on a post-selected branch this is the
    /// success-weighted average `Tr(ρ Π Π X1 X2)`.
    pub fn joint_position_moment(&self) -> f64 {
        let w = self.width;
        self.quadratic_form(|a, b| position_element(a.shift[0], b.shift[0], w) * position_element(a.shift[1], b.shift[1], w))
    }

    /// `⟨X1 X2⟩` conditioned on the branch, i.e. divided by its norm.
    pub fn normalized_position_moment(&self) -> Result<f64> {
        let n = self.norm_sqr();
        if n < SINGULAR_PROB {
            return Err(WeakError::Singular(n));
        }
        Ok(self.joint_position_moment() / n)
    }

    pub(crate) fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.term.amp *= k;
        }
        out
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n < SINGULAR_PROB {
            return Err(WeakError::Singular(n));
        }
        Ok(self.scaled(1.0 / n.sqrt()))
    }

    /// Applies `exp(−i g σ_z P_pointer)` controlled by register `qubit`.
    pub fn couple(&self, qubit: &str, pointer: Pointer, g: f64) -> Result<Self> {
        let pos = self.layout.position(qubit)?;
        if self.layout.registers()[pos].dim != 2 {
            return Err(WeakError::Register(RegisterError::Layout(format!("{qubit} is not a qubit"))));
        }
        let slot = pointer.slot();
        let mut out = self.clone();
        for t in &mut out.terms {
            let sign = if self.layout.digit(t.index, pos) == 0 { 1.0 } else { -1.0 };
            t.term.shift[slot] += sign * g;
        }
        Ok(out)
    }

    /// `(⟨v| ⊗ 1)|h⟩`, dropping register `name`.
    pub fn contract(&self, name: &str, v: &CVector) -> Result<Self> {
        let pos = self.layout.position(name)?;
        if v.dim() != self.layout.registers()[pos].dim {
            return Err(WeakError::Parameter(format!("vector dim {} for register {name}", v.dim())));
        }
        let layout = self.layout.without(pos)?;
        let terms = self
            .terms
            .iter()
            .filter_map(|t| {
                let amp = v[self.layout.digit(t.index, pos)].conj() * t.term.amp;
                (amp != C64::new(0.0, 0.0)).then(|| HybridTerm {
                    index: self.layout.drop_digit(t.index, pos),
                    term: GaussianTerm { amp, shift: t.term.shift },
                })
            })
            .collect();
        Ok(Self::from_terms(layout, terms, self.width)?.merged())
    }

    /// `(|v⟩⟨v| ⊗ 1)|h⟩`, keeping register `name`.
    pub fn project(&self, name: &str, v: &CVector) -> Result<Self> {
        let pos = self.layout.position(name)?;
        if v.dim() != self.layout.registers()[pos].dim {
            return Err(WeakError::Parameter(format!("vector dim {} for register {name}", v.dim())));
        }
        let mut terms = Vec::with_capacity(self.terms.len() * v.dim());
        for t in &self.terms {
            let w = v[self.layout.digit(t.index, pos)].conj() * t.term.amp;
            for (k, vk) in v.entries().iter().enumerate() {
                let amp = vk * w;
                if amp != C64::new(0.0, 0.0) {
                    terms.push(HybridTerm {
                        index: self.layout.set_digit(t.index, pos, k),
                        term: GaussianTerm { amp, shift: t.term.shift },
                    });
                }
            }
        }
        Ok(Self::from_terms(self.layout.clone(), terms, self.width)?.merged())
    }

    /// Combines terms that share index and both shifts exactly.
    fn merged(mut self) -> Self {
        let mut out: Vec<HybridTerm> = Vec::with_capacity(self.terms.len());
        for run in self.terms.chunk_by(|a, b| a.index == b.index) {
            let start = out.len();
            for t in run {
                match out[start..].iter_mut().find(|o| o.term.shift == t.term.shift) {
                    Some(o) => o.term.amp += t.term.amp,
                    None => out.push(*t),
                }
            }
        }
        out.retain(|t| t.term.amp != C64::new(0.0, 0.0));
        self.terms = out;
        self
    }

    /// Projective measurement outcomes of register `name`, each with its
    /// Born probability (Gaussian-overlap norm) and normalized state.
    pub fn branches(&self, name: &str, basis: &[CVector], label: BasisLabel) -> Result<Vec<Branch<HybridState>>> {
        check_basis(basis, self.layout.dim_of(name)?)?;
        let total = self.norm_sqr();
        if total < SINGULAR_PROB {
            return Err(WeakError::Singular(total));
        }
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

    /// Projects Q1 onto `|+θ1⟩` and Q2 onto `|+θ2⟩`. Returns the unnormalized
    /// branch (Q1, Q2 removed) and its success probability relative to `self`.
    pub fn postselect_qubits(&self, ps: &PostSelection) -> Result<(HybridState, f64)> {
        self.postselect_on(&qmath::ket_theta(ps.theta1), &qmath::ket_theta(ps.theta2))
    }

    /// Contracts Q1 with `post1` and Q2 with `post2`.
    pub fn postselect_on(&self, post1: &CVector, post2: &CVector) -> Result<(HybridState, f64)> {
        if !self.layout.contains(Q1) || !self.layout.contains(Q2) {
            return Err(WeakError::Register(RegisterError::Layout("post-selection needs Q1 and Q2".into())));
        }
        let total = self.norm_sqr();
        if total < SINGULAR_PROB {
            return Err(WeakError::Singular(total));
        }
        let branch = self.contract(Q1, post1)?.contract(Q2, post2)?;
        let p = branch.norm_sqr() / total;
        Ok((branch, p))
    }

    /// Pointer-position density `Σ_d |ψ_d(x1, x2)|²` up to a constant, and
    /// the bound used by the sampler.
    fn density_and_envelope(&self, x1: f64, x2: f64) -> (f64, f64) {
        let inv = 1.0 / (4.0 * self.width * self.width);
        let mut density = 0.0;
        let mut envelope = 0.0;
        let mut longest = 0usize;
        for run in self.runs() {
            longest = longest.max(run.len());
            let mut psi = C64::new(0.0, 0.0);
            for t in run {
                let (d1, d2) = (x1 - t.term.shift[0], x2 - t.term.shift[1]);
                let e = (-(d1 * d1 + d2 * d2) * inv).exp();
                psi += t.term.amp * e;
                envelope += t.term.amp.norm_sqr() * e * e;
            }
            density += psi.norm_sqr();
        }
        (density, envelope * longest as f64)
    }

    /// Draws `(x1, x2)` from the normalized joint position density, including
    /// interference between terms that share a discrete index.
    ///
    /// Exact rejection sampling: proposals come from the incoherent mixture
    /// with weights `|a_t|²`, and `|Σ a_t φ_t|² ≤ n Σ |a_t|² |φ_t|²` bounds the
    /// target by `n` times the proposal.
    pub fn sample_positions<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let n = self.norm_sqr();
        if n < SINGULAR_PROB || self.terms.is_empty() {
            return Err(WeakError::Singular(n));
        }
        let weights: Vec<f64> = self.terms.iter().map(|t| t.term.amp.norm_sqr()).collect();
        let total: f64 = weights.iter().sum();
        let w = self.width;
        // Acceptance is at least ‖h‖² / (n_max Σ|a|²) per proposal.
        for _ in 0..MAX_PROPOSALS {
            let mut u = rng.random::<f64>() * total;
            let mut pick = self.terms.len() - 1;
            for (i, wt) in weights.iter().enumerate() {
                if u < *wt {
                    pick = i;
                    break;
                }
                u -= wt;
            }
            let s = self.terms[pick].term.shift;
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let (x1, x2) = (s[0] + w * z1, s[1] + w * z2);
            let (density, envelope) = self.density_and_envelope(x1, x2);
            if rng.random::<f64>() * envelope < density {
                return Ok((x1, x2));
            }
        }
        Err(WeakError::Singular(n))
    }

    /// Discrete state left after the pointers are found at `(x1, x2)`.
    pub fn collapse_at(&self, x1: f64, x2: f64) -> Result<DiscreteState> {
        let inv = 1.0 / (4.0 * self.width * self.width);
        let mut amps = CVector::zeros(self.layout.total_dim());
        for t in &self.terms {
            let (d1, d2) = (x1 - t.term.shift[0], x2 - t.term.shift[1]);
            amps[t.index] += t.term.amp * (-(d1 * d1 + d2 * d2) * inv).exp();
        }
        let state = DiscreteState::new(self.layout.clone(), amps, Norm::Branch)?;
        Ok(state.normalized()?)
    }

    /// Hybrid state with the pointers traced out, as a discrete density matrix
    /// over the full layout. Used for diagnostics and tests.
    pub fn discrete_density(&self) -> CMatrix {
        let dim = self.layout.total_dim();
        let w = self.width;
        let mut rho = CMatrix::zeros(dim, dim);
        for a in &self.terms {
            for b in &self.terms {
                let k = gaussian_overlap(a.term.shift[0], b.term.shift[0], w)
                    * gaussian_overlap(a.term.shift[1], b.term.shift[1], w);
                rho[(a.index, b.index)] += a.term.amp * b.term.amp.conj() * re(k);
            }
        }
        rho
    }
}

const MAX_PROPOSALS: usize = 10_000_000;
