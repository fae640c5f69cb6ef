//! Branch walker shared by exact enumeration and sampled trials.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use rand::Rng;

use super::protocol::{classify_record, declare_record, friend_send_qubits, Emission};
use super::schedule::{build_schedule, Action, Schedule};
use super::{EngineError, InterpretationMode, MeasurementScheme, ProtocolConfig, Result};
use crate::qmath::{self, CVector};
use crate::registers::{
    record_basis, sample_index, BasisLabel, Branch, DiscreteState, ALICE, ENV, Q1, Q2,
};
use crate::relativity::EventId;
use crate::weakmeas::{HybridState, Pointer, SINGULAR_PROB};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RecordBasis {
    Z,
    X,
}

/// What the friend can declare about her measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FriendRecord {
    /// The lab stayed in superposition; no outcome is available outside it.
    Undeclared,
    Declared { basis: RecordBasis, value: i8 },
    /// A definite record exists but is neither a z nor an x record.
    Unmatched,
}

impl FriendRecord {
    pub fn key(&self) -> &'static str {
        match self {
            FriendRecord::Undeclared => "undeclared",
            FriendRecord::Unmatched => "unmatched",
            FriendRecord::Declared { basis: RecordBasis::Z, value } if *value > 0 => "z+",
            FriendRecord::Declared { basis: RecordBasis::Z, .. } => "z-",
            FriendRecord::Declared { basis: RecordBasis::X, value } if *value > 0 => "x+",
            FriendRecord::Declared { basis: RecordBasis::X, .. } => "x-",
        }
    }

    pub const ALL: [FriendRecord; 6] = [
        FriendRecord::Declared { basis: RecordBasis::Z, value: 1 },
        FriendRecord::Declared { basis: RecordBasis::Z, value: -1 },
        FriendRecord::Declared { basis: RecordBasis::X, value: 1 },
        FriendRecord::Declared { basis: RecordBasis::X, value: -1 },
        FriendRecord::Undeclared,
        FriendRecord::Unmatched,
    ];

    pub fn slot(&self) -> usize {
        FriendRecord::ALL.iter().position(|r| r == self).expect("listed")
    }

    pub fn value(&self) -> Option<i8> {
        match self {
            FriendRecord::Declared { value, .. } => Some(*value),
            _ => None,
        }
    }
}

impl fmt::Display for FriendRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// The external observer's data from one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WOutcome {
    /// Positions are recorded only when post-selection succeeded.
    Weak { postselected: bool, positions: Option<(f64, f64)> },
    Projective { q1: i8, q2: i8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub frame_ordering: Vec<EventId>,
    pub friend_record: FriendRecord,
    pub w_outcome: WOutcome,
    pub alice_outcome: i8,
    /// Classical "measurement completed" signal sent by the friend after E1.
    pub ancilla_flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveExact {
    /// Joint distribution of W's outcomes `(q1, q2)`.
    pub outcome_distribution: BTreeMap<(i8, i8), f64>,
    /// Probability that Q1's z outcome equals the declared record value.
    pub q1_matches_record: f64,
    /// Probability that Q2's x outcome equals the declared record value.
    pub q2_matches_record: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResults {
    pub schedule: Vec<EventId>,
    pub beta_star: f64,
    /// `Tr(ρ Π+θ1 Π+θ2 X1 X2)`, success-weighted (weak scheme only).
    pub joint_moment_unnormalized: Option<f64>,
    /// The same moment conditioned on post-selection success.
    pub joint_moment_normalized: Option<f64>,
    pub success_prob: Option<f64>,
    pub friend_record_distribution: BTreeMap<FriendRecord, f64>,
    /// Probability of Alice's `+` outcome.
    pub alice_marginal: f64,
    pub emitted_qubit_state_label: String,
    pub projective: Option<ProjectiveExact>,
}

#[derive(Debug, Clone)]
enum Lab {
    Discrete(DiscreteState),
    Hybrid(HybridState),
}

#[derive(Debug, Clone)]
struct Path {
    weight: f64,
    lab: Option<Lab>,
    record: FriendRecord,
    alice: Option<i8>,
    w: Option<WOutcome>,
    /// Post-selected `⟨X1X2⟩` of this branch, normalized (exact walk only).
    conditional_moment: Option<f64>,
    emission: Option<String>,
    ancilla: bool,
}

trait Chooser {
    /// `true` when every branch is followed (bookkeeping only exact runs need).
    const EXHAUSTIVE: bool;

    /// Outcomes to follow, each with the factor its path weight is multiplied by.
    fn choose(&mut self, probs: &[f64]) -> Vec<(usize, f64)>;
    /// Reads both pointers; `None` leaves the pointers unread (exact walk).
    fn read_pointers(&mut self, h: &HybridState) -> Result<Option<((f64, f64), DiscreteState)>>;

    fn select<S>(&mut self, branches: Vec<Branch<S>>) -> Vec<(f64, Branch<S>)> {
        let probs: Vec<f64> = branches.iter().map(|b| b.outcome.probability).collect();
        let picks = self.choose(&probs);
        let mut slots: Vec<Option<Branch<S>>> = branches.into_iter().map(Some).collect();
        picks.into_iter().map(|(i, p)| (p, slots[i].take().expect("each outcome chosen once"))).collect()
    }
}

struct Enumerate;

impl Chooser for Enumerate {
    const EXHAUSTIVE: bool = true;

    fn choose(&mut self, probs: &[f64]) -> Vec<(usize, f64)> {
        probs.iter().copied().enumerate().collect()
    }

    fn read_pointers(&mut self, _h: &HybridState) -> Result<Option<((f64, f64), DiscreteState)>> {
        Ok(None)
    }
}

struct Sample<'a, R: ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> Chooser for Sample<'_, R> {
    const EXHAUSTIVE: bool = false;

    fn choose(&mut self, probs: &[f64]) -> Vec<(usize, f64)> {
        vec![(sample_index(probs, self.0), 1.0)]
    }

    fn read_pointers(&mut self, h: &HybridState) -> Result<Option<((f64, f64), DiscreteState)>> {
        let (x1, x2) = h.sample_positions(self.0)?;
        Ok(Some(((x1, x2), h.collapse_at(x1, x2)?)))
    }
}

/// Validated configuration plus everything derived from it once per run.
pub(crate) struct Protocol {
    config: ProtocolConfig,
    schedule: Schedule,
    alice_basis: Vec<CVector>,
    alice_label: BasisLabel,
    s0: CVector,
    post1: [CVector; 2],
    post2: [CVector; 2],
}

impl Protocol {
    pub(crate) fn new(config: &ProtocolConfig) -> Result<Self> {
        config.validate()?;
        let schedule = build_schedule(config)?;
        let phi = config.alice_basis_angle;
        let (alice_basis, alice_label) = if phi == 0.0 {
            (qmath::z_basis(), BasisLabel::Z)
        } else if phi == FRAC_PI_2 {
            (qmath::x_basis(), BasisLabel::X)
        } else {
            (qmath::theta_basis(phi), BasisLabel::Theta(phi))
        };
        let pair = |t: f64| [qmath::ket_theta(t), qmath::ket_theta_minus(t)];
        Ok(Self {
            config: config.clone(),
            schedule,
            alice_basis,
            alice_label,
            s0: config.s0.ket(),
            post1: pair(config.theta1),
            post2: pair(config.theta2),
        })
    }

    fn walk<C: Chooser>(&self, chooser: &mut C) -> Result<Vec<Path>> {
        let root = Path {
            weight: 1.0,
            lab: None,
            record: FriendRecord::Undeclared,
            alice: None,
            w: None,
            conditional_moment: None,
            emission: None,
            ancilla: false,
        };
        let mut frontier = vec![root];
        for &(_, action) in &self.schedule.steps {
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for path in frontier {
                self.step(action, path, chooser, &mut next)?;
            }
            frontier = next;
        }
        Ok(frontier)
    }

    fn step<C: Chooser>(&self, action: Action, path: Path, chooser: &mut C, out: &mut Vec<Path>) -> Result<()> {
        match action {
            Action::Prepare => {
                let s = DiscreteState::prepare_initial(self.config.alpha, self.config.beta)?;
                out.push(Path { lab: Some(Lab::Discrete(s)), ..path });
            }
            Action::FriendMeasureAndReset => {
                let s = discrete(&path)?.friend_measure_and_reset_with(&self.s0)?;
                match self.config.mode {
                    InterpretationMode::UnitaryLab => {
                        out.push(Path { lab: Some(Lab::Discrete(s)), ancilla: true, ..path });
                    }
                    InterpretationMode::ObjectiveCollapse => {
                        let branches = s.branches(ENV, &record_basis(), BasisLabel::Record)?;
                        for (p, b) in chooser.select(branches) {
                            let value = b.outcome.value();
                            if value == 0 {
                                return Err(EngineError::Internal("collapse onto ε0 after the friend's measurement".into()));
                            }
                            out.push(Path {
                                weight: path.weight * p,
                                lab: Some(Lab::Discrete(b.state)),
                                record: FriendRecord::Declared { basis: RecordBasis::Z, value },
                                ancilla: true,
                                ..path.clone()
                            });
                        }
                    }
                }
            }
            Action::AliceMeasure => match path.lab.as_ref() {
                Some(Lab::Discrete(s)) => {
                    let branches = s.branches(ALICE, &self.alice_basis, self.alice_label.clone())?;
                    for (p, b) in chooser.select(branches) {
                        out.push(Path {
                            weight: path.weight * p,
                            lab: Some(Lab::Discrete(b.state)),
                            alice: Some(b.outcome.value()),
                            ..path.clone()
                        });
                    }
                }
                Some(Lab::Hybrid(h)) => {
                    let branches = h.branches(ALICE, &self.alice_basis, self.alice_label.clone())?;
                    for (p, b) in chooser.select(branches) {
                        out.push(Path {
                            weight: path.weight * p,
                            lab: Some(Lab::Hybrid(b.state)),
                            alice: Some(b.outcome.value()),
                            ..path.clone()
                        });
                    }
                }
                None => return Err(EngineError::ProtocolOrder("Alice measures before preparation".into())),
            },
            Action::EmitAndObserve => {
                let (s, emission) = friend_send_qubits(discrete(&path)?)?;
                let mut record = path.record;
                if let (Emission::RecordConditioned(q), FriendRecord::Undeclared) = (&emission, record) {
                    record = match classify_record(q) {
                        Some((basis, value)) => FriendRecord::Declared { basis, value },
                        None => FriendRecord::Unmatched,
                    };
                }
                let emission = C::EXHAUSTIVE.then(|| emission.label());
                let path = Path { record, emission, ..path };
                match self.config.scheme {
                    MeasurementScheme::Weak => self.weak_observation(s, path, chooser, out)?,
                    MeasurementScheme::Projective => self.projective_observation(s, path, chooser, out)?,
                }
            }
        }
        Ok(())
    }

    fn weak_observation<C: Chooser>(
        &self,
        s: DiscreteState,
        path: Path,
        chooser: &mut C,
        out: &mut Vec<Path>,
    ) -> Result<()> {
        let c = &self.config;
        let h = HybridState::attach(&s, c.w)?.couple(Q1, Pointer::One, c.g)?.couple(Q2, Pointer::Two, c.g)?;
        let total = h.norm_sqr();
        // Post-selection is a projective σ_θ1 ⊗ σ_θ2 measurement; success is (+, +).
        let mut outcomes = Vec::with_capacity(4);
        for (i1, v1) in self.post1.iter().enumerate() {
            let h1 = h.contract(Q1, v1)?;
            for (i2, v2) in self.post2.iter().enumerate() {
                let b = h1.contract(Q2, v2)?;
                let n = b.norm_sqr();
                if n / total > SINGULAR_PROB {
                    outcomes.push((2 * i1 + i2, n, b));
                }
            }
        }
        let probs: Vec<f64> = outcomes.iter().map(|(_, n, _)| n / total).collect();
        for (k, p) in chooser.choose(&probs) {
            let (index, n, ref b) = outcomes[k];
            let b = b.scaled(1.0 / n.sqrt());
            let success = index == 0;
            let (lab, positions, conditional_moment) = match chooser.read_pointers(&b)? {
                Some((xs, collapsed)) => (Lab::Discrete(collapsed), Some(xs), None),
                None => {
                    let m = success.then(|| b.joint_position_moment());
                    (Lab::Hybrid(b), None, m)
                }
            };
            out.push(Path {
                weight: path.weight * p,
                lab: Some(lab),
                w: Some(WOutcome::Weak { postselected: success, positions: positions.filter(|_| success) }),
                conditional_moment,
                ..path.clone()
            });
        }
        Ok(())
    }

    fn projective_observation<C: Chooser>(
        &self,
        s: DiscreteState,
        path: Path,
        chooser: &mut C,
        out: &mut Vec<Path>,
    ) -> Result<()> {
        for (p1, b1) in chooser.select(s.branches(Q1, &qmath::z_basis(), BasisLabel::Z)?) {
            for (p2, b2) in chooser.select(b1.state.branches(Q2, &qmath::x_basis(), BasisLabel::X)?) {
                let record = match path.record {
                    FriendRecord::Undeclared => declared(&b2.state)?,
                    r => r,
                };
                out.push(Path {
                    weight: path.weight * p1 * p2,
                    lab: Some(Lab::Discrete(b2.state)),
                    record,
                    w: Some(WOutcome::Projective { q1: b1.outcome.value(), q2: b2.outcome.value() }),
                    ..path.clone()
                });
            }
        }
        Ok(())
    }

    pub(crate) fn trial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<RunRecord> {
        let mut leaves = self.walk(&mut Sample(rng))?;
        if leaves.len() != 1 {
            return Err(EngineError::Internal(format!("sampled walk produced {} leaves", leaves.len())));
        }
        let leaf = leaves.pop().expect("one leaf");
        Ok(RunRecord {
            frame_ordering: self.schedule.order(),
            friend_record: leaf.record,
            w_outcome: leaf.w.ok_or_else(|| EngineError::Internal("no observation recorded".into()))?,
            alice_outcome: leaf.alice.ok_or_else(|| EngineError::Internal("Alice never measured".into()))?,
            ancilla_flag: leaf.ancilla,
        })
    }

    pub(crate) fn exact(&self) -> Result<ExactResults> {
        let leaves = self.walk(&mut Enumerate)?;
        let total: f64 = leaves.iter().map(|l| l.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(EngineError::Internal(format!("branch weights sum to {total}")));
        }
        let mut records: BTreeMap<FriendRecord, f64> = BTreeMap::new();
        let mut labels = BTreeSet::new();
        let mut alice_plus = 0.0;
        let (mut moment, mut success) = (0.0, 0.0);
        let mut outcomes: BTreeMap<(i8, i8), f64> = BTreeMap::new();
        let (mut q1_match, mut q2_match) = (0.0, 0.0);
        for l in &leaves {
            *records.entry(l.record).or_default() += l.weight;
            if let Some(e) = &l.emission {
                labels.insert(e.clone());
            }
            if l.alice == Some(1) {
                alice_plus += l.weight;
            }
            match l.w {
                Some(WOutcome::Weak { postselected: true, .. }) => {
                    success += l.weight;
                    moment += l.weight * l.conditional_moment.unwrap_or(0.0);
                }
                Some(WOutcome::Projective { q1, q2 }) => {
                    *outcomes.entry((q1, q2)).or_default() += l.weight;
                    if l.record.value() == Some(q1) {
                        q1_match += l.weight;
                    }
                    if l.record.value() == Some(q2) {
                        q2_match += l.weight;
                    }
                }
                _ => {}
            }
        }
        let weak = self.config.scheme == MeasurementScheme::Weak;
        Ok(ExactResults {
            schedule: self.schedule.order(),
            beta_star: self.schedule.beta_star,
            joint_moment_unnormalized: weak.then_some(moment),
            joint_moment_normalized: if weak && success > SINGULAR_PROB { Some(moment / success) } else { None },
            success_prob: weak.then_some(success),
            friend_record_distribution: records,
            alice_marginal: alice_plus,
            emitted_qubit_state_label: labels.into_iter().collect::<Vec<_>>().join(" or "),
            projective: (!weak).then_some(ProjectiveExact {
                outcome_distribution: outcomes,
                q1_matches_record: q1_match,
                q2_matches_record: q2_match,
            }),
        })
    }
}

fn discrete(path: &Path) -> Result<&DiscreteState> {
    match path.lab.as_ref() {
        Some(Lab::Discrete(s)) => Ok(s),
        Some(Lab::Hybrid(_)) => Err(EngineError::ProtocolOrder("lab already coupled to pointers".into())),
        None => Err(EngineError::ProtocolOrder("state used before preparation".into())),
    }
}

fn declared(s: &DiscreteState) -> Result<FriendRecord> {
    match declare_record(s) {
        Ok((basis, value)) => Ok(FriendRecord::Declared { basis, value }),
        Err(EngineError::Undeclarable) => Ok(FriendRecord::Unmatched),
        Err(EngineError::RecordUndefined(_)) => Ok(FriendRecord::Undeclared),
        Err(e) => Err(e),
    }
}

/// Enumerates every branch with its Born weight.
pub fn run_exact(config: &ProtocolConfig) -> Result<ExactResults> {
    Protocol::new(config)?.exact()
}

/// Executes one trial, sampling every stochastic step from `rng`.
pub fn run_trial<R: Rng + ?Sized>(config: &ProtocolConfig, rng: &mut R) -> Result<RunRecord> {
    Protocol::new(config)?.trial(rng)
}
