use super::{EngineError, ProtocolConfig, Result};
use crate::relativity::{self, Boost, EventId, FrameOrdering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Prepare,
    FriendMeasureAndReset,
    EmitAndObserve,
    AliceMeasure,
}

impl Action {
    pub fn for_event(id: EventId) -> Self {
        match id {
            EventId::E0 => Action::Prepare,
            EventId::E1 => Action::FriendMeasureAndReset,
            EventId::E2 => Action::EmitAndObserve,
            EventId::E3 => Action::AliceMeasure,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Raw ordering of the four events by boosted time.
    pub frame: FrameOrdering,
    /// Execution order. Preparation always runs first: it supplies the
    /// initial state every other event acts on.
    pub steps: Vec<(EventId, Action)>,
    /// E2/E3 inversion threshold of the configured geometry.
    pub beta_star: f64,
}

impl Schedule {
    pub fn order(&self) -> Vec<EventId> {
        self.steps.iter().map(|(e, _)| *e).collect()
    }

    /// `true` when Alice measures before the qubits are emitted.
    pub fn alice_before_emission(&self) -> bool {
        let pos = |id| self.steps.iter().position(|(e, _)| *e == id);
        pos(EventId::E3) < pos(EventId::E2)
    }
}

pub fn build_schedule(config: &ProtocolConfig) -> Result<Schedule> {
    let events = config.geometry.events();
    let report = relativity::validate_geometry(&events);
    if !report.passed() {
        let failed: Vec<String> = report.failures().map(|c| format!("{} ({})", c.name, c.detail)).collect();
        return Err(EngineError::Configuration(format!("geometry validation failed: {}", failed.join("; "))));
    }
    let boost = Boost::new(config.boost).map_err(|e| EngineError::Configuration(e.to_string()))?;
    let beta_star = relativity::inversion_threshold(&events[2], &events[3])
        .map_err(|e| EngineError::Configuration(e.to_string()))?;
    let frame = relativity::frame_ordering(&events, &boost);
    if frame.is_simultaneous(EventId::E2, EventId::E3) {
        return Err(EngineError::Configuration(format!(
            "simultaneity: E2 and E3 coincide in the frame with beta = {} (threshold beta* = {beta_star}); ordering is degenerate",
            config.boost
        )));
    }
    if !frame.precedes(EventId::E1, EventId::E2) {
        return Err(EngineError::Internal("E1 must precede E2 in every frame".into()));
    }
    let mut steps = vec![(EventId::E0, Action::Prepare)];
    steps.extend(frame.order.iter().filter(|&&e| e != EventId::E0).map(|&e| (e, Action::for_event(e))));
    Ok(Schedule { frame, steps, beta_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use EventId::*;

    #[test]
    fn schedule_examples() {
        let c = ProtocolConfig::default();
        assert_eq!(build_schedule(&c).unwrap().order(), vec![E0, E1, E2, E3]);
        let s = build_schedule(&c.with_boost(0.2)).unwrap();
        assert_eq!(s.order(), vec![E0, E3, E1, E2]);
        assert!(s.alice_before_emission());
        assert_eq!(s.beta_star, 0.1);

        let mut late = c.with_boost(0.2);
        late.geometry.t3 = 2.7;
        assert_eq!(build_schedule(&late).unwrap().order(), vec![E0, E1, E3, E2]);

        let err = build_schedule(&c.with_boost(0.1)).unwrap_err();
        assert!(matches!(&err, EngineError::Configuration(m) if m.contains("simultaneity")));
    }

    #[test]
    fn alice_far_ahead_keeps_preparation_first() {
        let s = build_schedule(&ProtocolConfig::default().with_boost(0.9)).unwrap();
        assert_eq!(s.frame.order[0], E3);
        assert_eq!(s.order(), vec![E0, E3, E1, E2]);
        assert!(s.alice_before_emission());
    }

    #[test]
    fn invalid_geometry_is_a_configuration_error() {
        let mut c = ProtocolConfig::default();
        c.geometry.x_a = 0.5;
        assert!(matches!(build_schedule(&c), Err(EngineError::Configuration(_))));
    }
}
