//! Events, Lorentz boosts and per-frame time ordering (units with c = 1).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("boost velocity |β| = {0} must be below 1")]
    Superluminal(f64),
    #[error("geometry error: {0}")]
    Geometry(String),
}

pub type Result<T> = std::result::Result<T, KinematicsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventId {
    E0,
    E1,
    E2,
    E3,
}

impl EventId {
    pub const ALL: [EventId; 4] = [EventId::E0, EventId::E1, EventId::E2, EventId::E3];

    pub fn label(self) -> &'static str {
        match self {
            EventId::E0 => "E0",
            EventId::E1 => "E1",
            EventId::E2 => "E2",
            EventId::E3 => "E3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub id: EventId,
    pub t: f64,
    pub x: f64,
}

impl Event {
    pub fn new(id: EventId, t: f64, x: f64) -> Self {
        Self { id, t, x }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boost {
    beta: f64,
    gamma: f64,
}

impl Boost {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.abs() < 1.0) {
            return Err(KinematicsError::Superluminal(beta.abs()));
        }
        Ok(Self { beta, gamma: 1.0 / (1.0 - beta * beta).sqrt() })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn inverse(&self) -> Self {
        Self { beta: -self.beta, gamma: self.gamma }
    }
}

/// `t′ = γ(t − βx)`, `x′ = γ(x − βt)`.
pub fn boost_event(e: &Event, b: &Boost) -> Event {
    Event { id: e.id, t: b.gamma * (e.t - b.beta * e.x), x: b.gamma * (e.x - b.beta * e.t) }
}

/// `Δt² − Δx²`; negative for spacelike separation.
pub fn interval(e1: &Event, e2: &Event) -> f64 {
    let (dt, dx) = (e2.t - e1.t, e2.x - e1.x);
    dt * dt - dx * dx
}

/// Boosted times closer than this (relative to the time scale) are simultaneous.
pub const SIMULTANEITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOrdering {
    /// Ids by ascending boosted time; ties keep id order.
    pub order: Vec<EventId>,
    /// Boosted times, aligned with `order`.
    pub times: Vec<f64>,
    /// Pairs whose boosted times coincide within [`SIMULTANEITY_TOL`].
    pub simultaneous: Vec<(EventId, EventId)>,
}

impl FrameOrdering {
    pub fn position(&self, id: EventId) -> Option<usize> {
        self.order.iter().position(|&e| e == id)
    }

    /// `true` when `a` comes strictly before `b`.
    pub fn precedes(&self, a: EventId, b: EventId) -> bool {
        matches!((self.position(a), self.position(b)), (Some(i), Some(j)) if i < j)
    }

    pub fn is_simultaneous(&self, a: EventId, b: EventId) -> bool {
        self.simultaneous.iter().any(|&(p, q)| (p, q) == (a, b) || (q, p) == (a, b))
    }
}

pub fn frame_ordering(events: &[Event], b: &Boost) -> FrameOrdering {
    let mut boosted: Vec<Event> = events.iter().map(|e| boost_event(e, b)).collect();
    boosted.sort_by(|p, q| p.t.total_cmp(&q.t).then(p.id.cmp(&q.id)));
    let scale = boosted.iter().fold(1.0f64, |m, e| m.max(e.t.abs()));
    let mut simultaneous = Vec::new();
    for (i, p) in boosted.iter().enumerate() {
        for q in &boosted[i + 1..] {
            if (p.t - q.t).abs() <= SIMULTANEITY_TOL * scale {
                let pair = if p.id < q.id { (p.id, q.id) } else { (q.id, p.id) };
                simultaneous.push(pair);
            }
        }
    }
    // simultaneous events are reported in id order
    boosted.sort_by(|p, q| {
        let tie = (p.t - q.t).abs() <= SIMULTANEITY_TOL * scale;
        if tie {
            p.id.cmp(&q.id)
        } else {
            p.t.total_cmp(&q.t)
        }
    });
    FrameOrdering {
        order: boosted.iter().map(|e| e.id).collect(),
        times: boosted.iter().map(|e| e.t).collect(),
        simultaneous,
    }
}

/// Boost velocity above which `e3` precedes `e2`: `β* = (t3 − t2)/(x3 − x2)`.
pub fn inversion_threshold(e2: &Event, e3: &Event) -> Result<f64> {
    let s = interval(e2, e3);
    if s >= 0.0 {
        return Err(KinematicsError::Geometry(format!(
            "events are not spacelike separated (interval {s}); their order is the same in every frame"
        )));
    }
    if !(e3.x > e2.x) || e3.t < e2.t {
        return Err(KinematicsError::Geometry("threshold needs x3 > x2 and t3 ≥ t2".into()));
    }
    Ok((e3.t - e2.t) / (e3.x - e2.x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<GeometryCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GeometryCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&GeometryCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Looks up the protocol events by id.
pub fn find_event(events: &[Event], id: EventId) -> Option<&Event> {
    events.iter().find(|e| e.id == id)
}

pub fn validate_geometry(events: &[Event]) -> ValidationReport {
    let mut checks = Vec::new();
    let complete = events.len() == 4 && EventId::ALL.iter().all(|id| events.iter().filter(|e| e.id == *id).count() == 1);
    checks.push(GeometryCheck {
        name: "event_set",
        passed: complete,
        detail: format!("{} events supplied; need exactly one each of E0..E3", events.len()),
    });
    if !complete {
        return ValidationReport { checks };
    }
    let ev = |id| *find_event(events, id).expect("checked above");
    let (e0, e1, e2, e3) = (ev(EventId::E0), ev(EventId::E1), ev(EventId::E2), ev(EventId::E3));

    checks.push(GeometryCheck {
        name: "lab_colocated",
        passed: e0.x == 0.0 && e1.x == 0.0 && e2.x == 0.0,
        detail: format!("E0, E1, E2 at x = {}, {}, {} (lab at x = 0)", e0.x, e1.x, e2.x),
    });
    checks.push(GeometryCheck {
        name: "alice_position",
        passed: e3.x > 0.0,
        detail: format!("E3 at x_A = {}", e3.x),
    });
    checks.push(GeometryCheck {
        name: "rest_frame_order",
        passed: e0.t < e1.t && e1.t < e2.t && e2.t < e3.t,
        detail: format!("t0 = {}, t1 = {}, t2 = {}, t3 = {}", e0.t, e1.t, e2.t, e3.t),
    });
    let s = interval(&e2, &e3);
    checks.push(GeometryCheck {
        name: "e2_e3_spacelike",
        passed: s < 0.0,
        detail: format!("interval(E2, E3) = {s}"),
    });
    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn default_events() -> Vec<Event> {
        vec![
            Event::new(EventId::E0, 0.0, 0.0),
            Event::new(EventId::E1, 0.5, 0.0),
            Event::new(EventId::E2, 1.0, 0.0),
            Event::new(EventId::E3, 2.0, 10.0),
        ]
    }

    #[test]
    fn boost_examples() {
        let b = Boost::new(0.37).unwrap();
        let o = boost_event(&Event::new(EventId::E0, 0.0, 0.0), &b);
        assert_eq!((o.t, o.x), (0.0, 0.0));

        let e = Event::new(EventId::E3, 2.0, 10.0);
        let back = boost_event(&boost_event(&e, &b), &b.inverse());
        assert_abs_diff_eq!(back.t, e.t, epsilon = 1e-12);
        assert_abs_diff_eq!(back.x, e.x, epsilon = 1e-12);

        let b = Boost::new(0.2).unwrap();
        let p = boost_event(&e, &b);
        assert_abs_diff_eq!(p.t, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.x, b.gamma() * 9.6, epsilon = 1e-12);
        let origin = Event::new(EventId::E0, 0.0, 0.0);
        assert_abs_diff_eq!(interval(&origin, &p), -96.0, epsilon = 1e-12);

        assert!(matches!(Boost::new(1.0), Err(KinematicsError::Superluminal(_))));
        assert!(Boost::new(-1.2).is_err());
        assert!(Boost::new(f64::NAN).is_err());
    }

    #[test]
    fn interval_examples() {
        let e = Event::new(EventId::E2, 1.0, 0.0);
        assert_eq!(interval(&e, &e), 0.0);
        assert_eq!(interval(&e, &Event::new(EventId::E3, 2.0, 10.0)), -99.0);
    }

    #[test]
    fn ordering_examples() {
        let ev = default_events();
        let r = frame_ordering(&ev, &Boost::new(0.0).unwrap());
        assert_eq!(r.order, EventId::ALL.to_vec());
        let rp = frame_ordering(&ev, &Boost::new(0.2).unwrap());
        assert!(rp.precedes(EventId::E3, EventId::E2));
        // Alice's event is also spacelike to E0 and E1: at β = 0.2 it is
        // simultaneous with E0 and ahead of E1.
        assert_eq!(rp.order[..], [EventId::E0, EventId::E3, EventId::E1, EventId::E2]);
        assert!(rp.is_simultaneous(EventId::E0, EventId::E3));
        let late = [ev[0], ev[1], ev[2], Event::new(EventId::E3, 2.7, 10.0)];
        let rl = frame_ordering(&late, &Boost::new(0.2).unwrap());
        assert_eq!(rl.order[..], [EventId::E0, EventId::E1, EventId::E3, EventId::E2]);
        let near = frame_ordering(&ev, &Boost::new(0.1 - 1e-6).unwrap());
        assert_eq!(near.order, EventId::ALL.to_vec());

        let at = frame_ordering(&ev, &Boost::new(0.1).unwrap());
        assert!(at.is_simultaneous(EventId::E2, EventId::E3));
        assert!(at.precedes(EventId::E2, EventId::E3));
    }

    #[test]
    fn threshold_examples() {
        let e2 = Event::new(EventId::E2, 1.0, 0.0);
        assert_eq!(inversion_threshold(&e2, &Event::new(EventId::E3, 2.0, 10.0)).unwrap(), 0.1);
        assert_eq!(inversion_threshold(&e2, &Event::new(EventId::E3, 1.0, 10.0)).unwrap(), 0.0);
        let far = inversion_threshold(&e2, &Event::new(EventId::E3, 2.0, 1e9)).unwrap();
        assert!(far < 1e-8);
        assert!(matches!(
            inversion_threshold(&e2, &Event::new(EventId::E3, 3.0, 1.0)),
            Err(KinematicsError::Geometry(_))
        ));
        assert!(inversion_threshold(&e2, &Event::new(EventId::E3, 2.0, 1.0)).is_err());
    }

    #[test]
    fn validate_examples() {
        assert!(validate_geometry(&default_events()).passed());

        let mut ev = default_events();
        ev[3] = Event::new(EventId::E3, 2.0, 0.5);
        let rep = validate_geometry(&ev);
        assert!(!rep.check("e2_e3_spacelike").unwrap().passed);

        let mut ev = default_events();
        ev[0].t = 0.7;
        let rep = validate_geometry(&ev);
        assert!(!rep.check("rest_frame_order").unwrap().passed);

        let rep = validate_geometry(&default_events()[..3]);
        assert!(!rep.passed());
    }

    #[test]
    fn colocated_events_keep_their_order() {
        let ev = default_events();
        for i in -9..=9 {
            let o = frame_ordering(&ev, &Boost::new(0.1 * i as f64).unwrap());
            assert!(o.precedes(EventId::E0, EventId::E1));
            assert!(o.precedes(EventId::E1, EventId::E2));
        }
    }
}
