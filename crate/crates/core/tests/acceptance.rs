//! Acceptance gate: one PASS/FAIL line per criterion.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{angle_grid, oracle_k, oracle_moments, PointerGrid};
use wfsim::engine::{
    run_exact, run_monte_carlo, run_monte_carlo_with, Execution, FriendRecord, InterpretationMode, MeasurementScheme,
    ProtocolConfig, RecordBasis, ResetState,
};
use wfsim::qmath::{self, ket_plus, ket_theta, ket_x, sigma_z};
use wfsim::registers::{DiscreteState, RegisterLayout, ALICE, APPARATUS, ENV, Q1, Q2, SPIN_F};
use wfsim::relativity::{self, boost_event, frame_ordering, interval, Boost, Event, EventId};
use wfsim::shell::{cmd_run, cmd_signalling_test, RunOptions};
use wfsim::weakmeas::{weak_value, HybridState, Pointer};

const EXACT_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-6;
const SIGMAS: f64 = 5.0;
const MC_TRIALS: u64 = 1_000_000;
const GRID: usize = 21;
const GS: [f64; 3] = [0.05, 0.1, 0.5];
const WS: [f64; 3] = [0.5, 1.0, 2.0];

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} [{id:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn frame_r_value(g: f64, t1: f64, t2: f64) -> f64 {
    g * g / 4.0 * (1.0 + t1.cos() * t2.cos())
}

fn moment(c: &ProtocolConfig) -> f64 {
    run_exact(c).expect("valid config").joint_moment_unnormalized.expect("weak scheme")
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn rest_frame_exactness(gate: &mut Gate) {
    let start = Instant::now();
    let grid = angle_grid(GRID);
    let mut worst: f64 = 0.0;
    for g in GS {
        for w in WS {
            for &t1 in &grid {
                for &t2 in &grid {
                    let c = ProtocolConfig { g, w, ..ProtocolConfig::default() }.with_angles(t1, t2);
                    worst = worst.max((moment(&c) - frame_r_value(g, t1, t2)).abs());
                }
            }
        }
    }
    let t = start.elapsed();
    gate.report(
        1,
        "rest-frame moment = (g²/4)(1+cosθ1cosθ2)",
        worst <= EXACT_TOL && t < Duration::from_secs(5),
        format!("max |Δ| = {worst:.3e} (tol {EXACT_TOL:e}) over {} configs in {} (target < 5s)", GRID * GRID * 9, secs(t)),
    );
}

fn inverted_frame_oracle(gate: &mut Gate) {
    let grid = angle_grid(GRID);
    let (mut vs_oracle, mut vs_closed): (f64, f64) = (0.0, 0.0);
    let mut ks = Vec::new();
    for g in GS {
        for w in WS {
            let pg = PointerGrid::new(g, w);
            let k = oracle_k(g, w);
            ks.push(k);
            for &t1 in &grid {
                for &t2 in &grid {
                    let c = ProtocolConfig { g, w, ..ProtocolConfig::default() }.with_angles(t1, t2).with_boost(0.2);
                    let m = moment(&c);
                    let (_, oracle) = oracle_moments(&pg, t1, t2);
                    vs_oracle = vs_oracle.max((m - oracle).abs());
                    vs_closed = vs_closed.max((m - 0.25 * g * g * t1.cos() * t2.cos()).abs());
                }
            }
        }
    }
    let k_spread = ks.iter().map(|k| (k - 0.25).abs()).fold(0.0, f64::max);
    gate.report(
        2,
        "inverted-frame moment = k·g²·cosθ1cosθ2 with k from grid oracle",
        vs_oracle <= ORACLE_TOL && vs_closed <= EXACT_TOL && k_spread <= ORACLE_TOL,
        format!(
            "oracle k = {:.9} (max |k − 1/4| = {k_spread:.2e}); max |engine − oracle| = {vs_oracle:.3e} (tol {ORACLE_TOL:e}); \
             max |engine − g²c1c2/4| = {vs_closed:.3e} (tol {EXACT_TOL:e}); literature constant k = 1 reported alongside \
             (would need pointer shifts of ±2g)",
            ks[4]
        ),
    );
}

fn frame_difference_constancy(gate: &mut Gate) {
    let grid = angle_grid(GRID);
    let base = ProtocolConfig::default();
    let expected = base.g * base.g / 4.0;
    let mut spread: f64 = 0.0;
    let mut off: f64 = 0.0;
    let mut reference = None;
    for &t1 in &grid {
        for &t2 in &grid {
            let c = base.with_angles(t1, t2);
            let r = moment(&c);
            for beta in [0.11, 0.2, 0.5, 0.9] {
                let d = (r - moment(&c.with_boost(beta))).abs();
                let d0 = *reference.get_or_insert(d);
                spread = spread.max((d - d0).abs());
                off = off.max((d - expected).abs());
            }
        }
    }
    gate.report(
        3,
        "|moment(R) − moment(R′)| constant across β and angles",
        spread <= EXACT_TOL && off <= EXACT_TOL,
        format!("spread {spread:.3e}, max |Δ − g²/4| = {off:.3e} (tol {EXACT_TOL:e})"),
    );
}

fn monte_carlo_convergence(gate: &mut Gate) {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for beta in [0.0, 0.2] {
        let c = ProtocolConfig::default().with_boost(beta);
        let exact = run_exact(&c).unwrap();
        let s = run_monte_carlo(&c, MC_TRIALS, 2024).unwrap();
        let m = s.joint_moment_unnormalized.unwrap();
        let p = s.success_frequency.unwrap();
        let zm = m.z_score(exact.joint_moment_unnormalized.unwrap());
        let zp = p.z_score(exact.success_prob.unwrap());
        pass &= zm <= SIGMAS && zp <= SIGMAS;
        parts.push(format!(
            "β={beta}: moment {:.5e}±{:.1e} vs {:.5e} ({zm:.2}σ), success {:.5}±{:.1e} vs {:.5} ({zp:.2}σ)",
            m.mean,
            m.standard_error,
            exact.joint_moment_unnormalized.unwrap(),
            p.mean,
            p.standard_error,
            exact.success_prob.unwrap()
        ));
    }
    let t = start.elapsed();
    pass &= t < Duration::from_secs(60);
    gate.report(
        4,
        "Monte Carlo (10^6 trials) within 5σ of exact",
        pass,
        format!("{}; {} (target < 60s)", parts.join("; "), secs(t)),
    );
}

fn projective_records(gate: &mut Gate) {
    let c = ProtocolConfig::default().with_scheme(MeasurementScheme::Projective);
    let rest = run_exact(&c).unwrap();
    let inv = run_exact(&c.with_boost(0.2)).unwrap();
    let only = |r: &wfsim::engine::ExactResults, basis: RecordBasis| {
        r.friend_record_distribution
            .iter()
            .all(|(k, p)| matches!(k, FriendRecord::Declared { basis: b, .. } if *b == basis) || *p == 0.0)
    };
    let q1 = rest.projective.as_ref().unwrap().q1_matches_record;
    let q2 = inv.projective.as_ref().unwrap().q2_matches_record;
    gate.report(
        5,
        "projective records: z in R (q1 = record), x in R′ (q2 = record)",
        only(&rest, RecordBasis::Z) && only(&inv, RecordBasis::X) && (q1 - 1.0).abs() <= EXACT_TOL && (q2 - 1.0).abs() <= EXACT_TOL,
        format!("R records {:?}, P(q1=rec) = {q1}; R′ records {:?}, P(q2=rec) = {q2}", keys(&rest), keys(&inv)),
    );
}

fn keys(r: &wfsim::engine::ExactResults) -> Vec<&'static str> {
    r.friend_record_distribution.keys().map(|k| k.key()).collect()
}

fn max_result_diff(a: &wfsim::engine::ExactResults, b: &wfsim::engine::ExactResults) -> f64 {
    let mut d: f64 = 0.0;
    let opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => (x - y).abs(),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    };
    d = d.max(opt(a.joint_moment_unnormalized, b.joint_moment_unnormalized));
    d = d.max(opt(a.joint_moment_normalized, b.joint_moment_normalized));
    d = d.max(opt(a.success_prob, b.success_prob));
    d = d.max((a.alice_marginal - b.alice_marginal).abs());
    if a.friend_record_distribution.keys().ne(b.friend_record_distribution.keys()) {
        return f64::INFINITY;
    }
    for (x, y) in a.friend_record_distribution.values().zip(b.friend_record_distribution.values()) {
        d = d.max((x - y).abs());
    }
    match (&a.projective, &b.projective) {
        (Some(p), Some(q)) => {
            if p.outcome_distribution.keys().ne(q.outcome_distribution.keys()) {
                return f64::INFINITY;
            }
            for (x, y) in p.outcome_distribution.values().zip(q.outcome_distribution.values()) {
                d = d.max((x - y).abs());
            }
            d = d.max((p.q1_matches_record - q.q1_matches_record).abs());
            d = d.max((p.q2_matches_record - q.q2_matches_record).abs());
        }
        (None, None) => {}
        _ => return f64::INFINITY,
    }
    d
}

fn collapse_control(gate: &mut Gate) {
    let grid = angle_grid(GRID);
    let base = ProtocolConfig::default().with_mode(InterpretationMode::ObjectiveCollapse);
    let (mut across, mut vs_formula): (f64, f64) = (0.0, 0.0);
    for scheme in [MeasurementScheme::Weak, MeasurementScheme::Projective] {
        for &t1 in &grid {
            for &t2 in &grid {
                let c = base.with_scheme(scheme).with_angles(t1, t2);
                let r = run_exact(&c).unwrap();
                let rp = run_exact(&c.with_boost(0.2)).unwrap();
                across = across.max(max_result_diff(&r, &rp));
                if scheme == MeasurementScheme::Weak {
                    vs_formula = vs_formula.max((r.joint_moment_unnormalized.unwrap() - frame_r_value(c.g, t1, t2)).abs());
                }
            }
        }
    }
    gate.report(
        6,
        "objective collapse: identical results in R and R′",
        across <= EXACT_TOL && vs_formula <= EXACT_TOL,
        format!("max cross-frame Δ = {across:.3e}, max |moment − (g²/4)(1+c1c2)| = {vs_formula:.3e} (tol {EXACT_TOL:e})"),
    );
}

fn signalling_witness(gate: &mut Gate) {
    let d = cmd_signalling_test(&ProtocolConfig::default().with_boost(0.2)).unwrap().as_value();
    let u = d["unitary_lab"]["difference"].as_f64().unwrap();
    let c = d["objective_collapse_control"]["difference"].as_f64().unwrap();
    let g = ProtocolConfig::default().g;
    gate.report(
        7,
        "signalling witness at β = 0.2",
        (u - g * g / 4.0).abs() <= EXACT_TOL && u > 0.0 && c.abs() <= EXACT_TOL && d["unitary_lab"]["signalling"] == true,
        format!("unitary difference {u:.6e} (g²/4 = {:.6e}), collapse control {c:.3e}", g * g / 4.0),
    );
}

fn weak_limit(gate: &mut Gate) {
    let theta = PI / 3.0;
    let w = 1.0;
    let wv = weak_value(&ket_x(1), &ket_theta(theta), &sigma_z()).unwrap().re;
    let discrepancy = |g: f64| {
        let layout = RegisterLayout::new([(Q1, 2), (Q2, 2)]).unwrap();
        let s = DiscreteState::product(layout, &[ket_x(1), ket_plus()]).unwrap();
        let h = HybridState::attach(&s, w).unwrap().couple(Q1, Pointer::One, g).unwrap();
        let (b, _) = h.postselect_on(&ket_theta(theta), &ket_plus()).unwrap();
        b.position_moment(Pointer::One) / b.norm_sqr() - g * wv
    };
    let (d1, d2) = (discrepancy(0.1), discrepancy(0.05));
    let ratio = d1 / d2;
    gate.report(
        8,
        "weak limit: shift − g·Re(A_w) is O(g³)",
        (6.0..=10.0).contains(&ratio),
        format!("discrepancy {d1:.4e} at g=0.1, {d2:.4e} at g=0.05, ratio {ratio:.4} (required in [6, 10])"),
    );
}

fn relativity_suite(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut round, mut inv): (f64, f64) = (0.0, 0.0);
    for _ in 0..10_000 {
        let b = Boost::new(rng.random_range(-0.9..=0.9)).unwrap();
        let e1 = Event::new(EventId::E0, rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
        let e2 = Event::new(EventId::E1, rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
        let back = boost_event(&boost_event(&e1, &b), &b.inverse());
        round = round.max((back.t - e1.t).abs().max((back.x - e1.x).abs()) / e1.t.abs().max(e1.x.abs()).max(1.0));
        let i0 = interval(&e1, &e2);
        let i1 = interval(&boost_event(&e1, &b), &boost_event(&e2, &b));
        // relative to Δt² + Δx², the scale of the cancelling terms
        let (dt, dx) = (e1.t - e2.t, e1.x - e2.x);
        inv = inv.max((i0 - i1).abs() / (dt * dt + dx * dx).max(1.0));
    }
    let mut bisect: f64 = 0.0;
    for _ in 0..200 {
        let t2 = rng.random_range(0.0..5.0);
        let t3 = t2 + rng.random_range(0.0..5.0);
        let x3 = (t3 - t2) * rng.random_range(1.05..20.0);
        let ev = [
            Event::new(EventId::E0, t2 - 2.0, 0.0),
            Event::new(EventId::E1, t2 - 1.0, 0.0),
            Event::new(EventId::E2, t2, 0.0),
            Event::new(EventId::E3, t3, x3),
        ];
        let star = relativity::inversion_threshold(&ev[2], &ev[3]).unwrap();
        let inverted = |beta: f64| frame_ordering(&ev, &Boost::new(beta).unwrap()).precedes(EventId::E3, EventId::E2);
        let (mut lo, mut hi) = (0.0, 0.999_999);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if inverted(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        bisect = bisect.max((0.5 * (lo + hi) - star).abs());
    }
    let ev = ProtocolConfig::default().geometry.events();
    let default_star = relativity::inversion_threshold(&ev[2], &ev[3]).unwrap();
    gate.report(
        9,
        "relativity: round trips, interval invariance, β* by bisection",
        round <= EXACT_TOL && inv <= EXACT_TOL && bisect <= 1e-10 && default_star == 0.1,
        format!(
            "round-trip {round:.2e}, interval {inv:.2e} (tol {EXACT_TOL:e}, relative to Δt²+Δx²) over 10^4 samples; \
             max |β* − bisection| = {bisect:.2e} (tol 1e-10); default β* = {default_star}"
        ),
    );
}

fn property_suites(gate: &mut Gate) {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);

    // norm preservation and density validity through the lab pipeline
    let (mut norm_dev, mut dens_bad, mut trace_dev): (f64, usize, f64) = (0.0, 0, 0.0);
    for _ in 0..50 {
        let a = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let b = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let s0 = DiscreteState::prepare_initial(a / n, b / n).unwrap();
        let s1 = s0.friend_measure_and_reset().unwrap();
        let s2 = s1.controlled_emit().unwrap();
        for s in [&s0, &s1, &s2] {
            norm_dev = norm_dev.max((s.norm_sqr() - 1.0).abs());
        }
        let h = HybridState::attach(&s2, 1.0).unwrap().couple(Q1, Pointer::One, 0.3).unwrap().couple(Q2, Pointer::Two, 0.3).unwrap();
        norm_dev = norm_dev.max((h.norm_sqr() - 1.0).abs());
        for names in [&[SPIN_F][..], &[APPARATUS], &[ENV], &[ALICE], &[ENV, ALICE], &[Q1, Q2], &[ENV, Q1]] {
            if s2.reduced_dm(names).unwrap().check_density().is_err() {
                dens_bad += 1;
            }
        }
        // tracing in two steps equals tracing in one
        let dims = s2.layout().dims();
        let full = qmath::partial_trace_pure(s2.amplitudes(), &dims, &[2, 3, 4]).unwrap();
        let two = qmath::partial_trace(&full, &[3, 2, 2], &[0]).unwrap();
        let one = qmath::partial_trace_pure(s2.amplitudes(), &dims, &[2]).unwrap();
        trace_dev = trace_dev.max(two.max_abs_diff(&one));
    }
    if norm_dev > EXACT_TOL || dens_bad > 0 || trace_dev > EXACT_TOL {
        failures.push(format!("norm {norm_dev:.2e}, invalid densities {dens_bad}, trace composition {trace_dev:.2e}"));
    }

    // s0 invariance and Alice marginal over modes, frames, schemes, angles
    let grid = angle_grid(7);
    let (mut s0_dev, mut alice_dev): (f64, f64) = (0.0, 0.0);
    for mode in [InterpretationMode::UnitaryLab, InterpretationMode::ObjectiveCollapse] {
        for scheme in [MeasurementScheme::Weak, MeasurementScheme::Projective] {
            for beta in [0.0, 0.2, 0.5] {
                for &t1 in &grid {
                    for &t2 in &grid {
                        let c = ProtocolConfig::default().with_mode(mode).with_scheme(scheme).with_boost(beta).with_angles(t1, t2);
                        let r = run_exact(&c).unwrap();
                        alice_dev = alice_dev.max((r.alice_marginal - 0.5).abs());
                        for s0 in [ResetState::Minus, ResetState::PlusX] {
                            let o = run_exact(&ProtocolConfig { s0, ..c.clone() }).unwrap();
                            s0_dev = s0_dev.max(max_result_diff(&r, &o));
                        }
                    }
                }
            }
        }
    }
    if s0_dev > EXACT_TOL || alice_dev > EXACT_TOL {
        failures.push(format!("s0 invariance {s0_dev:.2e}, Alice marginal {alice_dev:.2e}"));
    }

    // seed reproducibility: byte-identical documents, worker-count independence
    let opts = RunOptions { mc: true, trials: Some(100_000), seed: Some(7), ..Default::default() };
    let c = ProtocolConfig::default().with_boost(0.2);
    let first = cmd_run(&c, &opts).unwrap().to_json();
    let second = cmd_run(&c, &opts).unwrap().to_json();
    let seq = run_monte_carlo_with(&c, 20_000, 7, Execution::Sequential).unwrap();
    let par = run_monte_carlo(&c, 20_000, 7).unwrap();
    let reproducible = first == second && seq == par;
    if !reproducible {
        failures.push("reruns differ".into());
    }
    gate.report(
        10,
        "property suites (norm, density, partial trace, s0, Alice marginal, reproducibility)",
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "norm {norm_dev:.1e}, trace composition {trace_dev:.1e}, s0 {s0_dev:.1e}, Alice {alice_dev:.1e}, \
                 byte-identical reruns ({} bytes)",
                first.len()
            )
        } else {
            failures.join("; ")
        },
    );
}

fn main() {
    let mut gate = Gate { failed: 0 };
    rest_frame_exactness(&mut gate);
    inverted_frame_oracle(&mut gate);
    frame_difference_constancy(&mut gate);
    monte_carlo_convergence(&mut gate);
    projective_records(&mut gate);
    collapse_control(&mut gate);
    signalling_witness(&mut gate);
    weak_limit(&mut gate);
    relativity_suite(&mut gate);
    property_suites(&mut gate);
    if gate.failed > 0 {
        println!("acceptance: {} criteria failed", gate.failed);
        std::process::exit(1);
    }
    println!("acceptance: all 10 criteria passed");
}
