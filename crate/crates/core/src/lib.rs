//! Simulator for a relativistic Wigner-friend protocol: a sealed lab whose
//! emitted qubits are measured weakly or projectively by an external
//! observer, executed in the event order of a chosen inertial frame.

pub mod engine;
pub mod qmath;
pub mod registers;
pub mod relativity;
pub mod shell;
pub mod weakmeas;
