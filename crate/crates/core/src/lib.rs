//! Anytime multi-objective design space exploration for embedded system
//! synthesis on mesh NoC platforms.
//!
//! The library searches over binding, routing, ordering and phase decisions
//! with an incremental integer difference logic engine and a periodic-overlap
//! checker, and maintains nondominated archives of the area / energy /
//! latency objective space. Four anytime exploration strategies, front
//! quality metrics, diverse subset selection and a seeded benchmark
//! generator sit on top of the core engine.

pub mod dlsolver;
pub mod explore;
pub mod generator;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod pareto;
pub mod search;
pub mod verify;
