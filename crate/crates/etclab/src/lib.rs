//! Simulation laboratory and gain-synthesis toolkit for secure consensus of
//! linear multi-agent systems.
//!
//! The library covers the full pipeline for an observer-based, event-triggered
//! consensus protocol running under two adversarial effects at once:
//!
//! * **Deception attacks**: each agent's measurement channel is corrupted by an
//!   energy-bounded false-data signal that switches on and off as an
//!   independent Bernoulli process.
//! * **Randomly switching topologies**: the communication graph jumps between
//!   members of a finite family according to a continuous-time Markov chain.
//!
//! Agents broadcast observer states only at self-decided trigger instants. The
//! trigger law compares the broadcast-vs-observer gap against relative
//! neighborhood disagreement plus an internal dynamic threshold variable, so
//! communication thins out as the fleet synchronizes while Zeno behavior is
//! excluded by construction. Coupling strengths adapt online, which removes the
//! need to know global graph connectivity when deploying a gain set.
//!
//! Modules:
//!
//! * [`matrix`]: dense linear algebra kernels (symmetric eigensolver, LU,
//!   Cholesky, Kronecker products) with no external numeric dependencies.
//! * [`graph`]: undirected weighted graphs, Laplacians, connectivity checks
//!   over topology families.
//! * [`markov`]: continuous-time Markov chains, stationary distributions, and
//!   reproducible switching-path sampling.
//! * [`attack`]: Bernoulli-gated sinusoidal deception attacks with a global
//!   energy budget.
//! * [`gains`]: Riccati-based synthesis of controller and observer gains plus
//!   verification of every feasibility condition the consensus guarantee
//!   needs.
//! * [`protocol`]: the agent-level laws themselves (observer, trigger,
//!   adaptive coupling, control input) in a directly testable form.
//! * [`scenario`]: serializable experiment descriptions and built-in presets.
//! * [`sim`]: the event-triggered simulator, metrics extraction, a
//!   sampled-data comparison baseline, and Monte-Carlo drivers.
//! * [`cli`]: subcommand implementations backing the `etclab` binary.

pub mod attack;
pub mod gains;
pub mod graph;
pub mod markov;
pub mod matrix;
pub mod protocol;
mod rng;

pub use matrix::Matrix;
