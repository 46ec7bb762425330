//! Distributed payoff allocation in TU coalitional games.
//!
//! Agents hold proposals for the whole payoff vector, average them over a
//! time-varying communication graph and blend in a projection-based
//! innovation that satisfies the approachability condition. With doubly
//! stochastic weights and a paracontracting innovation all proposals reach a
//! common point of the CORE.
//!
//! ```
//! use corereach::prelude::*;
//!
//! let game = TuGame::four_agent_example();
//! let core = game.core_polyhedron();
//! let sched = four_agent_pairings();
//! let cfg = EngineConfig::new(OperatorConfig::new(0.8)?, StepSchedule::fixed(0.5)?);
//! let w0 = StackedState::self_allocation(4, game.grand_value());
//! let traj = Engine::new(&core, &sched, cfg)?.run(&w0)?;
//! assert!(traj.converged);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod checks;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod engine;
pub mod game;
pub mod network;
pub mod polytope;
pub mod state;

pub mod prelude {
    pub use crate::diagnostics::{consensus_residual, dist_core_consensus, TrajectoryRow};
    pub use crate::engine::{
        approachability_check, engine_step, innovation_general, innovation_operator, Engine,
        EngineConfig, EngineError, InnovationRule, StepSchedule, Trajectory,
    };
    pub use crate::game::{Coalition, TuGame};
    pub use crate::network::{four_agent_pairings, GraphSchedule, ScheduleRule, WeightMatrix};
    pub use crate::polytope::{project_oracle, OperatorConfig, Polyhedron};
    pub use crate::state::StackedState;
}
