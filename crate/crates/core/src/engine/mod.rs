//! The distributed allocation iteration
//!
//! ```text
//! w(k+1) = (1 - α_k)·A_k w(k) + α_k·A_k T(w(k)),   A_k = A(k) ⊗ I_N
//! ```
//!
//! where `T` acts blockwise: every agent maps its averaged proposal through
//! the projection-based innovation operator of [`crate::polytope`]. Each
//! innovation is checked against the approachability condition before it is
//! blended in.

mod blackwell;
mod step;

pub use blackwell::{
    blackwell_run, BlackwellTrace, ConstantSample, ProjectedAverage, RandomInnovation,
    SampleGenerator,
};
pub use step::StepSchedule;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::diagnostics::{self, TrajectoryRow};
use crate::network::{GraphSchedule, NetworkError};
use crate::polytope::{dot, norm, OperatorConfig, PolytopeError, Polyhedron, WarmStart};
use crate::state::StackedState;

/// Slack allowed in the approachability inequality.
pub const APPROACHABILITY_TOL: f64 = 1e-10;
/// Slack allowed before a metric increase is reported.
pub const MONOTONE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid step schedule: {0}")]
    InvalidSteps(String),
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error("innovation block {block} at k = {k} has norm {norm}, above the bound {bound}")]
    InnovationBound {
        block: usize,
        k: usize,
        norm: f64,
        bound: f64,
    },
    #[error("innovation block {block} at k = {k} violates the approachability condition ({value})")]
    Approachability { block: usize, k: usize, value: f64 },
    #[error("sample at k = {k} violates the approachability condition ({value})")]
    SampleContract { k: usize, value: f64 },
    #[error("sample at k = {k} has norm {norm}, above the bound {bound}")]
    SampleBound { k: usize, norm: f64, bound: f64 },
    #[error("state has {state} agents, schedule has {schedule}")]
    DimensionMismatch { state: usize, schedule: usize },
}

/// How each agent builds its innovation from its averaged proposal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InnovationRule {
    /// `x_i = T(w_i)`.
    #[default]
    Operator,
    /// `x_i = T(w_i) + v_perp + v_minus` with `‖v_perp‖ = perp_scale·‖u‖`
    /// in a random direction orthogonal to `u = w_i - proj(w_i)` and
    /// `v_minus = -minus_scale·u`.
    General { perp_scale: f64, minus_scale: f64 },
}

impl InnovationRule {
    fn has_perturbation(self) -> bool {
        matches!(self, InnovationRule::General { perp_scale, minus_scale } if perp_scale != 0.0 || minus_scale != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub operator: OperatorConfig,
    pub steps: StepSchedule,
    pub max_iters: usize,
    /// Run stops once `dist(w, C ∩ A)` drops to this value.
    pub stop_tol: f64,
    /// Bound `L` on every innovation block norm, checked when set.
    pub innovation_bound: Option<f64>,
    pub innovation: InnovationRule,
    pub seed: u64,
}

impl EngineConfig {
    pub fn new(operator: OperatorConfig, steps: StepSchedule) -> Self {
        EngineConfig {
            operator,
            steps,
            max_iters: 1000,
            stop_tol: 1e-6,
            innovation_bound: None,
            innovation: InnovationRule::Operator,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.steps.check()?;
        if self.max_iters == 0 {
            return Err(EngineError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.stop_tol.is_nan() || self.stop_tol < 0.0 {
            return Err(EngineError::InvalidConfig("stop_tol must be nonnegative".into()));
        }
        if let Some(l) = self.innovation_bound {
            if l.is_nan() || l <= 0.0 {
                return Err(EngineError::InvalidConfig("innovation bound must be positive".into()));
            }
        }
        if let InnovationRule::General {
            perp_scale,
            minus_scale,
        } = self.innovation
        {
            if !(perp_scale >= 0.0 && minus_scale >= 0.0) {
                return Err(EngineError::InvalidConfig(
                    "innovation scales must be nonnegative".into(),
                ));
            }
            if self.innovation.has_perturbation() && self.innovation_bound.is_none() {
                return Err(EngineError::InvalidConfig(
                    "perturbed innovations require an innovation bound".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `(w - p)·(x - p)` where `p = proj(w)`.
pub fn approachability_product(w: &[f64], p: &[f64], x_next: &[f64]) -> f64 {
    w.iter()
        .zip(p)
        .zip(x_next)
        .map(|((wi, pi), xi)| (wi - pi) * (xi - pi))
        .sum()
}

/// True iff `x_next` lies in the closed halfspace on the far side of the
/// supporting hyperplane at `proj(w)`.
pub fn approachability_check(
    poly: &Polyhedron,
    w: &[f64],
    x_next: &[f64],
) -> Result<bool, PolytopeError> {
    let p = poly.project(w)?;
    Ok(approachability_product(w, &p, x_next) <= APPROACHABILITY_TOL)
}

/// Blockwise `T`.
pub fn innovation_operator(
    poly: &Polyhedron,
    cfg: OperatorConfig,
    w: &StackedState,
) -> Result<StackedState, PolytopeError> {
    let blocks = w
        .blocks()
        .map(|b| poly.apply_t(cfg, b))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StackedState::from_blocks(blocks)
        .expect("blocks keep their shape")
        .with_iteration(w.iteration()))
}

/// One innovation of the general form, with its decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationSample {
    pub u: Vec<f64>,
    pub v_perp: Vec<f64>,
    pub v_minus: Vec<f64>,
    pub result: Vec<f64>,
}

/// `x⁺ = (1-β)·proj(w) + β·Q(w) + v_perp + v_minus` given `p = proj(w)`.
pub fn innovation_general_from<R: Rng + ?Sized>(
    cfg: OperatorConfig,
    w: &[f64],
    p: &[f64],
    rng: &mut R,
    perp_scale: f64,
    minus_scale: f64,
) -> InnovationSample {
    let n = w.len();
    let u: Vec<f64> = w.iter().zip(p).map(|(a, b)| a - b).collect();
    let u_norm = norm(&u);
    if u_norm == 0.0 {
        return InnovationSample {
            u,
            v_perp: vec![0.0; n],
            v_minus: vec![0.0; n],
            result: w.to_vec(),
        };
    }
    let mut g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    // Two passes of Gram-Schmidt keep u·v_perp at rounding level.
    for _ in 0..2 {
        let c = dot(&g, &u) / (u_norm * u_norm);
        g.iter_mut().zip(&u).for_each(|(gi, ui)| *gi -= c * ui);
    }
    let g_norm = norm(&g);
    let v_perp: Vec<f64> = if g_norm > 1e-12 * u_norm.max(1.0) && perp_scale > 0.0 {
        let s = perp_scale * u_norm / g_norm;
        g.iter().map(|gi| s * gi).collect()
    } else {
        vec![0.0; n]
    };
    let v_minus: Vec<f64> = u.iter().map(|ui| -minus_scale * ui).collect();
    let base = cfg.combine(p, w);
    let result = base
        .iter()
        .zip(&v_perp)
        .zip(&v_minus)
        .map(|((b, vp), vm)| b + vp + vm)
        .collect();
    InnovationSample {
        u,
        v_perp,
        v_minus,
        result,
    }
}

pub fn innovation_general<R: Rng + ?Sized>(
    poly: &Polyhedron,
    cfg: OperatorConfig,
    w: &[f64],
    rng: &mut R,
    perp_scale: f64,
    minus_scale: f64,
) -> Result<InnovationSample, PolytopeError> {
    let p = poly.project(w)?;
    Ok(innovation_general_from(cfg, w, &p, rng, perp_scale, minus_scale))
}

/// Seeded variant of [`innovation_general`].
pub fn innovation_general_seeded(
    poly: &Polyhedron,
    cfg: OperatorConfig,
    w: &[f64],
    seed: u64,
    perp_scale: f64,
    minus_scale: f64,
) -> Result<InnovationSample, PolytopeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    innovation_general(poly, cfg, w, &mut rng, perp_scale, minus_scale)
}

/// Result of [`Engine::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<StackedState>,
    pub rows: Vec<TrajectoryRow>,
    pub converged: bool,
    /// Iterations `k` at which the metric grew by more than [`MONOTONE_TOL`].
    pub monotonicity_violations: Vec<usize>,
}

impl Trajectory {
    pub fn final_state(&self) -> &StackedState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_row(&self) -> &TrajectoryRow {
        self.rows.last().expect("trajectory holds the initial row")
    }

    /// First `k` whose normalized distance is at most `threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.normalized_dist <= threshold)
            .map(|r| r.k)
    }
}

/// Runs the iteration for one polyhedron and graph schedule.
///
/// Holds per-agent warm starts for the projections; these only change how
/// fast each projection finds its active set, never its result beyond
/// rounding.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    poly: &'a Polyhedron,
    sched: &'a GraphSchedule,
    cfg: EngineConfig,
    budget: Option<f64>,
    warm: Vec<WarmStart>,
}

impl<'a> Engine<'a> {
    pub fn new(
        poly: &'a Polyhedron,
        sched: &'a GraphSchedule,
        cfg: EngineConfig,
    ) -> Result<Self, EngineError> {
        cfg.validate()?;
        if poly.dim() != sched.dim() {
            return Err(EngineError::DimensionMismatch {
                state: poly.dim(),
                schedule: sched.dim(),
            });
        }
        Ok(Engine {
            poly,
            sched,
            cfg,
            budget: None,
            warm: vec![WarmStart::default(); sched.dim()],
        })
    }

    /// Value every block should sum to; enables the `block_sum_gap` column.
    pub fn with_budget(mut self, v: f64) -> Self {
        self.budget = Some(v);
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    /// One application of `S_k`, `k = w.iteration()`.
    pub fn step(&mut self, w: &StackedState) -> Result<StackedState, EngineError> {
        let n = self.sched.dim();
        if w.n_agents() != n {
            return Err(EngineError::DimensionMismatch {
                state: w.n_agents(),
                schedule: n,
            });
        }
        let k = w.iteration();
        let alpha = self.cfg.steps.alpha(k);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(k as u64);

        let mut mixed = StackedState::zeros(n);
        for i in 0..n {
            let wi = w.block(i);
            let proj = self.poly.project_with(wi, Some(&self.warm[i]))?;
            self.warm[i] = WarmStart::from(&proj);
            let p = &proj.point;
            let x = match self.cfg.innovation {
                InnovationRule::Operator => self.cfg.operator.combine(p, wi),
                InnovationRule::General {
                    perp_scale,
                    minus_scale,
                } => {
                    innovation_general_from(self.cfg.operator, wi, p, &mut rng, perp_scale, minus_scale)
                        .result
                }
            };
            let value = approachability_product(wi, p, &x);
            if value > APPROACHABILITY_TOL {
                return Err(EngineError::Approachability { block: i, k, value });
            }
            if let Some(bound) = self.cfg.innovation_bound {
                let xn = norm(&x);
                if xn > bound {
                    return Err(EngineError::InnovationBound {
                        block: i,
                        k,
                        norm: xn,
                        bound,
                    });
                }
            }
            for ((m, wv), xv) in mixed.block_mut(i).iter_mut().zip(wi).zip(&x) {
                *m = (1.0 - alpha) * wv + alpha * xv;
            }
        }
        let mut next = self.sched.matrix_at(k).lifted_apply(&mixed)?;
        next.set_iteration(k + 1);
        Ok(next)
    }

    fn row(&self, w: &StackedState, d0: f64) -> Result<TrajectoryRow, EngineError> {
        let dist = diagnostics::dist_core_consensus(self.poly, w)?;
        Ok(TrajectoryRow {
            k: w.iteration(),
            dist_core_consensus: dist,
            normalized_dist: if d0 > 0.0 { dist / d0 } else { 0.0 },
            consensus_residual: diagnostics::consensus_residual(w),
            block_sum_gap: self
                .budget
                .map_or(f64::NAN, |v| diagnostics::block_sum_gap(w, v)),
        })
    }

    /// Iterates until `dist(w, C ∩ A) ≤ stop_tol` or `max_iters` steps.
    pub fn run(&mut self, w0: &StackedState) -> Result<Trajectory, EngineError> {
        let d0 = diagnostics::dist_core_consensus(self.poly, w0)?;
        let mut w = w0.clone();
        let mut rows = vec![self.row(&w, d0)?];
        let mut states = vec![w.clone()];
        let mut violations = Vec::new();
        let start = w0.iteration();
        let converged = loop {
            let last = rows.last().expect("nonempty").dist_core_consensus;
            if last <= self.cfg.stop_tol {
                break true;
            }
            if w.iteration() - start >= self.cfg.max_iters {
                break false;
            }
            w = self.step(&w)?;
            let row = self.row(&w, d0)?;
            if row.dist_core_consensus > last + MONOTONE_TOL {
                log::warn!(
                    "metric increased at k = {}: {} -> {}",
                    row.k,
                    last,
                    row.dist_core_consensus
                );
                violations.push(row.k);
            }
            rows.push(row);
            states.push(w.clone());
        };
        Ok(Trajectory {
            states,
            rows,
            converged,
            monotonicity_violations: violations,
        })
    }
}

/// Stateless single step (cold projections).
pub fn engine_step(
    poly: &Polyhedron,
    sched: &GraphSchedule,
    cfg: &EngineConfig,
    w: &StackedState,
) -> Result<StackedState, EngineError> {
    Engine::new(poly, sched, cfg.clone())?.step(w)
}
