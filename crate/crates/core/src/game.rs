//! Transferable-utility coalitional games and their CORE.
//!
//! Coalitions are bitmasks over the agent set (bit `i` set means agent `i`
//! is a member, 0-based). Coalitions missing from the characteristic
//! function take value 0, as does the empty coalition.

use std::collections::BTreeMap;
use std::fmt;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use thiserror::Error;

use crate::polytope::Polyhedron;

/// Largest number of agents for which coalitions are enumerated exhaustively.
pub const MAX_AGENTS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("game must have at least one agent")]
    NoAgents,
    #[error("{0} agents exceeds the supported maximum of {MAX_AGENTS}")]
    TooManyAgents(usize),
    #[error("coalition {mask:#b} does not fit in {n_agents} agents")]
    InvalidCoalition { mask: u32, n_agents: usize },
    #[error("grand coalition value is missing")]
    MissingGrandCoalition,
    #[error("value for coalition {0} is not finite")]
    NonFiniteValue(Coalition),
    #[error("payoff vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed coalition key {0:?}")]
    BadCoalitionKey(String),
}

/// A set of agents encoded as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Coalition(u32);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn from_mask(mask: u32) -> Self {
        Coalition(mask)
    }

    /// Builds a coalition from 0-based agent indices.
    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Self {
        Coalition(members.into_iter().fold(0u32, |m, i| m | (1 << i)))
    }

    /// The coalition of all `n` agents.
    pub fn grand(n: usize) -> Self {
        if n >= 32 {
            Coalition(u32::MAX)
        } else {
            Coalition((1u32 << n) - 1)
        }
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn contains(self, agent: usize) -> bool {
        agent < 32 && self.0 & (1 << agent) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.0 & (1 << i) != 0)
    }

    pub fn fits(self, n_agents: usize) -> bool {
        n_agents >= 32 || self.0 >> n_agents == 0
    }

    /// Parses the config key form: sorted, comma-separated, 1-based indices.
    pub fn parse_key(key: &str) -> Result<Self, GameError> {
        let bad = || GameError::BadCoalitionKey(key.to_string());
        let mut prev = 0usize;
        let mut mask = 0u32;
        for part in key.split(',') {
            let idx: usize = part.trim().parse().map_err(|_| bad())?;
            if idx == 0 || idx > MAX_AGENTS || idx <= prev {
                return Err(bad());
            }
            mask |= 1 << (idx - 1);
            prev = idx;
        }
        Ok(Coalition(mask))
    }

    /// Inverse of [`Coalition::parse_key`].
    pub fn key(self) -> String {
        self.members()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key())
    }
}

/// A TU game: agent count plus characteristic function.
#[derive(Debug, Clone, PartialEq)]
pub struct TuGame {
    n_agents: usize,
    values: BTreeMap<Coalition, f64>,
}

impl TuGame {
    pub fn new(n_agents: usize, values: BTreeMap<Coalition, f64>) -> Result<Self, GameError> {
        if n_agents == 0 {
            return Err(GameError::NoAgents);
        }
        if n_agents > MAX_AGENTS {
            return Err(GameError::TooManyAgents(n_agents));
        }
        for (&s, &v) in &values {
            if !s.fits(n_agents) {
                return Err(GameError::InvalidCoalition {
                    mask: s.mask(),
                    n_agents,
                });
            }
            if !v.is_finite() {
                return Err(GameError::NonFiniteValue(s));
            }
        }
        if !values.contains_key(&Coalition::grand(n_agents)) {
            return Err(GameError::MissingGrandCoalition);
        }
        Ok(TuGame { n_agents, values })
    }

    /// Builds a game from `(1-based members, value)` pairs.
    pub fn from_pairs(n_agents: usize, pairs: &[(&[usize], f64)]) -> Result<Self, GameError> {
        let values = pairs
            .iter()
            .map(|(members, v)| {
                (
                    Coalition::from_members(members.iter().map(|&i| i.saturating_sub(1))),
                    *v,
                )
            })
            .collect();
        Self::new(n_agents, values)
    }

    /// The four-agent game used throughout the documentation and tests.
    pub fn four_agent_example() -> Self {
        Self::from_pairs(
            4,
            &[
                (&[1], 4.0),
                (&[2], 3.0),
                (&[3], 0.0),
                (&[4], 3.0),
                (&[1, 2], 5.0),
                (&[3, 4], 3.0),
                (&[1, 2, 3], 7.0),
                (&[1, 2, 3, 4], 10.0),
            ],
        )
        .expect("static game is well formed")
    }

    /// A random convex (supermodular) game: `v(S) = s * (Σ_{i∈S} w_i)^2 + Σ_{i∈S} c_i`.
    ///
    /// Convex games always have a nonempty CORE, which is full-dimensional
    /// inside the efficiency hyperplane for generic weights.
    pub fn random_convex<R: Rng + ?Sized>(n_agents: usize, rng: &mut R) -> Self {
        let w: Vec<f64> = (0..n_agents).map(|_| rng.random_range(0.2..1.5)).collect();
        let c: Vec<f64> = (0..n_agents).map(|_| rng.random_range(-2.0..2.0)).collect();
        let scale = rng.random_range(0.5..2.0);
        let values = (1u32..=Coalition::grand(n_agents).mask())
            .map(|mask| {
                let s = Coalition::from_mask(mask);
                let weight: f64 = s.members().map(|i| w[i]).sum();
                let additive: f64 = s.members().map(|i| c[i]).sum();
                (s, scale * weight * weight + additive)
            })
            .collect();
        Self::new(n_agents, values).expect("generated game is well formed")
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn grand_coalition(&self) -> Coalition {
        Coalition::grand(self.n_agents)
    }

    pub fn grand_value(&self) -> f64 {
        self.values[&self.grand_coalition()]
    }

    /// Explicitly listed coalition values.
    pub fn listed_values(&self) -> &BTreeMap<Coalition, f64> {
        &self.values
    }

    pub fn coalition_value(&self, s: Coalition) -> Result<f64, GameError> {
        if !s.fits(self.n_agents) {
            return Err(GameError::InvalidCoalition {
                mask: s.mask(),
                n_agents: self.n_agents,
            });
        }
        Ok(self.values.get(&s).copied().unwrap_or(0.0))
    }

    fn check_len(&self, x: &[f64]) -> Result<(), GameError> {
        if x.len() != self.n_agents {
            return Err(GameError::DimensionMismatch {
                expected: self.n_agents,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn is_efficient(&self, x: &[f64], tol: f64) -> Result<bool, GameError> {
        self.check_len(x)?;
        Ok((x.iter().sum::<f64>() - self.grand_value()).abs() <= tol)
    }

    /// Efficiency row followed by one `Σ_{i∈S} x_i ≥ v(S)` row per nonempty
    /// proper coalition, in increasing bitmask order.
    pub fn core_polyhedron(&self) -> Polyhedron {
        let n = self.n_agents;
        let grand = self.grand_coalition().mask();
        let indicator = |s: Coalition| -> Vec<f64> {
            (0..n).map(|i| if s.contains(i) { 1.0 } else { 0.0 }).collect()
        };
        let mut poly = Polyhedron::empty(n);
        poly.push_eq(indicator(self.grand_coalition()), self.grand_value())
            .expect("indicator rows are nonzero");
        for mask in 1..grand {
            let s = Coalition::from_mask(mask);
            let v = self.values.get(&s).copied().unwrap_or(0.0);
            poly.push_ineq(indicator(s), v).expect("indicator rows are nonzero");
        }
        poly
    }

    /// Checks efficiency within `tol` and every coalition constraint with
    /// slack no worse than `-tol`.
    pub fn core_membership(&self, x: &[f64], tol: f64) -> Result<bool, GameError> {
        self.check_len(x)?;
        Ok(self.core_polyhedron().contains(x, tol))
    }

    /// Decides CORE nonemptiness by LP feasibility of the constraint system.
    pub fn core_nonempty(&self) -> bool {
        self.core_polyhedron().is_feasible()
    }
}

impl Polyhedron {
    /// Phase-1 style feasibility check: minimise 0 over the constraint set.
    pub fn is_feasible(&self) -> bool {
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..self.dim())
            .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        let terms = |normal: &[f64]| -> Vec<(minilp::Variable, f64)> {
            normal
                .iter()
                .zip(&vars)
                .filter(|(a, _)| **a != 0.0)
                .map(|(a, v)| (*v, *a))
                .collect()
        };
        for (normal, offset) in self.eq_rows() {
            lp.add_constraint(terms(normal).as_slice(), ComparisonOp::Eq, offset);
        }
        for (normal, offset) in self.ineq_rows() {
            lp.add_constraint(terms(normal).as_slice(), ComparisonOp::Ge, offset);
        }
        lp.solve().is_ok()
    }
}
