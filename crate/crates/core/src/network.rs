//! Time-varying communication graphs given by weight matrices.
//!
//! `a[i][j] > 0` means agent `i` listens to agent `j`; the corresponding
//! directed edge runs `j → i`.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::state::StackedState;

/// Tolerance on row and column sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("weight matrix must be square and nonempty, got {rows} rows with a row of length {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("weight matrix has non-finite entries")]
    NonFinite,
    #[error("schedule has an empty matrix family")]
    EmptyFamily,
    #[error("matrix {index} has dimension {got}, expected {expected}")]
    MixedDimensions {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("schedule refers to matrix {index}, family has {len}")]
    BadIndex { index: usize, len: usize },
    #[error("schedule has an empty periodic part")]
    EmptyTail,
    #[error("connectivity window must be at least 1")]
    ZeroWindow,
    #[error("matrix is {matrix}x{matrix}, state has {state} agents")]
    DimensionMismatch { matrix: usize, state: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    entries: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixViolation {
    Negative { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    ColumnSum { col: usize, sum: f64 },
    NonPositiveDiagonal { row: usize, value: f64 },
    BelowGamma { row: usize, col: usize, value: f64 },
}

impl fmt::Display for MatrixViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixViolation::Negative { row, col, value } => {
                write!(f, "entry ({row},{col}) = {value} is negative")
            }
            MatrixViolation::RowSum { row, sum } => write!(f, "row {row} sums to {sum}"),
            MatrixViolation::ColumnSum { col, sum } => write!(f, "column {col} sums to {sum}"),
            MatrixViolation::NonPositiveDiagonal { row, value } => {
                write!(f, "diagonal entry {row} = {value} is not positive")
            }
            MatrixViolation::BelowGamma { row, col, value } => {
                write!(f, "entry ({row},{col}) = {value} is positive but below gamma")
            }
        }
    }
}

/// Outcome of [`WeightMatrix::validate`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatrixReport {
    pub violations: Vec<MatrixViolation>,
}

impl MatrixReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl WeightMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, NetworkError> {
        let n = rows.len();
        if n == 0 {
            return Err(NetworkError::NotSquare { rows: 0, cols: 0 });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(NetworkError::NotSquare {
                rows: n,
                cols: r.len(),
            });
        }
        let entries = rows.concat();
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(NetworkError::NonFinite);
        }
        Ok(WeightMatrix { n, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        WeightMatrix { n, entries }
    }

    /// All entries `1/n`.
    pub fn uniform(n: usize) -> Self {
        WeightMatrix {
            n,
            entries: vec![1.0 / n as f64; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks_exact(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Smallest positive entry.
    pub fn min_positive(&self) -> Option<f64> {
        self.entries
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .min_by(f64::total_cmp)
    }

    /// Checks double stochasticity, positive diagonal, nonnegativity and the
    /// `a_ij ≥ gamma` lower bound on every positive entry.
    pub fn validate(&self, gamma: f64) -> MatrixReport {
        let n = self.n;
        let mut violations = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self.get(i, j);
                if v < 0.0 {
                    violations.push(MatrixViolation::Negative {
                        row: i,
                        col: j,
                        value: v,
                    });
                } else if v > 0.0 && v < gamma {
                    violations.push(MatrixViolation::BelowGamma {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
            let d = self.get(i, i);
            if d <= 0.0 {
                violations.push(MatrixViolation::NonPositiveDiagonal { row: i, value: d });
            }
        }
        for i in 0..n {
            let sum: f64 = (0..n).map(|j| self.get(i, j)).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                violations.push(MatrixViolation::RowSum { row: i, sum });
            }
        }
        for j in 0..n {
            let sum: f64 = (0..n).map(|i| self.get(i, j)).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                violations.push(MatrixViolation::ColumnSum { col: j, sum });
            }
        }
        MatrixReport { violations }
    }

    /// Applies `A ⊗ I_N` blockwise without forming the Kronecker product.
    pub fn lifted_apply(&self, w: &StackedState) -> Result<StackedState, NetworkError> {
        let n = self.n;
        if w.n_agents() != n {
            return Err(NetworkError::DimensionMismatch {
                matrix: n,
                state: w.n_agents(),
            });
        }
        let mut out = StackedState::zeros(n).with_iteration(w.iteration());
        for i in 0..n {
            let dst = out.block_mut(i);
            for j in 0..n {
                let a = self.get(i, j);
                if a == 0.0 {
                    continue;
                }
                for (d, s) in dst.iter_mut().zip(w.block(j)) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }
}

/// Adjacency (`adj[i][j]` ⇔ `a_ij > 0`) of the union over `mats`.
fn union_pattern<'a>(n: usize, mats: impl Iterator<Item = &'a WeightMatrix>) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; n]; n];
    for m in mats {
        for (i, row) in adj.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell |= i != j && m.get(i, j) > 0.0;
            }
        }
    }
    adj
}

/// Strong connectivity via forward and backward reachability from agent 0.
fn strongly_connected(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    let reach = |forward: bool| -> usize {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                // Edge j → i exists when adj[i][j].
                let edge = if forward { adj[v][u] } else { adj[u][v] };
                if edge && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count
    };
    n <= 1 || (reach(true) == n && reach(false) == n)
}

/// Index sequence `script` followed by `tail` repeated forever.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleRule {
    script: Vec<usize>,
    tail: Vec<usize>,
}

impl ScheduleRule {
    pub fn periodic(order: Vec<usize>) -> Self {
        ScheduleRule {
            script: Vec::new(),
            tail: order,
        }
    }

    pub fn scripted(script: Vec<usize>, tail: Vec<usize>) -> Self {
        ScheduleRule { script, tail }
    }

    pub fn index_at(&self, k: usize) -> usize {
        if k < self.script.len() {
            self.script[k]
        } else {
            self.tail[(k - self.script.len()) % self.tail.len()]
        }
    }

    pub fn period(&self) -> usize {
        self.tail.len()
    }

    pub fn script_len(&self) -> usize {
        self.script.len()
    }
}

/// Finite matrix family plus an eventually periodic schedule over it.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSchedule {
    family: Vec<WeightMatrix>,
    rule: ScheduleRule,
}

impl GraphSchedule {
    pub fn new(family: Vec<WeightMatrix>, rule: ScheduleRule) -> Result<Self, NetworkError> {
        let Some(first) = family.first() else {
            return Err(NetworkError::EmptyFamily);
        };
        let n = first.dim();
        if let Some((index, m)) = family.iter().enumerate().find(|(_, m)| m.dim() != n) {
            return Err(NetworkError::MixedDimensions {
                index,
                expected: n,
                got: m.dim(),
            });
        }
        if rule.tail.is_empty() {
            return Err(NetworkError::EmptyTail);
        }
        if let Some(&index) = rule
            .script
            .iter()
            .chain(&rule.tail)
            .find(|&&i| i >= family.len())
        {
            return Err(NetworkError::BadIndex {
                index,
                len: family.len(),
            });
        }
        Ok(GraphSchedule { family, rule })
    }

    /// Single matrix used at every step.
    pub fn constant(m: WeightMatrix) -> Self {
        GraphSchedule {
            family: vec![m],
            rule: ScheduleRule::periodic(vec![0]),
        }
    }

    pub fn family(&self) -> &[WeightMatrix] {
        &self.family
    }

    pub fn rule(&self) -> &ScheduleRule {
        &self.rule
    }

    pub fn dim(&self) -> usize {
        self.family[0].dim()
    }

    pub fn matrix_at(&self, k: usize) -> &WeightMatrix {
        &self.family[self.rule.index_at(k)]
    }

    /// Smallest positive entry over the whole family.
    pub fn gamma(&self) -> Option<f64> {
        self.family
            .iter()
            .filter_map(WeightMatrix::min_positive)
            .min_by(f64::total_cmp)
    }

    /// Last window start needed to cover every window of the schedule.
    pub fn certifying_horizon(&self) -> usize {
        self.rule.script_len() + self.rule.period() - 1
    }

    /// True iff the union graph over `[k, k+q-1]` is strongly connected for
    /// every window start `k ∈ [0, horizon]`. When `horizon` reaches
    /// [`Self::certifying_horizon`] the answer holds for all `k ≥ 0`.
    pub fn q_connected(&self, q: usize, horizon: usize) -> Result<bool, NetworkError> {
        if q == 0 {
            return Err(NetworkError::ZeroWindow);
        }
        if horizon < self.certifying_horizon() {
            log::warn!(
                "connectivity checked up to k = {horizon} only; schedule needs {} for a certificate",
                self.certifying_horizon()
            );
        }
        let n = self.dim();
        Ok((0..=horizon).all(|k| {
            strongly_connected(&union_pattern(n, (k..k + q).map(|l| self.matrix_at(l))))
        }))
    }

    /// Smallest certified window length in `1..=max_q`.
    pub fn smallest_q(&self, max_q: usize) -> Option<usize> {
        let horizon = self.certifying_horizon();
        (1..=max_q).find(|&q| self.q_connected(q, horizon).unwrap_or(false))
    }
}

/// The two alternating pairings of four agents used in the examples.
pub fn four_agent_pairings() -> GraphSchedule {
    let h = 0.5;
    let a1 = WeightMatrix::from_rows(vec![
        vec![h, h, 0.0, 0.0],
        vec![h, h, 0.0, 0.0],
        vec![0.0, 0.0, h, h],
        vec![0.0, 0.0, h, h],
    ])
    .expect("square");
    let a2 = WeightMatrix::from_rows(vec![
        vec![h, 0.0, h, 0.0],
        vec![0.0, h, 0.0, h],
        vec![h, 0.0, h, 0.0],
        vec![0.0, h, 0.0, h],
    ])
    .expect("square");
    GraphSchedule::new(vec![a1, a2], ScheduleRule::periodic(vec![0, 1])).expect("valid schedule")
}
