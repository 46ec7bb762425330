//! Seeded self-check suites: projection against the enumeration oracle,
//! strict distance decrease of the iteration's building blocks, and the
//! approachability condition for perturbed innovations.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{
    approachability_product, blackwell_run, engine_step, innovation_general_from, EngineConfig,
    EngineError, RandomInnovation, StepSchedule, APPROACHABILITY_TOL,
};
use crate::game::TuGame;
use crate::network::{four_agent_pairings, WeightMatrix};
use crate::polytope::{dist, project_oracle, OperatorConfig, Polyhedron};
use crate::state::StackedState;

/// Largest tolerated max-norm gap between the solver and the oracle.
pub const ORACLE_TOL: f64 = 1e-8;
/// Trial points closer than this to being fixed only need `≤`, not `<`.
pub const FIXED_GATE: f64 = 1e-6;
/// Slack for the non-strict branch.
pub const FIXED_SLACK: f64 = 1e-12;
/// Betas exercised by the operator suites.
pub const BETA_GRID: [f64; 4] = [0.0, 0.2, 0.5, 0.8];
/// Steps of the running-average trace and the required reduction factor.
pub const TRACE_STEPS: usize = 2000;
pub const TRACE_FACTOR: f64 = 0.05;

const BOX: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// Suite specific worst case (see each suite).
    pub max_deviation: f64,
    pub first_failure: Option<String>,
}

impl SuiteReport {
    fn new(name: impl Into<String>) -> Self {
        SuiteReport {
            name: name.into(),
            trials: 0,
            failures: 0,
            max_deviation: f64::NEG_INFINITY,
            first_failure: None,
        }
    }

    fn record(&mut self, deviation: f64, ok: bool, describe: impl FnOnce() -> String) {
        self.trials += 1;
        self.max_deviation = self.max_deviation.max(deviation);
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.trials > 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<28} {} trials={} failures={} max_deviation={:.6e}",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.trials,
            self.failures,
            self.max_deviation
        )?;
        if let Some(case) = &self.first_failure {
            write!(f, "\n    first failure: {case}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub seed: u64,
    pub trials: usize,
    pub suites: Vec<SuiteReport>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "oracle suites: seed={} trials={}", self.seed, self.trials)?;
        for s in &self.suites {
            writeln!(f, "{s}")?;
        }
        write!(f, "overall: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Independent stream per suite so that suites do not shift each other's draws.
fn suite_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-BOX..=BOX)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random convex combination of projections of random points.
pub fn random_member<R: Rng + ?Sized>(poly: &Polyhedron, rng: &mut R) -> Result<Vec<f64>, EngineError> {
    let n = poly.dim();
    let weights: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut x = vec![0.0; n];
    for w in weights {
        let p = poly.project(&random_point(n, rng))?;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += w / total * pi);
    }
    Ok(x)
}

/// `λ_0·I + Σ λ_j·P_j` for random permutations `P_j`; doubly stochastic
/// with a positive diagonal.
pub fn random_doubly_stochastic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> WeightMatrix {
    let lambdas: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = lambdas.iter().sum();
    let mut rows = vec![vec![0.0; n]; n];
    for (j, l) in lambdas.iter().enumerate() {
        let mut perm: Vec<usize> = (0..n).collect();
        if j > 0 {
            perm.shuffle(rng);
        }
        for (i, &pi) in perm.iter().enumerate() {
            rows[i][pi] += l / total;
        }
    }
    WeightMatrix::from_rows(rows).expect("square")
}

/// A test game: the four-agent example on even trials, a random convex
/// four-agent game otherwise.
fn trial_game<R: Rng + ?Sized>(t: usize, rng: &mut R) -> TuGame {
    if t.is_multiple_of(2) {
        TuGame::four_agent_example()
    } else {
        TuGame::random_convex(4, rng)
    }
}

/// Active-set projection versus enumeration on the four-agent CORE, as
/// max-norm differences.
pub fn projection_agreement(seed: u64, trials: usize) -> Result<SuiteReport, EngineError> {
    let core = TuGame::four_agent_example().core_polyhedron();
    let mut rng = suite_rng(seed, 0);
    let mut report = SuiteReport::new("projection vs oracle");
    for t in 0..trials {
        let x = random_point(4, &mut rng);
        let fast = core.project(&x)?;
        let slow = project_oracle(&core, &x)?;
        let dev = max_abs_diff(&fast, &slow);
        report.record(dev, dev <= ORACLE_TOL, || {
            format!("seed={seed} trial={t} x={x:?} solver={fast:?} oracle={slow:?}")
        });
    }
    Ok(report)
}

/// Checks `‖m - y‖ < ‖w - y‖` when `gap ≥ FIXED_GATE`, else `≤` with slack.
/// Deviation is the ratio `‖m - y‖ / ‖w - y‖` over the strict trials only.
fn decrease_case(
    report: &mut SuiteReport,
    w: &[f64],
    m: &[f64],
    y: &[f64],
    gap: f64,
    describe: impl FnOnce() -> String,
) {
    let before = dist(w, y);
    let after = dist(m, y);
    let strict = gap >= FIXED_GATE;
    let ok = if strict {
        after < before
    } else {
        after <= before + FIXED_SLACK
    };
    let ratio = if strict { after / before } else { f64::NEG_INFINITY };
    report.record(ratio, ok, describe);
}

/// Projection and `T` for every beta in [`BETA_GRID`]; fixed points are
/// CORE members and the gate is `dist(w, C)`.
pub fn operator_paracontraction(seed: u64, trials: usize) -> Result<Vec<SuiteReport>, EngineError> {
    let mut reports = vec![SuiteReport::new("paracontraction proj")];
    reports.extend(BETA_GRID.iter().map(|b| SuiteReport::new(format!("paracontraction T(beta={b})"))));
    let mut rng = suite_rng(seed, 1);
    for t in 0..trials {
        let game = trial_game(t, &mut rng);
        let core = game.core_polyhedron();
        let y = random_member(&core, &mut rng)?;
        // Every fourth trial starts on the set itself.
        let w = if t % 4 == 3 {
            random_member(&core, &mut rng)?
        } else {
            random_point(4, &mut rng)
        };
        let gap = core.distance(&w)?;
        let p = core.project(&w)?;
        decrease_case(&mut reports[0], &w, &p, &y, gap, || {
            format!("seed={seed} trial={t} w={w:?} y={y:?}")
        });
        for (r, &beta) in reports[1..].iter_mut().zip(&BETA_GRID) {
            let tw = OperatorConfig::new(beta)?.combine(&p, &w);
            decrease_case(r, &w, &tw, &y, gap, || {
                format!("seed={seed} trial={t} beta={beta} w={w:?} y={y:?}")
            });
        }
    }
    Ok(reports)
}

fn random_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> StackedState {
    StackedState::from_blocks((0..n).map(|_| random_point(n, rng)).collect()).expect("square")
}

/// Lifted mixing `A ⊗ I` (both pairing matrices and random doubly stochastic
/// ones) and the full step `S_k`. The gate is `‖M(w) - w‖`, since a
/// reducible matrix fixes more than the consensus subspace.
pub fn iteration_paracontraction(seed: u64, trials: usize) -> Result<Vec<SuiteReport>, EngineError> {
    let mut lifted = SuiteReport::new("paracontraction lifted A");
    let mut full = SuiteReport::new("paracontraction S_k");
    let pairings = four_agent_pairings();
    let mut rng = suite_rng(seed, 2);
    for t in 0..trials {
        let n = 4;
        let a = match t % 3 {
            0 => pairings.family()[0].clone(),
            1 => pairings.family()[1].clone(),
            _ => random_doubly_stochastic(n, &mut rng),
        };
        let y = StackedState::consensus(&random_point(n, &mut rng));
        let w = random_state(n, &mut rng);
        let aw = a.lifted_apply(&w)?;
        let gap = aw.distance(&w);
        decrease_case(&mut lifted, w.as_slice(), aw.as_slice(), y.as_slice(), gap, || {
            format!("seed={seed} trial={t} A={:?} w={:?} y={:?}", a.rows(), w.to_blocks(), y.as_slice())
        });

        let game = trial_game(t, &mut rng);
        let core = game.core_polyhedron();
        let y = StackedState::consensus(&random_member(&core, &mut rng)?);
        let beta = BETA_GRID[rng.random_range(0..BETA_GRID.len())];
        let alpha = rng.random_range(0.05..=1.0);
        let sched = if t % 2 == 0 {
            pairings.clone()
        } else {
            crate::network::GraphSchedule::constant(random_doubly_stochastic(n, &mut rng))
        };
        let k = rng.random_range(0..2usize);
        let cfg = EngineConfig::new(OperatorConfig::new(beta)?, StepSchedule::fixed(alpha)?);
        let w = random_state(n, &mut rng).with_iteration(k);
        let sw = engine_step(&core, &sched, &cfg, &w)?;
        let gap = sw.distance(&w);
        decrease_case(&mut full, w.as_slice(), sw.as_slice(), y.as_slice(), gap, || {
            format!(
                "seed={seed} trial={t} alpha={alpha} beta={beta} k={k} w={:?} y={:?}",
                w.to_blocks(),
                y.block(0)
            )
        });
    }
    Ok(vec![lifted, full])
}

/// Perturbed innovations against the approachability condition (deviation:
/// largest `(w - p)·(x - p)`), then one running-average trace whose
/// deviation is `dist(ȳ_K, C) / dist(ȳ_1, C)`.
pub fn approachability(seed: u64, trials: usize) -> Result<Vec<SuiteReport>, EngineError> {
    let mut samples = SuiteReport::new("approachability samples");
    let mut rng = suite_rng(seed, 3);
    for t in 0..trials {
        let game = trial_game(t, &mut rng);
        let core = game.core_polyhedron();
        let w = random_point(4, &mut rng);
        let p = core.project(&w)?;
        let beta = BETA_GRID[rng.random_range(0..BETA_GRID.len())];
        let perp = rng.random_range(0.0..=1.0);
        let minus = rng.random_range(0.0..=1.0);
        let x = innovation_general_from(OperatorConfig::new(beta)?, &w, &p, &mut rng, perp, minus).result;
        let value = approachability_product(&w, &p, &x);
        samples.record(value, value <= APPROACHABILITY_TOL, || {
            format!("seed={seed} trial={t} beta={beta} perp={perp} minus={minus} w={w:?}")
        });
    }

    let mut trace_report = SuiteReport::new("approachability trace");
    let core = TuGame::four_agent_example().core_polyhedron();
    let start = vec![10.0, 0.0, 0.0, 0.0];
    let mut generator = RandomInnovation::new(OperatorConfig::new(0.8)?, 1.0, 1.0, seed);
    let trace = blackwell_run(&core, &start, &mut generator, TRACE_STEPS, 1e3)?;
    let first = trace.dist_history[0];
    let last = *trace.dist_history.last().expect("nonempty");
    let ratio = last / first;
    trace_report.record(ratio, ratio < TRACE_FACTOR, || {
        format!("seed={seed} start={start:?} initial={first} final={last}")
    });
    Ok(vec![samples, trace_report])
}

/// Every suite, in a fixed order.
pub fn run_all(seed: u64, trials: usize) -> Result<OracleReport, EngineError> {
    let mut suites = vec![projection_agreement(seed, trials)?];
    suites.extend(operator_paracontraction(seed, trials)?);
    suites.extend(iteration_paracontraction(seed, trials)?);
    suites.extend(approachability(seed, trials)?);
    Ok(OracleReport {
        seed,
        trials,
        suites,
    })
}
