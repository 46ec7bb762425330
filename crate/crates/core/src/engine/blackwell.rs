//! Running-average process driven by samples that satisfy the
//! approachability condition against the current average.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    approachability_product, innovation_general_from, EngineError, APPROACHABILITY_TOL,
};
use crate::polytope::{dist, norm, OperatorConfig, Polyhedron};

/// Produces `y_{k+1}` from the current average `ȳ_k` and its projection.
pub trait SampleGenerator {
    fn sample(&mut self, average: &[f64], projection: &[f64], k: usize) -> Vec<f64>;
}

/// Always emits the same point.
#[derive(Debug, Clone)]
pub struct ConstantSample(pub Vec<f64>);

impl SampleGenerator for ConstantSample {
    fn sample(&mut self, _: &[f64], _: &[f64], _: usize) -> Vec<f64> {
        self.0.clone()
    }
}

/// Emits `proj(ȳ_k)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProjectedAverage;

impl SampleGenerator for ProjectedAverage {
    fn sample(&mut self, _: &[f64], projection: &[f64], _: usize) -> Vec<f64> {
        projection.to_vec()
    }
}

/// General-form innovation on `ȳ_k` with scales drawn uniformly from
/// `[0, max_perp]` and `[0, max_minus]` at every step.
#[derive(Debug, Clone)]
pub struct RandomInnovation {
    pub operator: OperatorConfig,
    pub max_perp: f64,
    pub max_minus: f64,
    rng: ChaCha8Rng,
}

impl RandomInnovation {
    pub fn new(operator: OperatorConfig, max_perp: f64, max_minus: f64, seed: u64) -> Self {
        RandomInnovation {
            operator,
            max_perp,
            max_minus,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl SampleGenerator for RandomInnovation {
    fn sample(&mut self, average: &[f64], projection: &[f64], _: usize) -> Vec<f64> {
        let perp = self.rng.random_range(0.0..=self.max_perp);
        let minus = self.rng.random_range(0.0..=self.max_minus);
        innovation_general_from(self.operator, average, projection, &mut self.rng, perp, minus)
            .result
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlackwellTrace {
    /// `y_1, y_2, …`.
    pub samples: Vec<Vec<f64>>,
    /// Final running average `ȳ_k`.
    pub running_average: Vec<f64>,
    /// `dist(ȳ_k, C)` for `k = 1, 2, …`.
    pub dist_history: Vec<f64>,
}

/// Runs `k_max` averaging steps from `y_1 = initial`.
///
/// Every emitted sample must satisfy the approachability condition against
/// the current average and stay within `bound` in norm.
pub fn blackwell_run<G: SampleGenerator + ?Sized>(
    poly: &Polyhedron,
    initial: &[f64],
    generator: &mut G,
    k_max: usize,
    bound: f64,
) -> Result<BlackwellTrace, EngineError> {
    let check_bound = |k: usize, y: &[f64]| -> Result<(), EngineError> {
        let n = norm(y);
        if n > bound {
            return Err(EngineError::SampleBound { k, norm: n, bound });
        }
        Ok(())
    };
    check_bound(1, initial)?;
    let mut avg = initial.to_vec();
    let mut samples = vec![initial.to_vec()];
    let mut p = poly.project(&avg)?;
    let mut dist_history = vec![dist(&avg, &p)];
    for k in 1..k_max {
        let y = generator.sample(&avg, &p, k);
        let value = approachability_product(&avg, &p, &y);
        if value > APPROACHABILITY_TOL {
            return Err(EngineError::SampleContract { k: k + 1, value });
        }
        check_bound(k + 1, &y)?;
        let inv = 1.0 / (k as f64 + 1.0);
        avg.iter_mut()
            .zip(&y)
            .for_each(|(a, yi)| *a += (yi - *a) * inv);
        samples.push(y);
        p = poly.project(&avg)?;
        dist_history.push(dist(&avg, &p));
    }
    Ok(BlackwellTrace {
        samples,
        running_average: avg,
        dist_history,
    })
}
