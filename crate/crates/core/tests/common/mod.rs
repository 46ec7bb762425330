#![allow(dead_code)]

use corereach::polytope::Polyhedron;
use corereach::state::StackedState;
use rand::Rng;

/// `sqrt(Σ_i ‖w_i - x‖²)`.
pub fn consensus_gap(w: &StackedState, x: &[f64]) -> f64 {
    w.blocks()
        .map(|b| b.iter().zip(x).map(|(a, c)| (a - c).powi(2)).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

fn random_unit_in_hyperplane<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    d.iter_mut().for_each(|v| *v -= mean);
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        d.iter_mut().for_each(|v| *v /= norm);
    }
    d
}

/// `min_{x ∈ C} ‖w - 1⊗x‖` by brute force: the best of many projected random
/// samples (and projected blocks), refined by a projected pattern search
/// over coordinate, pairwise-exchange and random directions.
///
/// Never looks at the block mean, so it does not share the closed form it
/// is compared with.
pub fn brute_force_consensus_dist<R: Rng>(
    poly: &Polyhedron,
    w: &StackedState,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let n = poly.dim();
    let mut candidates: Vec<Vec<f64>> = w.blocks().map(|b| poly.project(b).unwrap()).collect();
    for _ in 0..samples {
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-30.0..30.0)).collect();
        candidates.push(poly.project(&z).unwrap());
    }
    let (mut best, mut best_val) = candidates
        .into_iter()
        .map(|x| {
            let v = consensus_gap(w, &x);
            (x, v)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();

    let mut dirs = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        dirs.push(e);
        for j in 0..n {
            if i != j {
                let mut d = vec![0.0; n];
                d[i] = 1.0;
                d[j] = -1.0;
                dirs.push(d);
            }
        }
    }
    let mut step = 4.0;
    while step > 1e-13 {
        let mut round_dirs = dirs.clone();
        round_dirs.extend((0..8).map(|_| random_unit_in_hyperplane(n, rng)));
        let mut improved = false;
        for d in &round_dirs {
            for sign in [1.0, -1.0] {
                let trial: Vec<f64> = best.iter().zip(d).map(|(x, di)| x + sign * step * di).collect();
                let trial = poly.project(&trial).unwrap();
                let v = consensus_gap(w, &trial);
                if v < best_val {
                    best = trial;
                    best_val = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best_val
}

pub fn random_state<R: Rng>(n: usize, half_width: f64, rng: &mut R) -> StackedState {
    StackedState::from_blocks(
        (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-half_width..half_width)).collect())
            .collect(),
    )
    .unwrap()
}
