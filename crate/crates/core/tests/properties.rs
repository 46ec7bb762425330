use std::collections::BTreeMap;

use corereach::config::{
    ExperimentConfig, GameSpec, GraphsSpec, InitialSpec, InnovationSpec, ScheduleSpec, StepSpec,
};
use corereach::game::{Coalition, TuGame};
use corereach::network::WeightMatrix;
use corereach::polytope::{OperatorConfig, PolytopeError, Polyhedron};
use corereach::state::StackedState;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-20.0..20.0)).collect()
}

/// Convex game with `3..=6` agents, or the four-agent example.
fn game_from_seed(seed: u64) -> (TuGame, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let game = if seed.is_multiple_of(5) {
        TuGame::four_agent_example()
    } else {
        let n = rng.random_range(3..=6);
        TuGame::random_convex(n, &mut rng)
    };
    (game, rng)
}

/// Arbitrary values, so the CORE is often empty.
fn arbitrary_game(seed: u64) -> TuGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4);
    let values: BTreeMap<Coalition, f64> = (1..=Coalition::grand(n).mask())
        .map(|m| (Coalition::from_mask(m), rng.random_range(-2.0..6.0)))
        .collect();
    TuGame::new(n, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent(seed in any::<u64>()) {
        let (game, mut rng) = game_from_seed(seed);
        let core = game.core_polyhedron();
        let x = point(&mut rng, game.n_agents());
        let p = core.project(&x).unwrap();
        let pp = core.project(&p).unwrap();
        prop_assert!(dist(&p, &pp) <= 1e-9);
        prop_assert!(core.contains(&p, 1e-9));
    }

    #[test]
    fn obtuse_angle_certificate(seed in any::<u64>()) {
        let (game, mut rng) = game_from_seed(seed);
        let core = game.core_polyhedron();
        let n = game.n_agents();
        let x = point(&mut rng, n);
        let y = core.project(&x).unwrap();
        let scale = 1e-8 * (1.0 + dist(&x, &y));
        for _ in 0..10 {
            let z = core.project(&point(&mut rng, n)).unwrap();
            let inner: f64 = (0..n).map(|i| (x[i] - y[i]) * (z[i] - y[i])).sum();
            prop_assert!(inner <= scale, "inner product {inner}");
        }
    }

    #[test]
    fn overprojection_is_nonexpansive(seed in any::<u64>()) {
        let (game, mut rng) = game_from_seed(seed);
        let core = game.core_polyhedron();
        let n = game.n_agents();
        let (x, y) = (point(&mut rng, n), point(&mut rng, n));
        let (qx, qy) = (core.overproject(&x).unwrap(), core.overproject(&y).unwrap());
        prop_assert!(dist(&qx, &qy) <= dist(&x, &y) + 1e-9);
    }

    #[test]
    fn fixed_points_of_t_are_members(seed in any::<u64>(), beta in 0.0f64..0.99) {
        let (game, mut rng) = game_from_seed(seed);
        let core = game.core_polyhedron();
        let cfg = OperatorConfig::new(beta).unwrap();
        let n = game.n_agents();
        let member = core.project(&point(&mut rng, n)).unwrap();
        prop_assert!(dist(&core.apply_t(cfg, &member).unwrap(), &member) <= 1e-9);
        let x = point(&mut rng, n);
        let d = core.distance(&x).unwrap();
        if d > 1e-6 {
            prop_assert!(dist(&core.apply_t(cfg, &x).unwrap(), &x) > 1e-9);
        }
    }

    #[test]
    fn mixing_preserves_block_mean(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=6);
        let a = corereach::checks::random_doubly_stochastic(n, &mut rng);
        let w = StackedState::from_blocks((0..n).map(|_| point(&mut rng, n)).collect()).unwrap();
        let aw = a.lifted_apply(&w).unwrap();
        prop_assert!(dist(&aw.block_mean(), &w.block_mean()) <= 1e-12 * (1.0 + n as f64 * 20.0));
    }

    #[test]
    fn membership_agrees_with_distance(seed in any::<u64>()) {
        let (game, mut rng) = game_from_seed(seed);
        let core = game.core_polyhedron();
        let n = game.n_agents();
        let member = core.project(&point(&mut rng, n)).unwrap();
        prop_assert!(game.core_membership(&member, 1e-9).unwrap());
        prop_assert!(core.distance(&member).unwrap() <= 1e-9);
        let x = point(&mut rng, n);
        let d = core.distance(&x).unwrap();
        if d > 1e-6 {
            prop_assert!(!game.core_membership(&x, 1e-9).unwrap());
        }
        if game.core_membership(&x, 1e-12).unwrap() {
            prop_assert!(d <= 1e-9);
        }
    }

    #[test]
    fn lp_and_projection_agree_on_emptiness(seed in any::<u64>()) {
        let game = arbitrary_game(seed);
        let projected = game.core_polyhedron().project(&vec![0.0; game.n_agents()]);
        match projected {
            Ok(p) => {
                prop_assert!(game.core_nonempty());
                prop_assert!(game.core_membership(&p, 1e-8).unwrap());
            }
            Err(PolytopeError::Empty) => prop_assert!(!game.core_nonempty()),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}

#[test]
fn core_row_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=8 {
        let core = TuGame::random_convex(n, &mut rng).core_polyhedron();
        assert_eq!(core.n_eq(), 1, "n = {n}");
        assert_eq!(core.n_rows() - core.n_eq(), (1usize << n) - 2, "n = {n}");
        assert_eq!(core.dim(), n);
    }
}

#[test]
fn quadrant_projection_clips_coordinates() {
    let mut p = Polyhedron::empty(2);
    p.push_ineq(vec![1.0, 0.0], 0.0).unwrap();
    p.push_ineq(vec![0.0, 1.0], 0.0).unwrap();
    assert!(dist(&p.project(&[-1.0, 3.0]).unwrap(), &[0.0, 3.0]) <= 1e-15);
    assert!(dist(&p.project(&[-1.0, -3.0]).unwrap(), &[0.0, 0.0]) <= 1e-15);
}

fn finite() -> impl Strategy<Value = f64> {
    -1e6f64..1e6
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    (1usize..=4).prop_flat_map(|n| {
        let values = prop::collection::btree_map(1u32..(1u32 << n), finite(), 0..6).prop_map(
            move |m| {
                let mut values: BTreeMap<String, f64> = m
                    .into_iter()
                    .map(|(mask, v)| (Coalition::from_mask(mask).key(), v))
                    .collect();
                values.insert(Coalition::grand(n).key(), 10.0);
                values
            },
        );
        let matrix = prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), n);
        let matrices = prop::collection::vec(matrix, 1..3);
        let steps = prop_oneof![
            (0.01f64..1.0).prop_map(|alpha| StepSpec::Fixed { alpha }),
            Just(StepSpec::Harmonic),
            (0.1f64..1.0, 0.6f64..1.0).prop_map(|(c, p)| StepSpec::Power { c, p }),
        ];
        let initial = prop_oneof![
            Just(InitialSpec::SelfAllocation),
            prop::collection::vec(prop::collection::vec(finite(), n), n)
                .prop_map(|blocks| InitialSpec::Blocks { blocks }),
        ];
        let innovation = prop_oneof![
            Just(InnovationSpec::Operator),
            (0.0f64..2.0, 0.0f64..2.0).prop_map(|(perp_scale, minus_scale)| {
                InnovationSpec::General { perp_scale, minus_scale }
            }),
        ];
        (
            values,
            matrices,
            prop::option::of(0.0f64..1.0),
            steps,
            initial,
            innovation,
            (0.0f64..1.0, 1usize..5000, 0.0f64..1e-3, any::<u64>()),
            prop::option::of(1.0f64..1e4),
            prop::option::of("[a-z]{1,8}"),
        )
            .prop_map(
                move |(values, matrices, gamma, steps, initial, innovation, (beta, max_iters, stop_tol, seed), bound, dir)| {
                    let order: Vec<usize> = (0..matrices.len()).collect();
                    ExperimentConfig {
                        game: GameSpec { n_agents: n, values },
                        graphs: GraphsSpec {
                            matrices,
                            schedule: ScheduleSpec::Periodic { order },
                            gamma,
                        },
                        beta,
                        steps,
                        initial,
                        max_iters,
                        stop_tol,
                        seed,
                        output_dir: dir.map(Into::into),
                        innovation,
                        innovation_bound: bound,
                    }
                },
            )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn config_round_trip(cfg in config_strategy()) {
        let text = cfg.to_json();
        let parsed = ExperimentConfig::from_json(&text).unwrap();
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(ExperimentConfig::from_json(&parsed.to_json()).unwrap(), parsed);
    }
}

#[test]
fn weight_matrix_round_trip_through_rows() {
    let a = WeightMatrix::uniform(3);
    assert_eq!(WeightMatrix::from_rows(a.rows()).unwrap(), a);
}
