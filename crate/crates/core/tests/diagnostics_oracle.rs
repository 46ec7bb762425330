mod common;

use corereach::diagnostics::{consensus_residual, dist_core_consensus};
use corereach::game::TuGame;
use corereach::state::StackedState;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{brute_force_consensus_dist, random_state};

#[test]
fn closed_form_matches_brute_force_on_convex_games() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..20 {
        let n = 3 + trial % 3;
        let game = TuGame::random_convex(n, &mut rng);
        let core = game.core_polyhedron();
        let w = random_state(n, 10.0, &mut rng);
        let closed = dist_core_consensus(&core, &w).unwrap();
        let brute = brute_force_consensus_dist(&core, &w, 400, &mut rng);
        assert!(
            (closed - brute).abs() <= 1e-6,
            "trial {trial}: closed {closed} vs brute {brute}"
        );
    }
}

#[test]
fn self_allocation_start_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let core = TuGame::four_agent_example().core_polyhedron();
    let w0 = StackedState::self_allocation(4, 10.0);
    let brute = brute_force_consensus_dist(&core, &w0, 200, &mut rng);
    assert!((dist_core_consensus(&core, &w0).unwrap() - brute).abs() <= 1e-6);
}

#[test]
fn zero_metric_iff_consensus_inside() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let game = TuGame::random_convex(4, &mut rng);
    let core = game.core_polyhedron();
    let member = core.project(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    let inside = StackedState::consensus(&member);
    assert!(dist_core_consensus(&core, &inside).unwrap() <= 1e-9);
    assert!(consensus_residual(&inside) <= 1e-9);

    let mut split = inside.clone();
    split.block_mut(0)[0] += 1e-3;
    split.block_mut(1)[0] -= 1e-3;
    assert!(dist_core_consensus(&core, &split).unwrap() > 1e-9);
    assert!(consensus_residual(&split) > 1e-9);
}

#[test]
fn normalized_start_is_one_at_any_scale() {
    use corereach::engine::{Engine, EngineConfig, StepSchedule};
    use corereach::network::four_agent_pairings;
    use corereach::polytope::OperatorConfig;

    let core = TuGame::four_agent_example().core_polyhedron();
    let sched = four_agent_pairings();
    let mut cfg = EngineConfig::new(OperatorConfig::new(0.8).unwrap(), StepSchedule::Fixed(0.5));
    cfg.max_iters = 1;
    for scale in [1e-3, 1.0, 1e3] {
        let x = [4.0, 3.0, 0.0, 3.0];
        let w0 = StackedState::from_blocks(
            (0..4)
                .map(|i| {
                    let mut b = x.to_vec();
                    b[i] += scale;
                    b
                })
                .collect(),
        )
        .unwrap();
        let traj = Engine::new(&core, &sched, cfg.clone()).unwrap().run(&w0).unwrap();
        assert_eq!(traj.rows[0].normalized_dist, 1.0);
    }
}
