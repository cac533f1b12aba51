use std::collections::{HashSet, VecDeque};

use maxmin_core::env::{env_step, four_room_env, random_momdp, EpisodicEnv, FourRoomConfig, FourRoomGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn default_four_room_has_cell_times_mask_states() {
    let cfg = FourRoomConfig::default();
    let free: usize = cfg.layout.iter().map(|r| r.chars().filter(|&c| c == ' ').count()).sum();
    let env = four_room_env(&cfg).unwrap();
    assert_eq!(free, 104);
    assert_eq!(env.num_states(), free << cfg.items.len());
    assert_eq!(env.num_states(), 1664);
    assert_eq!((env.num_actions(), env.num_objectives()), (4, 2));
}

#[test]
fn collected_totals_match_item_counts() {
    // Breadth-first search over the deterministic grid from the start.
    // Rewards along any path sum to the items of each type the mask
    // records, so the reachable maximum is (1, 3).
    let cfg = FourRoomConfig::default();
    let grid = FourRoomGrid::new(&cfg).unwrap();
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([(grid.start_state(), [0.0, 0.0])]);
    let mut best = [0.0f64, 0.0f64];
    while let Some((s, total)) = queue.pop_front() {
        if !seen.insert(s) {
            continue;
        }
        best = [best[0].max(total[0]), best[1].max(total[1])];
        for a in 0..4 {
            let (s2, r) = grid.transition(s, a);
            queue.push_back((s2, [total[0] + r[0], total[1] + r[1]]));
        }
    }
    assert_eq!(best, [1.0, 3.0]);
    assert!(seen.contains(&grid.state_index(8, 3, grid.full_mask()).unwrap()));
}

#[test]
fn type_two_item_pays_the_second_objective() {
    let cfg = FourRoomConfig::default();
    let grid = FourRoomGrid::new(&cfg).unwrap();
    // (8, 2) holds a type-2 item; step down onto it from (7, 2).
    let s = grid.state_index(7, 2, 0b0010).unwrap();
    let (s2, r) = grid.transition(s, 2);
    assert_eq!(r, [0.0, 1.0]);
    assert_eq!(grid.decode(s2), (8, 2, 0b0110));
    // Re-entering does not pay again.
    let (s3, _) = grid.transition(s2, 0);
    let (_, again) = grid.transition(s3, 2);
    assert_eq!(again, [0.0, 0.0]);
}

#[test]
fn empirical_transitions_pass_chi_squared() {
    // Critical value of chi-squared with 5 degrees of freedom at 0.001.
    const CRITICAL: f64 = 20.515;
    let env = EpisodicEnv::new(random_momdp(17, 6, 2, 2, 0.9).unwrap(), 100, &[]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 20_000;
    for (s, a) in [(0, 0), (3, 1), (5, 0)] {
        let mut counts = [0usize; 6];
        for _ in 0..n {
            counts[env_step(&env, s, a, &mut rng).unwrap().next_state] += 1;
        }
        let chi2: f64 = (0..6)
            .map(|s2| {
                let e = n as f64 * env.model().prob(s, a, s2);
                (counts[s2] as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < CRITICAL, "({s},{a}): chi2 {chi2}");
    }
}

#[test]
fn four_room_terminals_are_absorbing_zero_reward() {
    let env = four_room_env(&FourRoomConfig::default()).unwrap();
    let grid = FourRoomGrid::new(&FourRoomConfig::default()).unwrap();
    for t in grid.terminal_states() {
        assert!(env.is_terminal(t));
        for a in 0..4 {
            assert_eq!(env.model().prob(t, a, t), 1.0);
            assert_eq!(env.model().reward(t, a), &[0.0, 0.0]);
        }
    }
}
