use maxmin_core::agent::Transition;
use maxmin_core::env::{one_state_env, EpisodicEnv};
use maxmin_core::harness::{
    dominates, evaluate_policy, mdqn_backup, pareto_sweep, run, Algorithm, EnvSpec, ExperimentKind, RunConfig, RunResult, VectorQTable,
};
use maxmin_core::momdp::{StochasticPolicy, TabularMOMDP};

fn one_state() -> EnvSpec {
    EnvSpec::OneState {
        gamma: 0.9,
        max_episode_steps: 300,
    }
}

fn train_cfg(algorithm: Algorithm, steps: usize) -> RunConfig {
    let mut cfg = RunConfig::new(ExperimentKind::Train, one_state());
    cfg.algorithm = algorithm;
    cfg.seeds = vec![0, 1];
    cfg.eval_episodes = 20;
    cfg.agent.insert("total_steps".into(), steps.into());
    cfg
}

#[test]
fn utilitarian_baseline_commits_to_a_lopsided_action() {
    // Averaged rewards are (1.5, 1.5, 1), so the greedy policy plays one
    // of the first two actions forever and one objective earns nothing.
    let util = run(&train_cfg(Algorithm::Utilitarian, 5_000), None).unwrap().result;
    for s in &util.per_seed {
        assert!(s.evaluation.exact.iter().any(|&j| j.abs() < 1e-9), "{:?}", s.evaluation.exact);
        assert!(
            s.evaluation.exact.iter().any(|&j| (j - 30.0).abs() < 1e-6),
            "{:?}",
            s.evaluation.exact
        );
    }
}

#[test]
fn vector_backup_picks_the_successor_action_by_its_own_reward() {
    let mut target = VectorQTable::zeros(1, 3, 2);
    target.values = vec![5.0, 0.0, 0.0, 5.0, 2.0, 2.0];
    let t = Transition {
        state: 0,
        action: 0,
        reward: vec![3.0, 0.0],
        next_state: 0,
        terminal: false,
    };
    // Scores min(r + 0.5 Q(a')): a'=0 -> 0, a'=1 -> 2.5, a'=2 -> 1, so the
    // target is (3, 0) + 0.5 (0, 5) = (3, 2.5), not the greedy a'=2.
    let out = mdqn_backup(&target, &target, &[&t], 0.5, 0.5);
    assert_eq!(out.get(0, 0), &[4.0, 1.25]);
    assert_eq!(out.get(0, 2), &[2.0, 2.0]);
    assert_eq!(target.greedy(0), 2);
    let done = Transition { terminal: true, ..t };
    assert_eq!(mdqn_backup(&target, &target, &[&done], 0.5, 1.0).get(0, 0), &[3.0, 0.0]);
}

#[test]
fn mdqn_runs_under_the_shared_budget() {
    let out = run(&train_cfg(Algorithm::Mdqn, 2_000), None).unwrap().result;
    assert_eq!(out.algorithm, Some(Algorithm::Mdqn));
    assert!(out.learned_weights.is_empty());
    assert!(out.min_return.is_finite());
}

fn terminating_chain() -> EpisodicEnv {
    // 0 -> 1 -> 2 (absorbing), paying (1, 0) then (0, 2).
    let t = vec![
        vec![vec![0.0, 1.0, 0.0]; 2],
        vec![vec![0.0, 0.0, 1.0]; 2],
        vec![vec![0.0, 0.0, 1.0]; 2],
    ];
    let r = vec![vec![vec![1.0, 0.0]; 2], vec![vec![0.0, 2.0]; 2], vec![vec![0.0, 0.0]; 2]];
    let model = TabularMOMDP::from_nested(0.9, &t, &r, vec![1.0, 0.0, 0.0]).unwrap();
    EpisodicEnv::new(model, 10, &[2]).unwrap()
}

#[test]
fn monte_carlo_is_exact_on_a_deterministic_chain() {
    let env = terminating_chain();
    let policy = StochasticPolicy::uniform(3, 2);
    let report = evaluate_policy(&env, &policy, 25, 0.9, 0).unwrap();
    assert!((report.mean[0] - 1.0).abs() <= 1e-12 && (report.mean[1] - 1.8).abs() <= 1e-12);
    for (m, e) in report.mean.iter().zip(&report.exact) {
        assert!((m - e).abs() <= 1e-12);
    }
    assert!(report.stderr.iter().all(|&s| s.abs() <= 1e-12));
}

#[test]
fn repeated_runs_serialize_identically() {
    let cfg = train_cfg(Algorithm::Proposed, 2_000);
    let a = serde_json::to_string(&run(&cfg, None).unwrap().result).unwrap();
    let b = serde_json::to_string(&run(&cfg, None).unwrap().result).unwrap();
    assert_eq!(a, b);
    let back: RunResult = serde_json::from_str(&a).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), a);
}

#[test]
fn scaled_one_state_equalizes_scaled_returns() {
    let points = pareto_sweep(&one_state_env(), &[vec![1.0, 2.0], vec![1.0, 1.0], vec![3.0, 1.0]], 1e-9).unwrap();
    let j = &points[0].returns;
    assert!((j[0] - 2.0 * j[1]).abs() < 1e-6, "{j:?}");
    for a in &points {
        for b in &points {
            assert!(!dominates(&a.returns, &b.returns, 1e-7));
        }
    }
}

#[test]
fn every_experiment_kind_runs_on_one_state() {
    let kinds = [
        ExperimentKind::SolveExact,
        ExperimentKind::SolveLp,
        ExperimentKind::Evaluate,
        ExperimentKind::ParetoSweep,
    ];
    for kind in kinds {
        let mut cfg = RunConfig::new(kind, one_state());
        cfg.alpha = Some(0.1);
        cfg.eval_episodes = 5;
        let out = run(&cfg, None).unwrap();
        assert!(out.result.min_return.is_finite(), "{kind:?}");
    }
    let mut cfg = RunConfig::new(ExperimentKind::Ablate, one_state());
    cfg.seeds = vec![0];
    cfg.eval_episodes = 5;
    cfg.agent.insert("total_steps".into(), 500.into());
    let out = run(&cfg, None).unwrap();
    let names: Vec<_> = out.result.arms.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["fixed_weights", "samples_5", "samples_20"]);
}

#[test]
fn failures_carry_phase_and_kind() {
    let mut cfg = RunConfig::new(ExperimentKind::Train, one_state());
    cfg.seeds = vec![7];
    cfg.agent.insert("num_samples".into(), 1.into());
    let err = run(&cfg, None).unwrap_err();
    assert_eq!(err.kind(), "rank_deficient");
    assert!(err.to_string().contains("seed"), "{err}");
}
