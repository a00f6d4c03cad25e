//! Seeded multi-run experiments over the full pipeline.

use rmab_core::io::{parse_trajectory_csv, trajectory_csv};
use rmab_core::pipeline::{evaluate, EvaluateConfig};
use rmab_core::simulator::{
    generate_cohort, run_study, CohortCluster, CohortSpec, Policy, StudyConfig,
};

#[test]
fn noisier_predictions_rank_worse() {
    let (mut quiet, mut noisy) = (0.0, 0.0);
    for seed in 0..10u64 {
        let mut config = EvaluateConfig::new(seed);
        config.k = 50;
        config.estimation.num_clusters = 3;
        let mut errors = [0.0; 2];
        for (slot, noise) in [0.05, 0.3].into_iter().enumerate() {
            let mut spec = CohortSpec::synthetic(400);
            spec.prediction_noise = noise;
            // same seed: identical true models and trajectories, only the predictions differ
            let arms = generate_cohort(&spec, seed).unwrap();
            let log = run_study(&arms, &StudyConfig::new(40, 80, Policy::Random, seed)).unwrap();
            let rows = parse_trajectory_csv("t", &trajectory_csv(&log).unwrap()).unwrap();
            let predicted: Vec<_> = arms.iter().map(|a| (a.arm_id, a.predicted_model)).collect();
            errors[slot] = evaluate(&predicted, &rows, &config)
                .unwrap()
                .cumulative
                .spearman
                .mean;
        }
        quiet += errors[0] / 10.0;
        noisy += errors[1] / 10.0;
    }
    assert!(noisy > quiet, "noise 0.3: {noisy}, noise 0.05: {quiet}");
}

fn favourable(n: usize) -> CohortSpec {
    CohortSpec {
        n,
        clusters: vec![
            CohortCluster {
                weight: 0.6,
                passive_center: [0.15, 0.5],
                active_center: [0.6, 0.9],
                spread: 0.05,
            },
            CohortCluster {
                weight: 0.4,
                passive_center: [0.3, 0.7],
                active_center: [0.45, 0.85],
                spread: 0.05,
            },
        ],
        prediction_noise: 0.05,
        initial_engaging_fraction: 0.5,
    }
}

#[test]
fn whittle_beats_no_calls_in_most_runs() {
    let mut wins = 0;
    for seed in 0..20u64 {
        let arms = generate_cohort(&favourable(1000), seed).unwrap();
        let whittle = run_study(&arms, &StudyConfig::new(8, 50, Policy::Whittle, seed)).unwrap();
        let csoc = run_study(&arms, &StudyConfig::new(8, 50, Policy::Csoc, seed)).unwrap();
        wins += usize::from(whittle.engaging_weeks() > csoc.engaging_weeks());
    }
    assert!(wins > 10, "{wins}/20");
}

#[test]
fn budget_and_action_consistency() {
    let arms = generate_cohort(&favourable(120), 2).unwrap();
    for policy in [
        Policy::Whittle,
        Policy::Random,
        Policy::RoundRobin,
        Policy::Csoc,
    ] {
        let log = run_study(&arms, &StudyConfig::new(12, 15, policy, 9)).unwrap();
        for week in &log.weeks {
            let expect = if policy == Policy::Csoc { 0 } else { 15 };
            assert_eq!(week.selected.len(), expect, "{policy}");
            for t in &week.transitions {
                assert_eq!(t.action == 1, week.selected.contains(&t.arm_id));
            }
            let engaging = week
                .transitions
                .iter()
                .filter(|t| t.next_state == 1)
                .count();
            assert_eq!(week.engaging_count, engaging);
        }
        // each week starts where the previous one ended
        for pair in log.weeks.windows(2) {
            for (a, b) in pair[0].transitions.iter().zip(&pair[1].transitions) {
                assert_eq!(a.next_state, b.state);
            }
        }
    }
}
