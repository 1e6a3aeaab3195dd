use super::*;
use crate::sbm::{Role, VariableSpec};
use crate::synthetic::random_panel;
use proptest::prelude::*;

fn one_by_one(rows: &[(&str, f64, f64)]) -> DmuPanel {
    DmuPanel::new(
        rows.iter().map(|r| r.0.to_string()).collect(),
        vec![VariableSpec {
            name: "x".into(),
            role: Role::Input,
            unit: String::new(),
        }],
        vec![VariableSpec {
            name: "y".into(),
            role: Role::Output,
            unit: String::new(),
        }],
        rows.iter().map(|r| vec![r.1]).collect(),
        rows.iter().map(|r| vec![r.2]).collect(),
    )
    .unwrap()
}

fn set(panel: &DmuPanel, ranks: &[&[u32]], priorities: &[u32]) -> PolicyRankingSet {
    PolicyRankingSet::new(
        "S",
        panel.variable_names(),
        ranks
            .iter()
            .enumerate()
            .map(|(k, r)| PolicyRanks {
                name: format!("P{}", k + 1),
                ranks: r.to_vec(),
            })
            .collect(),
        priorities.to_vec(),
    )
    .unwrap()
}

/// All chain rows binding, for rankings without ties:
/// `w_jk = Z * (sum_{h >= r_jk} 1/h) / t_k`.
fn chain_oracle(ranks: &[&[u32]], priorities: &[u32]) -> (Vec<Vec<f64>>, f64) {
    let n = ranks[0].len() as u32;
    let tail = |r: u32| (r..=n).map(|h| 1.0 / h as f64).sum::<f64>();
    let raw: Vec<Vec<f64>> = ranks
        .iter()
        .zip(priorities)
        .map(|(r, &t)| r.iter().map(|&rj| tail(rj) / t as f64).collect())
        .collect();
    let z = 1.0 / raw.iter().flatten().sum::<f64>();
    (raw.iter().map(|row| row.iter().map(|c| c * z).collect()).collect(), z)
}

#[test]
fn priority_only_reproduces_priority_weights() {
    let panel = random_panel(3, 4, 2, 2).unwrap();
    let ranks: [&[u32]; 2] = [&[2, 1, 4, 3], &[1, 3, 2, 4]];
    let rankings = set(&panel, &ranks, &[1, 2]);
    let (oracle_w, oracle_z) = chain_oracle(&ranks, &[1, 2]);
    let pure = opa::solve_opa(&rankings.as_instance()).unwrap();
    for l in 0..panel.len() {
        let sol = solve_hybrid(&panel, &rankings, 0.01, ObjectiveWeights::new(0.0, 1.0).unwrap(), l).unwrap();
        assert!((sol.xi - oracle_z).abs() < 1e-7);
        assert!((sol.z - pure.objective).abs() < 1e-7);
        for (got, want) in sol.preference_weights.iter().flatten().zip(oracle_w.iter().flatten()) {
            assert!((got - want).abs() < 1e-7, "{got} vs {want}");
        }
    }
}

#[test]
fn floor_rows_hold_at_the_solution() {
    let panel = random_panel(11, 5, 2, 1).unwrap();
    let rankings = set(&panel, &[&[1, 3, 2]], &[1]);
    for l in 0..panel.len() {
        let sol = solve_hybrid(&panel, &rankings, 0.0, ObjectiveWeights::default(), l).unwrap();
        for j in 0..2 {
            let floor = sol.variable_weights[j] / panel.max_input(j);
            assert!(sol.input_prices[j] + sol.input_caps[j] >= floor - 1e-7);
        }
        let floor = sol.variable_weights[2] / panel.min_output(0);
        assert!(sol.output_prices[0] + sol.output_floors[0] >= floor - 1e-7);
        assert!((sol.variable_weights.iter().sum::<f64>() - 1.0).abs() < 1e-7);
    }
}

#[test]
fn swapping_priorities_swaps_policy_shares() {
    let panel = one_by_one(&[("A", 1.0, 2.0), ("B", 2.0, 1.0)]);
    let ranks: [&[u32]; 2] = [&[1, 2], &[2, 1]];
    let first = set(&panel, &ranks, &[1, 2]);
    let second = set(&panel, &ranks, &[2, 1]);
    let share = |sol: &HybridSolution, k: usize| sol.preference_weights[k].iter().sum::<f64>();
    for l in 0..2 {
        let a = solve_hybrid(&panel, &first, 0.0, ObjectiveWeights::default(), l).unwrap();
        let b = solve_hybrid(&panel, &second, 0.0, ObjectiveWeights::default(), l).unwrap();
        assert!(a.replay(&panel, &first).unwrap().max_violation <= 1e-7);
        assert!(b.replay(&panel, &second).unwrap().max_violation <= 1e-7);
        assert!(share(&a, 0) > share(&a, 1));
        assert!(share(&b, 1) > share(&b, 0));
    }
}

#[test]
fn single_unit_is_efficient_and_degenerate() {
    let panel = one_by_one(&[("solo", 3.0, 5.0)]);
    let rankings = set(&panel, &[&[1, 2]], &[1]);
    let batch = assess_scenario(&panel, &rankings, 0.0, ObjectiveWeights::default()).unwrap();
    assert_eq!(batch.solutions.len(), 1);
    let sol = &batch.solutions[0];
    assert!((sol.assessment.score - 1.0).abs() < 1e-12);
    assert!(sol.scaling.degenerate);
    assert!(!sol.warnings.is_empty());
}

#[test]
fn dominated_unit_scores_below_one() {
    let panel = one_by_one(&[("A", 1.0, 2.0), ("B", 2.0, 1.0)]);
    let rankings = set(&panel, &[&[1, 2]], &[1]);
    let batch = assess_scenario(&panel, &rankings, 0.0, ObjectiveWeights::default()).unwrap();
    let ids: Vec<&str> = batch.solutions.iter().map(|s| s.dmu_id.as_str()).collect();
    assert_eq!(ids, ["A", "B"]);
    assert!((batch.solutions[0].assessment.score - 1.0).abs() < 1e-9);
    assert!(batch.solutions[1].assessment.score < 1.0);
}

#[test]
fn batch_collects_failures_and_sorts_ids() {
    let panel = one_by_one(&[("c", 1.0, 1.0), ("a", 2.0, 1.0), ("b", 1.5, 3.0)]);
    let rankings = set(&panel, &[&[2, 1]], &[1]);
    let batch = assess_scenario(&panel, &rankings, 0.0, ObjectiveWeights::default()).unwrap();
    let ids: Vec<&str> = batch.solutions.iter().map(|s| s.dmu_id.as_str()).collect();
    assert_eq!(ids, ["a", "b", "c"]);

    let solo = one_by_one(&[("solo", 1.0, 1.0)]);
    let rankings = set(&solo, &[&[1, 2]], &[1]);
    let batch = assess_scenario(&solo, &rankings, 0.9, ObjectiveWeights::default()).unwrap();
    assert!(batch.solutions.is_empty());
    assert_eq!(batch.failures.len(), 1);
    assert_eq!(batch.failures[0].exit_code, 3);
}

#[test]
fn malformed_inputs_are_rejected() {
    let panel = one_by_one(&[("A", 1.0, 2.0)]);
    assert!(ObjectiveWeights::new(0.7, 0.7).is_err());
    assert!(ObjectiveWeights::new(-0.5, 1.5).is_err());
    let bad = PolicyRankingSet::new(
        "S",
        panel.variable_names(),
        vec![PolicyRanks {
            name: "P".into(),
            ranks: vec![1, 3],
        }],
        vec![1],
    );
    assert!(matches!(bad, Err(Error::Validation(_))));
    let wrong_vars = PolicyRankingSet::new(
        "S",
        vec!["y".into(), "x".into()],
        vec![PolicyRanks {
            name: "P".into(),
            ranks: vec![1, 2],
        }],
        vec![1],
    )
    .unwrap();
    assert!(solve_hybrid(&panel, &wrong_vars, 0.0, ObjectiveWeights::default(), 0).is_err());
}

#[test]
fn payoff_bounds_on_toy_panel() {
    let panel = one_by_one(&[("A", 1.0, 2.0), ("B", 2.0, 1.0)]);
    let rankings = set(&panel, &[&[1, 2]], &[1]);
    let scaling = payoff_table(&panel, &rankings, 0.0, 1).unwrap();
    // Minimising the dual slack objective with the weight floors fixed at
    // the priority optimum (w = 3/4, 1/4) is the slack primal with those
    // weights: w- = 3/4 / 2, w+ = 1/4 / 1.
    let w = VariableWeights::new(vec![0.375], vec![0.25], "test").unwrap();
    let primal = sbm::primal_objective(&panel, &w, 0.0, 1).unwrap();
    assert!((scaling.f_max - primal).abs() < 1e-9);
    assert!(scaling.f_min <= scaling.f_max);
    assert!(scaling.f_min >= -1e-12);
}

fn ranks_strategy(nvars: usize) -> impl Strategy<Value = (Vec<Vec<u32>>, Vec<u32>)> {
    (1usize..=3).prop_flat_map(move |p| {
        let one = Just((1..=nvars as u32).collect::<Vec<u32>>()).prop_shuffle();
        (
            prop::collection::vec(one, p),
            Just((1..=p as u32).collect::<Vec<u32>>()).prop_shuffle(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn returned_points_replay_cleanly(
        seed in any::<u64>(),
        n in 1usize..=5,
        (ranks, priorities) in ranks_strategy(3),
        us in prop::sample::select(vec![0.0, 0.3, 0.5, 1.0]),
        eps in prop::sample::select(vec![0.0, 0.01]),
    ) {
        let panel = random_panel(seed, n, 2, 1).unwrap();
        let refs: Vec<&[u32]> = ranks.iter().map(|r| r.as_slice()).collect();
        let rankings = set(&panel, &refs, &priorities);
        let weights = ObjectiveWeights::new(us, 1.0 - us).unwrap();
        for l in 0..n {
            let sol = solve_hybrid(&panel, &rankings, eps, weights, l).unwrap();
            let report = sol.replay(&panel, &rankings).unwrap();
            prop_assert!(report.max_violation <= 1e-7, "{:?}", report.rows.iter().find(|r| r.violation > 1e-7));
            prop_assert!(sol.scaling.f_min <= sol.scaling.f_max);
            prop_assert!(sol.z >= -1e-12 && sol.z <= 1.0 + 1e-9);
        }
    }
}
