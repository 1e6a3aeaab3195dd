//! Policy rankings and preference scenarios.
//!
//! A policy ranks every panel variable. Ranks can be given outright, derived
//! from Pearson correlation with an anchor variable, or mixed: fixed ranks
//! keep their slots and the remaining variables fill the free slots in order
//! of correlation. A scenario orders the policies; a policy's position in
//! that order is its priority.

use std::collections::{BTreeMap, HashSet};

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::hybrid::{PolicyRankingSet, PolicyRanks};
use crate::sbm::DmuPanel;

/// Largest policy count accepted for full permutation.
pub const MAX_PERMUTED_POLICIES: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDefinition {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub anchor: Option<String>,
    #[serde(default)]
    pub fixed_ranks: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMode {
    #[default]
    Signed,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub variable: String,
    pub coefficient: f64,
    /// Two-sided p-value; `None` with fewer than three units.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRanking {
    pub name: String,
    /// One rank per panel variable, inputs then outputs.
    pub ranks: Vec<u32>,
    /// Coefficients against the anchor for the variables ranked by correlation.
    pub correlations: Vec<Correlation>,
}

fn variance_check(name: &str, col: &[f64]) -> Result<()> {
    let first = col[0];
    if col.iter().all(|v| *v == first) {
        return Err(Error::validation(format!(
            "column '{name}' has zero variance; cannot correlate it"
        )));
    }
    Ok(())
}

/// Pearson coefficient and two-sided p-value of two equally long series.
pub fn pearson(a: &[f64], b: &[f64]) -> (f64, Option<f64>) {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    let r = (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0);
    if a.len() < 3 {
        return (r, None);
    }
    let df = n - 2.0;
    if r.abs() >= 1.0 {
        return (r, Some(0.0));
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (r, Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)))
}

/// Ranks every variable of `panel` under `policy`.
///
/// Fixed ranks are taken as given. If variables remain, the anchor takes the
/// first free slot and the rest follow by descending coefficient (or
/// descending absolute coefficient). Equal coefficients share a rank.
pub fn rank_by_pearson(panel: &DmuPanel, policy: &PolicyDefinition, mode: CorrelationMode) -> Result<PolicyRanking> {
    let names = panel.variable_names();
    let n = names.len();
    for (var, &rank) in &policy.fixed_ranks {
        if !names.contains(var) {
            return Err(Error::validation(format!(
                "policy '{}' fixes a rank for unknown variable '{var}'",
                policy.name
            )));
        }
        if rank < 1 || rank as usize > n {
            return Err(Error::validation(format!(
                "policy '{}' gives '{var}' rank {rank}; ranks must lie in 1..={n}",
                policy.name
            )));
        }
    }
    let free: Vec<usize> = (0..n)
        .filter(|j| !policy.fixed_ranks.contains_key(&names[*j]))
        .collect();
    let mut ranks: Vec<u32> = names
        .iter()
        .map(|v| policy.fixed_ranks.get(v).copied().unwrap_or(0))
        .collect();
    if free.is_empty() {
        return Ok(PolicyRanking {
            name: policy.name.clone(),
            ranks,
            correlations: Vec::new(),
        });
    }

    let anchor = policy.anchor.as_ref().ok_or_else(|| {
        Error::validation(format!(
            "policy '{}' leaves variables unranked but names no anchor",
            policy.name
        ))
    })?;
    let anchor_idx = names.iter().position(|v| v == anchor).ok_or_else(|| {
        Error::validation(format!(
            "policy '{}': anchor '{anchor}' is not a panel variable",
            policy.name
        ))
    })?;
    if !free.contains(&anchor_idx) {
        return Err(Error::validation(format!(
            "policy '{}': anchor '{anchor}' also has a fixed rank",
            policy.name
        )));
    }
    let anchor_col = panel.column(anchor).expect("anchor exists");
    variance_check(anchor, &anchor_col)?;

    let mut correlations = Vec::new();
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for &j in free.iter().filter(|j| **j != anchor_idx) {
        let col = panel.column(&names[j]).expect("variable exists");
        variance_check(&names[j], &col)?;
        let (r, p) = pearson(&anchor_col, &col);
        correlations.push(Correlation {
            variable: names[j].clone(),
            coefficient: r,
            p_value: p,
        });
        let key = match mode {
            CorrelationMode::Signed => r,
            CorrelationMode::Absolute => r.abs(),
        };
        scored.push((j, key));
    }
    // Stable sort keeps panel order among equal keys.
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));

    let used: HashSet<u32> = policy.fixed_ranks.values().copied().collect();
    let slots: Vec<u32> = (1..=n as u32).filter(|r| !used.contains(r)).collect();
    if slots.len() < free.len() {
        return Err(Error::validation(format!(
            "policy '{}': fixed ranks leave {} free slots for {} variables",
            policy.name,
            slots.len(),
            free.len()
        )));
    }
    ranks[anchor_idx] = slots[0];
    let mut pos = 1;
    for group in scored.chunk_by(|a, b| a.1 == b.1) {
        for (j, _) in group {
            ranks[*j] = slots[pos];
        }
        pos += group.len();
    }
    Ok(PolicyRanking {
        name: policy.name.clone(),
        ranks,
        correlations,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    /// Policy names, most important first.
    pub policy_order: Vec<String>,
}

impl ScenarioSpec {
    /// `t_k` for each of `policies`: its 1-based position in this scenario.
    pub fn priorities(&self, policies: &[String]) -> Result<Vec<u32>> {
        policies
            .iter()
            .map(|p| {
                self.policy_order
                    .iter()
                    .position(|q| q == p)
                    .map(|i| i as u32 + 1)
                    .ok_or_else(|| Error::validation(format!("scenario '{}' does not order policy '{p}'", self.id)))
            })
            .collect()
    }

    pub fn label(&self) -> String {
        self.policy_order.join(" > ")
    }
}

fn check_names(policies: &[String]) -> Result<()> {
    if policies.is_empty() {
        return Err(Error::validation("no policies declared"));
    }
    let mut seen = HashSet::new();
    for p in policies {
        if !seen.insert(p) {
            return Err(Error::validation(format!("duplicate policy '{p}'")));
        }
    }
    Ok(())
}

/// Every ordering of `policies`, lexicographic in declaration order, with
/// ids `S1`, `S2`, ...
pub fn enumerate_scenarios(policies: &[String]) -> Result<Vec<ScenarioSpec>> {
    check_names(policies)?;
    if policies.len() > MAX_PERMUTED_POLICIES {
        return Err(Error::validation(format!(
            "{} policies give {}! scenarios; at most {MAX_PERMUTED_POLICIES} can be permuted, list scenarios explicitly instead",
            policies.len(),
            policies.len()
        )));
    }
    Ok((0..policies.len())
        .permutations(policies.len())
        .enumerate()
        .map(|(i, perm)| ScenarioSpec {
            id: format!("S{}", i + 1),
            policy_order: perm.into_iter().map(|k| policies[k].clone()).collect(),
        })
        .collect())
}

/// Checks explicitly listed scenarios against the declared policies.
pub fn explicit_scenarios(policies: &[String], scenarios: Vec<ScenarioSpec>) -> Result<Vec<ScenarioSpec>> {
    check_names(policies)?;
    let mut ids = HashSet::new();
    for s in &scenarios {
        if !ids.insert(&s.id) {
            return Err(Error::validation(format!("duplicate scenario id '{}'", s.id)));
        }
        let mut a = s.policy_order.clone();
        let mut b = policies.to_vec();
        a.sort();
        b.sort();
        if a != b {
            return Err(Error::validation(format!(
                "scenario '{}' order {:?} is not a permutation of the policies {:?}",
                s.id, s.policy_order, policies
            )));
        }
    }
    Ok(scenarios)
}

/// Builds the model input for one scenario from per-policy ranks.
pub fn to_ranking_set(
    scenario: &ScenarioSpec,
    variables: &[String],
    policies: &[PolicyRanking],
) -> Result<PolicyRankingSet> {
    let names: Vec<String> = policies.iter().map(|p| p.name.clone()).collect();
    let priorities = scenario.priorities(&names)?;
    for p in policies {
        if p.ranks.len() != variables.len() || p.ranks.contains(&0) {
            return Err(Error::validation(format!(
                "policy '{}' does not rank all {} variables",
                p.name,
                variables.len()
            )));
        }
    }
    PolicyRankingSet::new(
        scenario.id.clone(),
        variables.to_vec(),
        policies
            .iter()
            .map(|p| PolicyRanks {
                name: p.name.clone(),
                ranks: p.ranks.clone(),
            })
            .collect(),
        priorities,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::{Role, VariableSpec};
    use proptest::prelude::*;

    fn panel(cols: &[(&str, Role, Vec<f64>)]) -> DmuPanel {
        let n = cols[0].2.len();
        let spec = |c: &(&str, Role, Vec<f64>)| VariableSpec {
            name: c.0.into(),
            role: c.1,
            unit: String::new(),
        };
        let ins: Vec<_> = cols.iter().filter(|c| c.1 == Role::Input).collect();
        let outs: Vec<_> = cols.iter().filter(|c| c.1 == Role::Output).collect();
        DmuPanel::new(
            (0..n).map(|i| format!("u{i}")).collect(),
            ins.iter().map(|c| spec(c)).collect(),
            outs.iter().map(|c| spec(c)).collect(),
            (0..n).map(|i| ins.iter().map(|c| c.2[i]).collect()).collect(),
            (0..n).map(|i| outs.iter().map(|c| c.2[i]).collect()).collect(),
        )
        .unwrap()
    }

    fn policy(anchor: &str) -> PolicyDefinition {
        PolicyDefinition {
            name: "P".into(),
            anchor: Some(anchor.into()),
            fixed_ranks: BTreeMap::new(),
            ..Default::default()
        }
    }

    fn names(ps: &[&str]) -> Vec<String> {
        ps.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn perfectly_correlated_variable_follows_anchor() {
        let y = vec![1.0, 3.0, 2.0, 5.0];
        let p = panel(&[
            ("A", Role::Input, vec![4.0, 1.0, 2.0, 3.0]),
            ("V", Role::Input, y.iter().map(|v| 2.0 * v).collect()),
            ("N", Role::Input, y.iter().map(|v| 10.0 - v).collect()),
            ("Y", Role::Output, y),
        ]);
        let ranked = rank_by_pearson(&p, &policy("Y"), CorrelationMode::Signed).unwrap();
        assert_eq!(ranked.ranks, vec![3, 2, 4, 1]);
        let v = &ranked.correlations[1];
        assert!((v.coefficient - 1.0).abs() < 1e-12);
        assert_eq!(v.p_value, Some(0.0));
        let abs = rank_by_pearson(&p, &policy("Y"), CorrelationMode::Absolute).unwrap();
        // V and N tie on |r| = 1.
        assert_eq!(abs.ranks, vec![4, 2, 2, 1]);
    }

    #[test]
    fn fixed_ranks_keep_their_slots() {
        let p = panel(&[
            ("L", Role::Input, vec![1.0, 2.0, 3.0, 4.0]),
            ("K", Role::Input, vec![2.0, 1.0, 4.0, 3.0]),
            ("T", Role::Input, vec![4.0, 3.0, 2.0, 1.0]),
            ("Y", Role::Output, vec![1.0, 2.0, 3.5, 4.0]),
        ]);
        let mut def = policy("Y");
        def.fixed_ranks.insert("K".into(), 1);
        let ranked = rank_by_pearson(&p, &def, CorrelationMode::Signed).unwrap();
        assert_eq!(ranked.ranks, vec![3, 1, 4, 2]);
    }

    #[test]
    fn full_fixed_ranks_reproduce_the_table() {
        let vals = vec![1.0, 2.0, 3.0];
        let cols: Vec<(&str, Role, Vec<f64>)> = ["L", "K", "T", "E"]
            .iter()
            .map(|n| (*n, Role::Input, vals.clone()))
            .chain(["Y", "C"].iter().map(|n| (*n, Role::Output, vals.clone())))
            .collect();
        let p = panel(&cols);
        let def = PolicyDefinition {
            name: "P1".into(),
            anchor: None,
            fixed_ranks: [("L", 4), ("K", 2), ("T", 3), ("E", 5), ("Y", 1), ("C", 6)]
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            ..Default::default()
        };
        let ranked = rank_by_pearson(&p, &def, CorrelationMode::Signed).unwrap();
        assert_eq!(ranked.ranks, vec![4, 2, 3, 5, 1, 6]);
    }

    #[test]
    fn zero_variance_is_rejected_by_name() {
        let p = panel(&[
            ("A", Role::Input, vec![1.0, 1.0, 1.0]),
            ("Y", Role::Output, vec![1.0, 2.0, 3.0]),
        ]);
        let err = rank_by_pearson(&p, &policy("Y"), CorrelationMode::Signed).unwrap_err();
        assert!(err.to_string().contains("'A'"));
        let no_anchor = PolicyDefinition {
            name: "P".into(),
            anchor: None,
            fixed_ranks: BTreeMap::new(),
            ..Default::default()
        };
        assert!(rank_by_pearson(&p, &no_anchor, CorrelationMode::Signed).is_err());
    }

    #[test]
    fn p_values_match_reference() {
        // r = 0.8 with n = 5: t = 0.8 * sqrt(3 / 0.36) = 2.3094, two-sided p = 0.1041
        let (r, p) = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]);
        assert!((r - 0.8).abs() < 1e-12);
        assert!((p.unwrap() - 0.104088).abs() < 1e-5);
        assert_eq!(pearson(&[1.0, 2.0], &[2.0, 1.0]).1, None);
    }

    #[test]
    fn three_policies_follow_table_order() {
        let s = enumerate_scenarios(&names(&["P1", "P2", "P3"])).unwrap();
        let labels: Vec<String> = s.iter().map(|s| format!("{}: {}", s.id, s.label())).collect();
        assert_eq!(
            labels,
            [
                "S1: P1 > P2 > P3",
                "S2: P1 > P3 > P2",
                "S3: P2 > P1 > P3",
                "S4: P2 > P3 > P1",
                "S5: P3 > P1 > P2",
                "S6: P3 > P2 > P1"
            ]
        );
        let p = names(&["P1", "P2", "P3"]);
        assert_eq!(s[0].priorities(&p).unwrap(), vec![1, 2, 3]);
        assert_eq!(s[5].priorities(&p).unwrap(), vec![3, 2, 1]);
    }

    #[test]
    fn scenario_counts_and_guards() {
        assert_eq!(enumerate_scenarios(&names(&["a"])).unwrap().len(), 1);
        assert_eq!(enumerate_scenarios(&names(&["a", "b"])).unwrap().len(), 2);
        assert_eq!(
            enumerate_scenarios(&names(&["a", "b", "c", "d", "e", "f"]))
                .unwrap()
                .len(),
            720
        );
        assert!(enumerate_scenarios(&names(&["a", "b", "c", "d", "e", "f", "g"])).is_err());
        assert!(enumerate_scenarios(&names(&["a", "a"])).is_err());
        assert!(enumerate_scenarios(&[]).is_err());
        let bad = ScenarioSpec {
            id: "X".into(),
            policy_order: names(&["a", "a"]),
        };
        assert!(explicit_scenarios(&names(&["a", "b"]), vec![bad]).is_err());
    }

    #[test]
    fn ranking_set_wiring() {
        let vars = names(&["x", "y"]);
        let pol = |n: &str, r: Vec<u32>| PolicyRanking {
            name: n.into(),
            ranks: r,
            correlations: vec![],
        };
        let single = ScenarioSpec {
            id: "S1".into(),
            policy_order: names(&["only"]),
        };
        let set = to_ranking_set(&single, &vars, &[pol("only", vec![1, 2])]).unwrap();
        assert_eq!(set.priorities, vec![1]);
        assert!(to_ranking_set(&single, &vars, &[pol("only", vec![1])]).is_err());
        assert!(to_ranking_set(&single, &vars, &[pol("other", vec![1, 2])]).is_err());
    }

    proptest! {
        #[test]
        fn permutations_are_distinct(p in 1usize..=5) {
            let pols: Vec<String> = (0..p).map(|i| format!("P{i}")).collect();
            let s = enumerate_scenarios(&pols).unwrap();
            let expected: usize = (1..=p).product();
            prop_assert_eq!(s.len(), expected);
            let distinct: HashSet<_> = s.iter().map(|s| s.policy_order.clone()).collect();
            prop_assert_eq!(distinct.len(), expected);
        }

        #[test]
        fn affine_maps_leave_ranks_unchanged(
            seed in any::<u64>(),
            a in 0.1f64..10.0,
            b in 0.0f64..50.0,
        ) {
            let base = crate::synthetic::random_panel(seed, 6, 3, 1).unwrap();
            let def = PolicyDefinition { name: "P".into(), anchor: Some("y1".into()), ..Default::default() };
            let before = rank_by_pearson(&base, &def, CorrelationMode::Signed).unwrap();
            let col = base.input_column(1);
            let x: Vec<Vec<f64>> = (0..base.len())
                .map(|i| {
                    let mut row = base.input_row(i).to_vec();
                    row[1] = a * col[i] + b;
                    row
                })
                .collect();
            let y: Vec<Vec<f64>> = (0..base.len()).map(|i| base.output_row(i).to_vec()).collect();
            let moved = DmuPanel::new(base.dmu_ids().to_vec(), base.inputs().to_vec(), base.outputs().to_vec(), x, y).unwrap();
            let after = rank_by_pearson(&moved, &def, CorrelationMode::Signed).unwrap();
            prop_assert_eq!(before.ranks, after.ranks);
        }
    }
}
