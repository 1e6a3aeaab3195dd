//! Ordinal priority approach: cardinal weights from ordinal rankings.
//!
//! Every expert `k` has a seniority rank `s_k` and ranks every item. The LP
//! maximises `Z` such that, walking down one expert's ranking, each step
//! `s_k * r * (w_r - w_next) >= Z` and the last item satisfies
//! `s_k * r_last * w_last >= Z`, with all weights summing to one.
//!
//! Tied items share a rank value. Each tied item gets its own step
//! constraint against every item of the next distinct rank, so equal ranks
//! end up with equal weights. Rank values may skip after a tie
//! (competition ranking, e.g. `1, 2, 4, 4, 6`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LpProblem, Sense, VarId};

/// One expert's seniority and item ranks (rank 1 = most important).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertRanking {
    pub rank: u32,
    pub item_ranks: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingInstance {
    pub items: Vec<String>,
    pub experts: Vec<ExpertRanking>,
}

impl RankingInstance {
    pub fn new(items: Vec<String>, experts: Vec<ExpertRanking>) -> Result<Self> {
        let inst = RankingInstance { items, experts };
        inst.validate()?;
        Ok(inst)
    }

    /// One expert of rank 1 ranking `n` items `1..=n` in order.
    pub fn single_complete(n: usize) -> Self {
        RankingInstance {
            items: (1..=n).map(|j| format!("item{j}")).collect(),
            experts: vec![ExpertRanking {
                rank: 1,
                item_ranks: (1..=n as u32).collect(),
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.items.len();
        let m = self.experts.len();
        if n == 0 || m == 0 {
            return Err(Error::validation(
                "ranking instance needs at least one expert and one item",
            ));
        }
        for (k, e) in self.experts.iter().enumerate() {
            if e.rank < 1 || e.rank as usize > m {
                return Err(Error::validation(format!(
                    "expert #{} has rank {}; expert ranks must lie in 1..={m}",
                    k + 1,
                    e.rank
                )));
            }
            if e.item_ranks.len() != n {
                return Err(Error::validation(format!(
                    "expert #{} ranks {} items, expected {n}",
                    k + 1,
                    e.item_ranks.len()
                )));
            }
            for (j, &r) in e.item_ranks.iter().enumerate() {
                if r < 1 || r as usize > n {
                    return Err(Error::validation(format!(
                        "expert #{} gives item '{}' rank {r}; item ranks must lie in 1..={n}",
                        k + 1,
                        self.items[j]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One row of the priority chain of a single expert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainLink {
    pub item: usize,
    /// Item of the next distinct rank, or `None` for the least important group.
    pub next: Option<usize>,
    pub rank: u32,
}

/// Step constraints implied by one expert's ranks.
pub fn chain_links(item_ranks: &[u32]) -> Vec<ChainLink> {
    let mut distinct: Vec<u32> = item_ranks.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut links = Vec::new();
    for (g, &rank) in distinct.iter().enumerate() {
        let group = item_ranks
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == rank)
            .map(|(j, _)| j);
        for item in group {
            match distinct.get(g + 1) {
                Some(&next_rank) => {
                    for (next, _) in item_ranks.iter().enumerate().filter(|(_, r)| **r == next_rank) {
                        links.push(ChainLink {
                            item,
                            next: Some(next),
                            rank,
                        });
                    }
                }
                None => links.push(ChainLink { item, next: None, rank }),
            }
        }
    }
    links
}

/// Adds the priority block `priority * rank * (w_item - w_next) >= z` for every
/// expert to `lp`. `weights[k][j]` is the weight variable of item `j` under
/// expert `k`. The normalisation row is left to the caller.
pub(crate) fn add_priority_rows(
    lp: &mut LpProblem,
    prefix: &str,
    priorities: &[u32],
    ranks: &[Vec<u32>],
    weights: &[Vec<VarId>],
    z: VarId,
) {
    for (k, (&s, item_ranks)) in priorities.iter().zip(ranks).enumerate() {
        for link in chain_links(item_ranks) {
            let coef = s as f64 * link.rank as f64;
            let w = weights[k][link.item];
            match link.next {
                Some(next) => lp.add_constraint(
                    format!("{prefix}_step_k{k}_{}_{next}", link.item),
                    [(w, coef), (weights[k][next], -coef), (z, -1.0)],
                    Sense::Ge,
                    0.0,
                ),
                None => lp.add_constraint(
                    format!("{prefix}_last_k{k}_{}", link.item),
                    [(w, coef), (z, -1.0)],
                    Sense::Ge,
                    0.0,
                ),
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpaSolution {
    pub items: Vec<String>,
    /// `expert_weights[k][j]`: weight of item `j` attributed by expert `k`.
    pub expert_weights: Vec<Vec<f64>>,
    pub objective: f64,
}

impl OpaSolution {
    pub fn aggregate(&self) -> Vec<f64> {
        let n = self.items.len();
        let mut out = vec![0.0; n];
        for row in &self.expert_weights {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w;
            }
        }
        out
    }
}

pub fn solve_opa(instance: &RankingInstance) -> Result<OpaSolution> {
    instance.validate()?;
    let n = instance.items.len();
    let mut lp = LpProblem::maximize();
    let weights: Vec<Vec<VarId>> = (0..instance.experts.len())
        .map(|k| (0..n).map(|j| lp.add_nonneg(format!("w_{k}_{j}"))).collect())
        .collect();
    let z = lp.add_free("Z");
    lp.set_objective(z, 1.0);
    let priorities: Vec<u32> = instance.experts.iter().map(|e| e.rank).collect();
    let ranks: Vec<Vec<u32>> = instance.experts.iter().map(|e| e.item_ranks.clone()).collect();
    add_priority_rows(&mut lp, "opa", &priorities, &ranks, &weights, z);
    lp.add_constraint("normalise", weights.iter().flatten().map(|w| (*w, 1.0)), Sense::Eq, 1.0);

    let sol = lp.solve()?;
    if !sol.is_optimal() {
        return Err(Error::Internal {
            message: format!("priority LP ended {:?} on a valid ranking instance", sol.status),
            dump: lp.to_string(),
        });
    }
    Ok(OpaSolution {
        items: instance.items.clone(),
        expert_weights: weights
            .iter()
            .map(|row| row.iter().map(|w| sol.value(*w).max(0.0)).collect())
            .collect(),
        objective: sol.value(z),
    })
}

/// Item name paired with its weight summed over experts.
pub fn aggregate_weights(solution: &OpaSolution) -> Vec<(String, f64)> {
    solution.items.iter().cloned().zip(solution.aggregate()).collect()
}

/// Weights and optimum of a single expert ranking `n` items without ties:
/// `w_r = (1/n) * sum_{h=r}^{n} 1/h`, `Z* = 1/n`.
pub fn closed_form_single_expert(n: usize) -> Result<(Vec<f64>, f64)> {
    if n == 0 {
        return Err(Error::validation("closed form needs at least one item"));
    }
    let nf = n as f64;
    let weights = (1..=n)
        .map(|r| (r..=n).map(|h| 1.0 / h as f64).sum::<f64>() / nf)
        .collect();
    Ok((weights, 1.0 / nf))
}
