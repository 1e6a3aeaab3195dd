//! Acceptance criteria 1-10, checked at their stated tolerances.
//!
//! `acceptance_criteria` prints one `PASS`/`FAIL` line per criterion. It fails
//! the test run on any failure except those listed in [`KNOWN_UNMET`], which
//! are still evaluated literally and reported as `FAIL`. A listed criterion
//! that starts passing also fails the run, so the list cannot go stale.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbm_opa::analytics::{anova_f, elbow, kmeans, WeightFrontierMatrix};
use sbm_opa::emissions::{compute_co2, FuelFactor};
use sbm_opa::hybrid::{self, ObjectiveWeights, PolicyRankingSet, PolicyRanks};
use sbm_opa::io;
use sbm_opa::opa::{solve_opa, ExpertRanking, RankingInstance};
use sbm_opa::pipeline;
use sbm_opa::sbm::{self, DmuPanel, Role, VariableSpec, VariableWeights, WeightRule};
use sbm_opa::scenario::enumerate_scenarios;
use sbm_opa::synthetic::{blobs, random_panel};

/// Criteria whose literal statement does not hold for this implementation,
/// with the reason. The analysis is in the decisions ledger.
const KNOWN_UNMET: &[(u32, &str)] = &[(
    3,
    "under constant returns to scale the slack maximum for B is (0, 3), not (1, 1); both give 0.25",
)];

struct Outcome {
    id: u32,
    name: &'static str,
    failures: Vec<String>,
    elapsed: Duration,
}

fn check(failures: &mut Vec<String>, ok: bool, msg: impl FnOnce() -> String) {
    if !ok && failures.len() < 8 {
        failures.push(msg());
    }
}

fn timed(id: u32, name: &'static str, f: impl FnOnce(&mut Vec<String>)) -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    f(&mut failures);
    Outcome {
        id,
        name,
        failures,
        elapsed: start.elapsed(),
    }
}

// 1. Single-expert closed form, n = 1..10.
fn opa_closed_form(f: &mut Vec<String>) {
    let start = Instant::now();
    for n in 1..=10usize {
        let inst = RankingInstance::new(
            (0..n).map(|j| format!("i{j}")).collect(),
            vec![ExpertRanking {
                rank: 1,
                item_ranks: (1..=n as u32).collect(),
            }],
        )
        .unwrap();
        let sol = solve_opa(&inst).unwrap();
        let z = 1.0 / n as f64;
        check(f, (sol.objective - z).abs() <= 1e-6, || {
            format!("n={n}: Z={} vs {z}", sol.objective)
        });
        for r in 1..=n {
            let want = (r..=n).map(|h| 1.0 / h as f64).sum::<f64>() / n as f64;
            let got = sol.expert_weights[0][r - 1];
            check(f, (got - want).abs() <= 1e-6, || {
                format!("n={n} r={r}: {got} vs {want}")
            });
        }
    }
    let t = start.elapsed();
    check(f, t < Duration::from_secs(1), || format!("took {t:?}"));
}

/// Competition ranks of `scores`, highest score first.
fn competition_ranks(scores: &[u32]) -> Vec<u32> {
    scores
        .iter()
        .map(|s| 1 + scores.iter().filter(|o| *o > s).count() as u32)
        .collect()
}

// 2. 1000 random instances: 0 <= Z <= 1 and monotone weights per expert.
fn opa_random_bounds(f: &mut Vec<String>) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..1000 {
        let m = rng.random_range(1..=4usize);
        let n = rng.random_range(1..=8usize);
        let expert_scores: Vec<u32> = (0..m).map(|_| rng.random_range(0..m as u32)).collect();
        let expert_ranks = competition_ranks(&expert_scores);
        let experts: Vec<ExpertRanking> = expert_ranks
            .iter()
            .map(|&rank| {
                let scores: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
                ExpertRanking {
                    rank,
                    item_ranks: competition_ranks(&scores),
                }
            })
            .collect();
        let inst = RankingInstance::new((0..n).map(|j| format!("i{j}")).collect(), experts).unwrap();
        let sol = match solve_opa(&inst) {
            Ok(s) => s,
            Err(e) => {
                check(f, false, || format!("case {case}: {e}"));
                continue;
            }
        };
        check(f, (0.0..=1.0).contains(&sol.objective), || {
            format!("case {case}: Z = {}", sol.objective)
        });
        for (k, ex) in inst.experts.iter().enumerate() {
            let w = &sol.expert_weights[k];
            for a in 0..n {
                for b in 0..n {
                    if ex.item_ranks[a] < ex.item_ranks[b] {
                        check(f, w[a] >= w[b], || {
                            format!(
                                "case {case} expert {k}: rank {} weight {} < rank {} weight {}",
                                ex.item_ranks[a], w[a], ex.item_ranks[b], w[b]
                            )
                        });
                    }
                }
            }
        }
    }
    let t = start.elapsed();
    check(f, t < Duration::from_secs(30), || format!("took {t:?}"));
}

fn single_io(rows: &[(&str, f64, f64)]) -> DmuPanel {
    let spec = |name: &str, role| VariableSpec {
        name: name.into(),
        role,
        unit: String::new(),
    };
    DmuPanel::new(
        rows.iter().map(|r| r.0.to_string()).collect(),
        vec![spec("x", Role::Input)],
        vec![spec("y", Role::Output)],
        rows.iter().map(|r| vec![r.1]).collect(),
        rows.iter().map(|r| vec![r.2]).collect(),
    )
    .unwrap()
}

// 3. Two-unit micro instance.
fn sbm_micro(f: &mut Vec<String>) {
    let panel = single_io(&[("A", 1.0, 2.0), ("B", 2.0, 1.0)]);
    let w = VariableWeights::unit(&panel);
    let a = sbm::assess(&panel, &w, 0.0, 0).unwrap();
    let b = sbm::assess(&panel, &w, 0.0, 1).unwrap();
    check(f, (a.score - 1.0).abs() <= 1e-9, || format!("gamma_A = {}", a.score));
    check(f, (b.score - 0.25).abs() <= 1e-9, || format!("gamma_B = {}", b.score));
    let slacks = (b.input_slacks[0], b.output_slacks[0]);
    check(
        f,
        (slacks.0 - 1.0).abs() <= 1e-9 && (slacks.1 - 1.0).abs() <= 1e-9,
        || format!("slacks of B = ({}, {}), expected (1, 1)", slacks.0, slacks.1),
    );
}

/// The 100 random panels shared by criteria 4 and 5.
fn random_cases() -> Vec<(u64, DmuPanel, f64)> {
    (0..100u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=8usize);
            let r = rng.random_range(1..=3usize);
            let s = rng.random_range(1..=3usize);
            let eps = [0.0, 0.01, 0.05][(seed % 3) as usize];
            (seed, random_panel(1000 + seed, n, r, s).unwrap(), eps)
        })
        .collect()
}

// 4. Primal and dual optima agree per unit.
fn strong_duality(f: &mut Vec<String>) {
    let mut worst: f64 = 0.0;
    for (seed, panel, eps) in random_cases() {
        let w = sbm::default_weights(&panel, WeightRule::Max).unwrap();
        for l in 0..panel.len() {
            let p = sbm::primal_objective(&panel, &w, eps, l).unwrap();
            let d = sbm::solve_dual(&panel, &w, eps, l).unwrap().objective;
            worst = worst.max((p - d).abs());
            check(f, (p - d).abs() <= 1e-6, || {
                format!("seed {seed} eps {eps} unit {l}: primal {p} dual {d}")
            });
        }
    }
    if !f.is_empty() {
        f.push(format!("largest gap {worst:e}"));
    }
}

// 5. Tape ordering and sensitivity.
fn tape_and_sensitivity(f: &mut Vec<String>) {
    for (seed, panel, eps) in random_cases() {
        let w = sbm::default_weights(&panel, WeightRule::Max).unwrap();
        for l in 0..panel.len() {
            let a = sbm::assess(&panel, &w, eps, l).unwrap();
            for j in 0..panel.num_inputs() {
                let (lo, mid, hi) = (a.inner_inputs[j], a.target_inputs[j], a.outer_inputs[j]);
                check(f, lo <= mid && mid <= hi, || {
                    format!("seed {seed} unit {l} input {j}: {lo} {mid} {hi}")
                });
            }
            for j in 0..panel.num_outputs() {
                let (lo, mid, hi) = (a.outer_outputs[j], a.target_outputs[j], a.inner_outputs[j]);
                check(f, lo <= mid && mid <= hi, || {
                    format!("seed {seed} unit {l} output {j}: {lo} {mid} {hi}")
                });
            }
            check(f, a.sensitivity >= 1.0, || {
                format!("seed {seed} unit {l}: eta = {}", a.sensitivity)
            });
            if eps == 0.0 {
                check(f, a.sensitivity == 1.0, || {
                    format!("seed {seed} unit {l}: eta = {} at eps 0", a.sensitivity)
                });
            }
        }
    }
}

// 6. Rescaling an input column leaves every score unchanged.
fn units_invariance(f: &mut Vec<String>) {
    for (seed, panel, eps) in random_cases().into_iter().step_by(4) {
        let base_w = sbm::default_weights(&panel, WeightRule::Max).unwrap();
        let base: Vec<f64> = (0..panel.len())
            .map(|l| sbm::assess(&panel, &base_w, eps, l).unwrap().score)
            .collect();
        for j in 0..panel.num_inputs() {
            for c in [0.1, 10.0] {
                let scaled = panel.scale_input(j, c).unwrap();
                let w = sbm::default_weights(&scaled, WeightRule::Max).unwrap();
                for (l, g) in base.iter().enumerate() {
                    let h = sbm::assess(&scaled, &w, eps, l).unwrap().score;
                    check(f, (g - h).abs() <= 1e-9, || {
                        format!("seed {seed} input {j} c {c} unit {l}: {g} vs {h}")
                    });
                }
            }
        }
    }
}

// 7. Hybrid model on five units, three policies and six scenarios.
fn hybrid_replay(f: &mut Vec<String>) {
    let start = Instant::now();
    let panel = random_panel(77, 5, 2, 2).unwrap();
    let names: Vec<String> = ["P1", "P2", "P3"].map(String::from).to_vec();
    let scenarios = enumerate_scenarios(&names).unwrap();
    let expected_orders = [
        ["P1", "P2", "P3"],
        ["P1", "P3", "P2"],
        ["P2", "P1", "P3"],
        ["P2", "P3", "P1"],
        ["P3", "P1", "P2"],
        ["P3", "P2", "P1"],
    ];
    check(f, scenarios.len() == 6, || format!("{} scenarios", scenarios.len()));
    for (i, (s, want)) in scenarios.iter().zip(expected_orders).enumerate() {
        check(f, s.id == format!("S{}", i + 1) && s.policy_order == want, || {
            format!("scenario {} is {:?}", s.id, s.policy_order)
        });
    }
    let ranks: [Vec<u32>; 3] = [vec![2, 1, 3, 4], vec![4, 3, 1, 2], vec![1, 3, 2, 2]];
    for spec in &scenarios {
        let set = PolicyRankingSet::new(
            spec.id.clone(),
            panel.variable_names(),
            names
                .iter()
                .zip(&ranks)
                .map(|(n, r)| PolicyRanks {
                    name: n.clone(),
                    ranks: r.clone(),
                })
                .collect(),
            spec.priorities(&names).unwrap(),
        )
        .unwrap();
        let pure = solve_opa(&set.as_instance()).unwrap().aggregate();
        for weights in [ObjectiveWeights::default(), ObjectiveWeights::new(0.0, 1.0).unwrap()] {
            for l in 0..panel.len() {
                let sol = hybrid::solve_hybrid(&panel, &set, 0.01, weights, l).unwrap();
                let replay = sol.replay(&panel, &set).unwrap();
                check(f, replay.max_violation <= 1e-7, || {
                    format!("{} unit {l}: violation {}", spec.id, replay.max_violation)
                });
                let total: f64 = sol.preference_weights.iter().flatten().sum();
                check(f, (total - 1.0).abs() <= 1e-7, || {
                    format!("{} unit {l}: sum w = {total}", spec.id)
                });
                if weights.up == 1.0 {
                    for a in 0..pure.len() {
                        for b in 0..pure.len() {
                            if pure[a] > pure[b] + 1e-9 {
                                check(f, sol.variable_weights[a] > sol.variable_weights[b], || {
                                    format!("{} unit {l}: W order differs from OPA at ({a}, {b})", spec.id)
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    let t = start.elapsed();
    check(f, t < Duration::from_secs(60), || format!("took {t:?}"));
}

// 8. Emission accounting.
fn emission_accounting(f: &mut Vec<String>) {
    let unit = [FuelFactor {
        fuel: "f".into(),
        ncv: 1.0,
        cef: 1.0,
        cof: 1.0,
    }];
    let one = compute_co2(&[("f".to_string(), 1.0)].into(), &unit).unwrap().total;
    check(f, (one - 44.0 / 12.0).abs() <= 1e-12, || format!("unit case {one}"));

    let factors = io::parse_factors(
        &std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fuel_factors.csv")).unwrap(),
        "fuel_factors.csv",
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..200 {
        let draw = |rng: &mut ChaCha8Rng| -> std::collections::BTreeMap<String, f64> {
            factors
                .iter()
                .map(|ff| (ff.fuel.clone(), rng.random_range(0.0..500.0)))
                .collect()
        };
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let (s, t): (f64, f64) = (rng.random_range(0.0..5.0), rng.random_range(0.0..5.0));
        let ce = |c: &std::collections::BTreeMap<String, f64>| compute_co2(c, &factors).unwrap().total;
        let mixed: std::collections::BTreeMap<String, f64> =
            a.iter().map(|(k, v)| (k.clone(), s * v + t * b[k])).collect();
        let lhs = ce(&mixed);
        let rhs = s * ce(&a) + t * ce(&b);
        check(f, (lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0), || {
            format!("case {case}: linearity {lhs} vs {rhs}")
        });
        let scaled: std::collections::BTreeMap<String, f64> = a.iter().map(|(k, v)| (k.clone(), s * v)).collect();
        let (h, g) = (ce(&scaled), s * ce(&a));
        check(f, (h - g).abs() <= 1e-9 * g.abs().max(1.0), || {
            format!("case {case}: homogeneity {h} vs {g}")
        });
    }
}

// 9. Clustering on three separated blobs.
fn clustering(f: &mut Vec<String>) {
    let centers = vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.7, 0.2], vec![0.2, 0.1, 0.7]];
    let rows = blobs(9, &centers, 10, 0.02);
    let truth: Vec<usize> = (0..30).map(|i| i / 10).collect();
    let matrix = WeightFrontierMatrix::new(
        (0..30).map(|i| format!("u{i:02}")).collect(),
        vec!["a".into(), "b".into(), "c".into()],
        rows,
        (0..30).map(|i| 1.0 - i as f64 / 100.0).collect(),
    )
    .unwrap();
    let report = kmeans(&matrix, 3, 5).unwrap();
    let same = |x: &[usize], i: usize, j: usize| x[i] == x[j];
    let exact = (0..30).all(|i| (0..30).all(|j| same(&truth, i, j) == same(&report.assignments, i, j)));
    check(f, exact, || format!("partition {:?}", report.assignments));
    let sil = report.silhouette.value.unwrap_or(f64::NAN);
    check(f, sil > 0.9, || format!("silhouette {sil}"));
    let e = elbow(&matrix, 1..=6, 5).unwrap();
    check(f, e.suggested_k == 3, || format!("elbow suggests {}", e.suggested_k));
    let anova = anova_f(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0, 0, 0, 1, 1, 1]).unwrap();
    let fv = anova.f.unwrap_or(f64::NAN);
    check(f, (fv - 13.5).abs() <= 1e-9, || format!("F = {fv}"));
    let again = kmeans(&matrix, 3, 5).unwrap();
    check(f, again == report, || "rerun differs".into());
}

// 10. End-to-end determinism on the shipped panel.
fn pipeline_determinism(f: &mut Vec<String>) {
    let config = io::load_run_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/run.json")).unwrap();
    let first = pipeline::run_pipeline(&config).unwrap();
    let second = pipeline::run_pipeline(&config).unwrap();
    let a = pipeline::render_outputs(&first).unwrap();
    let b = pipeline::render_outputs(&second).unwrap();
    check(f, a == b, || "outputs differ between runs".into());
    check(f, first.scenarios.len() == 6, || {
        format!("{} scenario sections", first.scenarios.len())
    });
    check(f, first.meta.dmu_count == 30, || {
        format!("{} units", first.meta.dmu_count)
    });
    for s in &first.scenarios {
        check(f, s.records.len() + s.failures.len() == 30, || {
            format!("scenario {} covers {} units", s.id, s.records.len() + s.failures.len())
        });
        check(f, s.records.iter().all(|r| r.scenario_id == s.id), || {
            format!("scenario {} has foreign records", s.id)
        });
    }
    check(f, first.comparison.len() == 30, || {
        format!("{} comparison rows", first.comparison.len())
    });
    let json = &a[0].1;
    let parsed = pipeline::report_from_json(json, "report.json").unwrap();
    check(f, parsed == first, || {
        "report JSON does not parse back to the same report".into()
    });
}

#[test]
fn acceptance_criteria() {
    let outcomes = vec![
        timed(1, "OPA closed form", opa_closed_form),
        timed(2, "OPA bounds on random instances", opa_random_bounds),
        timed(3, "delta-SBM micro instance", sbm_micro),
        timed(4, "strong duality", strong_duality),
        timed(5, "tape ordering and sensitivity", tape_and_sensitivity),
        timed(6, "units invariance", units_invariance),
        timed(7, "hybrid constraint replay", hybrid_replay),
        timed(8, "emission accounting", emission_accounting),
        timed(9, "clustering", clustering),
        timed(10, "pipeline determinism", pipeline_determinism),
    ];
    // Written past the test harness capture so the lines always show.
    let mut out = std::io::stdout().lock();
    let mut unexpected = Vec::new();
    for o in &outcomes {
        let known = KNOWN_UNMET.iter().find(|k| k.0 == o.id);
        let verdict = if o.failures.is_empty() { "PASS" } else { "FAIL" };
        writeln!(out, "criterion {:>2} {verdict} {} ({:.2?})", o.id, o.name, o.elapsed).unwrap();
        for msg in &o.failures {
            writeln!(out, "    {msg}").unwrap();
        }
        match (o.failures.is_empty(), known) {
            (false, Some((_, why))) => writeln!(out, "    known unmet: {why}").unwrap(),
            (false, None) => unexpected.push(format!("criterion {} failed", o.id)),
            (true, Some(_)) => unexpected.push(format!("criterion {} passes but is listed as unmet", o.id)),
            (true, None) => {}
        }
    }
    out.flush().unwrap();
    assert!(unexpected.is_empty(), "{unexpected:?}");
}
