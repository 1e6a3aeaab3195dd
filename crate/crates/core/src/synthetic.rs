//! Deterministic synthetic data: random panels for property checks, a
//! 30-unit panel shaped like a provincial industry cross-section, and
//! clustered weight matrices.
//!
//! Nothing here is real data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::sbm::{DmuPanel, Role, VariableSpec};

fn specs(prefix: &str, role: Role, count: usize) -> Vec<VariableSpec> {
    (0..count)
        .map(|j| VariableSpec {
            name: format!("{prefix}{}", j + 1),
            role,
            unit: String::new(),
        })
        .collect()
}

/// `n` units with `r` inputs and `s` outputs drawn uniformly from `[1, 10)`.
pub fn random_panel(seed: u64, n: usize, r: usize, s: usize) -> Result<DmuPanel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..n)
        .map(|_| (0..r).map(|_| rng.random_range(1.0..10.0)).collect())
        .collect();
    let y = (0..n)
        .map(|_| (0..s).map(|_| rng.random_range(1.0..10.0)).collect())
        .collect();
    DmuPanel::new(
        (0..n).map(|i| format!("D{:02}", i + 1)).collect(),
        specs("x", Role::Input, r),
        specs("y", Role::Output, s),
        x,
        y,
    )
}

/// Thirty units over inputs `L, K, T, E` and outputs `Y, C`, with magnitudes
/// in the range of published provincial statistics. Values are generated from
/// a latent size factor plus noise and rounded to two decimals.
pub fn provincial_panel(seed: u64) -> Result<DmuPanel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let round2 = |v: f64| (v * 100.0).round() / 100.0;
    let mut x = Vec::with_capacity(30);
    let mut y = Vec::with_capacity(30);
    for _ in 0..30 {
        let size: f64 = rng.random_range(0.05..1.0);
        let tech: f64 = rng.random_range(0.3..1.7);
        let carbon: f64 = rng.random_range(0.4..1.6);
        let eff: f64 = rng.random_range(0.5..1.5);
        let labour = round2(20.0 + 1200.0 * size * rng.random_range(0.7..1.3));
        let capital = round2(1500.0 + 30000.0 * size * rng.random_range(0.7..1.3));
        let technology = round2(15.0 + 2500.0 * size * tech * rng.random_range(0.6..1.2));
        let energy = round2(0.8 + 90.0 * size * carbon * rng.random_range(0.8..1.2));
        let output = round2(2700.0 + 150000.0 * size * eff * (0.6 + 0.4 * tech) / 1.4);
        let emissions = round2(1.4 + 2.8 * energy * rng.random_range(0.85..1.15));
        x.push(vec![labour, capital, technology, energy]);
        y.push(vec![output, emissions]);
    }
    let var = |name: &str, role, unit: &str| VariableSpec {
        name: name.into(),
        role,
        unit: unit.into(),
    };
    DmuPanel::new(
        (1..=30).map(|i| format!("P{i:02}")).collect(),
        vec![
            var("L", Role::Input, "10^4 persons"),
            var("K", Role::Input, "100 million RMB"),
            var("T", Role::Input, "100 million RMB"),
            var("E", Role::Input, "10^6 tons"),
        ],
        vec![
            var("Y", Role::Output, "100 million RMB"),
            var("C", Role::Output, "10^6 tons"),
        ],
        x,
        y,
    )
}

/// `per_blob` points around each of `centers` with uniform noise of
/// half-width `spread`; rows are returned blob by blob.
pub fn blobs(seed: u64, centers: &[Vec<f64>], per_blob: usize, spread: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(centers.len() * per_blob);
    for c in centers {
        for _ in 0..per_blob {
            rows.push(c.iter().map(|v| v + rng.random_range(-spread..spread)).collect());
        }
    }
    rows
}
