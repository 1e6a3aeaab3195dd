//! Regenerates the synthetic panel and fuel consumption table in `data/`.
//!
//! Usage: `cargo run -p sbm-opa --example synthetic_data -- <dir>`

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbm_opa::io::panel_to_csv;
use sbm_opa::synthetic::provincial_panel;

pub const PANEL_SEED: u64 = 2024;

const FUELS: [&str; 8] = [
    "hard_coal",
    "coke",
    "crude_oil",
    "petrol",
    "kerosene",
    "diesel",
    "heating_oil",
    "natural_gas",
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;
    let panel = provincial_panel(PANEL_SEED)?;
    std::fs::write(dir.join("panel.csv"), panel_to_csv(&panel)?)?;

    let mut rng = ChaCha8Rng::seed_from_u64(PANEL_SEED + 1);
    let mut out = csv::Writer::from_path(dir.join("consumption.csv"))?;
    let mut header = vec!["dmu_id"];
    header.extend(FUELS);
    out.write_record(&header)?;
    let e = panel.column("E").expect("panel has E");
    for (id, energy) in panel.dmu_ids().iter().zip(e) {
        let mut row = vec![id.clone()];
        for share in [0.55, 0.08, 0.12, 0.06, 0.01, 0.07, 0.03, 0.08] {
            let v: f64 = energy * share * rng.random_range(0.6..1.4) * 10.0;
            row.push(format!("{:.2}", v));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
