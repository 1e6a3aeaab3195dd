//! Fuel-based CO2 accounting:
//! `CE = sum_i E_i * NCV_i * CEF_i * COF_i * 44/12`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Molar mass ratio of CO2 to carbon.
pub const CO2_PER_CARBON: f64 = 44.0 / 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuelFactor {
    pub fuel: String,
    /// Average net calorific value per physical unit.
    pub ncv: f64,
    /// Carbon content per unit of calorific value.
    pub cef: f64,
    /// Carbon oxidation fraction.
    pub cof: f64,
}

impl FuelFactor {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.ncv) && ok(self.cef) && ok(self.cof)) {
            return Err(Error::validation(format!(
                "fuel '{}': factors must be finite and non-negative",
                self.fuel
            )));
        }
        if self.cof > 1.0 {
            return Err(Error::validation(format!(
                "fuel '{}': oxidation rate {} exceeds 1",
                self.fuel, self.cof
            )));
        }
        Ok(())
    }

    /// CO2 emitted per physical unit burnt.
    pub fn per_unit(&self) -> f64 {
        self.ncv * self.cef * self.cof * CO2_PER_CARBON
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionResult {
    pub per_fuel: BTreeMap<String, f64>,
    pub total: f64,
    pub units: String,
}

/// Emissions of one unit's fuel mix. Every fuel with a consumption entry
/// needs a factor.
pub fn compute_co2(consumption: &BTreeMap<String, f64>, factors: &[FuelFactor]) -> Result<EmissionResult> {
    let mut by_name = BTreeMap::new();
    for f in factors {
        f.validate()?;
        if by_name.insert(f.fuel.as_str(), f).is_some() {
            return Err(Error::validation(format!("duplicate factor for fuel '{}'", f.fuel)));
        }
    }
    let mut per_fuel = BTreeMap::new();
    for (fuel, &e) in consumption {
        if !(e.is_finite() && e >= 0.0) {
            return Err(Error::validation(format!(
                "consumption of '{fuel}' must be finite and >= 0, got {e}"
            )));
        }
        let factor = by_name
            .get(fuel.as_str())
            .ok_or_else(|| Error::validation(format!("no emission factor for fuel '{fuel}'")))?;
        per_fuel.insert(fuel.clone(), e * factor.per_unit());
    }
    let total = per_fuel.values().sum();
    Ok(EmissionResult {
        per_fuel,
        total,
        units: "consumption units x NCV x CEF (mass of CO2)".into(),
    })
}

/// Per-unit emissions for a consumption table keyed by unit id.
pub fn compute_panel(
    table: &[(String, BTreeMap<String, f64>)],
    factors: &[FuelFactor],
) -> Result<Vec<(String, EmissionResult)>> {
    table
        .iter()
        .map(|(id, row)| {
            compute_co2(row, factors).map(|r| (id.clone(), r)).map_err(|e| match e {
                Error::Validation(m) => Error::validation(format!("unit '{id}': {m}")),
                other => other,
            })
        })
        .collect()
}
