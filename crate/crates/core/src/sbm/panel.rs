use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub role: Role,
    #[serde(default)]
    pub unit: String,
}

/// Cross-section of `n` units observed on `r` inputs and `s` outputs.
///
/// All entries are strictly positive and finite; the constructor rejects
/// anything else with the offending unit and column.
#[derive(Debug, Clone, PartialEq)]
pub struct DmuPanel {
    dmu_ids: Vec<String>,
    inputs: Vec<VariableSpec>,
    outputs: Vec<VariableSpec>,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableStats {
    pub name: String,
    pub role: Role,
    pub unit: String,
    pub observations: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single unit.
    pub std_dev: f64,
}

impl DmuPanel {
    pub fn new(
        dmu_ids: Vec<String>,
        inputs: Vec<VariableSpec>,
        outputs: Vec<VariableSpec>,
        x: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = dmu_ids.len();
        if n == 0 {
            return Err(Error::validation("panel has no units"));
        }
        if inputs.is_empty() || outputs.is_empty() {
            return Err(Error::validation("panel needs at least one input and one output"));
        }
        if x.len() != n || y.len() != n {
            return Err(Error::validation("panel data rows do not match the number of units"));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &dmu_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::validation(format!("duplicate unit id '{id}'")));
            }
        }
        let mut names = std::collections::HashSet::new();
        for v in inputs.iter().chain(&outputs) {
            if !names.insert(v.name.as_str()) {
                return Err(Error::validation(format!("duplicate variable '{}'", v.name)));
            }
        }
        for (i, id) in dmu_ids.iter().enumerate() {
            if x[i].len() != inputs.len() || y[i].len() != outputs.len() {
                return Err(Error::validation(format!("unit '{id}' has the wrong number of values")));
            }
            let cells = inputs.iter().zip(&x[i]).chain(outputs.iter().zip(&y[i]));
            for (spec, &v) in cells {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::validation(format!(
                        "unit '{id}' (row {}), variable '{}': value {v} is not strictly positive",
                        i + 1,
                        spec.name
                    )));
                }
            }
        }
        Ok(DmuPanel {
            dmu_ids,
            inputs,
            outputs,
            x,
            y,
        })
    }

    pub fn len(&self) -> usize {
        self.dmu_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dmu_ids.is_empty()
    }

    pub fn dmu_ids(&self) -> &[String] {
        &self.dmu_ids
    }

    pub fn dmu_index(&self, id: &str) -> Option<usize> {
        self.dmu_ids.iter().position(|d| d == id)
    }

    pub fn inputs(&self) -> &[VariableSpec] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[VariableSpec] {
        &self.outputs
    }

    /// Inputs followed by outputs, the order used for variable weights.
    pub fn variables(&self) -> impl Iterator<Item = &VariableSpec> {
        self.inputs.iter().chain(&self.outputs)
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables().map(|v| v.name.clone()).collect()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn x(&self, dmu: usize, input: usize) -> f64 {
        self.x[dmu][input]
    }

    pub fn y(&self, dmu: usize, output: usize) -> f64 {
        self.y[dmu][output]
    }

    pub fn input_row(&self, dmu: usize) -> &[f64] {
        &self.x[dmu]
    }

    pub fn output_row(&self, dmu: usize) -> &[f64] {
        &self.y[dmu]
    }

    pub fn input_column(&self, j: usize) -> Vec<f64> {
        self.x.iter().map(|row| row[j]).collect()
    }

    pub fn output_column(&self, j: usize) -> Vec<f64> {
        self.y.iter().map(|row| row[j]).collect()
    }

    /// Column of variable `name`, inputs and outputs alike.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        if let Some(j) = self.inputs.iter().position(|v| v.name == name) {
            return Some(self.input_column(j));
        }
        self.outputs
            .iter()
            .position(|v| v.name == name)
            .map(|j| self.output_column(j))
    }

    pub fn max_input(&self, j: usize) -> f64 {
        self.x.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_output(&self, j: usize) -> f64 {
        self.y.iter().map(|row| row[j]).fold(f64::INFINITY, f64::min)
    }

    /// Copy with column `j` of the inputs multiplied by `factor`.
    pub fn scale_input(&self, j: usize, factor: f64) -> Result<Self> {
        let mut x = self.x.clone();
        for row in x.iter_mut() {
            row[j] *= factor;
        }
        DmuPanel::new(
            self.dmu_ids.clone(),
            self.inputs.clone(),
            self.outputs.clone(),
            x,
            self.y.clone(),
        )
    }

    /// Copy with output `name` replaced by `values`, one per unit.
    pub fn with_output_column(&self, name: &str, values: &[f64]) -> Result<Self> {
        let j = self
            .outputs
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::validation(format!("no output variable named '{name}'")))?;
        if values.len() != self.len() {
            return Err(Error::validation(format!(
                "column '{name}' needs {} values, got {}",
                self.len(),
                values.len()
            )));
        }
        let mut y = self.y.clone();
        for (row, v) in y.iter_mut().zip(values) {
            row[j] = *v;
        }
        DmuPanel::new(
            self.dmu_ids.clone(),
            self.inputs.clone(),
            self.outputs.clone(),
            self.x.clone(),
            y,
        )
    }

    /// Replaces the named outputs by their reciprocals. Meant for undesirable
    /// outputs; the default pipeline leaves them untransformed.
    pub fn reciprocal_outputs(&self, names: &[String]) -> Result<Self> {
        let mut y = self.y.clone();
        for name in names {
            let j = self
                .outputs
                .iter()
                .position(|v| &v.name == name)
                .ok_or_else(|| Error::validation(format!("no output variable named '{name}'")))?;
            for row in y.iter_mut() {
                row[j] = 1.0 / row[j];
            }
        }
        DmuPanel::new(
            self.dmu_ids.clone(),
            self.inputs.clone(),
            self.outputs.clone(),
            self.x.clone(),
            y,
        )
    }

    pub fn describe(&self) -> Vec<VariableStats> {
        let cols = (0..self.num_inputs())
            .map(|j| (&self.inputs[j], self.input_column(j)))
            .chain((0..self.num_outputs()).map(|j| (&self.outputs[j], self.output_column(j))));
        cols.map(|(spec, col)| {
            let n = col.len();
            let mean = col.iter().sum::<f64>() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            VariableStats {
                name: spec.name.clone(),
                role: spec.role,
                unit: spec.unit.clone(),
                observations: n,
                min: col.iter().copied().fold(f64::INFINITY, f64::min),
                max: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean,
                std_dev: if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 },
            }
        })
        .collect()
    }
}
