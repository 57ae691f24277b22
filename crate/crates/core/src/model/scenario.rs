use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One offline problem instance.
///
/// All arrival and gain sequences have length `horizon`. Values are finite;
/// gains are strictly positive so that the rate function stays invertible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct ScenarioInstance {
    horizon: usize,
    initial_energy: f64,
    initial_queue: f64,
    energy_arrivals: Vec<f64>,
    data_arrivals: Vec<f64>,
    gains: Vec<f64>,
}

/// On-disk layout: `{"T", "E0", "Q0", "H", "D", "g"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(rename = "E0")]
    initial_energy: f64,
    #[serde(rename = "Q0")]
    initial_queue: f64,
    #[serde(rename = "H")]
    energy_arrivals: Vec<f64>,
    #[serde(rename = "D")]
    data_arrivals: Vec<f64>,
    #[serde(rename = "g")]
    gains: Vec<f64>,
}

impl TryFrom<ScenarioFile> for ScenarioInstance {
    type Error = Error;

    fn try_from(f: ScenarioFile) -> Result<Self> {
        if f.energy_arrivals.len() != f.horizon {
            return Err(Error::Input(format!(
                "H has length {} but T = {}",
                f.energy_arrivals.len(),
                f.horizon
            )));
        }
        ScenarioInstance::new(
            f.initial_energy,
            f.initial_queue,
            f.energy_arrivals,
            f.data_arrivals,
            f.gains,
        )
    }
}

impl From<ScenarioInstance> for ScenarioFile {
    fn from(s: ScenarioInstance) -> Self {
        ScenarioFile {
            horizon: s.horizon,
            initial_energy: s.initial_energy,
            initial_queue: s.initial_queue,
            energy_arrivals: s.energy_arrivals,
            data_arrivals: s.data_arrivals,
            gains: s.gains,
        }
    }
}

fn check_nonneg(name: &str, values: &[f64]) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Input(format!(
                "{name}[{}] = {v} must be finite and nonnegative",
                i + 1
            )));
        }
    }
    Ok(())
}

impl ScenarioInstance {
    /// Builds and validates an instance. The horizon is the length of `energy_arrivals`.
    pub fn new(
        initial_energy: f64,
        initial_queue: f64,
        energy_arrivals: Vec<f64>,
        data_arrivals: Vec<f64>,
        gains: Vec<f64>,
    ) -> Result<Self> {
        let horizon = energy_arrivals.len();
        if horizon == 0 {
            return Err(Error::Input("horizon T must be at least 1".into()));
        }
        if data_arrivals.len() != horizon || gains.len() != horizon {
            return Err(Error::Input(format!(
                "arrays must share length T = {horizon} (D has {}, g has {})",
                data_arrivals.len(),
                gains.len()
            )));
        }
        check_nonneg("E0", &[initial_energy])?;
        check_nonneg("Q0", &[initial_queue])?;
        check_nonneg("H", &energy_arrivals)?;
        check_nonneg("D", &data_arrivals)?;
        for (i, &g) in gains.iter().enumerate() {
            if !g.is_finite() || g <= 0.0 {
                return Err(Error::Input(format!(
                    "g[{}] = {g} must be finite and strictly positive",
                    i + 1
                )));
            }
        }
        Ok(Self {
            horizon,
            initial_energy,
            initial_queue,
            energy_arrivals,
            data_arrivals,
            gains,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization is infallible")
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    pub fn initial_queue(&self) -> f64 {
        self.initial_queue
    }

    pub fn energy_arrivals(&self) -> &[f64] {
        &self.energy_arrivals
    }

    pub fn data_arrivals(&self) -> &[f64] {
        &self.data_arrivals
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Weight `T + 1 - t` of slot `t` (1-based) in the delay objective.
    pub fn weight(&self, t: usize) -> f64 {
        (self.horizon + 1 - t) as f64
    }

    /// Cumulative energy budget `E0 + sum_{i<=t} H_i` for `t = 1..T`.
    pub fn energy_budget(&self) -> Vec<f64> {
        cumulative(self.initial_energy, &self.energy_arrivals)
    }

    /// Cumulative data budget `Q0 + sum_{i<=t} D_i` for `t = 1..T`.
    pub fn data_budget(&self) -> Vec<f64> {
        cumulative(self.initial_queue, &self.data_arrivals)
    }

    pub fn total_energy(&self) -> f64 {
        *self.energy_budget().last().expect("T >= 1")
    }

    pub fn total_data(&self) -> f64 {
        *self.data_budget().last().expect("T >= 1")
    }

    /// Same instance with a different initial battery level.
    pub fn with_initial_energy(&self, initial_energy: f64) -> Result<Self> {
        Self::new(
            initial_energy,
            self.initial_queue,
            self.energy_arrivals.clone(),
            self.data_arrivals.clone(),
            self.gains.clone(),
        )
    }

    pub fn with_initial_queue(&self, initial_queue: f64) -> Result<Self> {
        Self::new(
            self.initial_energy,
            initial_queue,
            self.energy_arrivals.clone(),
            self.data_arrivals.clone(),
            self.gains.clone(),
        )
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn new(start: f64) -> Self {
        Self {
            sum: start,
            carry: 0.0,
        }
    }

    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn cumulative(start: f64, increments: &[f64]) -> Vec<f64> {
    let mut acc = CompensatedSum::new(start);
    increments
        .iter()
        .map(|&x| {
            acc.add(x);
            acc.value()
        })
        .collect()
}
