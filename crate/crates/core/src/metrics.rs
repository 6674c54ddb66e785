//! Privacy, efficiency, utility, and composite scores.
//!
//! * `S_p = 1 - 1 / (1 + MSE)` between a true and a reconstructed image.
//! * `CE = 2 sigmoid(-phi * time / traffic)`, with `traffic` counted in
//!   transferred parameters and `time` in seconds.
//! * `PEUM = 1 / (1/acc + 1/CE + 1/S_p)`. This is the harmonic mean of the
//!   three scores divided by three; it is implemented as written, without the
//!   factor of 3.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Image;
use crate::federation::RoundLog;
use crate::nn::{Classifier, ModelError, ParamVector};

pub const DEFAULT_PHI: f64 = 3e6;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("traffic must be > 0")]
    ZeroTraffic,
    #[error("invalid metric input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub phi: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { phi: DEFAULT_PHI }
    }
}

pub fn mse(a: &Image, b: &Image) -> Result<f64, MetricError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricError::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    let sum: f64 = a.pixels().iter().zip(b.pixels()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

pub fn privacy_score_from_mse(mse: f64) -> f64 {
    1.0 - 1.0 / (1.0 + mse)
}

pub fn privacy_score(img_true: &Image, img_pred: &Image) -> Result<f64, MetricError> {
    Ok(privacy_score_from_mse(mse(img_true, img_pred)?))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn communication_efficiency(time: f64, traffic: f64, phi: f64) -> Result<f64, MetricError> {
    if !(traffic > 0.0) {
        return Err(MetricError::ZeroTraffic);
    }
    if !(time >= 0.0) {
        return Err(MetricError::InvalidInput(format!("time must be >= 0, got {time}")));
    }
    Ok(2.0 * sigmoid(-phi * time / traffic))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peum {
    pub value: f64,
    /// False when any input is zero; `value` is then reported as 0.
    pub defined: bool,
}

pub fn peum(acc: f64, ce: f64, s_p: f64) -> Peum {
    if acc <= 0.0 || ce <= 0.0 || s_p <= 0.0 {
        return Peum {
            value: 0.0,
            defined: false,
        };
    }
    Peum {
        value: 1.0 / (1.0 / acc + 1.0 / ce + 1.0 / s_p),
        defined: true,
    }
}

/// Fraction of arg-max predictions equal to the label.
pub fn accuracy<M: Classifier>(model: &M, params: &ParamVector, test: &[(M::Input, usize)]) -> Result<f64, ModelError> {
    if test.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (input, label) in test {
        if model.predict(params, input)? == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTraffic {
    pub round: usize,
    pub seconds: f64,
    pub params_transferred: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub s_p: f64,
    pub ce: f64,
    pub peum: f64,
    pub peum_defined: bool,
    pub phi: f64,
    pub total_seconds: f64,
    pub total_traffic: u64,
    pub per_sample_s_p: Vec<f64>,
    pub rounds: Vec<RoundTraffic>,
}

impl MetricReport {
    /// Accuracy from the final round, CE from total time over total traffic,
    /// and `S_p` as the mean of the per-sample scores.
    pub fn from_runs(logs: &[RoundLog], per_sample_s_p: &[f64], config: &MetricConfig) -> Result<Self, MetricError> {
        let last = logs
            .last()
            .ok_or_else(|| MetricError::InvalidInput("no rounds logged".into()))?;
        if per_sample_s_p.is_empty() {
            return Err(MetricError::InvalidInput("no privacy scores".into()));
        }
        let total_seconds: f64 = logs.iter().map(|l| l.seconds).sum();
        let total_traffic: u64 = logs.iter().map(|l| l.params_transferred).sum();
        let ce = communication_efficiency(total_seconds, total_traffic as f64, config.phi)?;
        let s_p = per_sample_s_p.iter().sum::<f64>() / per_sample_s_p.len() as f64;
        let p = peum(last.accuracy, ce, s_p);
        Ok(Self {
            accuracy: last.accuracy,
            s_p,
            ce,
            peum: p.value,
            peum_defined: p.defined,
            phi: config.phi,
            total_seconds,
            total_traffic,
            per_sample_s_p: per_sample_s_p.to_vec(),
            rounds: logs
                .iter()
                .map(|l| RoundTraffic {
                    round: l.round,
                    seconds: l.seconds,
                    params_transferred: l.params_transferred,
                })
                .collect(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Single-row summary CSV.
    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "accuracy",
            "ce",
            "s_p",
            "peum",
            "peum_defined",
            "phi",
            "total_seconds",
            "total_traffic",
        ])?;
        w.write_record([
            self.accuracy.to_string(),
            self.ce.to_string(),
            self.s_p.to_string(),
            self.peum.to_string(),
            self.peum_defined.to_string(),
            self.phi.to_string(),
            self.total_seconds.to_string(),
            self.total_traffic.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}
