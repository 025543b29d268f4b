//! `metrics.json`. Every key is always present; values that a command does
//! not compute are `null`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: Option<f64>,
    pub mean_support: Option<f64>,
    pub epochs: Option<usize>,
    pub seconds_encode: Option<f64>,
    pub seconds_cluster: Option<f64>,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
