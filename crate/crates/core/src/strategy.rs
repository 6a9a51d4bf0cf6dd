use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A reading strategy a reader can be assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    ComprehensionMonitoring,
    Paraphrasing,
    Prediction,
    Elaboration,
    Bridging,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::ComprehensionMonitoring,
        Strategy::Paraphrasing,
        Strategy::Prediction,
        Strategy::Elaboration,
        Strategy::Bridging,
    ];

    /// Stable wire name.
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::ComprehensionMonitoring => "ComprehensionMonitoring",
            Strategy::Paraphrasing => "Paraphrasing",
            Strategy::Prediction => "Prediction",
            Strategy::Elaboration => "Elaboration",
            Strategy::Bridging => "Bridging",
        }
    }

    /// Human-readable label.
    pub fn label(self) -> &'static str {
        match self {
            Strategy::ComprehensionMonitoring => "Comprehension Monitoring",
            Strategy::Paraphrasing => "Paraphrasing",
            Strategy::Prediction => "Prediction",
            Strategy::Elaboration => "Elaboration",
            Strategy::Bridging => "Bridging",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown strategy `{0}`")]
pub struct UnknownStrategy(pub String);

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}
