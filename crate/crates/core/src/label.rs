use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Binary class of an instrument. `Reduced` is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Reduced,
    Unreduced,
}

impl Label {
    /// +1 for reduced, -1 for unreduced.
    pub fn sign(self) -> f64 {
        match self {
            Label::Reduced => 1.0,
            Label::Unreduced => -1.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Reduced
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Reduced => "reduced",
            Label::Unreduced => "unreduced",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "reduced" => Ok(Label::Reduced),
            "unreduced" => Ok(Label::Unreduced),
            other => Err(Error::InvalidInput(format!("unknown label {other:?}"))),
        }
    }
}
