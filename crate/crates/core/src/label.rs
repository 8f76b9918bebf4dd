use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Ground-truth or predicted class of a frame or window. `Attack` is the
/// positive class everywhere metrics are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Benign,
    Attack,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Benign, Label::Attack];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Attack => "attack",
        }
    }

    pub fn is_attack(self) -> bool {
        self == Label::Attack
    }

    pub fn from_attack(attack: bool) -> Self {
        if attack {
            Label::Attack
        } else {
            Label::Benign
        }
    }

    /// 0 for benign, 1 for attack.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "benign" => Ok(Label::Benign),
            "attack" => Ok(Label::Attack),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}
