use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which hedge-ratio model (and therefore which feature layout) is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelVariant {
    /// TTM, BS delta.
    Dnn2,
    /// TTM, BS delta, sentiment (VIX for calls, index return for puts).
    Dnn3,
    /// TTM, BS delta, moneyness.
    Dnn2Plus,
    /// TTM, BS delta, moneyness, sentiment.
    Dnn3Plus,
    /// TTM, BS delta, moneyness, VIX and index return.
    Dnn3Star,
    /// Sentiment history through a GRU, TTM and BS delta at the head.
    DnnGru,
    /// Hull-White regression on the practitioner Greeks.
    Hw,
    /// The practitioner Black-Scholes delta itself.
    BsBaseline,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 8] = [
        ModelVariant::Dnn2,
        ModelVariant::Dnn3,
        ModelVariant::Dnn2Plus,
        ModelVariant::Dnn3Plus,
        ModelVariant::Dnn3Star,
        ModelVariant::DnnGru,
        ModelVariant::Hw,
        ModelVariant::BsBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Dnn2 => "dnn2",
            ModelVariant::Dnn3 => "dnn3",
            ModelVariant::Dnn2Plus => "dnn2+",
            ModelVariant::Dnn3Plus => "dnn3+",
            ModelVariant::Dnn3Star => "dnn3*",
            ModelVariant::DnnGru => "dnn-gru",
            ModelVariant::Hw => "hw",
            ModelVariant::BsBaseline => "bs",
        }
    }

    /// True for the five feedforward variants.
    pub fn is_feedforward(self) -> bool {
        matches!(
            self,
            ModelVariant::Dnn2
                | ModelVariant::Dnn3
                | ModelVariant::Dnn2Plus
                | ModelVariant::Dnn3Plus
                | ModelVariant::Dnn3Star
        )
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = match s.trim().to_ascii_lowercase().as_str() {
            "dnn2" => ModelVariant::Dnn2,
            "dnn3" => ModelVariant::Dnn3,
            "dnn2+" | "dnn2plus" => ModelVariant::Dnn2Plus,
            "dnn3+" | "dnn3plus" => ModelVariant::Dnn3Plus,
            "dnn3*" | "dnn3star" => ModelVariant::Dnn3Star,
            "dnn-gru" | "dnngru" | "gru" => ModelVariant::DnnGru,
            "hw" | "hull-white" => ModelVariant::Hw,
            "bs" | "bs-baseline" | "bsbaseline" => ModelVariant::BsBaseline,
            other => return Err(Error::Domain(format!("unknown model variant `{other}`"))),
        };
        Ok(v)
    }
}
