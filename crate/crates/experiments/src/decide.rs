use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{ExpError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Buy,
    Hold,
    Sell,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Buy => "buy",
            Action::Hold => "hold",
            Action::Sell => "sell",
        })
    }
}

/// Trading rule over two predicted trends. Zero counts as non-positive.
pub fn guided_decision(p1: f64, p2: f64) -> Result<Action> {
    if !p1.is_finite() || !p2.is_finite() {
        return Err(ExpError::NonFinite { p1, p2 });
    }
    Ok(match (p1 > 0.0, p2 > 0.0) {
        (true, true) => Action::Buy,
        (false, false) => Action::Sell,
        _ => Action::Hold,
    })
}
