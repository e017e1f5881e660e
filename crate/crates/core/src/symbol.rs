use serde::{Deserialize, Serialize};

/// A BPSK symbol, `b in {+1, -1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Plus,
    Minus,
}

impl Symbol {
    pub fn value(self) -> f64 {
        match self {
            Symbol::Plus => 1.0,
            Symbol::Minus => -1.0,
        }
    }

    /// `sign(x)`, with zero mapped to `+1`.
    pub fn from_sign(x: f64) -> Self {
        if x < 0.0 {
            Symbol::Minus
        } else {
            Symbol::Plus
        }
    }
}

impl From<bool> for Symbol {
    fn from(bit: bool) -> Self {
        if bit {
            Symbol::Plus
        } else {
            Symbol::Minus
        }
    }
}
