//! Per-symbol arithmetic cost of each receiver as closed-form counts.
//!
//! | algorithm      | multiplications                      | additions                        |
//! |----------------|--------------------------------------|----------------------------------|
//! | full-rank LMS  | 2M + 1                               | 2M                               |
//! | full-rank MBER | 4M + 1                               | 4M - 1                           |
//! | MWF-LMS        | DM^2 - M^2 + 2DM + 4D + 1            | DM^2 - M^2 + 3D - 2              |
//! | MWF-MBER       | (D+1)M^2 + (3D+1)M + 3D + M + 10     | (D-1)M^2 + (2D-1)M + 2D + M + 1  |
//! | EIG            | O(M^3)                               | O(M^3)                           |
//! | JIO-LMS        | 3DM + M + 3D + 6                     | 2DM + M + 4D - 2                 |
//! | JIO-MBER       | 6MD + 5D + M + 11                    | 5MD + D - M - 1                  |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineKind;
use crate::error::{Error, Result};
use crate::jio_mber::JioMberReceiver;
use crate::linalg::op_count::{self, OpCount};
use crate::linalg::{ComplexVector, C64};
use crate::symbol::Symbol;

/// Largest antenna count accepted by [`count_ops`].
pub const MAX_ANTENNAS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    JioMber,
    Baseline(BaselineKind),
}

impl Algorithm {
    /// Rows of the complexity table, in display order.
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Baseline(BaselineKind::FullRankLms),
        Algorithm::Baseline(BaselineKind::FullRankMber),
        Algorithm::Baseline(BaselineKind::MwfLms),
        Algorithm::Baseline(BaselineKind::MwfMber),
        Algorithm::Baseline(BaselineKind::Eig),
        Algorithm::Baseline(BaselineKind::JioLms),
        Algorithm::JioMber,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::JioMber => "jio-mber",
            Algorithm::Baseline(kind) => kind.label(),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Complexity {
    Counts { multiplications: u64, additions: u64 },
    /// Cost grows as `M^3`; no exact count is defined.
    CubicInM,
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Complexity::Counts {
                multiplications,
                additions,
            } => write!(f, "{multiplications} / {additions}"),
            Complexity::CubicInM => f.write_str("O(M^3) / O(M^3)"),
        }
    }
}

/// Operation counts per received symbol for `M` antennas and rank `D`.
pub fn count_ops(algorithm: Algorithm, m: usize, d: usize) -> Result<Complexity> {
    if m == 0 || d == 0 || d > m || m > MAX_ANTENNAS {
        return Err(Error::UnsupportedDimensions { m, d });
    }
    let (m, d) = (m as i128, d as i128);
    let m2 = m * m;
    let (mul, add) = match algorithm {
        Algorithm::JioMber => (6 * m * d + 5 * d + m + 11, 5 * m * d + d - m - 1),
        Algorithm::Baseline(kind) => match kind {
            BaselineKind::FullRankLms => (2 * m + 1, 2 * m),
            BaselineKind::FullRankMber => (4 * m + 1, 4 * m - 1),
            BaselineKind::MwfLms => (d * m2 - m2 + 2 * d * m + 4 * d + 1, d * m2 - m2 + 3 * d - 2),
            BaselineKind::MwfMber => (
                (d + 1) * m2 + (3 * d + 1) * m + 3 * d + m + 10,
                (d - 1) * m2 + (2 * d - 1) * m + 2 * d + m + 1,
            ),
            BaselineKind::JioLms => (3 * d * m + m + 3 * d + 6, 2 * d * m + m + 4 * d - 2),
            BaselineKind::Eig => return Ok(Complexity::CubicInM),
        },
    };
    Ok(Complexity::Counts {
        multiplications: u64::try_from(mul).expect("counts are non-negative for 1 <= D <= M"),
        additions: u64::try_from(add).expect("counts are non-negative for 1 <= D <= M"),
    })
}

/// Complex multiplications and additions actually performed by one
/// decision-directed JIO-MBER step at `(M, D)`, counted by the linear
/// algebra primitives.
pub fn instrumented_jio_mber(m: usize, d: usize) -> Result<OpCount> {
    let mut rx = JioMberReceiver::new(m, d, 1.0, 0.01, 0.025, 0)?;
    let r = ComplexVector::new((0..m).map(|f| C64::new(1.0 + f as f64, -0.5)).collect())?;
    // one step first so that w is non-zero and the rescale branch is taken
    rx.step(&r, Some(Symbol::Plus))?;
    op_count::reset();
    rx.step(&r, None)?;
    Ok(op_count::snapshot())
}
