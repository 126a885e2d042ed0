//! Hierarchical processing-in-memory cost model.
//!
//! Energies are accounted in integer femtojoules ([`Energy`]) so that
//! report decompositions and pruning-savings arithmetic are exact. Areas
//! are integer square nanometres.

mod area;
mod config;
mod estimate;
mod mapping;
mod mvm;
mod roofline;
mod trace;

pub use area::{area_report, AreaReport, AreaRow};
pub use config::{
    AreaConstants, DataflowMode, DataflowPolicy, EnergyConstants, HwConfig, LatencyConstants, PaperConstants,
};
pub use estimate::{analyze_trace, estimate_inference, Accounting, EnergyBreakdown, EnergyReport, PruningOutcome, TraceCost};
pub use mapping::{map_layer, LayerMapping};
pub use mvm::{mvm_cost, mvm_cost_planes, MvmCost};
pub use roofline::{roofline_stats, ModuleProfile, RooflineStats, TABLE1};
pub use trace::{ActivityTrace, LayerClass, OpActivity, OpKind};

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("{0} out of range")]
    OutOfRange(String),
    #[error("layer needs {needed} subarrays but the chip has {available}")]
    Capacity { needed: usize, available: usize },
    #[error("unknown layer kind `{0}`")]
    UnknownLayer(String),
    #[error("inconsistent trace: {0}")]
    InconsistentTrace(String),
    #[error("empty trace")]
    EmptyTrace,
    #[error("arithmetic intensity undefined for a trace that moves zero bytes")]
    ZeroBytes,
    #[error("invalid hardware configuration: {0}")]
    Config(String),
}

pub const FJ_PER_UJ: u64 = 1_000_000_000;

/// Energy in femtojoules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Energy(pub u64);

impl Energy {
    pub const ZERO: Energy = Energy(0);

    pub fn from_uj(uj: f64) -> Energy {
        Energy((uj * FJ_PER_UJ as f64).round() as u64)
    }

    pub fn fj(self) -> u64 {
        self.0
    }

    pub fn uj(self) -> f64 {
        self.0 as f64 / FJ_PER_UJ as f64
    }

    pub fn checked_sub(self, other: Energy) -> Option<Energy> {
        self.0.checked_sub(other.0).map(Energy)
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        self.0 += rhs.0;
    }
}

impl Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        iter.fold(Energy::ZERO, Add::add)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} uJ", self.uj())
    }
}

/// Area in square nanometres.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Area(pub u64);

impl Area {
    pub const NM2_PER_MM2: u64 = 1_000_000_000_000;

    pub fn mm2(self) -> f64 {
        self.0 as f64 / Self::NM2_PER_MM2 as f64
    }
}

impl Add for Area {
    type Output = Area;
    fn add(self, rhs: Area) -> Area {
        Area(self.0 + rhs.0)
    }
}

impl Sum for Area {
    fn sum<I: Iterator<Item = Area>>(iter: I) -> Area {
        iter.fold(Area(0), Add::add)
    }
}
