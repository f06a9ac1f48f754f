//! Labeled observations: the room's grid cells, per-scene entity labels,
//! and the two-technology CSI sample consumed by the network.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const GRID_NX: usize = 9;
pub const GRID_NY: usize = 10;
pub const CELL_SIZE_M: f64 = 0.6;

/// One square of the 9x10 room discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridCell {
    pub ix: u8,
    pub iy: u8,
}

impl GridCell {
    pub fn new(ix: u8, iy: u8) -> Result<Self> {
        if (ix as usize) < GRID_NX && (iy as usize) < GRID_NY {
            Ok(Self { ix, iy })
        } else {
            Err(Error::Index(format!(
                "grid cell ({ix}, {iy}) outside {GRID_NX}x{GRID_NY} grid"
            )))
        }
    }

    /// Cell center in meters.
    pub fn center(&self) -> (f64, f64) {
        (CELL_SIZE_M * self.ix as f64, CELL_SIZE_M * self.iy as f64)
    }
}

/// Which entities are in the room and where. Presence is per entity;
/// present entities carry their grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SceneLabel {
    pub person: Option<GridCell>,
    pub robot: Option<GridCell>,
}

impl SceneLabel {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.person.is_none() && self.robot.is_none()
    }
}

/// One observation: the 5G CSI tensor (2x360x4), the Wi-Fi CSI tensor
/// (2x52x1), and the scene label.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiSample {
    pub csi_5g: Tensor,
    pub csi_wifi: Tensor,
    pub label: SceneLabel,
}
