use serde::Serialize;

use super::{CostError, DataflowMode, HwConfig, LayerClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LayerMapping {
    pub mode: DataflowMode,
    /// Subarrays stacked along the fan-in (wordline) dimension.
    pub row_tiles: usize,
    /// Subarrays side by side along the fan-out (column) dimension.
    pub col_tiles: usize,
}

impl LayerMapping {
    pub fn subarrays(&self) -> usize {
        self.row_tiles * self.col_tiles
    }
}

/// Places a `fan_in x fan_out` matrix of the given layer class on the chip.
pub fn map_layer(class: LayerClass, fan_in: usize, fan_out: usize, cfg: &HwConfig) -> Result<LayerMapping, CostError> {
    let mapping = LayerMapping {
        mode: cfg.dataflow.mode(class),
        row_tiles: fan_in.div_ceil(cfg.rows),
        col_tiles: fan_out.div_ceil(cfg.cols),
    };
    if mapping.subarrays() > cfg.subarrays() {
        return Err(CostError::Capacity { needed: mapping.subarrays(), available: cfg.subarrays() });
    }
    Ok(mapping)
}
