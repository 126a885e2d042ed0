use serde::{Deserialize, Serialize};

use super::{CostError, Energy, LayerClass, FJ_PER_UJ};

/// Which operand stays pinned in the arrays across timesteps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataflowMode {
    /// Weights are programmed once per model load and reused every timestep.
    WeightStationary,
    /// Spike vectors are pinned; weights and masks stream in every timestep
    /// and inactive spike vectors are never fetched.
    SpikeStationary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataflowPolicy {
    pub embedding: DataflowMode,
    pub sdsa: DataflowMode,
    pub mlp: DataflowMode,
    pub head: DataflowMode,
}

impl DataflowPolicy {
    pub fn mode(&self, class: LayerClass) -> DataflowMode {
        match class {
            LayerClass::Embedding => self.embedding,
            LayerClass::Sdsa => self.sdsa,
            LayerClass::Mlp => self.mlp,
            LayerClass::Head => self.head,
        }
    }
}

impl Default for DataflowPolicy {
    fn default() -> Self {
        Self {
            embedding: DataflowMode::WeightStationary,
            sdsa: DataflowMode::SpikeStationary,
            mlp: DataflowMode::WeightStationary,
            head: DataflowMode::WeightStationary,
        }
    }
}

/// Per-event energies in femtojoules.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConstants {
    /// Per asserted wordline per cycle.
    pub wordline_fj: u64,
    pub adc_conversion_fj: u64,
    /// Fixed per-subarray term of every invocation (drivers, sense bias).
    pub peripheral_fj: u64,
    pub sram_byte_fj: u64,
    /// Moving one weight byte from the global buffer into an array.
    pub weight_byte_fj: u64,
    pub membrane_update_fj: u64,
    pub control_fj: u64,
}

impl Default for EnergyConstants {
    fn default() -> Self {
        Self {
            wordline_fj: 25,
            adc_conversion_fj: 1_200,
            peripheral_fj: 300,
            sram_byte_fj: 1_000,
            weight_byte_fj: 4_000,
            membrane_update_fj: 60,
            control_fj: 100,
        }
    }
}

/// Pipeline stage latencies in picoseconds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConstants {
    pub wordline_ps: u64,
    pub adc_conversion_ps: u64,
    pub lif_ps: u64,
}

impl Default for LatencyConstants {
    fn default() -> Self {
        Self { wordline_ps: 1_000, adc_conversion_ps: 2_000, lif_ps: 500 }
    }
}

/// Component areas in square nanometres. The RRAM array area is given for a
/// 128x128 reference array and scales with the cell count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaConstants {
    pub rram_reference_nm2: u64,
    pub mask_register_nm2: u64,
    pub gating_logic_nm2: u64,
    pub adc_nm2: u64,
    pub wl_driver_nm2: u64,
    pub buffer_nm2: u64,
}

impl Default for AreaConstants {
    fn default() -> Self {
        // 0.05, 0.02/128, 0.015/128, 0.1/16, 0.03/128, 0.02/64 mm^2
        Self {
            rram_reference_nm2: 50_000_000_000,
            mask_register_nm2: 156_250_000,
            gating_logic_nm2: 117_187_500,
            adc_nm2: 6_250_000_000,
            wl_driver_nm2: 234_375_000,
            buffer_nm2: 312_500_000,
        }
    }
}

/// Published whole-inference savings constants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaperConstants {
    pub skipped_layer: Energy,
    pub saved_timestep: Energy,
}

impl Default for PaperConstants {
    fn default() -> Self {
        Self {
            skipped_layer: Energy(9_577 * FJ_PER_UJ / 1_000),
            saved_timestep: Energy(76_135 * FJ_PER_UJ / 1_000),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HwConfig {
    pub rows: usize,
    pub cols: usize,
    /// Columns multiplexed onto one ADC.
    pub adc_share: usize,
    pub tiles: usize,
    pub subarrays_per_tile: usize,
    pub energy: EnergyConstants,
    pub latency: LatencyConstants,
    pub area: AreaConstants,
    pub dataflow: DataflowPolicy,
    pub paper: PaperConstants,
}

impl Default for HwConfig {
    fn default() -> Self {
        Self {
            rows: 128,
            cols: 128,
            adc_share: 8,
            tiles: 32,
            subarrays_per_tile: 64,
            energy: EnergyConstants::default(),
            latency: LatencyConstants::default(),
            area: AreaConstants::default(),
            dataflow: DataflowPolicy::default(),
            paper: PaperConstants::default(),
        }
    }
}

impl HwConfig {
    pub fn validate(&self) -> Result<(), CostError> {
        for (name, v) in [("rows", self.rows), ("cols", self.cols)] {
            if !v.is_power_of_two() {
                return Err(CostError::Config(format!("{name} = {v} is not a power of two")));
            }
        }
        if self.adc_share == 0 || self.cols % self.adc_share != 0 {
            return Err(CostError::Config(format!(
                "adc_share = {} must divide cols = {}",
                self.adc_share, self.cols
            )));
        }
        if self.cols < 2 {
            return Err(CostError::Config("cols must be at least 2".into()));
        }
        Ok(())
    }

    pub fn subarrays(&self) -> usize {
        self.tiles * self.subarrays_per_tile
    }

    pub fn adcs_per_subarray(&self) -> usize {
        self.cols / self.adc_share
    }

    pub fn from_toml(text: &str) -> Result<Self, CostError> {
        let cfg: HwConfig = toml::from_str(text).map_err(|e| CostError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("hardware config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_constants_are_exact() {
        let p = PaperConstants::default();
        assert_eq!(p.skipped_layer.fj(), 9_577_000_000);
        assert_eq!(p.saved_timestep.fj(), 76_135_000_000);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = HwConfig::default();
        assert_eq!(HwConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let partial = HwConfig::from_toml("rows = 64\n").unwrap();
        assert_eq!(partial.rows, 64);
        assert_eq!(partial.cols, 128);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(HwConfig::from_toml("rows = 100\n").is_err());
        assert!(HwConfig::from_toml("adc_share = 3\n").is_err());
        assert!(HwConfig::from_toml("bogus = 1\n").is_err());
    }
}
