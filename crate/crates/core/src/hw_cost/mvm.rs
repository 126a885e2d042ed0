use serde::Serialize;

use super::{CostError, Energy, HwConfig};

/// Cost of one or more bit-plane invocations of a single subarray.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MvmCost {
    pub wordline: Energy,
    pub adc: Energy,
    pub peripheral: Energy,
    pub latency_ps: u64,
}

impl MvmCost {
    pub fn energy(&self) -> Energy {
        self.wordline + self.adc + self.peripheral
    }

    fn accumulate(&mut self, other: MvmCost) {
        self.wordline += other.wordline;
        self.adc += other.adc;
        self.peripheral += other.peripheral;
        self.latency_ps += other.latency_ps;
    }
}

/// Serial conversion rounds for `active_cols` columns: each ADC walks its
/// shared columns one at a time.
pub(crate) fn conversion_rounds(active_cols: usize, cfg: &HwConfig) -> usize {
    active_cols.min(cfg.adc_share)
}

/// ADC conversions charged for one invocation of `active_cols` columns.
pub(crate) fn conversions(active_cols: usize, cfg: &HwConfig) -> u64 {
    (active_cols.div_ceil(cfg.adc_share) * conversion_rounds(active_cols, cfg)) as u64
}

/// One bit-plane through one subarray with `hamming_weight` asserted
/// wordlines and `active_cols` read-out columns.
///
/// Only asserted wordlines draw wordline energy. A plane with no asserted
/// wordline produces no column current, so its conversions are gated as
/// well and only the fixed peripheral term remains.
pub fn mvm_cost(hamming_weight: usize, active_cols: usize, cfg: &HwConfig) -> Result<MvmCost, CostError> {
    if hamming_weight > cfg.rows {
        return Err(CostError::OutOfRange(format!(
            "hamming weight {hamming_weight} > {} rows",
            cfg.rows
        )));
    }
    if active_cols > cfg.cols {
        return Err(CostError::OutOfRange(format!("{active_cols} active columns > {} cols", cfg.cols)));
    }
    let e = &cfg.energy;
    let (adc, convert_ps) = if hamming_weight == 0 {
        (Energy::ZERO, 0)
    } else {
        (
            Energy(conversions(active_cols, cfg) * e.adc_conversion_fj),
            conversion_rounds(active_cols, cfg) as u64 * cfg.latency.adc_conversion_ps,
        )
    };
    Ok(MvmCost {
        wordline: Energy(hamming_weight as u64 * e.wordline_fj),
        adc,
        peripheral: Energy(e.peripheral_fj),
        latency_ps: cfg.latency.wordline_ps + convert_ps,
    })
}

/// Bit-serial invocation: one [`mvm_cost`] per plane, Hamming weights given
/// LSB first.
pub fn mvm_cost_planes(plane_weights: &[usize], active_cols: usize, cfg: &HwConfig) -> Result<MvmCost, CostError> {
    let mut total = MvmCost::default();
    for &h in plane_weights {
        total.accumulate(mvm_cost(h, active_cols, cfg)?);
    }
    Ok(total)
}
