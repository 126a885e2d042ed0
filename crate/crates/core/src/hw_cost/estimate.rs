use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::mvm::{conversion_rounds, conversions};
use super::{ActivityTrace, CostError, DataflowMode, Energy, HwConfig, LayerClass, OpActivity};

/// How savings from pruning are priced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accounting {
    /// Published per-skipped-layer / per-saved-timestep constants.
    #[default]
    PaperConstant,
    /// Per-event constants applied to the trace itself.
    Analytic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub compute: Energy,
    pub input_access: Energy,
    pub weight_access: Energy,
    pub output_access: Energy,
    pub membrane: Energy,
    pub control: Energy,
}

impl EnergyBreakdown {
    pub fn total(&self) -> Energy {
        self.compute + self.input_access + self.weight_access + self.output_access + self.membrane + self.control
    }

    fn add(&mut self, other: &EnergyBreakdown) {
        self.compute += other.compute;
        self.input_access += other.input_access;
        self.weight_access += other.weight_access;
        self.output_access += other.output_access;
        self.membrane += other.membrane;
        self.control += other.control;
    }

    pub fn parts(&self) -> [(&'static str, Energy); 6] {
        [
            ("compute", self.compute),
            ("input_access", self.input_access),
            ("weight_access", self.weight_access),
            ("output_access", self.output_access),
            ("membrane", self.membrane),
            ("control", self.control),
        ]
    }
}

/// Per-event costing of a trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TraceCost {
    pub breakdown: EnergyBreakdown,
    pub per_class: BTreeMap<LayerClass, EnergyBreakdown>,
    pub latency_ps: u64,
}

fn op_cost(op: &OpActivity, charge_weights: bool, cfg: &HwConfig) -> (EnergyBreakdown, u64) {
    let e = &cfg.energy;
    let mode = cfg.dataflow.mode(op.kind().class());
    let row_tiles = op.fan_in.div_ceil(cfg.rows).max(1) as u64;
    let col_widths: Vec<usize> = (0..op.fan_out.div_ceil(cfg.cols))
        .map(|i| (op.fan_out - i * cfg.cols).min(cfg.cols))
        .collect();
    let col_tiles = col_widths.len().max(1) as u64;
    let conv_per_active: u64 = row_tiles * col_widths.iter().map(|&c| conversions(c, cfg)).sum::<u64>();
    let max_rounds = col_widths.iter().map(|&c| conversion_rounds(c, cfg)).max().unwrap_or(0) as u64;

    let input_bytes = match mode {
        DataflowMode::WeightStationary => op.input_bytes,
        DataflowMode::SpikeStationary => op.active_input_bytes,
    };
    let breakdown = EnergyBreakdown {
        compute: Energy(
            op.wordlines * e.wordline_fj
                + op.active_invocations * conv_per_active * e.adc_conversion_fj
                + op.invocations * row_tiles * col_tiles * e.peripheral_fj,
        ),
        input_access: Energy(input_bytes * e.sram_byte_fj),
        weight_access: Energy(if charge_weights { op.weight_bytes * e.weight_byte_fj } else { 0 }),
        output_access: Energy(op.output_bytes * e.sram_byte_fj),
        membrane: Energy(op.membrane_updates * e.membrane_update_fj),
        control: Energy(op.invocations * e.control_fj),
    };
    let l = &cfg.latency;
    let latency = op.invocations * (l.wordline_ps + l.lif_ps) + op.active_invocations * max_rounds * l.adc_conversion_ps;
    (breakdown, latency)
}

/// Applies the per-event constants to every entry of `trace`.
///
/// Weight-stationary operations pay for their weights once per
/// (layer, op) regardless of how many timesteps the trace spans;
/// spike-stationary operations stream weights at every timestep.
pub fn analyze_trace(trace: &ActivityTrace, cfg: &HwConfig) -> Result<TraceCost, CostError> {
    trace.validate()?;
    let mut ops: Vec<&OpActivity> = trace.ops.iter().collect();
    ops.sort_by_key(|o| o.timestep);
    let mut loaded = HashSet::new();
    let mut cost = TraceCost::default();
    for op in ops {
        let stationary = cfg.dataflow.mode(op.kind().class()) == DataflowMode::WeightStationary;
        let charge = !stationary || loaded.insert((op.layer, op.kind()));
        let (b, latency) = op_cost(op, charge, cfg);
        cost.breakdown.add(&b);
        cost.per_class.entry(op.kind().class()).or_default().add(&b);
        cost.latency_ps += latency;
    }
    Ok(cost)
}

/// Pruning decisions applied to a baseline inference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PruningOutcome {
    pub skipped_layers: usize,
    /// Mean timesteps saved per sample (may be fractional).
    pub saved_timesteps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub accounting: Accounting,
    /// Per-event decomposition of the baseline trace.
    pub breakdown: EnergyBreakdown,
    pub per_class: BTreeMap<LayerClass, EnergyBreakdown>,
    /// Unpruned energy per inference under the selected accounting.
    pub gross: Energy,
    pub savings: Energy,
    /// `gross - savings`.
    pub total: Energy,
    pub latency_ms: f64,
    pub timesteps: usize,
    pub skipped_layers: usize,
    pub mean_timesteps: f64,
}

impl EnergyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat `metric,value` CSV; energies in microjoules.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (name, e) in self.breakdown.parts() {
            out.push_str(&format!("{name}_uj,{}\n", e.uj()));
        }
        for (class, b) in &self.per_class {
            out.push_str(&format!("{}_uj,{}\n", class.name(), b.total().uj()));
        }
        out.push_str(&format!("gross_uj,{}\n", self.gross.uj()));
        out.push_str(&format!("savings_uj,{}\n", self.savings.uj()));
        out.push_str(&format!("total_uj,{}\n", self.total.uj()));
        out.push_str(&format!("latency_ms,{}\n", self.latency_ms));
        out.push_str(&format!("timesteps,{}\n", self.timesteps));
        out.push_str(&format!("skipped_layers,{}\n", self.skipped_layers));
        out.push_str(&format!("mean_timesteps,{}\n", self.mean_timesteps));
        out
    }
}

fn scale(unit: Energy, factor: f64) -> Energy {
    Energy((unit.fj() as f64 * factor).round() as u64)
}

/// Prices an inference from its unpruned baseline trace and the pruning
/// outcome.
///
/// * [`Accounting::PaperConstant`]: gross = `T * E_step + L * E_layer` and
///   savings = `k * E_layer + s * E_step`, with the published constants.
/// * [`Accounting::Analytic`]: gross is the per-event total of the trace;
///   a saved timestep removes one average timestep and each skipped layer
///   removes its average SDSA cost from every timestep still executed.
pub fn estimate_inference(
    trace: &ActivityTrace,
    outcome: PruningOutcome,
    cfg: &HwConfig,
    accounting: Accounting,
) -> Result<EnergyReport, CostError> {
    if trace.is_empty() {
        return Err(CostError::EmptyTrace);
    }
    let cost = analyze_trace(trace, cfg)?;
    let timesteps = trace.timesteps();
    let sdsa_layers = trace.sdsa_layers_executed();
    let k = outcome.skipped_layers;
    let s = outcome.saved_timesteps;
    if k > sdsa_layers {
        return Err(CostError::InconsistentTrace(format!(
            "{k} skipped layers but only {sdsa_layers} SDSA layers in the trace"
        )));
    }
    if !(0.0..=timesteps as f64).contains(&s) {
        return Err(CostError::InconsistentTrace(format!(
            "{s} saved timesteps with a {timesteps}-step trace"
        )));
    }

    let (gross, savings) = match accounting {
        Accounting::PaperConstant => {
            let p = &cfg.paper;
            let gross = Energy(timesteps as u64 * p.saved_timestep.fj() + sdsa_layers as u64 * p.skipped_layer.fj());
            let savings = Energy(k as u64 * p.skipped_layer.fj()) + scale(p.saved_timestep, s);
            (gross, savings)
        }
        Accounting::Analytic => {
            let gross = cost.breakdown.total();
            let step = gross.fj() as f64 / timesteps as f64;
            let sdsa = cost.per_class.get(&LayerClass::Sdsa).map_or(0, |b| b.total().fj()) as f64;
            let layer_step = if sdsa_layers == 0 { 0.0 } else { sdsa / (sdsa_layers * timesteps) as f64 };
            let saved = s * step + k as f64 * layer_step * (timesteps as f64 - s);
            (gross, Energy(saved.round() as u64))
        }
    };
    let total = gross
        .checked_sub(savings)
        .ok_or_else(|| CostError::InconsistentTrace("savings exceed the baseline energy".into()))?;
    Ok(EnergyReport {
        accounting,
        breakdown: cost.breakdown,
        per_class: cost.per_class,
        gross,
        savings,
        total,
        latency_ms: cost.latency_ps as f64 / 1e9,
        timesteps,
        skipped_layers: k,
        mean_timesteps: timesteps as f64 - s,
    })
}
