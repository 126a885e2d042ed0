use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CostError;

/// Coarse layer classes that share a dataflow policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerClass {
    Embedding,
    Sdsa,
    Mlp,
    Head,
}

impl LayerClass {
    pub const ALL: [LayerClass; 4] = [LayerClass::Embedding, LayerClass::Sdsa, LayerClass::Mlp, LayerClass::Head];

    pub fn name(self) -> &'static str {
        match self {
            LayerClass::Embedding => "embedding",
            LayerClass::Sdsa => "sdsa",
            LayerClass::Mlp => "mlp",
            LayerClass::Head => "head",
        }
    }
}

impl std::str::FromStr for LayerClass {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LayerClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CostError::UnknownLayer(s.to_string()))
    }
}

/// Individual array operations recorded by the functional model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    PatchEmbed,
    Query,
    Key,
    Value,
    /// Column-wise masked accumulation of `K AND V`.
    MaskAdd,
    AttnProj,
    MlpHidden,
    MlpOut,
    Head,
}

impl OpKind {
    pub fn class(self) -> LayerClass {
        match self {
            OpKind::PatchEmbed => LayerClass::Embedding,
            OpKind::Query | OpKind::Key | OpKind::Value | OpKind::MaskAdd | OpKind::AttnProj => LayerClass::Sdsa,
            OpKind::MlpHidden | OpKind::MlpOut => LayerClass::Mlp,
            OpKind::Head => LayerClass::Head,
        }
    }
}

/// Event counts of one array operation in one layer at one timestep.
///
/// `fan_in` is the number of wordlines an invocation can assert and
/// `fan_out` the number of columns it reads out. `weight_bytes` is the
/// resident weight footprint of the operation; whether it is fetched once
/// or every timestep is decided by the dataflow mode at costing time.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpActivity {
    pub op: Option<OpKind>,
    pub layer: usize,
    pub timestep: usize,
    pub fan_in: usize,
    pub fan_out: usize,
    pub bit_planes: u32,
    /// Input vectors (times bit planes) presented to the array.
    pub invocations: u64,
    /// Invocations with at least one asserted wordline.
    pub active_invocations: u64,
    /// Asserted wordlines summed over invocations (input Hamming weight).
    pub wordlines: u64,
    pub column_activations: u64,
    /// One per asserted wordline per active column.
    pub macs: u64,
    pub membrane_updates: u64,
    /// Bytes of every input vector.
    pub input_bytes: u64,
    /// Bytes of the non-zero input vectors only.
    pub active_input_bytes: u64,
    pub output_bytes: u64,
    pub weight_bytes: u64,
}

impl OpActivity {
    pub fn new(op: OpKind, layer: usize, timestep: usize, fan_in: usize, fan_out: usize) -> Self {
        Self { op: Some(op), layer, timestep, fan_in, fan_out, bit_planes: 1, ..Default::default() }
    }

    pub fn kind(&self) -> OpKind {
        self.op.expect("activity entry without an op kind")
    }

    fn counts_mut(&mut self) -> [&mut u64; 10] {
        [
            &mut self.invocations,
            &mut self.active_invocations,
            &mut self.wordlines,
            &mut self.column_activations,
            &mut self.macs,
            &mut self.membrane_updates,
            &mut self.input_bytes,
            &mut self.active_input_bytes,
            &mut self.output_bytes,
            &mut self.weight_bytes,
        ]
    }

    fn validate(&self) -> Result<(), CostError> {
        let op = self.op.ok_or_else(|| CostError::InconsistentTrace("entry without op kind".into()))?;
        let bad = |what: &str| {
            Err(CostError::InconsistentTrace(format!(
                "{op:?} layer {} t {}: {what}",
                self.layer, self.timestep
            )))
        };
        if self.wordlines > self.fan_in as u64 * self.invocations {
            return bad("wordlines exceed rows x invocations");
        }
        if self.active_invocations > self.invocations {
            return bad("more active invocations than invocations");
        }
        if self.active_input_bytes > self.input_bytes {
            return bad("active input bytes exceed input bytes");
        }
        if self.bit_planes == 0 {
            return bad("zero bit planes");
        }
        Ok(())
    }
}

/// Operation counts of one inference, consumed by the cost model.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityTrace {
    /// Encoder depth of the traced model.
    pub layers: usize,
    pub ops: Vec<OpActivity>,
}

impl ActivityTrace {
    pub fn new(layers: usize) -> Self {
        Self { layers, ops: Vec::new() }
    }

    pub fn push(&mut self, op: OpActivity) {
        self.ops.push(op);
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Number of timesteps that appear in the trace.
    pub fn timesteps(&self) -> usize {
        self.ops.iter().map(|o| o.timestep + 1).max().unwrap_or(0)
    }

    /// Distinct encoder layers whose SDSA sub-block ran at least once.
    pub fn sdsa_layers_executed(&self) -> usize {
        let mut layers: Vec<usize> = self
            .ops
            .iter()
            .filter(|o| o.kind().class() == LayerClass::Sdsa)
            .map(|o| o.layer)
            .collect();
        layers.sort_unstable();
        layers.dedup();
        layers.len()
    }

    pub fn macs_where(&self, pred: impl Fn(&OpActivity) -> bool) -> u64 {
        self.ops.iter().filter(|o| pred(o)).map(|o| o.macs).sum()
    }

    pub fn class_macs(&self, class: LayerClass) -> u64 {
        self.macs_where(|o| o.kind().class() == class)
    }

    pub fn total_macs(&self) -> u64 {
        self.macs_where(|_| true)
    }

    pub fn validate(&self) -> Result<(), CostError> {
        for op in &self.ops {
            op.validate()?;
            if op.layer >= self.layers.max(1) {
                return Err(CostError::InconsistentTrace(format!(
                    "layer {} in a {}-layer trace",
                    op.layer, self.layers
                )));
            }
        }
        Ok(())
    }

    /// Element-wise mean of several traces, matching entries by
    /// (timestep, layer, op). Counts are summed and divided with rounding
    /// to nearest.
    pub fn mean(traces: &[ActivityTrace]) -> Result<ActivityTrace, CostError> {
        let first = traces.first().ok_or(CostError::EmptyTrace)?;
        let mut merged: BTreeMap<(usize, usize, OpKind), OpActivity> = BTreeMap::new();
        for trace in traces {
            if trace.layers != first.layers {
                return Err(CostError::InconsistentTrace("traces of different depth".into()));
            }
            for op in &trace.ops {
                let key = (op.timestep, op.layer, op.kind());
                match merged.get_mut(&key) {
                    Some(acc) => {
                        for (a, b) in acc.counts_mut().into_iter().zip(op.clone().counts_mut()) {
                            *a += *b;
                        }
                    }
                    None => {
                        merged.insert(key, op.clone());
                    }
                }
            }
        }
        let n = traces.len() as u64;
        let ops = merged
            .into_values()
            .map(|mut op| {
                for c in op.counts_mut() {
                    *c = (*c + n / 2) / n;
                }
                op
            })
            .collect();
        Ok(ActivityTrace { layers: first.layers, ops })
    }
}
