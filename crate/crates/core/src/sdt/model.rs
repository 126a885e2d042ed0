use serde::{Deserialize, Serialize};

use super::blocks::{mlp_block, patch_embed, sdsa_block, MlpState, SdsaState, EmbedStats};
use super::{Frame, SdtConfig, SdtError, SdtWeights, Site};
use crate::hw_cost::{ActivityTrace, OpActivity, OpKind};
use crate::spike::{MembraneState, SpikeMatrix, FRAC_BITS};

/// Per-timestep head outputs and their running temporal mean.
///
/// Logits are kept as exact integers (`raw`) with the running sums in
/// `cumulative`; real-valued logits are `raw / scale`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogitTrace {
    pub scale: i64,
    pub raw: Vec<Vec<i64>>,
    pub cumulative: Vec<Vec<i64>>,
}

impl LogitTrace {
    pub fn new(scale: i64) -> Self {
        Self { scale, raw: Vec::new(), cumulative: Vec::new() }
    }

    pub fn push(&mut self, raw: Vec<i64>) {
        let cum = match self.cumulative.last() {
            Some(prev) => prev.iter().zip(&raw).map(|(a, b)| a + b).collect(),
            None => raw.clone(),
        };
        self.raw.push(raw);
        self.cumulative.push(cum);
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn logits(&self, t: usize) -> Vec<f64> {
        self.raw[t].iter().map(|&v| v as f64 / self.scale as f64).collect()
    }

    /// Mean of the logits of timesteps `0..=t`.
    pub fn running_mean(&self, t: usize) -> Vec<f64> {
        let denom = ((t + 1) as i64 * self.scale) as f64;
        self.cumulative[t].iter().map(|&v| v as f64 / denom).collect()
    }
}

/// Spike and neuron counts at every profiled site of one forward pass.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteActivity {
    /// `(ones, neurons)` of the embedding output.
    pub embed: (u64, u64),
    /// `[layer][site]` as `(ones, neurons)`, sites in [`Site::ALL`] order.
    pub layers: Vec<[(u64, u64); 5]>,
}

impl SiteActivity {
    pub fn new(depth: usize) -> Self {
        Self { embed: (0, 0), layers: vec![[(0, 0); 5]; depth] }
    }

    fn record(slot: &mut (u64, u64), m: &SpikeMatrix) {
        slot.0 += m.count_ones();
        slot.1 += (m.rows() * m.cols()) as u64;
    }

    pub fn merge(&mut self, other: &SiteActivity) {
        self.embed.0 += other.embed.0;
        self.embed.1 += other.embed.1;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.iter_mut().zip(b) {
                x.0 += y.0;
                x.1 += y.1;
            }
        }
    }
}

/// Everything one forward pass produces.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardResult {
    pub logits: LogitTrace,
    pub activity: ActivityTrace,
    pub sites: SiteActivity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdtModel {
    cfg: SdtConfig,
    weights: SdtWeights,
}

impl SdtModel {
    pub fn new(cfg: SdtConfig, weights: SdtWeights) -> Result<Self, SdtError> {
        cfg.validate()?;
        weights.check(&cfg)?;
        Ok(Self { cfg, weights })
    }

    pub fn synthetic(cfg: SdtConfig) -> Result<Self, SdtError> {
        cfg.validate()?;
        let weights = SdtWeights::synthetic(&cfg);
        Self::new(cfg, weights)
    }

    pub fn config(&self) -> &SdtConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &SdtWeights {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut SdtWeights {
        &mut self.weights
    }

    /// Fixed-point scale of the head output: tokens x one membrane unit
    /// unless the weights carry their own.
    pub fn logit_scale(&self) -> i64 {
        match self.weights.head_scale {
            0 => (self.cfg.tokens() as i64) << FRAC_BITS,
            s => s,
        }
    }

    pub fn session(&self, skip_mask: &[bool]) -> Result<Session<'_>, SdtError> {
        if skip_mask.len() != self.cfg.depth {
            return Err(SdtError::MaskLength { expected: self.cfg.depth, got: skip_mask.len() });
        }
        let c = &self.cfg;
        let (n, d) = (c.tokens(), c.dim);
        let (th, leak) = (c.threshold_fixed(), c.leak_fixed());
        Ok(Session {
            model: self,
            skip: skip_mask.to_vec(),
            t: 0,
            embed: MembraneState::new(n * d, th, leak),
            sdsa: (0..c.depth).map(|_| SdsaState::new(n, d, th, leak, c.attn_threshold_fixed())).collect(),
            mlp: (0..c.depth).map(|_| MlpState::new(n, d, c.hidden(), th, leak)).collect(),
            result: ForwardResult {
                logits: LogitTrace::new(self.logit_scale()),
                activity: ActivityTrace::new(c.depth),
                sites: SiteActivity::new(c.depth),
            },
            last_features: None,
        })
    }

    /// Runs timesteps `0..max_t`. A single frame is repeated every timestep;
    /// otherwise frame `t` feeds timestep `t`.
    pub fn forward(&self, frames: &[Frame], skip_mask: &[bool], max_t: usize) -> Result<ForwardResult, SdtError> {
        if max_t == 0 || max_t > self.cfg.timesteps {
            return Err(SdtError::TimestepCap { cap: max_t, timesteps: self.cfg.timesteps });
        }
        let mut session = self.session(skip_mask)?;
        for t in 0..max_t {
            session.step(frame_at(frames, t)?)?;
        }
        Ok(session.finish())
    }
}

pub(crate) fn frame_at(frames: &[Frame], t: usize) -> Result<&Frame, SdtError> {
    match frames.len() {
        0 => Err(SdtError::Shape("no input frames".into())),
        1 => Ok(&frames[0]),
        len if t < len => Ok(&frames[t]),
        len => Err(SdtError::Shape(format!("{len} frames for timestep {}", t + 1))),
    }
}

/// Stateful inference, one timestep per [`Session::step`].
#[derive(Clone, Debug)]
pub struct Session<'a> {
    model: &'a SdtModel,
    skip: Vec<bool>,
    t: usize,
    embed: MembraneState,
    sdsa: Vec<SdsaState>,
    mlp: Vec<MlpState>,
    result: ForwardResult,
    last_features: Option<SpikeMatrix>,
}

fn bytes(bits: usize) -> u64 {
    bits.div_ceil(8) as u64
}

/// Counts of a binary projection of `x` onto `fan_out` columns.
fn linear_activity(kind: OpKind, layer: usize, t: usize, x: &SpikeMatrix, fan_out: usize) -> OpActivity {
    let mut op = OpActivity::new(kind, layer, t, x.cols(), fan_out);
    let active = x.active_rows();
    op.invocations = x.rows() as u64;
    op.active_invocations = active;
    op.wordlines = x.count_ones();
    op.column_activations = active * fan_out as u64;
    op.macs = op.wordlines * fan_out as u64;
    op.membrane_updates = (x.rows() * fan_out) as u64;
    op.input_bytes = x.rows() as u64 * bytes(x.cols());
    op.active_input_bytes = active * bytes(x.cols());
    op.output_bytes = x.rows() as u64 * bytes(fan_out);
    op.weight_bytes = (x.cols() * fan_out) as u64;
    op
}

impl Session<'_> {
    /// Timesteps executed so far.
    pub fn timesteps(&self) -> usize {
        self.t
    }

    pub fn logits(&self) -> &LogitTrace {
        &self.result.logits
    }

    /// Output spikes of the last encoder layer at the latest timestep.
    pub fn last_features(&self) -> Option<&SpikeMatrix> {
        self.last_features.as_ref()
    }

    pub fn step(&mut self, frame: &Frame) -> Result<(), SdtError> {
        let model = self.model;
        let c = &model.cfg;
        if self.t >= c.timesteps {
            return Err(SdtError::TimestepCap { cap: self.t + 1, timesteps: c.timesteps });
        }
        frame.check(c)?;
        let t = self.t;
        let (n, d) = (c.tokens(), c.dim);
        let w = &model.weights;
        let trace = &mut self.result.activity;
        let sites = &mut self.result.sites;

        let patches: Vec<Vec<u8>> = (0..n).map(|i| frame.patch(i, c.patch_size)).collect();
        let (mut x, stats) = patch_embed(&patches, c.input_bits, &w.embed, &mut self.embed)?;
        trace.push(embed_activity(c, t, &stats));
        SiteActivity::record(&mut sites.embed, &x);

        for l in 0..c.depth {
            let lw = &w.layers[l];
            if !self.skip[l] {
                let out = sdsa_block(&x, lw, c.heads, &mut self.sdsa[l])?;
                for (kind, m) in [(OpKind::Query, &lw.q), (OpKind::Key, &lw.k), (OpKind::Value, &lw.v)] {
                    trace.push(linear_activity(kind, l, t, &x, m.cols));
                }
                trace.push(mask_add_activity(l, t, &out.k, &out.v));
                trace.push(linear_activity(OpKind::AttnProj, l, t, &out.attn, d));
                let slots = &mut sites.layers[l];
                SiteActivity::record(&mut slots[Site::QOut as usize], &out.q);
                SiteActivity::record(&mut slots[Site::KOut as usize], &out.k);
                SiteActivity::record(&mut slots[Site::VOut as usize], &out.v);
                SiteActivity::record(&mut slots[Site::SdsaOut as usize], &out.attn);
                x = out.out;
            }
            let (hidden, out) = mlp_block(&x, lw, &mut self.mlp[l])?;
            trace.push(linear_activity(OpKind::MlpHidden, l, t, &x, c.hidden()));
            trace.push(linear_activity(OpKind::MlpOut, l, t, &hidden, d));
            SiteActivity::record(&mut sites.layers[l][Site::MlpOut as usize], &out);
            x = out;
        }

        let logits = head(&x, &w.head, &w.head_bias);
        let mut op = linear_activity(OpKind::Head, 0, t, &x, c.classes);
        op.membrane_updates = c.classes as u64;
        op.output_bytes = 4 * c.classes as u64;
        trace.push(op);
        self.result.logits.push(logits);
        self.last_features = Some(x);
        self.t += 1;
        Ok(())
    }

    pub fn finish(self) -> ForwardResult {
        self.result
    }
}

/// Token-summed class scores, `sum_n sum_d s[n,d] * W[d,c] + bias[c]`.
fn head(x: &SpikeMatrix, w: &super::Matrix, bias: &[i32]) -> Vec<i64> {
    let mut out: Vec<i64> = bias.iter().map(|&b| i64::from(b)).collect();
    for n in 0..x.rows() {
        for d in x.row_ones(n) {
            for (o, &wv) in out.iter_mut().zip(w.row(d)) {
                *o += i64::from(wv);
            }
        }
    }
    out
}

fn embed_activity(c: &SdtConfig, t: usize, stats: &EmbedStats) -> OpActivity {
    let (n, len, d) = (c.tokens() as u64, c.patch_len(), c.dim);
    let bits = u64::from(c.input_bits);
    let mut op = OpActivity::new(OpKind::PatchEmbed, 0, t, len, d);
    op.bit_planes = u32::from(c.input_bits);
    op.invocations = n * bits;
    op.active_invocations = stats.active_planes;
    op.wordlines = stats.wordlines;
    op.column_activations = stats.active_planes * d as u64;
    op.macs = stats.wordlines * d as u64;
    op.membrane_updates = n * d as u64;
    op.input_bytes = n * bits * bytes(len);
    op.active_input_bytes = stats.active_planes * bytes(len);
    op.output_bytes = n * bytes(d);
    op.weight_bytes = (len * d) as u64;
    op
}

/// Column-wise masked accumulation: each channel column of `K AND V` is
/// reduced over the tokens, gated by the K spikes as wordlines.
fn mask_add_activity(layer: usize, t: usize, k: &SpikeMatrix, v: &SpikeMatrix) -> OpActivity {
    let (n, d) = (k.rows(), k.cols());
    let kv = k.and(v).expect("same shape");
    let mut op = OpActivity::new(OpKind::MaskAdd, layer, t, n, 1);
    op.invocations = d as u64;
    op.active_invocations = (0..d).filter(|&c| k.column_count_ones(c) > 0).count() as u64;
    op.wordlines = k.count_ones();
    op.column_activations = op.active_invocations;
    op.macs = kv.count_ones();
    op.membrane_updates = d as u64;
    op.input_bytes = 2 * n as u64 * bytes(d);
    op.active_input_bytes = k.active_rows() * bytes(d) + v.active_rows() * bytes(d);
    op.output_bytes = bytes(d);
    op
}
