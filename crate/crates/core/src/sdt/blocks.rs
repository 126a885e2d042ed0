use crate::spike::{bit_serial_accumulate, bit_serial_expand, Fixed, MembraneState, SpikeMatrix, FRAC_BITS};

use super::{LayerWeights, Matrix, SdtError};

/// Raw membrane current of one spike count in the attention mask.
pub const SPIKE_CURRENT: i64 = 1 << FRAC_BITS;

/// `current[n * out + o] = sum of w[i][o] over the active inputs i of row n`.
pub fn linear_currents(x: &SpikeMatrix, w: &Matrix) -> Result<Vec<i64>, SdtError> {
    if x.cols() != w.rows {
        return Err(SdtError::Shape(format!("{} input channels into a {}-row matrix", x.cols(), w.rows)));
    }
    let mut out = vec![0i64; x.rows() * w.cols];
    for n in 0..x.rows() {
        let acc = &mut out[n * w.cols..(n + 1) * w.cols];
        for i in x.row_ones(n) {
            for (a, &wv) in acc.iter_mut().zip(w.row(i)) {
                *a += i64::from(wv);
            }
        }
    }
    Ok(out)
}

/// Adds the membrane shortcut: each residual spike injects one threshold.
fn add_shortcut(currents: &mut [i64], residual: &SpikeMatrix, gain: i64) {
    let cols = residual.cols();
    for n in 0..residual.rows() {
        for d in residual.row_ones(n) {
            currents[n * cols + d] += gain;
        }
    }
}

/// Integrates `currents` (row-major `rows x cols`) into `state` and returns
/// the spikes.
pub fn fire(state: &mut MembraneState, currents: &[i64], rows: usize, cols: usize) -> Result<SpikeMatrix, SdtError> {
    if state.len() != rows * cols || currents.len() != rows * cols {
        return Err(SdtError::Shape(format!(
            "{} neurons / {} currents for a {rows}x{cols} output",
            state.len(),
            currents.len()
        )));
    }
    let mut out = SpikeMatrix::zeros(rows, cols);
    for (idx, &i) in currents.iter().enumerate() {
        if state.lif_step(idx, i)? {
            out.set(idx / cols, idx % cols, true);
        }
    }
    Ok(out)
}

/// Binary projection followed by LIF.
pub fn spiking_linear(x: &SpikeMatrix, w: &Matrix, state: &mut MembraneState) -> Result<SpikeMatrix, SdtError> {
    let currents = linear_currents(x, w)?;
    fire(state, &currents, x.rows(), w.cols)
}

/// Projection of `x` plus the membrane shortcut from `residual`, then LIF.
pub fn spiking_linear_residual(
    x: &SpikeMatrix,
    w: &Matrix,
    residual: &SpikeMatrix,
    state: &mut MembraneState,
) -> Result<SpikeMatrix, SdtError> {
    let mut currents = linear_currents(x, w)?;
    if (residual.rows(), residual.cols()) != (x.rows(), w.cols) {
        return Err(SdtError::Shape("residual shape differs from the projection output".into()));
    }
    add_shortcut(&mut currents, residual, i64::from(state.threshold().raw()));
    fire(state, &currents, x.rows(), w.cols)
}

/// Mask-and-add attention.
///
/// For every channel `d`, the column count `sum_n K[n,d] AND V[n,d]` drives
/// the mask neuron `d`; the output is `Q[n,d] AND mask[d]`. Heads own
/// contiguous channel ranges. Because the reduction runs over tokens the
/// per-head split only changes iteration order, not the result.
pub fn mask_and_add(
    q: &SpikeMatrix,
    k: &SpikeMatrix,
    v: &SpikeMatrix,
    heads: usize,
    mask_state: &mut MembraneState,
) -> Result<SpikeMatrix, SdtError> {
    q.check_same_shape(k)?;
    q.check_same_shape(v)?;
    let (n_tokens, dim) = (q.rows(), q.cols());
    if heads == 0 || dim % heads != 0 {
        return Err(SdtError::Shape(format!("{dim} channels cannot be split into {heads} heads")));
    }
    if mask_state.len() != dim {
        return Err(SdtError::Shape(format!("{} mask neurons for {dim} channels", mask_state.len())));
    }
    let kv = k.and(v)?;
    let head_dim = dim / heads;
    let mut out = SpikeMatrix::zeros(n_tokens, dim);
    for h in 0..heads {
        for d in h * head_dim..(h + 1) * head_dim {
            let count = kv.column_count_ones(d) as i64;
            if mask_state.lif_step(d, count * SPIKE_CURRENT)? {
                for n in 0..n_tokens {
                    if q.get(n, d) {
                        out.set(n, d, true);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Membrane registers of one SDSA sub-block.
#[derive(Clone, Debug, PartialEq)]
pub struct SdsaState {
    pub q: MembraneState,
    pub k: MembraneState,
    pub v: MembraneState,
    pub mask: MembraneState,
    pub out: MembraneState,
}

impl SdsaState {
    pub fn new(tokens: usize, dim: usize, th: Fixed, leak: Fixed, attn_threshold: Fixed) -> Self {
        let nd = || MembraneState::new(tokens * dim, th, leak);
        Self { q: nd(), k: nd(), v: nd(), mask: MembraneState::new(dim, attn_threshold, leak), out: nd() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SdsaOutput {
    pub q: SpikeMatrix,
    pub k: SpikeMatrix,
    pub v: SpikeMatrix,
    pub attn: SpikeMatrix,
    pub out: SpikeMatrix,
}

/// `out = LIF(mask_and_add(Q, K, V) * Wo + shortcut(x))`.
pub fn sdsa_block(x: &SpikeMatrix, w: &LayerWeights, heads: usize, state: &mut SdsaState) -> Result<SdsaOutput, SdtError> {
    let q = spiking_linear(x, &w.q, &mut state.q)?;
    let k = spiking_linear(x, &w.k, &mut state.k)?;
    let v = spiking_linear(x, &w.v, &mut state.v)?;
    let attn = mask_and_add(&q, &k, &v, heads, &mut state.mask)?;
    let out = spiking_linear_residual(&attn, &w.o, x, &mut state.out)?;
    Ok(SdsaOutput { q, k, v, attn, out })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpState {
    pub hidden: MembraneState,
    pub out: MembraneState,
}

impl MlpState {
    pub fn new(tokens: usize, dim: usize, hidden: usize, th: Fixed, leak: Fixed) -> Self {
        Self { hidden: MembraneState::new(tokens * hidden, th, leak), out: MembraneState::new(tokens * dim, th, leak) }
    }
}

/// `hidden = LIF(x * W1)`, `out = LIF(hidden * W2 + shortcut(x))`.
pub fn mlp_block(x: &SpikeMatrix, w: &LayerWeights, state: &mut MlpState) -> Result<(SpikeMatrix, SpikeMatrix), SdtError> {
    let hidden = spiking_linear(x, &w.mlp1, &mut state.hidden)?;
    let out = spiking_linear_residual(&hidden, &w.mlp2, x, &mut state.out)?;
    Ok((hidden, out))
}

/// Bit-plane statistics of one patch-embedding step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EmbedStats {
    /// (token, plane) pairs with at least one set bit.
    pub active_planes: u64,
    /// Set bits over all planes and tokens.
    pub wordlines: u64,
}

/// Linear projection of every patch followed by LIF, with the multi-bit
/// pixels streamed one bit plane at a time.
pub fn patch_embed(
    patches: &[Vec<u8>],
    bits: u8,
    w: &Matrix,
    state: &mut MembraneState,
) -> Result<(SpikeMatrix, EmbedStats), SdtError> {
    let (n_tokens, dim) = (patches.len(), w.cols);
    if state.len() != n_tokens * dim {
        return Err(SdtError::Shape(format!("{} embed neurons for {n_tokens}x{dim}", state.len())));
    }
    let mut out = SpikeMatrix::zeros(n_tokens, dim);
    let mut stats = EmbedStats::default();
    let mut partials = vec![vec![0i64; bits as usize]; dim];
    for (n, patch) in patches.iter().enumerate() {
        if patch.len() != w.rows {
            return Err(SdtError::Shape(format!("patch of {} values into a {}-row matrix", patch.len(), w.rows)));
        }
        let stream = bit_serial_expand(patch, bits)?;
        for p in partials.iter_mut() {
            p.fill(0);
        }
        for (j, plane) in stream.planes().iter().enumerate() {
            let mut any = false;
            for (i, _) in plane.iter().enumerate().filter(|(_, &b)| b) {
                any = true;
                stats.wordlines += 1;
                for (o, &wv) in w.row(i).iter().enumerate() {
                    partials[o][j] += i64::from(wv);
                }
            }
            stats.active_planes += u64::from(any);
        }
        for (o, p) in partials.iter().enumerate() {
            if bit_serial_accumulate(&stream, p, state, n * dim + o)? {
                out.set(n, o, true);
            }
        }
    }
    Ok((out, stats))
}
