use std::ops::Range;

use super::SpikeError;

const WORD: usize = 64;

/// One timestep of spikes: `rows` tokens by `cols` channels, bit-packed
/// row-major with each row padded to whole 64-bit words.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpikeMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl SpikeMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(WORD);
        Self { rows, cols, words_per_row, data: vec![0; rows * words_per_row] }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, true);
            }
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    /// Builds a matrix from row-major 0/1 bytes; anything else is rejected.
    pub fn from_dense(rows: usize, cols: usize, values: &[u8]) -> Result<Self, SpikeError> {
        if values.len() != rows * cols {
            return Err(SpikeError::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(SpikeError::NonBinary { index, value });
        }
        Ok(Self::from_fn(rows, cols, |r, c| values[r * cols + c] == 1))
    }

    pub fn to_dense(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(u8::from(self.get(r, c)));
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.rows && col < self.cols);
        let w = self.data[row * self.words_per_row + col / WORD];
        (w >> (col % WORD)) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        debug_assert!(row < self.rows && col < self.cols);
        let w = &mut self.data[row * self.words_per_row + col / WORD];
        let mask = 1u64 << (col % WORD);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    fn row_words(&self, row: usize) -> &[u64] {
        &self.data[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    pub fn count_ones(&self) -> u64 {
        self.data.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn row_count_ones(&self, row: usize) -> u64 {
        self.row_words(row).iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Number of set bits in column `col` restricted to `cols` of one row
    /// range; used for column-wise reductions.
    pub fn column_count_ones(&self, col: usize) -> u64 {
        (0..self.rows).filter(|&r| self.get(r, col)).count() as u64
    }

    pub fn row_is_zero(&self, row: usize) -> bool {
        self.row_words(row).iter().all(|&w| w == 0)
    }

    /// Rows with at least one spike.
    pub fn active_rows(&self) -> u64 {
        (0..self.rows).filter(|&r| !self.row_is_zero(r)).count() as u64
    }

    /// Column indices of the set bits in `row`, ascending.
    pub fn row_ones(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_words(row).iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * WORD + tz)
            })
        })
    }

    /// Element-wise AND of two equally shaped matrices.
    pub fn and(&self, other: &SpikeMatrix) -> Result<SpikeMatrix, SpikeError> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a & b).collect();
        Ok(SpikeMatrix { data, ..*self })
    }

    pub(crate) fn check_same_shape(&self, other: &SpikeMatrix) -> Result<(), SpikeError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(SpikeError::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

/// Binary activation volume indexed by (timestep, token, channel).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpikeTensor {
    tokens: usize,
    channels: usize,
    frames: Vec<SpikeMatrix>,
}

impl SpikeTensor {
    pub fn zeros(timesteps: usize, tokens: usize, channels: usize) -> Self {
        Self {
            tokens,
            channels,
            frames: vec![SpikeMatrix::zeros(tokens, channels); timesteps],
        }
    }

    pub fn from_frames(tokens: usize, channels: usize, frames: Vec<SpikeMatrix>) -> Result<Self, SpikeError> {
        if let Some(bad) = frames.iter().find(|f| f.rows() != tokens || f.cols() != channels) {
            return Err(SpikeError::ShapeMismatch(format!(
                "frame {}x{} in a tensor of {tokens}x{channels}",
                bad.rows(),
                bad.cols()
            )));
        }
        Ok(Self { tokens, channels, frames })
    }

    /// (timesteps, tokens, channels)
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.frames.len(), self.tokens, self.channels)
    }

    pub fn timesteps(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, t: usize) -> &SpikeMatrix {
        &self.frames[t]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut SpikeMatrix {
        &mut self.frames[t]
    }

    pub fn frames(&self) -> &[SpikeMatrix] {
        &self.frames
    }

    pub fn get(&self, t: usize, n: usize, d: usize) -> bool {
        self.frames[t].get(n, d)
    }

    pub fn set(&mut self, t: usize, n: usize, d: usize, value: bool) {
        self.frames[t].set(n, d, value);
    }

    pub fn count_ones(&self) -> u64 {
        self.frames.iter().map(SpikeMatrix::count_ones).sum()
    }

    /// Exact popcount ratio over the selected timesteps (all when `None`).
    pub fn firing_rate(&self, timesteps: Option<Range<usize>>) -> Result<f64, SpikeError> {
        let range = timesteps.unwrap_or(0..self.frames.len());
        if range.start >= range.end || range.end > self.frames.len() {
            return Err(SpikeError::EmptySelection);
        }
        let bits = (range.len() * self.tokens * self.channels) as u64;
        if bits == 0 {
            return Err(SpikeError::EmptySelection);
        }
        let ones: u64 = self.frames[range].iter().map(SpikeMatrix::count_ones).sum();
        Ok(ones as f64 / bits as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_and_one_rates() {
        let z = SpikeTensor::zeros(2, 3, 5);
        assert_eq!(z.firing_rate(None).unwrap(), 0.0);
        let ones = SpikeTensor::from_frames(3, 5, vec![SpikeMatrix::ones(3, 5); 2]).unwrap();
        assert_eq!(ones.firing_rate(None).unwrap(), 1.0);
    }

    #[test]
    fn six_percent() {
        let mut t = SpikeTensor::zeros(1, 10, 10);
        for i in 0..6 {
            t.set(0, i, 9 - i, true);
        }
        assert_eq!(t.firing_rate(None).unwrap(), 0.06);
    }

    #[test]
    fn timestep_selection() {
        let mut t = SpikeTensor::zeros(2, 2, 2);
        t.set(1, 0, 0, true);
        assert_eq!(t.firing_rate(Some(0..1)).unwrap(), 0.0);
        assert_eq!(t.firing_rate(Some(1..2)).unwrap(), 0.25);
        assert!(matches!(t.firing_rate(Some(1..1)), Err(SpikeError::EmptySelection)));
        assert!(matches!(t.firing_rate(Some(0..3)), Err(SpikeError::EmptySelection)));
        assert!(matches!(SpikeTensor::zeros(0, 2, 2).firing_rate(None), Err(SpikeError::EmptySelection)));
    }

    #[test]
    fn dense_rejects_non_binary() {
        assert!(matches!(
            SpikeMatrix::from_dense(1, 3, &[0, 2, 1]),
            Err(SpikeError::NonBinary { index: 1, value: 2 })
        ));
    }

    #[test]
    fn row_ones_crosses_words() {
        let m = SpikeMatrix::from_fn(1, 130, |_, c| c % 63 == 0);
        assert_eq!(m.row_ones(0).collect::<Vec<_>>(), vec![0, 63, 126]);
    }

    proptest! {
        #[test]
        fn rate_is_permutation_invariant(
            bits in proptest::collection::vec(any::<bool>(), 4 * 6 * 7),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let (t, n, d) = (4, 6, 7);
            let mut tensor = SpikeTensor::zeros(t, n, d);
            for (i, &b) in bits.iter().enumerate() {
                tensor.set(i / (n * d), (i / d) % n, i % d, b);
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut tok: Vec<usize> = (0..n).collect();
            let mut ch: Vec<usize> = (0..d).collect();
            tok.shuffle(&mut rng);
            ch.shuffle(&mut rng);
            let mut permuted = SpikeTensor::zeros(t, n, d);
            for ti in 0..t {
                for ni in 0..n {
                    for di in 0..d {
                        permuted.set(ti, tok[ni], ch[di], tensor.get(ti, ni, di));
                    }
                }
            }
            prop_assert_eq!(tensor.firing_rate(None).unwrap(), permuted.firing_rate(None).unwrap());
            let expected = bits.iter().filter(|&&b| b).count() as f64 / bits.len() as f64;
            prop_assert_eq!(tensor.firing_rate(None).unwrap(), expected);
        }
    }
}
