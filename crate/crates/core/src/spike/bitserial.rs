use super::lif::check_width;
use super::{MembraneState, SpikeError};

pub const MAX_BIT_WIDTH: u8 = 8;

/// A multi-bit activation vector split into binary planes, LSB first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitPlaneStream {
    planes: Vec<Vec<bool>>,
    bit_width: u8,
}

impl BitPlaneStream {
    pub fn bit_width(&self) -> u8 {
        self.bit_width
    }

    pub fn planes(&self) -> &[Vec<bool>] {
        &self.planes
    }

    pub fn plane(&self, j: usize) -> &[bool] {
        &self.planes[j]
    }

    pub fn len(&self) -> usize {
        self.planes.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hamming weight of every plane; these are the asserted wordline
    /// counts when the planes are streamed into an array.
    pub fn plane_popcounts(&self) -> Vec<u64> {
        self.planes
            .iter()
            .map(|p| p.iter().filter(|&&b| b).count() as u64)
            .collect()
    }

    pub fn reconstruct(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len()];
        for (j, plane) in self.planes.iter().enumerate() {
            for (o, &bit) in out.iter_mut().zip(plane) {
                if bit {
                    *o |= 1 << j;
                }
            }
        }
        out
    }
}

/// Splits `values` into `bit_width` binary planes, LSB first.
pub fn bit_serial_expand(values: &[u8], bit_width: u8) -> Result<BitPlaneStream, SpikeError> {
    if bit_width == 0 || bit_width > MAX_BIT_WIDTH {
        return Err(SpikeError::BitWidth(bit_width));
    }
    if let Some(&v) = values.iter().find(|&&v| u32::from(v) >= 1u32 << bit_width) {
        return Err(SpikeError::ValueOutOfRange { value: u32::from(v), bits: bit_width });
    }
    let planes = (0..bit_width)
        .map(|j| values.iter().map(|&v| (v >> j) & 1 == 1).collect())
        .collect();
    Ok(BitPlaneStream { planes, bit_width })
}

/// Shift-accumulates one partial MVM result per bit plane into the membrane
/// register of `neuron`, then takes the fire decision once after the final
/// plane.
///
/// `partials[j]` is the array output for plane `j` and is weighted by `2^j`.
/// The register width is checked after every plane.
pub fn bit_serial_accumulate(
    stream: &BitPlaneStream,
    partials: &[i64],
    state: &mut MembraneState,
    neuron: usize,
) -> Result<bool, SpikeError> {
    let expected = usize::from(stream.bit_width);
    if partials.len() != expected {
        return Err(SpikeError::PlaneCountMismatch { expected, got: partials.len() });
    }
    let mut register = state.leaked(neuron)?;
    for (j, &partial) in partials.iter().enumerate() {
        let shifted = partial
            .checked_shl(j as u32)
            .filter(|s| s >> j == partial)
            .ok_or(SpikeError::Overflow { neuron, value: partial })?;
        register = register
            .checked_add(shifted)
            .ok_or(SpikeError::Overflow { neuron, value: i64::MAX })?;
        check_width(neuron, register)?;
    }
    state.commit(neuron, register)
}
