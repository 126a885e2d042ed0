//! Spike-domain primitives.
//!
//! Everything that crosses a layer boundary in the simulator is a binary
//! spike volume ([`SpikeTensor`], or one timestep of it as a
//! [`SpikeMatrix`]). Neurons integrate signed fixed-point currents into a
//! [`MembraneState`] and fire on threshold crossing with a hard reset.
//! Multi-bit activations are streamed LSB-first as a [`BitPlaneStream`].

mod bitserial;
mod codec;
mod fixed;
mod lif;
mod tensor;

pub use bitserial::{bit_serial_accumulate, bit_serial_expand, BitPlaneStream, MAX_BIT_WIDTH};
pub use codec::{read_tensor, write_tensor, TENSOR_HEADER_LEN, TENSOR_MAGIC, TENSOR_VERSION};
pub use fixed::{Fixed, FRAC_BITS, RAW_LIMIT};
pub use lif::MembraneState;
pub use tensor::{SpikeMatrix, SpikeTensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpikeError {
    #[error("membrane accumulator overflow at neuron {neuron} (raw value {value})")]
    Overflow { neuron: usize, value: i64 },
    #[error("neuron index {index} out of range for {len} neurons")]
    NeuronOutOfRange { index: usize, len: usize },
    #[error("value {value} does not fit in {bits} bits")]
    ValueOutOfRange { value: u32, bits: u8 },
    #[error("bit width {0} outside 1..=8")]
    BitWidth(u8),
    #[error("expected {expected} bit-plane partial sums, got {got}")]
    PlaneCountMismatch { expected: usize, got: usize },
    #[error("empty selection")]
    EmptySelection,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-binary value {value} at element {index}")]
    NonBinary { index: usize, value: u8 },
    #[error("fixed-point conversion of {0} out of range")]
    FixedRange(f64),
    #[error("malformed tensor stream: {0}")]
    Codec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
