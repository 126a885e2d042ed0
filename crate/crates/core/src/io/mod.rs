//! Event-camera streams, frame binning and sample sources.

mod dataset;
mod events;

pub use dataset::{load_event_dataset, SyntheticSource, SyntheticSpec};
pub use events::{
    bin_counts, bin_events, load_events, read_binary, read_csv, save_events, write_binary, write_csv, Event, EventFormat,
    EventStream, EVENT_RECORD_BYTES,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed record at byte {offset}: {message}")]
    Malformed { offset: u64, message: String },
    #[error("event at byte {offset} has pixel ({x}, {y}) outside the sensor")]
    Coordinate { offset: u64, x: u16, y: u16 },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
