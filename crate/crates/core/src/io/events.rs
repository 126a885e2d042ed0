use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::sdt::Frame;

/// Size of one packed binary event.
pub const EVENT_RECORD_BYTES: usize = 16;

/// One sensor event: timestamp in microseconds, pixel, polarity bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventStream {
    pub width: u16,
    pub height: u16,
    /// Sorted by timestamp.
    pub events: Vec<Event>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    /// Little-endian `u64 t, u16 x, u16 y, u8 p` plus 3 zero bytes.
    Binary,
    /// Header `t,x,y,p`.
    Csv,
}

impl EventFormat {
    /// `.csv` is CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::Binary,
        }
    }
}

impl EventStream {
    /// Validates coordinates and polarity, then sorts by time (stable, so
    /// simultaneous events keep file order).
    pub fn new(width: u16, height: u16, events: Vec<Event>) -> Result<Self, DataError> {
        let offsets: Vec<u64> = (0..events.len() as u64).collect();
        Self::checked(width, height, events, &offsets)
    }

    fn checked(width: u16, height: u16, mut events: Vec<Event>, offsets: &[u64]) -> Result<Self, DataError> {
        if width == 0 || height == 0 {
            return Err(DataError::Config(format!("sensor size {width}x{height}")));
        }
        for (e, &offset) in events.iter().zip(offsets) {
            if e.x >= width || e.y >= height {
                return Err(DataError::Coordinate { offset, x: e.x, y: e.y });
            }
            if e.p > 1 {
                return Err(DataError::Malformed { offset, message: format!("polarity {}", e.p) });
            }
        }
        events.sort_by_key(|e| e.t);
        Ok(Self { width, height, events })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duration(&self) -> u64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0,
        }
    }
}

/// Parses packed records. Errors carry the byte offset of the bad record.
pub fn read_binary(mut r: impl Read, width: u16, height: u16) -> Result<EventStream, DataError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let whole = bytes.len() / EVENT_RECORD_BYTES * EVENT_RECORD_BYTES;
    if whole != bytes.len() {
        return Err(DataError::Malformed {
            offset: whole as u64,
            message: format!("truncated record ({} trailing bytes)", bytes.len() - whole),
        });
    }
    let mut events = Vec::with_capacity(whole / EVENT_RECORD_BYTES);
    let mut offsets = Vec::with_capacity(whole / EVENT_RECORD_BYTES);
    for (i, rec) in bytes.chunks_exact(EVENT_RECORD_BYTES).enumerate() {
        let offset = (i * EVENT_RECORD_BYTES) as u64;
        if rec[13..].iter().any(|&b| b != 0) {
            return Err(DataError::Malformed { offset, message: "non-zero padding".into() });
        }
        events.push(Event {
            t: u64::from_le_bytes(rec[0..8].try_into().expect("8 bytes")),
            x: u16::from_le_bytes([rec[8], rec[9]]),
            y: u16::from_le_bytes([rec[10], rec[11]]),
            p: rec[12],
        });
        offsets.push(offset);
    }
    EventStream::checked(width, height, events, &offsets)
}

pub fn write_binary(stream: &EventStream, mut w: impl Write) -> Result<(), DataError> {
    let mut rec = [0u8; EVENT_RECORD_BYTES];
    for e in &stream.events {
        rec[0..8].copy_from_slice(&e.t.to_le_bytes());
        rec[8..10].copy_from_slice(&e.x.to_le_bytes());
        rec[10..12].copy_from_slice(&e.y.to_le_bytes());
        rec[12] = e.p;
        w.write_all(&rec)?;
    }
    Ok(())
}

/// Parses `t,x,y,p` rows. Errors carry the byte offset of the bad row.
pub fn read_csv(r: impl Read, width: u16, height: u16) -> Result<EventStream, DataError> {
    let mut reader = csv::Reader::from_reader(r);
    let mut events = Vec::new();
    let mut offsets = Vec::new();
    let mut row = csv::StringRecord::new();
    loop {
        let offset = reader.position().byte();
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let e: Event = row
                    .deserialize(reader.headers().ok())
                    .map_err(|e| DataError::Malformed { offset, message: e.to_string() })?;
                events.push(e);
                offsets.push(offset);
            }
            Err(e) => return Err(DataError::Malformed { offset, message: e.to_string() }),
        }
    }
    EventStream::checked(width, height, events, &offsets)
}

pub fn write_csv(stream: &EventStream, w: impl Write) -> Result<(), DataError> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["t", "x", "y", "p"]).map_err(csv_io)?;
    for e in &stream.events {
        out.serialize(e).map_err(csv_io)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> DataError {
    DataError::Io(std::io::Error::other(e))
}

pub fn load_events(path: &Path, format: EventFormat, width: u16, height: u16) -> Result<EventStream, DataError> {
    let file = std::fs::File::open(path)?;
    let r = std::io::BufReader::new(file);
    match format {
        EventFormat::Binary => read_binary(r, width, height),
        EventFormat::Csv => read_csv(r, width, height),
    }
}

pub fn save_events(stream: &EventStream, path: &Path, format: EventFormat) -> Result<(), DataError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        EventFormat::Binary => write_binary(stream, &mut w)?,
        EventFormat::Csv => write_csv(stream, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

/// Per-bin, per-polarity, per-pixel event counts, `counts[t][(p*H + y)*W + x]`.
/// Bins split `[t_first, t_last]` uniformly; a zero-duration stream lands
/// entirely in bin 0.
pub fn bin_counts(stream: &EventStream, timesteps: usize) -> Result<Vec<Vec<u32>>, DataError> {
    if timesteps == 0 {
        return Err(DataError::Config("timesteps must be at least 1".into()));
    }
    let (w, h) = (usize::from(stream.width), usize::from(stream.height));
    let mut counts = vec![vec![0u32; 2 * w * h]; timesteps];
    let Some(first) = stream.events.first() else {
        return Ok(counts);
    };
    let span = u128::from(stream.duration()) + 1;
    for e in &stream.events {
        let bin = (u128::from(e.t - first.t) * timesteps as u128 / span) as usize;
        let idx = (usize::from(e.p) * h + usize::from(e.y)) * w + usize::from(e.x);
        counts[bin][idx] += 1;
    }
    Ok(counts)
}

/// Bins into `timesteps` two-channel frames with counts clamped to the
/// largest `bits`-bit value.
pub fn bin_events(stream: &EventStream, timesteps: usize, bits: u8) -> Result<Vec<Frame>, DataError> {
    if !(1..=8).contains(&bits) {
        return Err(DataError::Config(format!("input bits {bits} outside 1..=8")));
    }
    let max = (1u32 << bits) - 1;
    let (w, h) = (usize::from(stream.width), usize::from(stream.height));
    Ok(bin_counts(stream, timesteps)?
        .into_iter()
        .map(|c| {
            let mut f = Frame::zeros(2, h, w);
            for (d, n) in f.data.iter_mut().zip(c) {
                *d = n.min(max) as u8;
            }
            f
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(t: u64, x: u16, y: u16, p: u8) -> Event {
        Event { t, x, y, p }
    }

    #[test]
    fn empty_and_sorted() {
        assert!(read_binary(&[][..], 4, 4).unwrap().is_empty());
        assert!(read_csv("t,x,y,p\n".as_bytes(), 4, 4).unwrap().is_empty());
        let s = read_csv("t,x,y,p\n9,1,1,0\n3,2,0,1\n".as_bytes(), 4, 4).unwrap();
        assert_eq!(s.events, [ev(3, 2, 0, 1), ev(9, 1, 1, 0)]);
    }

    #[test]
    fn errors_carry_offsets() {
        let s = EventStream::new(4, 4, vec![ev(0, 0, 0, 0), ev(1, 3, 3, 1)]).unwrap();
        let mut buf = Vec::new();
        write_binary(&s, &mut buf).unwrap();
        buf[16 + 8] = 9;
        match read_binary(buf.as_slice(), 4, 4) {
            Err(DataError::Coordinate { offset, x, .. }) => assert_eq!((offset, x), (16, 9)),
            other => panic!("{other:?}"),
        }
        match read_binary(&buf[..20], 4, 4) {
            Err(DataError::Malformed { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("{other:?}"),
        }
        match read_csv("t,x,y,p\n1,1,1,0\n2,x,1,0\n".as_bytes(), 4, 4) {
            Err(DataError::Malformed { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_csv("t,x,y,p\n1,1,1,2\n".as_bytes(), 4, 4), Err(DataError::Malformed { .. })));
    }

    #[test]
    fn binning_edges() {
        let at_zero = EventStream::new(2, 2, vec![ev(5, 0, 0, 0); 7]).unwrap();
        let c = bin_counts(&at_zero, 4).unwrap();
        assert_eq!(c[0][0], 7);
        assert!(c[1..].iter().all(|b| b.iter().all(|&n| n == 0)));
        let f = bin_events(&at_zero, 4, 2).unwrap();
        assert_eq!(f[0].get(0, 0, 0), 3);
        let uniform = EventStream::new(2, 2, (0..400).map(|t| ev(t, 1, 0, 1)).collect()).unwrap();
        let per_bin: Vec<u32> = bin_counts(&uniform, 4).unwrap().iter().map(|b| b.iter().sum()).collect();
        assert_eq!(per_bin, [100, 100, 100, 100]);
    }

    fn streams() -> impl Strategy<Value = EventStream> {
        prop::collection::vec((0u64..1_000_000, 0u16..6, 0u16..5, 0u8..2), 0..300)
            .prop_map(|v| EventStream::new(6, 5, v.into_iter().map(|(t, x, y, p)| ev(t, x, y, p)).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn round_trips(s in streams()) {
            let mut bin = Vec::new();
            write_binary(&s, &mut bin).unwrap();
            prop_assert_eq!(&read_binary(bin.as_slice(), 6, 5).unwrap(), &s);
            let mut text = Vec::new();
            write_csv(&s, &mut text).unwrap();
            prop_assert_eq!(&read_csv(text.as_slice(), 6, 5).unwrap(), &s);
        }

        #[test]
        fn counts_conserved(s in streams(), t in 1usize..20) {
            let total: u64 = bin_counts(&s, t).unwrap().iter().flatten().map(|&n| u64::from(n)).sum();
            prop_assert_eq!(total, s.len() as u64);
        }
    }
}
