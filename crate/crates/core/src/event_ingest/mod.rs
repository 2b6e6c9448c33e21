//! Event-stream ingestion: parsing, cropping and binning into sparse
//! per-polarity event-count frames.

mod binning;
mod frames_io;
mod parse;

pub use binning::{bin_to_frames, bin_to_frames_range, sparsity, BinningConfig};
pub use frames_io::{read_frames, write_frames};
pub use parse::{encode_binary_v1, encode_csv, parse_events, EventFormat};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("event {index} at ({x}, {y}) lies outside the {width}x{height} sensor")]
    OutOfBounds {
        index: usize,
        x: u32,
        y: u32,
        width: u16,
        height: u16,
    },
    #[error("invalid binning config: {0}")]
    Config(String),
    #[error("sparsity of an empty frame sequence is undefined")]
    EmptySequence,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    /// Frame channel: 0 for positive, 1 for negative.
    #[inline]
    pub fn channel(self) -> u8 {
        match self {
            Polarity::Positive => 0,
            Polarity::Negative => 1,
        }
    }
}

/// One brightness-change event. `t` is in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: u64,
    pub p: Polarity,
}

/// Time-ordered events from a sensor of known size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventStream {
    width: u16,
    height: u16,
    events: Vec<Event>,
}

impl EventStream {
    /// Validates bounds and stable-sorts by timestamp.
    pub fn new(width: u16, height: u16, mut events: Vec<Event>) -> Result<Self> {
        for (index, e) in events.iter().enumerate() {
            if e.x >= width || e.y >= height {
                return Err(IngestError::OutOfBounds {
                    index,
                    x: e.x as u32,
                    y: e.y as u32,
                    width,
                    height,
                });
            }
        }
        if !events.windows(2).all(|w| w[0].t <= w[1].t) {
            events.sort_by_key(|e| e.t);
        }
        Ok(Self { width, height, events })
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// One nonzero cell of an event frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct FrameCell {
    pub channel: u8,
    pub row: u16,
    pub col: u16,
    pub count: u32,
}

/// Sparse two-channel count histogram of one temporal window. Cells are
/// kept sorted by `(channel, row, col)` with no duplicates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseFrame {
    pub index: usize,
    pub width: u16,
    pub height: u16,
    pub cells: Vec<FrameCell>,
}

impl SparseFrame {
    pub fn empty(index: usize, width: u16, height: u16) -> Self {
        Self {
            index,
            width,
            height,
            cells: Vec::new(),
        }
    }

    pub fn nonzero(&self) -> usize {
        self.cells.len()
    }

    /// Flat index `channel * H * W + row * W + col` of a cell.
    #[inline]
    pub fn flat_index(&self, cell: &FrameCell) -> usize {
        let plane = self.width as usize * self.height as usize;
        cell.channel as usize * plane + cell.row as usize * self.width as usize + cell.col as usize
    }
}

/// Contiguous frames covering `[t_start, t_end)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameSequence {
    pub t_start: u64,
    pub t_end: u64,
    pub config: BinningConfig,
    pub frames: Vec<SparseFrame>,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn total_count(&self) -> u64 {
        self.frames
            .iter()
            .flat_map(|f| f.cells.iter())
            .map(|c| c.count as u64)
            .sum()
    }
}
