use serde::{Deserialize, Serialize};

use super::{EventStream, FrameCell, FrameSequence, IngestError, Result, SparseFrame};

/// Crop, temporal window and pooling parameters.
///
/// The default mirrors a 1280x800 sensor: the central 600x600 region pooled
/// by 6 onto a 100x100 grid, 40 ms windows, counts clipped to 8 bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinningConfig {
    pub crop_x0: u16,
    pub crop_y0: u16,
    pub crop_width: u16,
    pub crop_height: u16,
    pub window_us: u64,
    pub out_width: u16,
    pub out_height: u16,
    /// Per-cell saturation bound. `u32::MAX` disables clipping.
    pub count_clip: u32,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self {
            crop_x0: 340,
            crop_y0: 100,
            crop_width: 600,
            crop_height: 600,
            window_us: 40_000,
            out_width: 100,
            out_height: 100,
            count_clip: 255,
        }
    }
}

impl BinningConfig {
    pub fn validate(&self, sensor_width: u16, sensor_height: u16) -> Result<()> {
        let bad = |m: String| Err(IngestError::Config(m));
        if self.window_us == 0 {
            return bad("window_us must be positive".into());
        }
        if self.count_clip == 0 {
            return bad("count_clip must be at least 1".into());
        }
        if self.out_width == 0 || self.out_height == 0 {
            return bad("output resolution must be nonzero".into());
        }
        if self.crop_x0 as u32 + self.crop_width as u32 > sensor_width as u32
            || self.crop_y0 as u32 + self.crop_height as u32 > sensor_height as u32
        {
            return bad(format!(
                "crop {}x{}+{}+{} does not fit the {}x{} sensor",
                self.crop_width, self.crop_height, self.crop_x0, self.crop_y0, sensor_width, sensor_height
            ));
        }
        if self.crop_width == 0
            || self.crop_height == 0
            || !self.crop_width.is_multiple_of(self.out_width)
            || !self.crop_height.is_multiple_of(self.out_height)
        {
            return bad(format!(
                "crop {}x{} is not an integer multiple of output {}x{}",
                self.crop_width, self.crop_height, self.out_width, self.out_height
            ));
        }
        Ok(())
    }

    pub fn pool_x(&self) -> u16 {
        self.crop_width / self.out_width
    }

    pub fn pool_y(&self) -> u16 {
        self.crop_height / self.out_height
    }

    /// Output cell `(row, col)` of a sensor pixel, or `None` outside the crop.
    #[inline]
    pub fn cell_of(&self, x: u16, y: u16) -> Option<(u16, u16)> {
        let dx = x.checked_sub(self.crop_x0)?;
        let dy = y.checked_sub(self.crop_y0)?;
        if dx >= self.crop_width || dy >= self.crop_height {
            return None;
        }
        Some((dy / self.pool_y(), dx / self.pool_x()))
    }

    pub fn with_window_us(mut self, window_us: u64) -> Self {
        self.window_us = window_us;
        self
    }
}

/// Bin a stream, deriving the time range from the events: the start is the
/// first timestamp rounded down to a window multiple, the end is one past
/// the last timestamp. An empty stream yields zero frames.
pub fn bin_to_frames(stream: &EventStream, cfg: &BinningConfig) -> Result<FrameSequence> {
    cfg.validate(stream.width(), stream.height())?;
    let (t_start, t_end) = match (stream.events().first(), stream.events().last()) {
        (Some(first), Some(last)) => (first.t - first.t % cfg.window_us, last.t + 1),
        _ => (0, 0),
    };
    bin_to_frames_range(stream, cfg, t_start, t_end)
}

/// Bin a stream over an explicit `[t_start, t_end)` range. Events outside
/// the range or the crop are dropped.
pub fn bin_to_frames_range(
    stream: &EventStream,
    cfg: &BinningConfig,
    t_start: u64,
    t_end: u64,
) -> Result<FrameSequence> {
    cfg.validate(stream.width(), stream.height())?;
    if t_end < t_start {
        return Err(IngestError::Config(format!(
            "time range [{t_start}, {t_end}) is reversed"
        )));
    }
    let n_frames = (t_end - t_start).div_ceil(cfg.window_us) as usize;
    let (w, h) = (cfg.out_width, cfg.out_height);
    let plane = w as usize * h as usize;

    let mut frames: Vec<SparseFrame> = (0..n_frames).map(|i| SparseFrame::empty(i, w, h)).collect();
    let mut counts = vec![0u32; 2 * plane];
    let mut touched: Vec<usize> = Vec::new();
    let mut current: Option<usize> = None;

    let flush = |frame: &mut SparseFrame, counts: &mut [u32], touched: &mut Vec<usize>| {
        touched.sort_unstable();
        frame.cells.reserve(touched.len());
        for &flat in touched.iter() {
            let channel = (flat / plane) as u8;
            let rem = flat % plane;
            frame.cells.push(FrameCell {
                channel,
                row: (rem / w as usize) as u16,
                col: (rem % w as usize) as u16,
                count: counts[flat].min(cfg.count_clip),
            });
            counts[flat] = 0;
        }
        touched.clear();
    };

    for e in stream.events() {
        if e.t < t_start || e.t >= t_end {
            continue;
        }
        let Some((row, col)) = cfg.cell_of(e.x, e.y) else {
            continue;
        };
        let frame = ((e.t - t_start) / cfg.window_us) as usize;
        if current != Some(frame) {
            if let Some(prev) = current {
                flush(&mut frames[prev], &mut counts, &mut touched);
            }
            current = Some(frame);
        }
        let flat = e.p.channel() as usize * plane + row as usize * w as usize + col as usize;
        if counts[flat] == 0 {
            touched.push(flat);
        }
        counts[flat] = counts[flat].saturating_add(1);
    }
    if let Some(prev) = current {
        flush(&mut frames[prev], &mut counts, &mut touched);
    }

    Ok(FrameSequence {
        t_start,
        t_end,
        config: *cfg,
        frames,
    })
}

/// Fraction of zero cells over all frames and both channels.
pub fn sparsity(frames: &FrameSequence) -> Result<f64> {
    if frames.is_empty() {
        return Err(IngestError::EmptySequence);
    }
    let cells_per_frame = 2.0 * frames.config.out_width as f64 * frames.config.out_height as f64;
    let nonzero: usize = frames.frames.iter().map(SparseFrame::nonzero).sum();
    Ok(1.0 - nonzero as f64 / (frames.len() as f64 * cells_per_frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_ingest::{Event, Polarity};

    fn small_cfg() -> BinningConfig {
        BinningConfig {
            crop_x0: 2,
            crop_y0: 1,
            crop_width: 6,
            crop_height: 4,
            window_us: 10,
            out_width: 3,
            out_height: 2,
            count_clip: 255,
        }
    }

    fn ev(x: u16, y: u16, t: u64, p: Polarity) -> Event {
        Event { x, y, t, p }
    }

    #[test]
    fn empty_stream_with_explicit_range() {
        let s = EventStream::new(10, 10, vec![]).unwrap();
        let f = bin_to_frames_range(&s, &small_cfg(), 0, 30).unwrap();
        assert_eq!(f.len(), 3);
        assert!(f.frames.iter().all(|fr| fr.cells.is_empty()));
        assert_eq!(sparsity(&f).unwrap(), 1.0);
        assert_eq!(bin_to_frames(&s, &small_cfg()).unwrap().len(), 0);
    }

    #[test]
    fn single_event_at_crop_corner() {
        let s = EventStream::new(10, 10, vec![ev(2, 1, 7, Polarity::Negative)]).unwrap();
        let f = bin_to_frames(&s, &small_cfg()).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.t_start, 0);
        assert_eq!(
            f.frames[0].cells,
            vec![FrameCell {
                channel: 1,
                row: 0,
                col: 0,
                count: 1
            }]
        );
    }

    #[test]
    fn pooling_cropping_and_clipping() {
        let cfg = BinningConfig {
            count_clip: 2,
            ..small_cfg()
        };
        let events = vec![
            ev(0, 0, 0, Polarity::Positive), // outside crop
            ev(7, 4, 1, Polarity::Positive), // cell (1, 2)
            ev(6, 3, 2, Polarity::Positive), // cell (1, 2)
            ev(7, 3, 3, Polarity::Positive), // cell (1, 2), clipped
            ev(3, 2, 15, Polarity::Positive),
        ];
        let s = EventStream::new(10, 10, events).unwrap();
        let f = bin_to_frames(&s, &cfg).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(
            f.frames[0].cells,
            vec![FrameCell {
                channel: 0,
                row: 1,
                col: 2,
                count: 2
            }]
        );
        assert_eq!(f.frames[1].cells.len(), 1);
    }

    #[test]
    fn window_alignment_rounds_down() {
        let s = EventStream::new(10, 10, vec![ev(3, 2, 27, Polarity::Positive)]).unwrap();
        let f = bin_to_frames(&s, &small_cfg()).unwrap();
        assert_eq!((f.t_start, f.t_end, f.len()), (20, 28, 1));
    }

    #[test]
    fn fully_dense_frame_has_zero_sparsity() {
        let cfg = small_cfg();
        let mut events = Vec::new();
        for y in 1..5 {
            for x in 2..8 {
                events.push(ev(x, y, 0, Polarity::Positive));
                events.push(ev(x, y, 0, Polarity::Negative));
            }
        }
        let s = EventStream::new(10, 10, events).unwrap();
        let f = bin_to_frames(&s, &cfg).unwrap();
        assert_eq!(sparsity(&f).unwrap(), 0.0);
    }

    #[test]
    fn config_validation() {
        let cfg = small_cfg();
        assert!(cfg.validate(8, 5).is_ok());
        assert!(cfg.validate(7, 5).is_err());
        assert!(BinningConfig { window_us: 0, ..cfg }.validate(10, 10).is_err());
        assert!(BinningConfig { count_clip: 0, ..cfg }.validate(10, 10).is_err());
        assert!(BinningConfig { out_width: 4, ..cfg }.validate(10, 10).is_err());
        assert!(BinningConfig::default().validate(1280, 800).is_ok());
        assert_eq!(BinningConfig::default().pool_x(), 6);
    }

    #[test]
    fn empty_sequence_sparsity_is_an_error() {
        let s = EventStream::new(10, 10, vec![]).unwrap();
        let f = bin_to_frames(&s, &small_cfg()).unwrap();
        assert!(matches!(sparsity(&f), Err(IngestError::EmptySequence)));
    }
}
