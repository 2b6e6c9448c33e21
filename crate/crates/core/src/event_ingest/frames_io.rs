//! Text cache for frame sequences: two comment lines of metadata, a CSV
//! header, then one `frame,channel,row,col,count` row per nonzero cell.

use std::io::{BufRead, Write};

use super::{BinningConfig, FrameCell, FrameSequence, IngestError, Result, SparseFrame};

const MAGIC_LINE: &str = "# clane frames v1";

pub fn write_frames<W: Write>(frames: &FrameSequence, mut out: W) -> Result<()> {
    let c = &frames.config;
    writeln!(out, "{MAGIC_LINE}")?;
    writeln!(
        out,
        "# t_start={} t_end={} window_us={} crop={},{},{},{} out={}x{} count_clip={} frames={}",
        frames.t_start,
        frames.t_end,
        c.window_us,
        c.crop_x0,
        c.crop_y0,
        c.crop_width,
        c.crop_height,
        c.out_width,
        c.out_height,
        c.count_clip,
        frames.len()
    )?;
    writeln!(out, "frame,channel,row,col,count")?;
    for f in &frames.frames {
        for cell in &f.cells {
            writeln!(
                out,
                "{},{},{},{},{}",
                f.index, cell.channel, cell.row, cell.col, cell.count
            )?;
        }
    }
    Ok(())
}

fn line_error(line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        location: format!("line {line}"),
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(raw: &str, line: usize, what: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| line_error(line, format!("bad {what} {raw:?}")))
}

pub fn read_frames<R: BufRead>(input: R) -> Result<FrameSequence> {
    let mut lines = input.lines();
    let mut next = |n: usize| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| line_error(n, "unexpected end of file"))?
            .map_err(IngestError::from)
    };

    if next(1)?.trim() != MAGIC_LINE {
        return Err(line_error(1, "missing frame cache magic line"));
    }
    let meta = next(2)?;
    let meta = meta
        .strip_prefix('#')
        .ok_or_else(|| line_error(2, "missing metadata line"))?;
    let mut cfg = BinningConfig::default();
    let (mut t_start, mut t_end, mut n_frames) = (None, None, None);
    for kv in meta.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| line_error(2, format!("bad metadata item {kv:?}")))?;
        match k {
            "t_start" => t_start = Some(parse_num(v, 2, k)?),
            "t_end" => t_end = Some(parse_num(v, 2, k)?),
            "window_us" => cfg.window_us = parse_num(v, 2, k)?,
            "count_clip" => cfg.count_clip = parse_num(v, 2, k)?,
            "frames" => n_frames = Some(parse_num::<usize>(v, 2, k)?),
            "crop" => {
                let parts: Vec<&str> = v.split(',').collect();
                if parts.len() != 4 {
                    return Err(line_error(2, "crop needs four values"));
                }
                cfg.crop_x0 = parse_num(parts[0], 2, "crop")?;
                cfg.crop_y0 = parse_num(parts[1], 2, "crop")?;
                cfg.crop_width = parse_num(parts[2], 2, "crop")?;
                cfg.crop_height = parse_num(parts[3], 2, "crop")?;
            }
            "out" => {
                let (w, h) = v.split_once('x').ok_or_else(|| line_error(2, "out must be WxH"))?;
                cfg.out_width = parse_num(w, 2, "out")?;
                cfg.out_height = parse_num(h, 2, "out")?;
            }
            other => return Err(line_error(2, format!("unknown metadata key {other:?}"))),
        }
    }
    let (Some(t_start), Some(t_end), Some(n_frames)) = (t_start, t_end, n_frames) else {
        return Err(line_error(2, "metadata needs t_start, t_end and frames"));
    };
    if next(3)?.trim() != "frame,channel,row,col,count" {
        return Err(line_error(3, "missing column header"));
    }

    let (w, h) = (cfg.out_width, cfg.out_height);
    let mut frames: Vec<SparseFrame> = (0..n_frames).map(|i| SparseFrame::empty(i, w, h)).collect();
    for (i, line) in lines.enumerate() {
        let n = i + 4;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(line_error(n, "expected five fields"));
        }
        let frame: usize = parse_num(fields[0], n, "frame")?;
        let cell = FrameCell {
            channel: parse_num(fields[1], n, "channel")?,
            row: parse_num(fields[2], n, "row")?,
            col: parse_num(fields[3], n, "col")?,
            count: parse_num(fields[4], n, "count")?,
        };
        if frame >= n_frames || cell.channel > 1 || cell.row >= h || cell.col >= w || cell.count == 0 {
            return Err(line_error(n, "cell out of range"));
        }
        let cells = &mut frames[frame].cells;
        if let Some(last) = cells.last() {
            if (last.channel, last.row, last.col) >= (cell.channel, cell.row, cell.col) {
                return Err(line_error(n, "cells must be strictly increasing within a frame"));
            }
        }
        cells.push(cell);
    }
    Ok(FrameSequence {
        t_start,
        t_end,
        config: cfg,
        frames,
    })
}
