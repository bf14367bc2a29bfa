//! On-disk field format: a small text header followed by a little-endian
//! 64-bit float nodal payload.
//!
//! ```text
//! translab-field v1
//! n 2
//! m 1
//! cells_per_side 64
//! frames 1
//! t0 -1          (only when frames > 1)
//! dt 0.001       (only when frames > 1)
//! end_header
//! <frames × m × node_count f64, LE, frame-major then component-major>
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{DiscreteField, Grid};
use crate::parabolic::TimeField;

pub const MAGIC: &str = "translab-field";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub enum FieldFile {
    Static(DiscreteField),
    Time(TimeField),
}

impl FieldFile {
    pub fn grid(&self) -> &Grid {
        match self {
            FieldFile::Static(f) => f.grid(),
            FieldFile::Time(f) => f.grid(),
        }
    }

    pub fn components(&self) -> usize {
        match self {
            FieldFile::Static(f) => f.components(),
            FieldFile::Time(f) => f.components(),
        }
    }
}

pub fn write_static<W: Write>(w: &mut W, field: &DiscreteField) -> Result<()> {
    let grid = field.grid();
    writeln!(w, "{MAGIC} v{VERSION}")?;
    writeln!(w, "n {}", grid.dim())?;
    writeln!(w, "m {}", field.components())?;
    writeln!(w, "cells_per_side {}", grid.cells_per_side())?;
    writeln!(w, "frames 1")?;
    writeln!(w, "end_header")?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_time<W: Write>(w: &mut W, field: &TimeField) -> Result<()> {
    let grid = field.grid();
    writeln!(w, "{MAGIC} v{VERSION}")?;
    writeln!(w, "n {}", grid.dim())?;
    writeln!(w, "m {}", field.components())?;
    writeln!(w, "cells_per_side {}", grid.cells_per_side())?;
    writeln!(w, "frames {}", field.frame_count())?;
    writeln!(w, "t0 {:?}", field.t0())?;
    writeln!(w, "dt {:?}", field.dt())?;
    writeln!(w, "end_header")?;
    for k in 0..field.frame_count() {
        for v in field.frame(k).values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_field_path<P: AsRef<Path>>(path: P, field: &FieldFile) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match field {
        FieldFile::Static(f) => write_static(&mut w, f),
        FieldFile::Time(f) => write_time(&mut w, f),
    }
}

pub fn read_field<R: Read>(r: &mut R) -> Result<FieldFile> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;

    // split header (text up to end_header line) from payload
    let marker = b"end_header\n";
    let header_end = find_subslice(&bytes, marker)
        .ok_or_else(|| Error::Format("missing end_header line".into()))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let payload = &bytes[header_end + marker.len()..];

    let mut n = None;
    let mut m = None;
    let mut cells = None;
    let mut frames = None;
    let mut t0 = None;
    let mut dt = None;
    for (lineno, line) in header.lines().enumerate() {
        let line = line.trim();
        if lineno == 0 {
            let expected = format!("{MAGIC} v{VERSION}");
            if line != expected {
                return Err(Error::Format(format!(
                    "line 1: expected '{expected}', found '{line}'"
                )));
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or("");
        let value = parts.next().unwrap_or("");
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Format(format!("line {}: bad integer '{v}'", lineno + 1)))
        };
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Format(format!("line {}: bad float '{v}'", lineno + 1)))
        };
        match key {
            "n" => n = Some(parse_usize(value)?),
            "m" => m = Some(parse_usize(value)?),
            "cells_per_side" => cells = Some(parse_usize(value)?),
            "frames" => frames = Some(parse_usize(value)?),
            "t0" => t0 = Some(parse_f64(value)?),
            "dt" => dt = Some(parse_f64(value)?),
            "" => {}
            other => return Err(Error::Format(format!("line {}: unknown key '{other}'", lineno + 1))),
        }
    }
    let n = n.ok_or_else(|| Error::Format("missing 'n'".into()))?;
    let m = m.ok_or_else(|| Error::Format("missing 'm'".into()))?;
    let cells = cells.ok_or_else(|| Error::Format("missing 'cells_per_side'".into()))?;
    let frames = frames.ok_or_else(|| Error::Format("missing 'frames'".into()))?;
    if frames == 0 {
        return Err(Error::Format("frames must be >= 1".into()));
    }

    let grid = Grid::new(n, cells)?;
    let frame_len = m * grid.node_count();
    let expected_bytes = frames * frame_len * 8;
    if payload.len() != expected_bytes {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header implies {expected_bytes}",
            payload.len()
        )));
    }
    let mut all = Vec::with_capacity(frames * frame_len);
    for chunk in payload.chunks_exact(8) {
        all.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }

    if frames == 1 {
        let field = DiscreteField::from_values(grid, m, all)?;
        return Ok(FieldFile::Static(field));
    }
    let t0 = t0.ok_or_else(|| Error::Format("time field missing 't0'".into()))?;
    let dt = dt.ok_or_else(|| Error::Format("time field missing 'dt'".into()))?;
    let mut tf = TimeField::new(grid, m, t0, dt);
    for k in 0..frames {
        let slice = all[k * frame_len..(k + 1) * frame_len].to_vec();
        tf.push_frame(DiscreteField::from_values(grid, m, slice)?);
    }
    Ok(FieldFile::Time(tf))
}

pub fn read_field_path<P: AsRef<Path>>(path: P) -> Result<FieldFile> {
    let mut r = BufReader::new(File::open(path)?);
    read_field(&mut r)
}

fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}
