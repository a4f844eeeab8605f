//! Event stream serialization: line-oriented CSV and a packed binary format.
//!
//! CSV layout:
//! ```text
//! # evdenoise-csv v1 W=346 H=260
//! x,y,t,p,label
//! ```
//! one event per line after the header, fields as decimal integers.
//!
//! Packed layout (all little-endian): magic `EVD1`, u16 width, u16 height,
//! u64 event count, then one 14-byte record per event
//! (u16 x, u16 y, u64 t, u8 polarity, u8 label).

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Label, Polarity, SensorGeometry};

const CSV_MAGIC: &str = "# evdenoise-csv v1";
const PACKED_MAGIC: &[u8; 4] = b"EVD1";
const PACKED_RECORD_BYTES: usize = 14;

/// On-disk encodings for event streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Packed,
}

/// Write a stream to `path` in the requested format.
pub fn write_events(path: &Path, stream: &EventStream, format: FileFormat) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    match format {
        FileFormat::Csv => write_csv(&mut w, stream),
        FileFormat::Packed => write_packed(&mut w, stream),
    }
}

/// Read a stream from `path`, expecting the given format.
pub fn read_events(path: &Path, format: FileFormat) -> Result<EventStream> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    match format {
        FileFormat::Csv => read_csv(&mut r),
        FileFormat::Packed => read_packed(&mut r),
    }
}

/// Read a stream, sniffing the format from the file's magic bytes.
pub fn read_events_auto(path: &Path) -> Result<EventStream> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(PACKED_MAGIC) {
        read_packed(&mut &bytes[..])
    } else if bytes.starts_with(CSV_MAGIC.as_bytes()) {
        read_csv(&mut &bytes[..])
    } else {
        Err(Error::Format {
            offset: 0,
            msg: "unrecognized event file magic".into(),
        })
    }
}

fn write_csv<W: Write>(w: &mut W, stream: &EventStream) -> Result<()> {
    let g = stream.geometry();
    writeln!(w, "{CSV_MAGIC} W={} H={}", g.width(), g.height())?;
    for e in stream.iter() {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.x,
            e.y,
            e.t,
            e.polarity.code(),
            e.label.code()
        )?;
    }
    Ok(())
}

fn read_csv<R: BufRead>(r: &mut R) -> Result<EventStream> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let header = header.trim_end();
    let rest = header.strip_prefix(CSV_MAGIC).ok_or_else(|| Error::Parse {
        line: 1,
        msg: format!("expected header starting with {CSV_MAGIC:?}"),
    })?;
    let geometry = parse_csv_header(rest).ok_or_else(|| Error::Parse {
        line: 1,
        msg: format!("malformed geometry in header {header:?}"),
    })??;

    let mut events = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        events.push(parse_csv_line(line).map_err(|msg| Error::Parse {
            line: line_no,
            msg,
        })?);
    }
    EventStream::new(geometry, events)
}

fn parse_csv_header(rest: &str) -> Option<Result<SensorGeometry>> {
    let mut parts = rest.split_whitespace();
    let w = parts.next()?.strip_prefix("W=")?.parse::<u16>().ok()?;
    let h = parts.next()?.strip_prefix("H=")?.parse::<u16>().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some(SensorGeometry::new(w, h))
}

fn parse_csv_line(line: &str) -> std::result::Result<Event, String> {
    let mut fields = line.split(',');
    let mut next = |name: &str| {
        fields
            .next()
            .map(str::trim)
            .ok_or_else(|| format!("missing field {name}"))
    };
    let x = next("x")?.parse::<u16>().map_err(|e| format!("x: {e}"))?;
    let y = next("y")?.parse::<u16>().map_err(|e| format!("y: {e}"))?;
    let t = next("t")?.parse::<u64>().map_err(|e| format!("t: {e}"))?;
    let p = next("p")?.parse::<u8>().map_err(|e| format!("p: {e}"))?;
    let l = next("label")?
        .parse::<u8>()
        .map_err(|e| format!("label: {e}"))?;
    if fields.next().is_some() {
        return Err("too many fields".into());
    }
    Ok(Event {
        x,
        y,
        t,
        polarity: Polarity::from_code(p).map_err(|e| e.to_string())?,
        label: Label::from_code(l).map_err(|e| e.to_string())?,
    })
}

fn write_packed<W: Write>(w: &mut W, stream: &EventStream) -> Result<()> {
    let g = stream.geometry();
    w.write_all(PACKED_MAGIC)?;
    w.write_u16::<LittleEndian>(g.width())?;
    w.write_u16::<LittleEndian>(g.height())?;
    w.write_u64::<LittleEndian>(stream.len() as u64)?;
    for e in stream.iter() {
        w.write_u16::<LittleEndian>(e.x)?;
        w.write_u16::<LittleEndian>(e.y)?;
        w.write_u64::<LittleEndian>(e.t)?;
        w.write_u8(e.polarity.code())?;
        w.write_u8(e.label.code())?;
    }
    Ok(())
}

fn read_packed<R: Read>(r: &mut R) -> Result<EventStream> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PACKED_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {magic:?}, expected {PACKED_MAGIC:?}"),
        });
    }
    let width = r.read_u16::<LittleEndian>()?;
    let height = r.read_u16::<LittleEndian>()?;
    let count = r.read_u64::<LittleEndian>()?;
    let geometry = SensorGeometry::new(width, height)?;

    let mut events = Vec::with_capacity(count.min(1 << 24) as usize);
    for i in 0..count {
        let offset = 16 + i * PACKED_RECORD_BYTES as u64;
        let mut record = [0u8; PACKED_RECORD_BYTES];
        r.read_exact(&mut record).map_err(|_| Error::Format {
            offset,
            msg: format!("truncated record {i} of {count}"),
        })?;
        let rec = &mut &record[..];
        let x = rec.read_u16::<LittleEndian>()?;
        let y = rec.read_u16::<LittleEndian>()?;
        let t = rec.read_u64::<LittleEndian>()?;
        let p = rec.read_u8()?;
        let l = rec.read_u8()?;
        events.push(Event {
            x,
            y,
            t,
            polarity: Polarity::from_code(p).map_err(|_| Error::Format {
                offset: offset + 12,
                msg: format!("bad polarity byte {p}"),
            })?,
            label: Label::from_code(l).map_err(|_| Error::Format {
                offset: offset + 13,
                msg: format!("bad label byte {l}"),
            })?,
        });
    }
    EventStream::new(geometry, events)
}
