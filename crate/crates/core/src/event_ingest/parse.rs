use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use super::{Event, EventStream, IngestError, Polarity, Result};

const MAGIC: &[u8; 4] = b"EVT1";
const HEADER_LEN: usize = 16;
const RECORD_LEN: usize = 13;

/// On-disk event encodings.
///
/// `BinaryV1` carries the sensor size in its header; CSV does not, so the
/// caller supplies it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventFormat {
    BinaryV1,
    Csv { width: u16, height: u16 },
}

pub fn parse_events(bytes: &[u8], format: EventFormat) -> Result<EventStream> {
    match format {
        EventFormat::BinaryV1 => parse_binary(bytes),
        EventFormat::Csv { width, height } => parse_csv(bytes, width, height),
    }
}

fn byte_error(offset: usize, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        location: format!("byte {offset}"),
        message: message.into(),
    }
}

fn parse_binary(bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < HEADER_LEN {
        return Err(byte_error(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(byte_error(0, "bad magic, expected EVT1"));
    }
    let width = LittleEndian::read_u16(&bytes[4..6]);
    let height = LittleEndian::read_u16(&bytes[6..8]);
    let count = LittleEndian::read_u64(&bytes[8..16]);

    let body = &bytes[HEADER_LEN..];
    let expected = (count as u128) * RECORD_LEN as u128;
    if (body.len() as u128) < expected {
        let whole = body.len() / RECORD_LEN;
        return Err(byte_error(
            HEADER_LEN + whole * RECORD_LEN,
            format!("truncated record {whole} of {count}"),
        ));
    }
    if (body.len() as u128) > expected {
        return Err(byte_error(
            HEADER_LEN + expected as usize,
            "trailing bytes after last record",
        ));
    }

    let mut events = Vec::with_capacity(count as usize);
    for (i, rec) in body.chunks_exact(RECORD_LEN).enumerate() {
        let p = match rec[12] {
            1 => Polarity::Positive,
            0 => Polarity::Negative,
            other => {
                return Err(byte_error(
                    HEADER_LEN + i * RECORD_LEN + 12,
                    format!("polarity byte {other} is not 0 or 1"),
                ))
            }
        };
        events.push(Event {
            x: LittleEndian::read_u16(&rec[0..2]),
            y: LittleEndian::read_u16(&rec[2..4]),
            t: LittleEndian::read_u64(&rec[4..12]),
            p,
        });
    }
    EventStream::new(width, height, events)
}

fn parse_csv(bytes: &[u8], width: u16, height: u16) -> Result<EventStream> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let header_error = |message: String| IngestError::Parse {
        location: "line 1".into(),
        message,
    };
    let headers = reader.headers().map_err(|e| header_error(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "y", "t", "p"] {
        return Err(header_error(format!(
            "expected header x,y,t,p, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut events = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            IngestError::Parse {
                location: format!("line {line}"),
                message: e.to_string(),
            }
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field_error = |name: &str, raw: &str| IngestError::Parse {
            location: format!("line {line}"),
            message: format!("bad {name} field {raw:?}"),
        };
        let x: u16 = record[0].parse().map_err(|_| field_error("x", &record[0]))?;
        let y: u16 = record[1].parse().map_err(|_| field_error("y", &record[1]))?;
        let t: u64 = record[2].parse().map_err(|_| field_error("t", &record[2]))?;
        let p = match &record[3] {
            "1" | "+1" => Polarity::Positive,
            "-1" => Polarity::Negative,
            raw => return Err(field_error("p", raw)),
        };
        events.push(Event { x, y, t, p });
    }
    EventStream::new(width, height, events)
}

/// Serialize a stream in the `EVT1` binary layout.
pub fn encode_binary_v1(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + stream.len() * RECORD_LEN);
    out.extend_from_slice(MAGIC);
    out.write_u16::<LittleEndian>(stream.width()).unwrap();
    out.write_u16::<LittleEndian>(stream.height()).unwrap();
    out.write_u64::<LittleEndian>(stream.len() as u64).unwrap();
    for e in stream.events() {
        out.write_u16::<LittleEndian>(e.x).unwrap();
        out.write_u16::<LittleEndian>(e.y).unwrap();
        out.write_u64::<LittleEndian>(e.t).unwrap();
        out.push(match e.p {
            Polarity::Positive => 1,
            Polarity::Negative => 0,
        });
    }
    out
}

pub fn encode_csv(stream: &EventStream) -> String {
    let mut out = String::from("x,y,t,p\n");
    for e in stream.events() {
        let p = match e.p {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        };
        out.push_str(&format!("{},{},{},{}\n", e.x, e.y, e.t, p));
    }
    out
}
