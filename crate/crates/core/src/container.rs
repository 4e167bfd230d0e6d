//! Versioned binary containers: a text header followed by a little-endian
//! `f64` payload with a SHA-256 checksum.
//!
//! ```text
//! QRD-TRAJ 1
//! dt_ns=16
//! ...
//! payload_len=4800
//! checksum=sha256:<hex>
//! ---
//! <payload_len * 8 bytes>
//! ```
//!
//! Header keys are written in the given order. `payload_len` and `checksum`
//! are reserved.

use std::io::{BufRead, Read, Seek, SeekFrom, Write};

use sha2::{Digest, Sha256};

use crate::error::FormatError;

const SEPARATOR: &str = "---";
const LEN_KEY: &str = "payload_len";
const SUM_KEY: &str = "checksum";

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub version: u32,
    pub header: Vec<(String, String)>,
    pub payload: Vec<f64>,
}

impl Container {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Header value parsed with `FromStr`, or a `Malformed` error naming the key.
    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, FormatError> {
        let raw = self
            .get(key)
            .ok_or_else(|| FormatError::Malformed(format!("missing header key {key:?}")))?;
        raw.parse()
            .map_err(|_| FormatError::Malformed(format!("bad value {raw:?} for header key {key:?}")))
    }
}

pub fn payload_checksum(payload: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in payload {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_container<W: Write>(
    mut w: W,
    kind: &str,
    version: u32,
    header: &[(String, String)],
    payload: &[f64],
) -> Result<(), FormatError> {
    check_header(header)?;
    writeln!(w, "{kind} {version}")?;
    for (k, v) in header {
        writeln!(w, "{k}={v}")?;
    }
    writeln!(w, "{LEN_KEY}={}", payload.len())?;
    writeln!(w, "{SUM_KEY}=sha256:{}", payload_checksum(payload))?;
    writeln!(w, "{SEPARATOR}")?;
    let mut buf = Vec::with_capacity(8 * 4096);
    for chunk in payload.chunks(4096) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a container whose payload arrives in pieces. The checksum line is
/// written as a placeholder and patched in [`ContainerWriter::finish`].
pub struct ContainerWriter<W: Write + Seek> {
    w: W,
    hasher: Sha256,
    checksum_offset: u64,
    declared: usize,
    written: usize,
    buf: Vec<u8>,
}

impl<W: Write + Seek> ContainerWriter<W> {
    pub fn new(
        mut w: W,
        kind: &str,
        version: u32,
        header: &[(String, String)],
        payload_len: usize,
    ) -> Result<Self, FormatError> {
        check_header(header)?;
        let mut text = format!("{kind} {version}\n");
        for (k, v) in header {
            text.push_str(&format!("{k}={v}\n"));
        }
        text.push_str(&format!("{LEN_KEY}={payload_len}\n{SUM_KEY}=sha256:"));
        let start = w.stream_position()?;
        w.write_all(text.as_bytes())?;
        let checksum_offset = start + text.len() as u64;
        w.write_all(&[b'0'; 64])?;
        w.write_all(format!("\n{SEPARATOR}\n").as_bytes())?;
        Ok(ContainerWriter {
            w,
            hasher: Sha256::new(),
            checksum_offset,
            declared: payload_len,
            written: 0,
            buf: Vec::new(),
        })
    }

    pub fn push(&mut self, values: &[f64]) -> Result<(), FormatError> {
        if self.written + values.len() > self.declared {
            return Err(FormatError::Malformed(format!(
                "payload exceeds the declared {} values",
                self.declared
            )));
        }
        self.buf.clear();
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        self.hasher.update(&self.buf);
        self.w.write_all(&self.buf)?;
        self.written += values.len();
        Ok(())
    }

    /// Patch the checksum and return the inner writer.
    pub fn finish(mut self) -> Result<W, FormatError> {
        if self.written != self.declared {
            return Err(FormatError::Malformed(format!(
                "payload has {} values but {} were declared",
                self.written, self.declared
            )));
        }
        let hex: String = self.hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        let end = self.w.stream_position()?;
        self.w.seek(SeekFrom::Start(self.checksum_offset))?;
        self.w.write_all(hex.as_bytes())?;
        self.w.seek(SeekFrom::Start(end))?;
        self.w.flush()?;
        Ok(self.w)
    }
}

fn check_header(header: &[(String, String)]) -> Result<(), FormatError> {
    for (k, v) in header {
        if k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') || k == LEN_KEY || k == SUM_KEY {
            return Err(FormatError::Malformed(format!("unwritable header entry {k:?}")));
        }
    }
    Ok(())
}

fn read_line<R: BufRead>(r: &mut R) -> Result<String, FormatError> {
    let mut line = String::new();
    let n = r.read_line(&mut line)?;
    if n == 0 || !line.ends_with('\n') {
        return Err(FormatError::Truncated("header ends before the payload separator".into()));
    }
    line.pop();
    Ok(line)
}

/// Read a container of the given kind, refusing any version other than
/// `supported_version`.
pub fn read_container<R: BufRead>(mut r: R, kind: &str, supported_version: u32) -> Result<Container, FormatError> {
    let mut first = String::new();
    r.read_line(&mut first)?;
    let first = first.trim_end_matches('\n');
    let (found_kind, version) = first.split_once(' ').unwrap_or((first, ""));
    if found_kind != kind {
        return Err(FormatError::BadMagic {
            expected: kind.to_string(),
            found: first.chars().take(40).collect(),
        });
    }
    let version: u32 = version
        .parse()
        .map_err(|_| FormatError::Malformed(format!("bad version field {version:?}")))?;
    if version != supported_version {
        return Err(FormatError::VersionMismatch {
            kind: kind.to_string(),
            found: version,
            supported: supported_version,
        });
    }

    let mut header = Vec::new();
    let mut len = None;
    let mut sum = None;
    loop {
        let line = read_line(&mut r)?;
        if line == SEPARATOR {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| FormatError::Malformed(format!("header line without '=': {line:?}")))?;
        match k {
            LEN_KEY => {
                len = Some(
                    v.parse::<usize>()
                        .map_err(|_| FormatError::Malformed(format!("bad payload length {v:?}")))?,
                )
            }
            SUM_KEY => {
                sum = Some(
                    v.strip_prefix("sha256:")
                        .ok_or_else(|| FormatError::Malformed(format!("unknown checksum {v:?}")))?
                        .to_string(),
                )
            }
            _ => header.push((k.to_string(), v.to_string())),
        }
    }
    let len = len.ok_or_else(|| FormatError::Malformed("missing payload_len".into()))?;
    let sum = sum.ok_or_else(|| FormatError::Malformed("missing checksum".into()))?;

    let mut payload = Vec::with_capacity(len);
    let mut buf = vec![0u8; 8 * 4096];
    let mut remaining = len;
    while remaining > 0 {
        let n = remaining.min(4096);
        let bytes = &mut buf[..8 * n];
        read_full(&mut r, bytes).map_err(|e| match e {
            FormatError::Truncated(_) => FormatError::Truncated(format!(
                "payload declares {len} values but only {} are present",
                len - remaining
            )),
            other => other,
        })?;
        payload.extend(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))));
        remaining -= n;
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(FormatError::Malformed("trailing bytes after payload".into()));
    }
    let actual = payload_checksum(&payload);
    if actual != sum {
        return Err(FormatError::ChecksumMismatch { expected: sum, actual });
    }
    Ok(Container {
        kind: kind.to_string(),
        version,
        header,
        payload,
    })
}

fn read_full<R: Read>(r: &mut R, mut buf: &mut [u8]) -> Result<(), FormatError> {
    while !buf.is_empty() {
        match r.read(buf) {
            Ok(0) => return Err(FormatError::Truncated(String::new())),
            Ok(n) => buf = &mut buf[n..],
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// Header entries from `(key, value)` pairs of displayable values.
pub fn header_entries<I, K, V>(pairs: I) -> Vec<(String, String)>
where
    I: IntoIterator<Item = (K, V)>,
    K: ToString,
    V: ToString,
{
    pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn sample() -> Vec<u8> {
        let mut out = Vec::new();
        let header = header_entries([("dt_ns", "16"), ("note", "a b=c")]);
        write_container(&mut out, "QRD-TEST", 2, &header, &[1.0, -2.5, f64::MIN_POSITIVE]).unwrap();
        out
    }

    #[test]
    fn round_trip() {
        let c = read_container(Cursor::new(sample()), "QRD-TEST", 2).unwrap();
        assert_eq!(c.payload, vec![1.0, -2.5, f64::MIN_POSITIVE]);
        assert_eq!(c.get("note"), Some("a b=c"));
        assert_eq!(c.parse::<f64>("dt_ns").unwrap(), 16.0);
        assert!(c.parse::<f64>("missing").is_err());
    }

    #[test]
    fn distinct_failures() {
        let bytes = sample();
        assert!(matches!(
            read_container(Cursor::new(&bytes), "QRD-OTHER", 2),
            Err(FormatError::BadMagic { .. })
        ));
        assert!(matches!(
            read_container(Cursor::new(&bytes), "QRD-TEST", 1),
            Err(FormatError::VersionMismatch { found: 2, supported: 1, .. })
        ));
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(
            read_container(Cursor::new(cut), "QRD-TEST", 2),
            Err(FormatError::Truncated(_))
        ));
        let header_only = &bytes[..10];
        assert!(matches!(
            read_container(Cursor::new(header_only), "QRD-TEST", 2),
            Err(FormatError::Truncated(_))
        ));
        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 0x01;
        assert!(matches!(
            read_container(Cursor::new(&flipped), "QRD-TEST", 2),
            Err(FormatError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn streaming_writer_matches_one_shot_writer() {
        let header = header_entries([("dt_ns", "16"), ("note", "a b=c")]);
        let mut cw = ContainerWriter::new(Cursor::new(Vec::new()), "QRD-TEST", 2, &header, 3).unwrap();
        cw.push(&[1.0]).unwrap();
        cw.push(&[-2.5, f64::MIN_POSITIVE]).unwrap();
        assert!(cw.push(&[0.0]).is_err());
        let streamed = cw.finish().unwrap().into_inner();
        assert_eq!(streamed, sample());

        let cw = ContainerWriter::new(Cursor::new(Vec::new()), "QRD-TEST", 2, &header, 3).unwrap();
        assert!(cw.finish().is_err());
    }

    #[test]
    fn rejects_reserved_keys() {
        let header = header_entries([("checksum", "x")]);
        assert!(write_container(Vec::new(), "K", 1, &header, &[]).is_err());
    }
}
