//! Tab-separated trace files.
//!
//! ```text
//! #arp-trace v1 [key=value ...]
//! <tick>\t<src_node>\t<op>\t<sender_ip>\t<sender_mac>\t<target_ip>\t<target_mac>\t<label>
//! ```

use std::io::Write;
use std::path::Path;

use super::{ArpFrame, ArpOp, MacAddr};
use crate::artifact::{self, Header};
use crate::error::{Error, Result};

pub const TRACE_MAGIC: &str = "arp-trace";

pub fn write_trace(frames: &[ArpFrame], path: &Path) -> Result<()> {
    write_trace_with_header(frames, path, &Header::new(TRACE_MAGIC))
}

pub fn write_trace_with_header(frames: &[ArpFrame], path: &Path, header: &Header) -> Result<()> {
    let mut out = artifact::create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{header}").map_err(io)?;
    for f in frames {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            f.tick,
            f.src_node,
            f.op.as_str(),
            f.sender_ip,
            f.sender_mac,
            f.target_ip,
            f.target_mac,
            f.label
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_trace(path: &Path) -> Result<Vec<ArpFrame>> {
    read_trace_with_header(path).map(|(_, frames)| frames)
}

pub fn read_trace_with_header(path: &Path) -> Result<(Header, Vec<ArpFrame>)> {
    let mut lines = artifact::open_lines(path)?;
    let first = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(path, 1, "empty file, missing header"))?;
    let header = Header::parse(TRACE_MAGIC, &first, path)?;
    let mut frames = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        frames.push(parse_record(&line).map_err(|r| Error::parse(path, line_no, r))?);
    }
    Ok((header, frames))
}

fn parse_record(line: &str) -> std::result::Result<ArpFrame, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 8 {
        return Err(format!("expected 8 tab-separated fields, found {}", fields.len()));
    }
    let bad = |what: &str, v: &str| format!("invalid {what} `{v}`");
    Ok(ArpFrame {
        tick: fields[0].parse().map_err(|_| bad("tick", fields[0]))?,
        src_node: fields[1].parse().map_err(|_| bad("src_node", fields[1]))?,
        op: fields[2].parse::<ArpOp>()?,
        sender_ip: fields[3].parse().map_err(|_| bad("sender_ip", fields[3]))?,
        sender_mac: fields[4].parse::<MacAddr>().map_err(|e| e.to_string())?,
        target_ip: fields[5].parse().map_err(|_| bad("target_ip", fields[5]))?,
        target_mac: fields[6].parse::<MacAddr>().map_err(|e| e.to_string())?,
        label: fields[7].parse()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_simulation, SimConfig};

    #[test]
    fn empty_trace_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        write_trace(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "#arp-trace v1\n");
        assert!(read_trace(&path).unwrap().is_empty());
    }

    #[test]
    fn generated_trace_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        let frames = run_simulation(&SimConfig {
            duration_ticks: 500,
            attack_start_tick: 0,
            attack_stop_tick: 500,
            ..SimConfig::default()
        })
        .unwrap();
        write_trace(&frames, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        assert_eq!(read_trace(&path).unwrap(), frames);
        write_trace(&read_trace(&path).unwrap(), &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn truncated_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        std::fs::write(
            &path,
            "#arp-trace v1\n\
             0\t1\trequest\t10.0.0.2\t02:00:00:00:00:02\t10.0.0.1\t00:00:00:00:00:00\tbenign\n\
             1\t0\treply\t10.0.0.1\n",
        )
        .unwrap();
        let err = read_trace(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_string(&path).contains(":3:"));
    }

    fn err_string(path: &Path) -> String {
        read_trace(path).unwrap_err().to_string()
    }

    #[test]
    fn missing_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        std::fs::write(&path, "0\t1\trequest\n").unwrap();
        assert!(matches!(read_trace(&path), Err(Error::Parse { line: 1, .. })));
    }
}
