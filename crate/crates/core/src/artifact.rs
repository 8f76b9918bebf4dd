//! Versioned header line shared by every artifact file:
//! `#<magic> v1 key=value key=value ...`.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub magic: &'static str,
    pub fields: Vec<(String, String)>,
}

impl Header {
    pub fn new(magic: &'static str) -> Self {
        Self {
            magic,
            fields: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.fields.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Parses `line` as a header for `magic`; `path` is used in errors only.
    pub fn parse(magic: &'static str, line: &str, path: &Path) -> Result<Self> {
        let mut tokens = line.split(' ').filter(|t| !t.is_empty());
        let expected = format!("#{magic}");
        if tokens.next() != Some(expected.as_str()) || tokens.next() != Some("v1") {
            return Err(Error::parse(
                path,
                1,
                format!("expected header `#{magic} v1`, found `{line}`"),
            ));
        }
        let mut fields = Vec::new();
        for token in tokens {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| Error::parse(path, 1, format!("malformed header field `{token}`")))?;
            fields.push((k.to_owned(), v.to_owned()));
        }
        Ok(Self { magic, fields })
    }
}

impl fmt::Display for Header {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} v1", self.magic)?;
        for (k, v) in &self.fields {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn open_lines(path: &Path) -> Result<impl Iterator<Item = Result<String>> + '_> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .map(move |l| l.map_err(|e| Error::io(path, e))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_roundtrip() {
        let h = Header::new("arp-trace").with("config", "abc123");
        let s = h.to_string();
        assert_eq!(s, "#arp-trace v1 config=abc123");
        let back = Header::parse("arp-trace", &s, Path::new("x")).unwrap();
        assert_eq!(back, h);
        assert!(Header::parse("arp-model", &s, Path::new("x")).is_err());
    }
}
