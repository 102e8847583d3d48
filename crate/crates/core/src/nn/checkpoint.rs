//! Text checkpoint format, version 1.
//!
//! ```text
//! distill-checkpoint 1
//! kind <teacher|student>
//! meta <key> <value>            (zero or more, sorted by key)
//! param <name> <d1>x<d2>x...    (one per tensor, in model order)
//! <row-major values, space separated, one line>
//! end
//! ```
//!
//! Values are written in shortest round-trip exponent form (`{:e}`), so a
//! read-back checkpoint is bit-identical to the model that wrote it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &str = "distill-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    pub params: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new(kind: &str) -> Self {
        Checkpoint {
            kind: kind.to_string(),
            meta: BTreeMap::new(),
            params: Vec::new(),
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn push(&mut self, name: impl Into<String>, t: &Tensor) {
        self.params.push((name.into(), t.clone()));
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Input(format!("checkpoint missing meta field `{key}`")))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let s = self.meta_str(key)?;
        s.parse()
            .map_err(|_| Error::Input(format!("checkpoint meta `{key}` has bad value `{s}`")))
    }

    /// Removes and returns the named tensor, checking its shape.
    pub fn take(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let pos = self
            .params
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Input(format!("checkpoint missing parameter `{name}`")))?;
        let (_, t) = self.params.remove(pos);
        if t.shape() != shape {
            return Err(Error::dim("checkpoint", t.shape(), shape));
        }
        Ok(t)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {VERSION}");
        let _ = writeln!(s, "kind {}", self.kind);
        for (k, v) in &self.meta {
            let _ = writeln!(s, "meta {k} {v}");
        }
        for (name, t) in &self.params {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            let _ = writeln!(s, "param {name} {}", dims.join("x"));
            let mut first = true;
            for v in t.data() {
                if !first {
                    s.push(' ');
                }
                first = false;
                let _ = write!(s, "{v:e}");
            }
            s.push('\n');
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let bad = |line: usize, msg: &str| Error::format(path, line, msg);

        let (ln, header) = lines.next().ok_or_else(|| bad(1, "empty checkpoint"))?;
        let version = header
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| bad(ln, "missing checkpoint header"))?;
        if version != VERSION.to_string() {
            return Err(bad(ln, &format!("unsupported checkpoint version `{version}`")));
        }
        let (ln, kind_line) = lines.next().ok_or_else(|| bad(2, "missing kind"))?;
        let kind = kind_line
            .strip_prefix("kind ")
            .ok_or_else(|| bad(ln, "expected `kind <name>`"))?;
        let mut ckpt = Checkpoint::new(kind.trim());

        let mut ended = false;
        while let Some((ln, line)) = lines.next() {
            if line == "end" {
                ended = true;
                break;
            }
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').ok_or_else(|| bad(ln, "meta needs key and value"))?;
                ckpt.meta.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("param ") {
                let (name, dims) = rest.split_once(' ').ok_or_else(|| bad(ln, "param needs name and shape"))?;
                let shape: Vec<usize> = dims
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(ln, &format!("bad shape `{dims}`")))?;
                let (vln, values) = lines.next().ok_or_else(|| bad(ln + 1, "missing values line"))?;
                let data: Vec<f64> = values
                    .split_ascii_whitespace()
                    .map(str::parse::<f64>)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| bad(vln, &format!("bad value: {e}")))?;
                let t = Tensor::new(shape, data).map_err(|e| bad(vln, &e.to_string()))?;
                ckpt.params.push((name.to_string(), t));
            } else {
                return Err(bad(ln, &format!("unexpected line `{line}`")));
            }
        }
        if !ended {
            return Err(bad(text.lines().count(), "truncated checkpoint (no `end`)"));
        }
        Ok(ckpt)
    }

    pub fn write(&self, path: &Path) -> Result<String> {
        let text = self.render();
        std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
        Ok(fingerprint(text.as_bytes()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Hex SHA-256 of a byte string.
pub fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of a file's contents.
pub fn file_fingerprint(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(fingerprint(&bytes))
}
