use std::path::Path;

use crate::error::{Error, Result};

const HEADER: &str = "# distill-labels 1";

/// Label string → class id, assigned in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelMap {
    names: Vec<String>,
}

impl LabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        let mut m = Self::new();
        for n in names {
            m.get_or_insert(&n.into());
        }
        m
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.names.iter().position(|n| n == label)
    }

    pub fn get_or_insert(&mut self, label: &str) -> usize {
        match self.get(label) {
            Some(i) => i,
            None => {
                self.names.push(label.to_string());
                self.names.len() - 1
            }
        }
    }

    /// Two tab-separated columns per line: label, class id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = String::from(HEADER);
        s.push('\n');
        for (i, n) in self.names.iter().enumerate() {
            if n.contains(['\t', '\n', '\r']) {
                return Err(Error::Input(format!("label {n:?} contains a tab or newline")));
            }
            s.push_str(&format!("{n}\t{i}\n"));
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut names = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let (name, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::format(path, i + 1, "expected `label<TAB>id`"))?;
            let id: usize = id
                .parse()
                .map_err(|_| Error::format(path, i + 1, format!("bad class id `{id}`")))?;
            if id != names.len() {
                return Err(Error::format(path, i + 1, "class ids must be listed in order from 0"));
            }
            names.push(name.to_string());
        }
        Ok(LabelMap { names })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_appearance_order_and_roundtrip() {
        let mut m = LabelMap::new();
        assert_eq!(m.get_or_insert("pos"), 0);
        assert_eq!(m.get_or_insert("neg"), 1);
        assert_eq!(m.get_or_insert("pos"), 0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.tsv");
        m.save(&p).unwrap();
        assert_eq!(LabelMap::load(&p).unwrap(), m);
    }
}
