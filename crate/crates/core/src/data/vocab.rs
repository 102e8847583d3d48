use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

const HEADER: &str = "distill-vocab 1";

/// Token ↔ id map with `<pad>` = 0 and `<unk>` = 1 always present.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Tokens seen at least `min_freq` times, most frequent first, ties in
    /// lexicographic order.
    pub fn build<'a, I, S>(corpus: I, min_freq: usize) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for sentence in corpus {
            for tok in sentence {
                *counts.entry(tok.as_ref()).or_default() += 1;
            }
        }
        let mut entries: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_freq.max(1) && t != PAD_TOKEN && t != UNK_TOKEN)
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Self::from_tokens(entries.into_iter().map(|(t, _)| t.to_string()))
    }

    /// Reserved ids followed by `tokens` in the given order. Duplicates
    /// keep their first id.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut v = Vocabulary {
            tokens: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
            index: HashMap::new(),
        };
        v.index.insert(PAD_TOKEN.to_string(), PAD_ID);
        v.index.insert(UNK_TOKEN.to_string(), UNK_ID);
        for t in tokens {
            if !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter().map(|&i| self.token(i).unwrap_or(UNK_TOKEN)).collect()
    }

    /// One token per line in id order, after a version header.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut buf = String::with_capacity(self.tokens.len() * 8);
        buf.push_str(HEADER);
        buf.push('\n');
        for t in &self.tokens {
            buf.push_str(t);
            buf.push('\n');
        }
        f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::format(path, 1, format!("expected `{HEADER}` header")));
        }
        let toks: Vec<&str> = lines.collect();
        if toks.len() < 2 || toks[0] != PAD_TOKEN || toks[1] != UNK_TOKEN {
            return Err(Error::format(path, 2, "reserved tokens missing"));
        }
        let v = Self::from_tokens(toks[2..].iter().map(|s| s.to_string()));
        if v.len() != toks.len() {
            return Err(Error::format(path, 0, "duplicate tokens in vocabulary file"));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(s: &str) -> Vec<Vec<String>> {
        vec![s.split(' ').map(String::from).collect()]
    }

    #[test]
    fn ids_follow_frequency_then_lexicographic() {
        let c = corpus("a a b");
        let v = Vocabulary::build(c.iter().map(Vec::as_slice), 1);
        assert_eq!((v.id("<pad>"), v.id("<unk>"), v.id("a"), v.id("b")), (0, 1, 2, 3));
        let c = corpus("z y x y z");
        let v = Vocabulary::build(c.iter().map(Vec::as_slice), 1);
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "y", "z", "x"]);
    }

    #[test]
    fn min_freq_maps_rare_tokens_to_unk() {
        let c = corpus("a a b");
        let v = Vocabulary::build(c.iter().map(Vec::as_slice), 2);
        assert_eq!(v.id("b"), UNK_ID);
        let v = Vocabulary::build(c.iter().map(Vec::as_slice), 5);
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        let c = corpus("the cat sat on the mat !");
        let v = Vocabulary::build(c.iter().map(Vec::as_slice), 1);
        v.save(&p).unwrap();
        assert_eq!(Vocabulary::load(&p).unwrap(), v);
    }
}
