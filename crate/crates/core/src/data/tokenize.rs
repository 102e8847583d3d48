use crate::error::{Error, Result};

/// Lowercases, splits every non-alphanumeric, non-space character into its
/// own token, then splits on whitespace.
///
/// `"Good movie!"` → `["good", "movie", "!"]`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// [`tokenize`], failing on text with no tokens.
pub fn tokenize_checked(text: &str) -> Result<Vec<String>> {
    let toks = tokenize(text);
    if toks.is_empty() {
        return Err(Error::Input(format!("no tokens in text {text:?}")));
    }
    Ok(toks)
}

pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation_and_lowercases() {
        assert_eq!(tokenize("Good movie!"), vec!["good", "movie", "!"]);
        assert_eq!(tokenize("A  B"), vec!["a", "b"]);
        assert_eq!(tokenize("don't, ever."), vec!["don", "'", "t", ",", "ever", "."]);
        assert_eq!(tokenize("  Über\tCAFÉ\n"), vec!["über", "café"]);
    }

    #[test]
    fn empty_text_is_input_error_with_raw_text() {
        let err = tokenize_checked("   \t").unwrap_err();
        assert!(err.to_string().contains("\"   \\t\""), "{err}");
    }

    #[test]
    fn retokenizing_joined_tokens_is_stable() {
        let toks = tokenize("What's the capital of France? (Paris)");
        assert_eq!(tokenize(&detokenize(&toks)), toks);
    }
}
