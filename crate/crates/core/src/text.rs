//! Tokenization shared by every module.
//!
//! Text is lowercased and split on whitespace; every non-alphanumeric
//! character becomes its own token. Header and speaker tokens use angle
//! brackets, which the tokenizer always splits, so they can never collide
//! with ordinary vocabulary.

pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            current.push(ch);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(tok.as_ref());
    }
    out
}

/// True for tokens containing at least one alphabetic character.
pub fn is_word(token: &str) -> bool {
    token.chars().any(char::is_alphabetic)
}

/// Marker token for a speaker label, e.g. `DR` -> `<dr>`.
pub fn speaker_token(speaker: &str) -> String {
    format!("<{}>", speaker.to_lowercase())
}

pub fn is_marker(token: &str) -> bool {
    token.len() > 2 && token.starts_with('<') && token.ends_with('>')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation() {
        assert_eq!(
            tokenize("PT: I take Aspirin, daily."),
            vec!["pt", ":", "i", "take", "aspirin", ",", "daily", "."]
        );
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t").is_empty());
    }

    #[test]
    fn headers_never_survive_tokenization() {
        assert_eq!(tokenize("<plan>"), vec!["<", "plan", ">"]);
        assert!(is_marker("<plan>"));
        assert!(!is_marker("plan"));
    }

    #[test]
    fn words_vs_numbers() {
        assert!(is_word("abc"));
        assert!(is_word("10mg"));
        assert!(!is_word("140"));
        assert!(!is_word("."));
    }
}
