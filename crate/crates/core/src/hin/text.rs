//! Text preprocessing: URL and emoji stripping, tokenization, stop-word removal.
//!
//! The stop-word list is pinned in the binary so that preprocessing is
//! reproducible regardless of environment.

/// Fixed English stop-word list (standard corpus list, apostrophes split off
/// by the tokenizer so contraction stems like "don" / "t" appear bare).
pub const STOP_WORDS: &[&str] = &[
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
    "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
    "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
    "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
    "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
    "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by", "for",
    "with", "about", "against", "between", "into", "through", "during", "before", "after",
    "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over", "under",
    "again", "further", "then", "once", "here", "there", "when", "where", "why", "how", "all",
    "any", "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor", "not",
    "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will", "just", "don",
    "should", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "couldn", "didn",
    "doesn", "hadn", "hasn", "haven", "isn", "ma", "mightn", "mustn", "needn", "shan",
    "shouldn", "wasn", "weren", "won", "wouldn",
];

fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.contains(&token)
}

/// True for whitespace-delimited chunks that are scheme-prefixed URLs.
fn is_url(chunk: &str) -> bool {
    match chunk.find("://") {
        Some(pos) if pos > 0 => chunk[..pos]
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '.' | '-')),
        _ => false,
    }
}

/// Lowercased tokens with URLs, emoji, punctuation, and stop-words removed.
///
/// URL chunks are dropped whole before tokenization so their pieces do not
/// leak into the vocabulary. Tokens are maximal alphanumeric runs; emoji and
/// other symbols are not alphanumeric and fall out with the punctuation.
pub fn preprocess_text(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        if is_url(chunk) {
            continue;
        }
        let mut current = String::new();
        for c in chunk.chars() {
            if c.is_alphanumeric() {
                current.extend(c.to_lowercase());
            } else if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens.retain(|t| !is_stop_word(t));
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_and_stop_words_removed() {
        assert_eq!(preprocess_text("Fire at http://x.co NOW"), vec!["fire"]);
    }

    #[test]
    fn empty_input() {
        assert!(preprocess_text("").is_empty());
    }

    #[test]
    fn all_stop_words() {
        assert!(preprocess_text("the a an").is_empty());
    }

    #[test]
    fn emoji_and_punctuation_fall_out() {
        assert_eq!(
            preprocess_text("flood \u{1F30A}\u{1F62F}! downtown..."),
            vec!["flood", "downtown"]
        );
    }

    #[test]
    fn contractions_split_to_stop_stems() {
        assert!(preprocess_text("don't won't").is_empty());
    }

    #[test]
    fn https_and_bare_scheme() {
        assert_eq!(
            preprocess_text("see https://example.org/a?b=1 pictures"),
            vec!["see", "pictures"]
        );
        // "://" with no scheme is not a URL; pieces tokenize normally.
        assert_eq!(preprocess_text("://weird token"), vec!["weird", "token"]);
    }
}
