//! Token normalisation shared by ingest and query parsing.

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '\''
}

/// Case-folds a single raw token and strips leading/trailing
/// non-alphanumerics. Internal hyphens and apostrophes survive.
pub fn normalize(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        return None;
    }
    Some(trimmed.to_lowercase())
}

/// Splits free text into normalised tokens.
///
/// Any character that is not alphanumeric, a hyphen or an apostrophe acts
/// as a separator.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !is_token_char(c)).filter_map(normalize).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_outer_punctuation() {
        assert_eq!(normalize("\"Hello,\""), Some("hello".to_string()));
        assert_eq!(normalize("--"), None);
        assert_eq!(normalize("don't!"), Some("don't".to_string()));
    }

    #[test]
    fn keeps_internal_hyphen() {
        assert_eq!(
            tokenize("Well-known  'quotes' & co."),
            vec!["well-known", "quotes", "co"]
        );
    }

    #[test]
    fn splits_other_punctuation() {
        assert_eq!(tokenize("rock&roll/pop"), vec!["rock", "roll", "pop"]);
        assert!(tokenize(" ... ").is_empty());
    }

    #[test]
    fn folds_case() {
        assert_eq!(tokenize("TOAST Coast"), vec!["toast", "coast"]);
    }
}
