use std::sync::OnceLock;

use regex::Regex;

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{P}").expect("static regex"))
}

/// Lower-cases `raw`, turns every Unicode punctuation character into a space,
/// collapses whitespace runs and trims. `"b&q"` becomes `"b q"`.
pub fn normalize(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let spaced = punctuation().replace_all(&lowered, " ");
    let mut out = String::with_capacity(spaced.len());
    for tok in spaced.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

/// Whitespace tokenization of an already normalized query.
pub fn tokens(normalized: &str) -> impl Iterator<Item = &str> {
    normalized.split_whitespace()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(normalize("Air  Conditioner!"), "air conditioner");
        assert_eq!(normalize("2007 civic"), "2007 civic");
        assert_eq!(normalize("   "), "");
        assert_eq!(normalize("b&q"), "b q");
        assert_eq!(normalize("\tCash-Jobs\n"), "cash jobs");
        assert_eq!(normalize("«Sherkston» Shore…"), "sherkston shore");
    }

    #[test]
    fn symbols_are_not_punctuation() {
        // `$` and `+` are Unicode symbols (S*), not punctuation (P*).
        assert_eq!(normalize("C++ $5"), "c++ $5");
    }

    proptest! {
        #[test]
        fn idempotent(s in any::<String>()) {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once.clone());
        }

        #[test]
        fn no_edge_or_double_spaces(s in "[ a-zA-Z!?.,\t]{0,40}") {
            let n = normalize(&s);
            prop_assert!(!n.starts_with(' ') && !n.ends_with(' '));
            prop_assert!(!n.contains("  "));
        }
    }
}
