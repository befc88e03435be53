//! Text composition, URL stripping and tokenization shared by the lexical
//! and syntactic-feature code paths.

use std::borrow::Cow;
use std::sync::OnceLock;

use regex::Regex;
use unicode_segmentation::UnicodeSegmentation;

/// Text analysed for a post: `title + "\n" + content`, or just `content`
/// when the title is empty.
pub fn compose_post_text(title: &str, content: &str) -> String {
    if title.is_empty() {
        content.to_string()
    } else {
        let mut s = String::with_capacity(title.len() + 1 + content.len());
        s.push_str(title);
        s.push('\n');
        s.push_str(content);
        s
    }
}

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|\bwww\.)\S+").expect("valid url regex"))
}

/// Removes scheme-prefixed (`http://`, `https://`) and bare `www.` URLs.
pub fn strip_urls(text: &str) -> Cow<'_, str> {
    url_pattern().replace_all(text, " ")
}

/// Lowercased Unicode word tokens of `text` after URL removal.
/// Punctuation-only segments are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    strip_urls(text).unicode_words().map(str::to_lowercase).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_rule() {
        assert_eq!(compose_post_text("", "body"), "body");
        assert_eq!(compose_post_text("Title", "body"), "Title\nbody");
    }

    #[test]
    fn urls_removed() {
        assert_eq!(tokenize("see https://x.test/a now"), vec!["see", "now"]);
        assert_eq!(tokenize("go www.example.com/x ok"), vec!["go", "ok"]);
        assert_eq!(tokenize("HTTP://LOUD.test shout"), vec!["shout"]);
    }

    #[test]
    fn lowercase_and_punctuation() {
        assert_eq!(tokenize("Hello, hello world!"), vec!["hello", "hello", "world"]);
        assert_eq!(tokenize("  ... "), Vec::<String>::new());
        assert_eq!(tokenize("follow eudaemon_0"), vec!["follow", "eudaemon_0"]);
    }
}
