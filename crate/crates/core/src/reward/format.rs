use std::sync::LazyLock;

use regex::Regex;

static TEMPLATE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)^\s*<think>.*</think>\s*<answer>.*</answer>\s*$").unwrap());

/// 1 iff the response is one `<think>` block followed by one `<answer>` block
/// and nothing after it (surrounding whitespace allowed).
pub fn format_reward(response: &str) -> f64 {
    let once = |tag: &str| response.matches(tag).count() == 1;
    let ok = ["<think>", "</think>", "<answer>", "</answer>"]
        .into_iter()
        .all(once)
        && TEMPLATE.is_match(response);
    if ok {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_rules() {
        assert_eq!(format_reward("<think>a</think><answer>B</answer>"), 1.0);
        assert_eq!(format_reward("<think>\nlong\n</think>\n<answer>B</answer>\n"), 1.0);
        assert_eq!(format_reward("<answer>B</answer>"), 0.0);
        assert_eq!(format_reward("<think>a</think><answer>B</answer> extra"), 0.0);
        assert_eq!(format_reward("<answer>B</answer><think>a</think>"), 0.0);
        assert_eq!(
            format_reward("<think>a</think><answer>B</answer><answer>C</answer>"),
            0.0
        );
        assert_eq!(format_reward("<think><think>a</think><answer>B</answer>"), 0.0);
        assert_eq!(format_reward(""), 0.0);
    }
}
