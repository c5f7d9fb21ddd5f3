//! Method-level filters applied before any instance is generated.

use serde::{Deserialize, Serialize};

use super::methods::MethodUnit;

/// Inclusive lower bound on significant tokens per method.
pub const MIN_METHOD_TOKENS: usize = 15;
/// Inclusive upper bound on significant tokens per method.
pub const MAX_METHOD_TOKENS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterReason {
    Ok,
    Unparsable,
    TestName,
    EmptyOrCommentBody,
    TooShort,
    TooLong,
    NonLatin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub kept: bool,
    pub reason: FilterReason,
}

impl FilterVerdict {
    fn from(reason: FilterReason) -> Self {
        FilterVerdict { kept: reason == FilterReason::Ok, reason }
    }
}

/// Splits an identifier camelCase-wise, on `_`/`$`, and at letter/digit
/// boundaries: `parseHTTPResponse2x` → `parse`, `HTTP`, `Response`, `2`, `x`.
pub fn split_identifier(name: &str) -> Vec<String> {
    let chars: Vec<char> = name.chars().collect();
    let mut parts = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' || c == '$' {
            if !current.is_empty() {
                parts.push(std::mem::take(&mut current));
            }
            continue;
        }
        if let Some(&prev) = current.chars().last().as_ref() {
            let next = chars.get(i + 1).copied();
            let boundary = (prev.is_lowercase() && c.is_uppercase())
                || (prev.is_alphabetic() != c.is_alphabetic())
                || (prev.is_uppercase() && c.is_uppercase() && next.is_some_and(char::is_lowercase));
            if boundary {
                parts.push(std::mem::take(&mut current));
            }
        }
        current.push(c);
    }
    if !current.is_empty() {
        parts.push(current);
    }
    parts
}

pub fn is_test_name(name: &str) -> bool {
    split_identifier(name).iter().any(|p| p.eq_ignore_ascii_case("test"))
}

/// Basic Latin and Latin-1 letters, digits, punctuation and whitespace.
pub fn is_latin_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{0C}' | ' '..='~' | '\u{A0}'..='\u{FF}')
}

fn braces_balanced(m: &MethodUnit) -> bool {
    let mut depth = 0i64;
    for t in &m.tokens {
        match t.text.as_str() {
            "{" => depth += 1,
            "}" => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0 && m.tokens.last().is_some_and(|t| t.text == "}")
}

/// Checks are applied in a fixed order and the first failing one is reported.
pub fn apply_method_filters(m: &MethodUnit) -> FilterVerdict {
    let reason = if !braces_balanced(m) {
        FilterReason::Unparsable
    } else if is_test_name(&m.name) {
        FilterReason::TestName
    } else if m.body_token_count == 0 {
        FilterReason::EmptyOrCommentBody
    } else if m.token_count() < MIN_METHOD_TOKENS {
        FilterReason::TooShort
    } else if m.token_count() > MAX_METHOD_TOKENS {
        FilterReason::TooLong
    } else if !m.text.chars().all(is_latin_char) {
        FilterReason::NonLatin
    } else {
        FilterReason::Ok
    };
    FilterVerdict::from(reason)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn method(text: &str) -> MethodUnit {
        MethodUnit::from_text(text).unwrap_or_else(|| panic!("not a method: {text}"))
    }

    /// A method whose significant token count is exactly `n` (n ≥ 8).
    fn method_with_tokens(n: usize) -> MethodUnit {
        // `void f ( ) {` + `}` = 6 tokens; each `x ;` statement adds 2; `y ;` pads to odd counts
        let mut body = String::new();
        let mut count = 6;
        while count + 2 <= n {
            body.push_str("x; ");
            count += 2;
        }
        if count < n {
            body.push_str("++");
        }
        let m = method(&format!("void f() {{ {body}}}"));
        assert_eq!(m.token_count(), n);
        m
    }

    #[test]
    fn camel_case_splitting() {
        assert_eq!(split_identifier("testFoo"), vec!["test", "Foo"]);
        assert_eq!(split_identifier("getLatest"), vec!["get", "Latest"]);
        assert_eq!(split_identifier("parseHTTPResponse2x"), vec!["parse", "HTTP", "Response", "2", "x"]);
        assert_eq!(split_identifier("run_Test_case"), vec!["run", "Test", "case"]);
    }

    #[test]
    fn test_name_rule() {
        assert!(is_test_name("testFoo"));
        assert!(is_test_name("shouldTEST"));
        assert!(is_test_name("my_test"));
        assert!(is_test_name("Test"));
        assert!(!is_test_name("getLatest"));
        assert!(!is_test_name("attest"));
        assert!(!is_test_name("contestant"));
    }

    #[test]
    fn test_named_method_is_dropped() {
        let m = method("void testFoo() { int a = 1; int b = 2; int c = a + b; }");
        assert_eq!(apply_method_filters(&m).reason, FilterReason::TestName);
        let m = method("void getLatest() { int a = 1; int b = 2; int c = a + b; }");
        assert_eq!(apply_method_filters(&m), FilterVerdict { kept: true, reason: FilterReason::Ok });
    }

    #[test]
    fn empty_and_comment_only_bodies() {
        let m = method("void f() { }");
        assert_eq!(apply_method_filters(&m).reason, FilterReason::EmptyOrCommentBody);
        let m = method("void f() { // nothing here\n /* or here */ }");
        assert_eq!(apply_method_filters(&m).reason, FilterReason::EmptyOrCommentBody);
    }

    #[test]
    fn token_count_boundaries() {
        assert_eq!(apply_method_filters(&method_with_tokens(14)).reason, FilterReason::TooShort);
        assert_eq!(apply_method_filters(&method_with_tokens(15)).reason, FilterReason::Ok);
        assert_eq!(apply_method_filters(&method_with_tokens(500)).reason, FilterReason::Ok);
        assert_eq!(apply_method_filters(&method_with_tokens(501)).reason, FilterReason::TooLong);
    }

    #[test]
    fn comments_do_not_count_as_tokens() {
        let m = method("void f() { /* a b c d e f g h i j k */ x; y; z; }");
        assert_eq!(m.token_count(), 12);
        assert_eq!(apply_method_filters(&m).reason, FilterReason::TooShort);
    }

    #[test]
    fn non_latin_anywhere_in_method_text() {
        let m = method("void f() { String s = \"caf\u{e9}\"; int a = 1; int b = 2; }");
        assert!(apply_method_filters(&m).kept);
        let m = method("void f() { String s = \"\u{1F600}\"; int a = 1; int b = 2; }");
        assert_eq!(apply_method_filters(&m).reason, FilterReason::NonLatin);
        let m = method("void f() { // \u{4E2D}\n int a = 1; int b = 2; int c = 3; }");
        assert_eq!(apply_method_filters(&m).reason, FilterReason::NonLatin);
    }

    #[test]
    fn verdict_kept_iff_ok() {
        for reason in [
            FilterReason::Ok,
            FilterReason::Unparsable,
            FilterReason::TestName,
            FilterReason::TooLong,
        ] {
            let v = FilterVerdict::from(reason);
            assert_eq!(v.kept, reason == FilterReason::Ok);
        }
    }
}
