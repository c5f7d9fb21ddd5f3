//! Total Java lexer. Every input produces tokens whose texts concatenate back
//! to the input; unknown characters become single-character operators.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    StringLiteral,
    CharLiteral,
    NumberLiteral,
    Operator,
    Separator,
    Comment,
    Whitespace,
}

impl TokenKind {
    /// Comments and whitespace carry no code.
    pub fn is_trivia(self) -> bool {
        matches!(self, TokenKind::Comment | TokenKind::Whitespace)
    }

    /// Identifiers and literals: the vocabulary elements used by coverage analyses.
    pub fn is_vocabulary(self) -> bool {
        matches!(
            self,
            TokenKind::Identifier
                | TokenKind::StringLiteral
                | TokenKind::CharLiteral
                | TokenKind::NumberLiteral
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceToken {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the token's first character.
    pub line: u32,
    /// Byte offset of the token in the lexed source.
    pub offset: usize,
}

impl SourceToken {
    pub fn end(&self) -> usize {
        self.offset + self.text.len()
    }
}

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "false", "final", "finally",
    "float", "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "null", "package", "private", "protected", "public", "return", "short",
    "static", "strictfp", "super", "switch", "synchronized", "this", "throw", "throws",
    "transient", "true", "try", "void", "volatile", "while",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

const SEPARATORS: &[&str] = &["...", "::", "(", ")", "{", "}", "[", "]", ";", ",", ".", "@"];

const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "->", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=",
    "*=", "/=", "&=", "|=", "^=", "%=", "<<", ">>", "=", "<", ">", "!", "~", "?", ":", "+", "-",
    "*", "/", "&", "|", "^", "%",
];

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat_while(&mut self, pred: impl Fn(char) -> bool) {
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
    }
}

/// Tokenizes `source`. Never fails.
pub fn lex(source: &str) -> Vec<SourceToken> {
    let mut cur = Cursor { src: source, pos: 0 };
    let mut tokens = Vec::new();
    let mut line: u32 = 1;

    while let Some(c) = cur.peek() {
        let start = cur.pos;
        let kind = lex_one(&mut cur, c);
        let text = &source[start..cur.pos];
        tokens.push(SourceToken { kind, text: text.to_string(), line, offset: start });
        line += count_newlines(text);
    }
    tokens
}

/// Significant (non-comment, non-whitespace) tokens only.
pub fn significant(source: &str) -> Vec<SourceToken> {
    lex(source).into_iter().filter(|t| !t.kind.is_trivia()).collect()
}

/// Counts line terminators: `\n`, `\r\n` and lone `\r`.
pub fn count_newlines(text: &str) -> u32 {
    let bytes = text.as_bytes();
    let mut n = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'\n' || (b == b'\r' && bytes.get(i + 1) != Some(&b'\n')) {
            n += 1;
        }
    }
    n
}

fn lex_one(cur: &mut Cursor<'_>, c: char) -> TokenKind {
    if c.is_whitespace() {
        cur.eat_while(char::is_whitespace);
        return TokenKind::Whitespace;
    }
    let rest = cur.rest();
    if rest.starts_with("//") {
        cur.eat_while(|c| c != '\n' && c != '\r');
        return TokenKind::Comment;
    }
    if let Some(body) = rest.strip_prefix("/*") {
        match body.find("*/") {
            Some(end) => cur.pos += 2 + end + 2,
            None => cur.pos = cur.src.len(),
        }
        return TokenKind::Comment;
    }
    if rest.starts_with("\"\"\"") {
        cur.pos += 3;
        lex_text_block(cur);
        return TokenKind::StringLiteral;
    }
    if c == '"' || c == '\'' {
        cur.bump();
        lex_quoted(cur, c);
        return if c == '"' { TokenKind::StringLiteral } else { TokenKind::CharLiteral };
    }
    if c.is_ascii_digit() || (c == '.' && cur.peek_nth(1).is_some_and(|d| d.is_ascii_digit())) {
        lex_number(cur);
        return TokenKind::NumberLiteral;
    }
    if is_ident_start(c) {
        let start = cur.pos;
        cur.eat_while(is_ident_part);
        let word = &cur.src[start..cur.pos];
        return if is_keyword(word) { TokenKind::Keyword } else { TokenKind::Identifier };
    }
    for sep in SEPARATORS {
        if rest.starts_with(sep) {
            cur.pos += sep.len();
            return TokenKind::Separator;
        }
    }
    for op in OPERATORS {
        if rest.starts_with(op) {
            cur.pos += op.len();
            return TokenKind::Operator;
        }
    }
    cur.bump();
    TokenKind::Operator
}

/// Body of a `"..."` or `'...'` literal after the opening quote. An
/// unterminated literal stops before the line break.
fn lex_quoted(cur: &mut Cursor<'_>, quote: char) {
    while let Some(c) = cur.peek() {
        match c {
            '\\' => {
                cur.bump();
                if let Some(next) = cur.peek() {
                    if next != '\n' && next != '\r' {
                        cur.bump();
                    }
                }
            }
            '\n' | '\r' => return,
            _ if c == quote => {
                cur.bump();
                return;
            }
            _ => {
                cur.bump();
            }
        }
    }
}

fn lex_text_block(cur: &mut Cursor<'_>) {
    while let Some(c) = cur.peek() {
        if c == '\\' {
            cur.bump();
            cur.bump();
        } else if cur.rest().starts_with("\"\"\"") {
            cur.pos += 3;
            return;
        } else {
            cur.bump();
        }
    }
}

fn lex_number(cur: &mut Cursor<'_>) {
    let rest = cur.rest();
    if rest.starts_with("0x") || rest.starts_with("0X") {
        cur.pos += 2;
        cur.eat_while(|c| c.is_ascii_hexdigit() || c == '_');
        if cur.peek() == Some('.') {
            cur.bump();
            cur.eat_while(|c| c.is_ascii_hexdigit() || c == '_');
        }
        if matches!(cur.peek(), Some('p' | 'P')) {
            cur.bump();
            if matches!(cur.peek(), Some('+' | '-')) {
                cur.bump();
            }
            cur.eat_while(|c| c.is_ascii_digit() || c == '_');
        }
        if matches!(cur.peek(), Some('l' | 'L' | 'f' | 'F' | 'd' | 'D')) {
            cur.bump();
        }
        return;
    }
    if rest.starts_with("0b") || rest.starts_with("0B") {
        cur.pos += 2;
        cur.eat_while(|c| c == '0' || c == '1' || c == '_');
        if matches!(cur.peek(), Some('l' | 'L')) {
            cur.bump();
        }
        return;
    }
    cur.eat_while(|c| c.is_ascii_digit() || c == '_');
    if cur.peek() == Some('.') {
        let after = cur.peek_nth(1);
        let fraction_follows = after.is_some_and(|c| c.is_ascii_digit());
        let bare_dot = !after.is_some_and(|c| is_ident_start(c) || c == '.');
        if fraction_follows || bare_dot {
            cur.bump();
            cur.eat_while(|c| c.is_ascii_digit() || c == '_');
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let signed = matches!(cur.peek_nth(1), Some('+' | '-'));
        let digit_at = if signed { 2 } else { 1 };
        if cur.peek_nth(digit_at).is_some_and(|c| c.is_ascii_digit()) {
            cur.bump();
            if signed {
                cur.bump();
            }
            cur.eat_while(|c| c.is_ascii_digit() || c == '_');
        }
    }
    if matches!(cur.peek(), Some('l' | 'L' | 'f' | 'F' | 'd' | 'D')) {
        cur.bump();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kinds_and_texts(src: &str) -> Vec<(TokenKind, String)> {
        significant(src).into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn keyword_table_is_sorted() {
        let mut sorted = KEYWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, KEYWORDS);
    }

    #[test]
    fn simple_declaration() {
        use TokenKind::*;
        assert_eq!(
            kinds_and_texts("int a = 3;"),
            vec![
                (Keyword, "int".into()),
                (Identifier, "a".into()),
                (Operator, "=".into()),
                (NumberLiteral, "3".into()),
                (Separator, ";".into()),
            ]
        );
        let all = lex("int a = 3;");
        assert_eq!(all.iter().filter(|t| t.kind == Whitespace).count(), 3);
    }

    #[test]
    fn empty_source_has_no_tokens() {
        assert!(lex("").is_empty());
    }

    #[test]
    fn string_literal_is_atomic() {
        let toks = kinds_and_texts("String s = \"a b\";");
        assert_eq!(toks[3], (TokenKind::StringLiteral, "\"a b\"".to_string()));
        assert_eq!(toks.len(), 5);
    }

    #[test]
    fn escapes_comments_and_numbers() {
        let toks = kinds_and_texts(r#"c = '\'' + "x\"y" /* c */ + 0x1F_L + 1.5e-3f + .5 // tail"#);
        let texts: Vec<_> = toks.iter().map(|t| t.1.as_str()).collect();
        assert_eq!(texts, vec!["c", "=", "'\\''", "+", "\"x\\\"y\"", "+", "0x1F_L", "+", "1.5e-3f", "+", ".5"]);
        let comments = lex("a // x\n/* y\n */b").into_iter().filter(|t| t.kind == TokenKind::Comment).count();
        assert_eq!(comments, 2);
    }

    #[test]
    fn operators_use_longest_match() {
        let texts: Vec<_> = significant("a >>>= b -> c :: d ... e >> f").into_iter().map(|t| t.text).collect();
        assert_eq!(texts, vec!["a", ">>>=", "b", "->", "c", "::", "d", "...", "e", ">>", "f"]);
    }

    #[test]
    fn line_numbers_track_crlf_and_block_comments() {
        let toks = significant("a\r\nb /* x\n y */ c\rd");
        let lines: Vec<_> = toks.iter().map(|t| t.line).collect();
        assert_eq!(lines, vec![1, 2, 3, 4]);
    }

    #[test]
    fn unknown_characters_become_operators() {
        let toks = lex("a # \u{1F600}");
        assert_eq!(toks[2].kind, TokenKind::Operator);
        assert_eq!(toks[4].text, "\u{1F600}");
        assert_eq!(toks[4].kind, TokenKind::Operator);
    }

    #[test]
    fn unterminated_literals_stop_at_line_end() {
        let toks = lex("\"abc\nx");
        assert_eq!(toks[0].text, "\"abc");
        assert_eq!(toks.last().unwrap().text, "x");
        let tb = lex("s = \"\"\"\n  hi \"\n  \"\"\";");
        assert!(tb.iter().any(|t| t.kind == TokenKind::StringLiteral && t.text.ends_with("\"\"\"")));
    }

    proptest! {
        #[test]
        fn round_trip_arbitrary(src in "\\PC*") {
            let joined: String = lex(&src).into_iter().map(|t| t.text).collect();
            prop_assert_eq!(joined, src);
        }

        #[test]
        fn round_trip_java_like(src in "[a-z0-9 \\n\\t{}()\\[\\];,.@\"'/*+<>=!&|\\\\_$-]{0,200}") {
            let toks = lex(&src);
            let joined: String = toks.iter().map(|t| t.text.as_str()).collect();
            prop_assert_eq!(&joined, &src);
            for t in &toks {
                prop_assert!(!t.text.is_empty());
                prop_assert_eq!(&src[t.offset..t.end()], t.text.as_str());
                let expected_line = 1 + count_newlines(&src[..t.offset]);
                prop_assert_eq!(t.line, expected_line);
            }
        }
    }
}
