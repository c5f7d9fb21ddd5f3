//! Method boundary recovery over the lexical token stream.
//!
//! This is not a Java parser. Declarations are recognized by shape
//! (`modifiers type name(params) throws ... {`) inside class bodies, and body
//! spans come from brace matching. A file whose braces or parentheses do not
//! balance yields no methods at all.

use serde::{Deserialize, Serialize};

use super::lexer::{lex, SourceToken, TokenKind};
use crate::mining::AddedLine;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodUnit {
    pub name: String,
    /// Return type (empty for constructors), name and parameter types,
    /// whitespace-free inside each type.
    pub signature: String,
    pub start_line: u32,
    pub end_line: u32,
    /// Byte offsets of the declaration in the source it was extracted from.
    pub start_offset: usize,
    pub end_offset: usize,
    /// Exact source text from the first declaration token to the closing brace.
    pub text: String,
    /// Significant tokens of the whole declaration, with file-absolute lines
    /// and source offsets.
    pub tokens: Vec<SourceToken>,
    pub body_token_count: usize,
}

impl MethodUnit {
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn contains_line(&self, line: u32) -> bool {
        (self.start_line..=self.end_line).contains(&line)
    }

    /// Significant tokens whose first character sits on `line`.
    pub fn tokens_on_line(&self, line: u32) -> impl Iterator<Item = &SourceToken> {
        self.tokens.iter().filter(move |t| t.line == line)
    }

    /// Re-lexes a standalone method text (offsets and lines become relative
    /// to `text`). Returns `None` if `text` is not exactly one method.
    pub fn from_text(text: &str) -> Option<MethodUnit> {
        let start = text.len() - text.trim_start().len();
        let end = text.trim_end().len();
        extract_methods(text).into_iter().find(|m| m.start_offset == start && m.end_offset == end)
    }
}

#[derive(Debug, Clone)]
enum Scope {
    /// Class, interface, enum, record or anonymous-class body. The file level
    /// also behaves like one so bare method snippets are recognized.
    ClassBody { name: Option<String>, is_enum: bool },
    MethodBody,
    Block,
}

const MODIFIERS: &[&str] = &[
    "abstract", "default", "final", "native", "private", "protected", "public", "sealed",
    "static", "strictfp", "synchronized", "transient", "volatile",
];

const PRIMITIVES: &[&str] = &["boolean", "byte", "char", "double", "float", "int", "long", "short", "void"];

fn is_modifier(tok: &SourceToken) -> bool {
    MODIFIERS.contains(&tok.text.as_str())
}

fn is_typeish(tok: &SourceToken) -> bool {
    match tok.kind {
        TokenKind::Identifier => tok.text != "record",
        TokenKind::Keyword => PRIMITIVES.contains(&tok.text.as_str()),
        TokenKind::Operator => matches!(tok.text.as_str(), ">" | ">>" | ">>>"),
        TokenKind::Separator => tok.text == "]",
        _ => false,
    }
}

fn is(tok: Option<&SourceToken>, text: &str) -> bool {
    tok.is_some_and(|t| t.text == text)
}

/// Matching partner index for every bracket token, or `None` when the
/// braces or parentheses do not balance.
fn match_brackets(sig: &[SourceToken]) -> Option<Vec<Option<usize>>> {
    let mut partner = vec![None; sig.len()];
    let mut braces: Vec<usize> = Vec::new();
    let mut parens: Vec<usize> = Vec::new();
    for (i, tok) in sig.iter().enumerate() {
        if tok.kind != TokenKind::Separator {
            continue;
        }
        match tok.text.as_str() {
            "{" => braces.push(i),
            "(" => parens.push(i),
            "}" => {
                let open = braces.pop()?;
                partner[open] = Some(i);
                partner[i] = Some(open);
            }
            ")" => {
                let open = parens.pop()?;
                partner[open] = Some(i);
                partner[i] = Some(open);
            }
            _ => {}
        }
    }
    (braces.is_empty() && parens.is_empty()).then_some(partner)
}

struct Extractor<'a> {
    source: &'a str,
    sig: Vec<SourceToken>,
    partner: Vec<Option<usize>>,
}

struct Pending {
    name: String,
    signature: String,
    decl_start: usize,
}

impl Extractor<'_> {
    fn tok(&self, i: usize) -> Option<&SourceToken> {
        self.sig.get(i)
    }

    /// First index of the declaration/header that ends just before `end`.
    fn header_start(&self, end: usize) -> usize {
        let mut depth = 0i32;
        let mut t = end;
        while t > 0 {
            let tok = &self.sig[t - 1];
            if tok.kind == TokenKind::Separator {
                match tok.text.as_str() {
                    ")" => depth += 1,
                    "(" => depth -= 1,
                    ";" | "{" | "}" if depth <= 0 => break,
                    _ => {}
                }
            }
            t -= 1;
        }
        t
    }

    fn try_method(&self, i: usize, class_name: Option<&str>) -> Option<(Pending, usize)> {
        let name_tok = &self.sig[i];
        if name_tok.kind != TokenKind::Identifier || !is(self.tok(i + 1), "(") {
            return None;
        }
        let prev = i.checked_sub(1).map(|p| &self.sig[p]);
        let is_ctor_name = class_name == Some(name_tok.text.as_str());
        let plausible = match prev {
            Some(p) if is_typeish(p) => true,
            Some(p) => {
                is_ctor_name && (matches!(p.text.as_str(), "{" | "}" | ";" | ")") || is_modifier(p))
            }
            None => is_ctor_name,
        };
        if !plausible {
            return None;
        }
        let close = self.partner[i + 1]?;
        let mut k = close + 1;
        while is(self.tok(k), "[") && is(self.tok(k + 1), "]") {
            k += 2;
        }
        if is(self.tok(k), "throws") {
            k += 1;
            while let Some(t) = self.tok(k) {
                let ok = matches!(t.kind, TokenKind::Identifier)
                    || matches!(t.text.as_str(), "." | "," | "<" | ">" | ">>" | ">>>" | "@");
                if !ok {
                    break;
                }
                k += 1;
            }
        }
        if !is(self.tok(k), "{") {
            return None;
        }
        let decl_start = self.header_start(i);
        let return_type = self.return_type(decl_start, i);
        if return_type.is_empty() && !is_ctor_name {
            return None;
        }
        let params = self.parameter_types(i + 2, close);
        let signature = if return_type.is_empty() {
            format!("{}({})", name_tok.text, params.join(","))
        } else {
            format!("{} {}({})", return_type, name_tok.text, params.join(","))
        };
        Some((Pending { name: name_tok.text.clone(), signature, decl_start }, k))
    }

    /// Skips an annotation starting at `@` (index `at`); returns the index after it.
    fn skip_annotation(&self, at: usize, end: usize) -> usize {
        let mut t = at + 1;
        while t < end {
            let tok = &self.sig[t];
            if tok.kind == TokenKind::Identifier || tok.text == "interface" {
                t += 1;
                if is(self.tok(t), ".") && t + 1 < end {
                    t += 1;
                    continue;
                }
            }
            break;
        }
        if t < end && is(self.tok(t), "(") {
            if let Some(close) = self.partner[t] {
                t = close + 1;
            }
        }
        t
    }

    fn return_type(&self, decl_start: usize, name_idx: usize) -> String {
        let mut out = String::new();
        let mut t = decl_start;
        let mut seen_type = false;
        while t < name_idx {
            let tok = &self.sig[t];
            if tok.text == "@" {
                t = self.skip_annotation(t, name_idx);
                continue;
            }
            if !seen_type && is_modifier(tok) {
                t += 1;
                continue;
            }
            if !seen_type && tok.text == "<" {
                t = self.skip_angle_group(t, name_idx);
                continue;
            }
            seen_type = true;
            out.push_str(&tok.text);
            t += 1;
        }
        out
    }

    fn skip_angle_group(&self, at: usize, end: usize) -> usize {
        let mut depth = 0i32;
        let mut t = at;
        while t < end {
            depth += angle_delta(&self.sig[t]);
            t += 1;
            if depth <= 0 {
                break;
            }
        }
        t
    }

    fn parameter_types(&self, from: usize, to: usize) -> Vec<String> {
        let mut params: Vec<Vec<&SourceToken>> = vec![Vec::new()];
        let mut depth = 0i32;
        for tok in &self.sig[from..to] {
            match tok.text.as_str() {
                "," if depth == 0 => {
                    params.push(Vec::new());
                    continue;
                }
                "(" | "[" => depth += 1,
                ")" | "]" => depth -= 1,
                _ => depth += angle_delta(tok),
            }
            params.last_mut().expect("non-empty").push(tok);
        }
        params.into_iter().filter(|p| !p.is_empty()).filter_map(|p| normalize_param(&p)).collect()
    }

    fn classify_brace(&self, i: usize, top: Option<&Scope>) -> Scope {
        if i > 0 && self.sig[i - 1].text == ")" {
            if let Some(open) = self.partner[i - 1] {
                if self.is_instance_creation(open) {
                    return Scope::ClassBody { name: None, is_enum: false };
                }
            }
        }
        let start = self.header_start(i);
        let header = &self.sig[start..i];
        for (h, tok) in header.iter().enumerate() {
            let after_dot = h > 0 && header[h - 1].text == ".";
            let next = header.get(h + 1);
            let kw = match tok.text.as_str() {
                "class" | "interface" | "enum" if tok.kind == TokenKind::Keyword && !after_dot => {
                    Some(tok.text.as_str())
                }
                "record"
                    if !after_dot
                        && next.is_some_and(|n| n.kind == TokenKind::Identifier)
                        && header.get(h + 2).is_some_and(|n| n.text == "(" || n.text == "<") =>
                {
                    Some("record")
                }
                _ => None,
            };
            if let Some(kw) = kw {
                let name = next.filter(|n| n.kind == TokenKind::Identifier).map(|n| n.text.clone());
                return Scope::ClassBody { name, is_enum: kw == "enum" };
            }
        }
        if let Some(Scope::ClassBody { is_enum: true, .. }) = top {
            let has_assign_or_modifier =
                header.iter().any(|t| t.text == "=" || t.text == "->" || is_modifier(t));
            let ends_like_constant = header
                .last()
                .is_some_and(|t| t.kind == TokenKind::Identifier || t.text == ")");
            if !has_assign_or_modifier && ends_like_constant {
                return Scope::ClassBody { name: None, is_enum: false };
            }
        }
        Scope::Block
    }

    /// Whether the parenthesis at `open` follows `new Type` / `new Type<...>`.
    fn is_instance_creation(&self, open: usize) -> bool {
        let mut t = open;
        let mut angle = 0i32;
        while t > 0 {
            let tok = &self.sig[t - 1];
            let delta = angle_delta(tok);
            if delta != 0 {
                angle -= delta;
            } else if tok.text == "new" {
                return angle == 0;
            } else if !(tok.kind == TokenKind::Identifier
                || tok.text == "."
                || (angle > 0 && matches!(tok.text.as_str(), "," | "?" | "extends" | "super" | "&" | "[" | "]"))
                || tok.text == "@")
            {
                return false;
            }
            t -= 1;
        }
        false
    }

    fn run(&self) -> Vec<MethodUnit> {
        let mut methods: Vec<MethodUnit> = Vec::new();
        let mut stack: Vec<Scope> = Vec::new();
        let mut pending: Option<(Pending, usize)> = None;
        let mut i = 0;
        while i < self.sig.len() {
            let tok = &self.sig[i];
            if tok.kind == TokenKind::Separator && tok.text == "{" {
                let scope = match pending.take() {
                    Some((p, body)) if body == i => {
                        let close = self.partner[i].expect("balanced");
                        methods.push(self.build(p, i, close));
                        Scope::MethodBody
                    }
                    other => {
                        pending = other;
                        self.classify_brace(i, stack.last())
                    }
                };
                stack.push(scope);
                i += 1;
                continue;
            }
            if tok.kind == TokenKind::Separator && tok.text == "}" {
                stack.pop();
                i += 1;
                continue;
            }
            let class_scope = match stack.last() {
                None => Some(None),
                Some(Scope::ClassBody { name, .. }) => Some(name.as_deref()),
                _ => None,
            };
            if let Some(class_name) = class_scope {
                if let Some((p, body)) = self.try_method(i, class_name) {
                    pending = Some((p, body));
                    i = body;
                    continue;
                }
            }
            i += 1;
        }
        methods
    }

    fn build(&self, p: Pending, body_open: usize, close: usize) -> MethodUnit {
        let first = &self.sig[p.decl_start];
        let last = &self.sig[close];
        MethodUnit {
            name: p.name,
            signature: p.signature,
            start_line: first.line,
            end_line: last.line,
            start_offset: first.offset,
            end_offset: last.end(),
            text: self.source[first.offset..last.end()].to_string(),
            tokens: self.sig[p.decl_start..=close].to_vec(),
            body_token_count: close - body_open - 1,
        }
    }
}

fn angle_delta(tok: &SourceToken) -> i32 {
    if tok.kind != TokenKind::Operator {
        return 0;
    }
    match tok.text.as_str() {
        "<" => 1,
        ">" => -1,
        ">>" => -2,
        ">>>" => -3,
        _ => 0,
    }
}

fn normalize_param(tokens: &[&SourceToken]) -> Option<String> {
    let mut t = 0;
    let mut kept: Vec<&SourceToken> = Vec::new();
    while t < tokens.len() {
        let tok = tokens[t];
        if tok.text == "@" {
            t += 1;
            while t < tokens.len() && (tokens[t].kind == TokenKind::Identifier || tokens[t].text == ".") {
                t += 1;
            }
            if t < tokens.len() && tokens[t].text == "(" {
                let mut depth = 0;
                while t < tokens.len() {
                    match tokens[t].text.as_str() {
                        "(" => depth += 1,
                        ")" => depth -= 1,
                        _ => {}
                    }
                    t += 1;
                    if depth == 0 {
                        break;
                    }
                }
            }
            continue;
        }
        if tok.text == "final" {
            t += 1;
            continue;
        }
        kept.push(tok);
        t += 1;
    }
    let mut dims = String::new();
    while kept.len() >= 2 && kept[kept.len() - 1].text == "]" && kept[kept.len() - 2].text == "[" {
        kept.truncate(kept.len() - 2);
        dims.push_str("[]");
    }
    let name = kept.pop()?;
    if name.text == "this" {
        return None;
    }
    let mut ty: String = kept.iter().map(|t| t.text.as_str()).collect();
    if ty.is_empty() {
        // lambda-style or malformed parameter: keep the lone token as its type
        ty = name.text.clone();
    }
    ty.push_str(&dims);
    Some(ty)
}

/// Finds every method (and constructor) declaration with a body.
pub fn extract_methods(source: &str) -> Vec<MethodUnit> {
    let sig: Vec<SourceToken> = lex(source).into_iter().filter(|t| !t.kind.is_trivia()).collect();
    let Some(partner) = match_brackets(&sig) else {
        return Vec::new();
    };
    Extractor { source, sig, partner }.run()
}

/// Whether [`extract_methods`] can recover structure from `source`.
pub fn is_parsable(source: &str) -> bool {
    let sig: Vec<SourceToken> = lex(source).into_iter().filter(|t| !t.kind.is_trivia()).collect();
    match_brackets(&sig).is_some()
}

/// Assigns each added line to the innermost method containing it.
/// Methods receiving no lines are omitted; line lists are sorted and unique.
pub fn map_added_lines<'m>(methods: &'m [MethodUnit], lines: &[AddedLine]) -> Vec<(&'m MethodUnit, Vec<u32>)> {
    let mut assigned: Vec<Vec<u32>> = vec![Vec::new(); methods.len()];
    for added in lines {
        let innermost = methods
            .iter()
            .enumerate()
            .filter(|(_, m)| m.contains_line(added.line_number))
            .min_by_key(|(_, m)| (m.end_offset - m.start_offset, std::cmp::Reverse(m.start_offset)));
        if let Some((idx, _)) = innermost {
            assigned[idx].push(added.line_number);
        }
    }
    methods
        .iter()
        .zip(assigned)
        .filter_map(|(m, mut lines)| {
            if lines.is_empty() {
                return None;
            }
            lines.sort_unstable();
            lines.dedup();
            Some((m, lines))
        })
        .collect()
}
