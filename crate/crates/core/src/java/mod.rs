//! Java source handling: lexing, method recovery, method filters.

mod filters;
mod lexer;
mod methods;

pub use filters::{
    apply_method_filters, is_latin_char, is_test_name, split_identifier, FilterReason, FilterVerdict,
    MAX_METHOD_TOKENS, MIN_METHOD_TOKENS,
};
pub use lexer::{count_newlines, is_keyword, lex, significant, SourceToken, TokenKind};
pub use methods::{extract_methods, is_parsable, map_added_lines, MethodUnit};
