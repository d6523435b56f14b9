//! The MATCH-form query subset: parsing, canonical printing, execution,
//! masking, keyword statistics and query-type classification.

mod ast;
mod classify;
mod exec;
mod keywords;
mod lexer;
mod mask;
mod parser;

pub use ast::{
    print_canonical, AggFunc, CmpOp, Direction, EdgePattern, Expr, Literal, NodePattern, OrderKey, PathPattern, Query,
};
pub use classify::{classify_query_type, QueryType};
pub use exec::{check, execute, execute_text, ResultTable};
pub use keywords::{count_keywords, keyword_group, KeywordCounts, KeywordGroup, KEYWORDS, STRUCTURAL};
pub use lexer::{tokenize, tokenize_lenient, Kw, Tok, Token};
pub use mask::{mask_entities, mask_query};
pub use parser::parse;

/// Alias matching the usual name for the parsed form.
pub type QueryAst = Query;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GqlError {
    #[error("syntax error at offset {offset}: expected {expected}, found {found}")]
    Syntax { offset: usize, expected: String, found: String },
    #[error("unbound variable `{name}` at offset {offset}")]
    UnboundVariable { name: String, offset: usize },
    #[error("unsupported statement {keyword} at offset {offset}")]
    UnsupportedStatement { keyword: String, offset: usize },
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("type error: {0}")]
    Type(String),
}

impl GqlError {
    pub(crate) fn syntax(offset: usize, expected: &str, found: &str) -> Self {
        GqlError::Syntax { offset, expected: expected.to_string(), found: found.to_string() }
    }

    pub fn is_syntax(&self) -> bool {
        matches!(
            self,
            GqlError::Syntax { .. } | GqlError::UnboundVariable { .. } | GqlError::UnsupportedStatement { .. }
        )
    }
}
