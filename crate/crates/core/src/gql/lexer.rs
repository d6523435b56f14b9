use std::fmt;

use super::GqlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kw {
    Match,
    Where,
    Return,
    Order,
    By,
    Asc,
    Desc,
    Limit,
    Distinct,
    And,
    Or,
    Not,
    Xor,
    True,
    False,
    Null,
    Count,
    Sum,
    Avg,
    Max,
    Min,
    Collect,
    Go,
    Fetch,
    Lookup,
    Yield,
    With,
    Group,
    Vertex,
    Edge,
    Over,
    Reversely,
    Bidirect,
}

impl Kw {
    const ALL: [Kw; 33] = [
        Kw::Match,
        Kw::Where,
        Kw::Return,
        Kw::Order,
        Kw::By,
        Kw::Asc,
        Kw::Desc,
        Kw::Limit,
        Kw::Distinct,
        Kw::And,
        Kw::Or,
        Kw::Not,
        Kw::Xor,
        Kw::True,
        Kw::False,
        Kw::Null,
        Kw::Count,
        Kw::Sum,
        Kw::Avg,
        Kw::Max,
        Kw::Min,
        Kw::Collect,
        Kw::Go,
        Kw::Fetch,
        Kw::Lookup,
        Kw::Yield,
        Kw::With,
        Kw::Group,
        Kw::Vertex,
        Kw::Edge,
        Kw::Over,
        Kw::Reversely,
        Kw::Bidirect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kw::Match => "MATCH",
            Kw::Where => "WHERE",
            Kw::Return => "RETURN",
            Kw::Order => "ORDER",
            Kw::By => "BY",
            Kw::Asc => "ASC",
            Kw::Desc => "DESC",
            Kw::Limit => "LIMIT",
            Kw::Distinct => "DISTINCT",
            Kw::And => "AND",
            Kw::Or => "OR",
            Kw::Not => "NOT",
            Kw::Xor => "XOR",
            Kw::True => "TRUE",
            Kw::False => "FALSE",
            Kw::Null => "NULL",
            Kw::Count => "COUNT",
            Kw::Sum => "SUM",
            Kw::Avg => "AVG",
            Kw::Max => "MAX",
            Kw::Min => "MIN",
            Kw::Collect => "COLLECT",
            Kw::Go => "GO",
            Kw::Fetch => "FETCH",
            Kw::Lookup => "LOOKUP",
            Kw::Yield => "YIELD",
            Kw::With => "WITH",
            Kw::Group => "GROUP",
            Kw::Vertex => "VERTEX",
            Kw::Edge => "EDGE",
            Kw::Over => "OVER",
            Kw::Reversely => "REVERSELY",
            Kw::Bidirect => "BIDIRECT",
        }
    }

    pub fn from_word(word: &str) -> Option<Kw> {
        Kw::ALL.into_iter().find(|k| k.as_str().eq_ignore_ascii_case(word))
    }

    /// Statements the tokenizer knows but the executable subset rejects.
    pub fn is_unsupported_statement(self) -> bool {
        matches!(self, Kw::Go | Kw::Fetch | Kw::Lookup | Kw::Yield | Kw::With | Kw::Group)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Kw(Kw, String),
    Str(String),
    Int(i64),
    Float(f64),
    Placeholder(char),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Dot,
    Semi,
    Minus,
    Star,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    /// Any character outside the grammar; only produced by the lenient scan.
    Other(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Kw(k, _) => write!(f, "{}", k.as_str()),
            Tok::Str(s) => write!(f, "string '{s}'"),
            Tok::Int(i) => write!(f, "number {i}"),
            Tok::Float(x) => write!(f, "number {x}"),
            Tok::Placeholder(c) => write!(f, "placeholder [{c}]"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::LBracket => f.write_str("'['"),
            Tok::RBracket => f.write_str("']'"),
            Tok::LBrace => f.write_str("'{'"),
            Tok::RBrace => f.write_str("'}'"),
            Tok::Colon => f.write_str("':'"),
            Tok::Comma => f.write_str("','"),
            Tok::Dot => f.write_str("'.'"),
            Tok::Semi => f.write_str("';'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Eq => f.write_str("'='"),
            Tok::Neq => f.write_str("'<>'"),
            Tok::Lt => f.write_str("'<'"),
            Tok::Le => f.write_str("'<='"),
            Tok::Gt => f.write_str("'>'"),
            Tok::Ge => f.write_str("'>='"),
            Tok::Other(c) => write!(f, "'{c}'"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub offset: usize,
}

/// Strict tokenization for the parser.
pub fn tokenize(src: &str) -> Result<Vec<Token>, GqlError> {
    scan(src, false)
}

/// Tokenization that never fails; unknown characters become `Tok::Other`
/// and an unterminated string runs to the end of input.
pub fn tokenize_lenient(src: &str) -> Vec<Token> {
    scan(src, true).expect("lenient scan is total")
}

fn scan(src: &str, lenient: bool) -> Result<Vec<Token>, GqlError> {
    let bytes = src.as_bytes();
    let mut out: Vec<Token> = Vec::new();
    let mut i = 0;
    // inside a property map a colon precedes a literal, not a label
    let mut brace_depth = 0usize;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b']' => Some(Tok::RBracket),
            b'{' => Some(Tok::LBrace),
            b'}' => Some(Tok::RBrace),
            b':' => Some(Tok::Colon),
            b',' => Some(Tok::Comma),
            b'.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => Some(Tok::Dot),
            b';' => Some(Tok::Semi),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'=' => Some(if bytes.get(i + 1) == Some(&b'=') {
                i += 1;
                Tok::Eq
            } else {
                Tok::Eq
            }),
            _ => None,
        };
        if let Some(tok) = simple {
            match tok {
                Tok::LBrace => brace_depth += 1,
                Tok::RBrace => brace_depth = brace_depth.saturating_sub(1),
                _ => {}
            }
            i += 1;
            out.push(Token { tok, offset: start });
            continue;
        }
        match c {
            b'<' => {
                let tok = match bytes.get(i + 1) {
                    Some(b'=') => {
                        i += 1;
                        Tok::Le
                    }
                    Some(b'>') => {
                        i += 1;
                        Tok::Neq
                    }
                    _ => Tok::Lt,
                };
                i += 1;
                out.push(Token { tok, offset: start });
            }
            b'>' => {
                let tok = if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                    Tok::Ge
                } else {
                    Tok::Gt
                };
                i += 1;
                out.push(Token { tok, offset: start });
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 2;
                out.push(Token { tok: Tok::Neq, offset: start });
            }
            b'[' => {
                let after_minus = matches!(out.last(), Some(Token { tok: Tok::Minus, .. }));
                let is_placeholder = !after_minus
                    && bytes.get(i + 1).is_some_and(u8::is_ascii_lowercase)
                    && bytes.get(i + 2) == Some(&b']');
                if is_placeholder {
                    out.push(Token { tok: Tok::Placeholder(bytes[i + 1] as char), offset: start });
                    i += 3;
                } else {
                    out.push(Token { tok: Tok::LBracket, offset: start });
                    i += 1;
                }
            }
            b'\'' | b'"' => {
                let (s, next) = scan_string(src, i, lenient)?;
                out.push(Token { tok: Tok::Str(s), offset: start });
                i = next;
            }
            b'0'..=b'9' | b'.' => {
                let (tok, next) = scan_number(src, i, lenient)?;
                out.push(Token { tok, offset: start });
                i = next;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &src[start..i];
                let after_accessor = match out.last() {
                    Some(Token { tok: Tok::Dot, .. }) => true,
                    Some(Token { tok: Tok::Colon, .. }) => brace_depth == 0,
                    _ => false,
                };
                let tok = match Kw::from_word(word) {
                    Some(k) if !after_accessor => Tok::Kw(k, word.to_string()),
                    _ => Tok::Ident(word.to_string()),
                };
                out.push(Token { tok, offset: start });
            }
            b'`' => {
                let close = src[i + 1..].find('`').map(|p| i + 1 + p);
                match close {
                    Some(end) => {
                        out.push(Token { tok: Tok::Ident(src[i + 1..end].to_string()), offset: start });
                        i = end + 1;
                    }
                    None if lenient => {
                        out.push(Token { tok: Tok::Ident(src[i + 1..].to_string()), offset: start });
                        i = bytes.len();
                    }
                    None => return Err(GqlError::syntax(start, "closing '`'", "end of input")),
                }
            }
            _ => {
                let ch = src[i..].chars().next().unwrap();
                if !lenient {
                    return Err(GqlError::syntax(start, "a token", &format!("'{ch}'")));
                }
                out.push(Token { tok: Tok::Other(ch), offset: start });
                i += ch.len_utf8();
            }
        }
    }
    out.push(Token { tok: Tok::Eof, offset: src.len() });
    Ok(out)
}

fn scan_string(src: &str, start: usize, lenient: bool) -> Result<(String, usize), GqlError> {
    let quote = src.as_bytes()[start] as char;
    let mut out = String::new();
    let mut chars = src[start + 1..].char_indices();
    while let Some((k, ch)) = chars.next() {
        if ch == quote {
            return Ok((out, start + 1 + k + 1));
        }
        if ch == '\\' {
            match chars.next() {
                Some((_, 'n')) => out.push('\n'),
                Some((_, 't')) => out.push('\t'),
                Some((_, e)) => out.push(e),
                None => break,
            }
        } else {
            out.push(ch);
        }
    }
    if lenient {
        Ok((out, src.len()))
    } else {
        Err(GqlError::syntax(src.len(), &format!("closing {quote}"), "end of input"))
    }
}

fn scan_number(src: &str, start: usize, lenient: bool) -> Result<(Tok, usize), GqlError> {
    let bytes = src.as_bytes();
    let mut i = start;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let mut is_float = false;
    if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
        is_float = true;
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if bytes.get(j).is_some_and(u8::is_ascii_digit) {
            is_float = true;
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    let text = &src[start..i];
    if is_float {
        match text.parse::<f64>() {
            Ok(f) if f.is_finite() => Ok((Tok::Float(f), i)),
            _ if lenient => Ok((Tok::Float(0.0), i)),
            _ => Err(GqlError::syntax(start, "a finite number", text)),
        }
    } else {
        match text.parse::<i64>() {
            Ok(n) => Ok((Tok::Int(n), i)),
            Err(_) if lenient => Ok((Tok::Int(0), i)),
            Err(_) => Err(GqlError::syntax(start, "an integer within 64-bit range", text)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn keywords_are_case_insensitive() {
        assert!(matches!(toks("match")[0], Tok::Kw(Kw::Match, _)));
        assert!(matches!(toks("MaTcH")[0], Tok::Kw(Kw::Match, _)));
    }

    #[test]
    fn words_after_dot_or_colon_are_identifiers() {
        assert_eq!(
            toks("a.count :edge"),
            vec![
                Tok::Ident("a".into()),
                Tok::Dot,
                Tok::Ident("count".into()),
                Tok::Colon,
                Tok::Ident("edge".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn arrows_split_into_simple_tokens() {
        assert_eq!(toks("-[")[..2], [Tok::Minus, Tok::LBracket]);
        assert_eq!(toks("]->")[..3], [Tok::RBracket, Tok::Minus, Tok::Gt]);
        assert_eq!(toks("<-[")[..3], [Tok::Lt, Tok::Minus, Tok::LBracket]);
    }

    #[test]
    fn placeholder_literal_versus_edge_bracket() {
        assert_eq!(toks("> [m]")[1], Tok::Placeholder('m'));
        assert_eq!(toks("-[m]")[1], Tok::LBracket);
    }

    #[test]
    fn numbers_and_strings() {
        assert_eq!(toks("30.26 7 'it''s'")[..2], [Tok::Float(30.26), Tok::Int(7)]);
        assert_eq!(toks(r"'a\'b'")[0], Tok::Str("a'b".into()));
        assert!(tokenize("'open").is_err());
        assert!(matches!(tokenize_lenient("'open")[0].tok, Tok::Str(_)));
    }

    #[test]
    fn lenient_scan_accepts_anything() {
        let t = tokenize_lenient("GO FROM \"x\" OVER e | YIELD $$.a");
        assert!(t.iter().any(|t| t.tok == Tok::Other('|')));
    }
}
