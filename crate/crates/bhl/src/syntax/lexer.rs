//! Hand-rolled lexer shared by every input format (.bhp, .elht, .scn, .bhl).

use std::fmt;
use thiserror::Error;

/// A source position (1-based line and column).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TokKind {
    Ident(String),
    Int(i64),
    Real(f64),
    Str(String),
    // punctuation
    Assign,    // :=
    Semi,      // ;
    Comma,     // ,
    Colon,     // :
    Dot,       // .
    LParen,    // (
    RParen,    // )
    LBrace,    // {
    RBrace,    // }
    LBracket,  // [
    RBracket,  // ]
    Plus,
    Minus,
    Star,
    Slash,
    Bang,      // !
    AndAnd,    // &&
    OrOr,      // ||
    Arrow,     // ->
    Eq,        // =
    EqEq,      // ==
    NotEq,     // !=
    Lt,
    Le,
    Gt,
    Ge,
    Tilde,     // ~
    Caret,     // ^
    Eof,
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokKind::Int(n) => write!(f, "integer `{n}`"),
            TokKind::Real(x) => write!(f, "real `{x}`"),
            TokKind::Str(s) => write!(f, "string {s:?}"),
            TokKind::Assign => write!(f, "`:=`"),
            TokKind::Semi => write!(f, "`;`"),
            TokKind::Comma => write!(f, "`,`"),
            TokKind::Colon => write!(f, "`:`"),
            TokKind::Dot => write!(f, "`.`"),
            TokKind::LParen => write!(f, "`(`"),
            TokKind::RParen => write!(f, "`)`"),
            TokKind::LBrace => write!(f, "`{{`"),
            TokKind::RBrace => write!(f, "`}}`"),
            TokKind::LBracket => write!(f, "`[`"),
            TokKind::RBracket => write!(f, "`]`"),
            TokKind::Plus => write!(f, "`+`"),
            TokKind::Minus => write!(f, "`-`"),
            TokKind::Star => write!(f, "`*`"),
            TokKind::Slash => write!(f, "`/`"),
            TokKind::Bang => write!(f, "`!`"),
            TokKind::AndAnd => write!(f, "`&&`"),
            TokKind::OrOr => write!(f, "`||`"),
            TokKind::Arrow => write!(f, "`->`"),
            TokKind::Eq => write!(f, "`=`"),
            TokKind::EqEq => write!(f, "`==`"),
            TokKind::NotEq => write!(f, "`!=`"),
            TokKind::Lt => write!(f, "`<`"),
            TokKind::Le => write!(f, "`<=`"),
            TokKind::Gt => write!(f, "`>`"),
            TokKind::Ge => write!(f, "`>=`"),
            TokKind::Tilde => write!(f, "`~`"),
            TokKind::Caret => write!(f, "`^`"),
            TokKind::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokKind,
    pub span: Span,
}

#[derive(Debug, Error, PartialEq)]
pub enum LexError {
    #[error("{span}: unexpected character `{ch}`")]
    UnexpectedChar { ch: char, span: Span },
    #[error("{span}: malformed number literal `{text}`")]
    BadNumber { text: String, span: Span },
    #[error("{span}: unterminated string literal")]
    UnterminatedString { span: Span },
}

pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($kind:expr, $span:expr) => {
            toks.push(Token { kind: $kind, span: $span })
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        // whitespace
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        // comments: `#` and `//` to end of line
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
                col += 1;
            }
            let text: String = chars[start..i].iter().collect();
            push!(TokKind::Ident(text), span);
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let mut is_real = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len()
                && chars[i] == '.'
                && chars.get(i + 1).map_or(false, |d| d.is_ascii_digit())
            {
                is_real = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if matches!(chars.get(j), Some('+') | Some('-')) {
                    j += 1;
                }
                if chars.get(j).map_or(false, |d| d.is_ascii_digit()) {
                    is_real = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            if is_real {
                match text.parse::<f64>() {
                    Ok(x) => push!(TokKind::Real(x), span),
                    Err(_) => return Err(LexError::BadNumber { text, span }),
                }
            } else {
                match text.parse::<i64>() {
                    Ok(n) => push!(TokKind::Int(n), span),
                    Err(_) => return Err(LexError::BadNumber { text, span }),
                }
            }
            continue;
        }
        if c == '"' {
            let mut j = i + 1;
            let mut s = String::new();
            while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                s.push(chars[j]);
                j += 1;
            }
            if chars.get(j) != Some(&'"') {
                return Err(LexError::UnterminatedString { span });
            }
            col += (j + 1 - i) as u32;
            i = j + 1;
            push!(TokKind::Str(s), span);
            continue;
        }
        // multi-char operators first
        let two: Option<TokKind> = match (c, chars.get(i + 1)) {
            (':', Some('=')) => Some(TokKind::Assign),
            ('&', Some('&')) => Some(TokKind::AndAnd),
            ('|', Some('|')) => Some(TokKind::OrOr),
            ('-', Some('>')) => Some(TokKind::Arrow),
            ('=', Some('=')) => Some(TokKind::EqEq),
            ('!', Some('=')) => Some(TokKind::NotEq),
            ('<', Some('=')) => Some(TokKind::Le),
            ('>', Some('=')) => Some(TokKind::Ge),
            _ => None,
        };
        if let Some(kind) = two {
            push!(kind, span);
            i += 2;
            col += 2;
            continue;
        }
        let one = match c {
            ';' => TokKind::Semi,
            ',' => TokKind::Comma,
            ':' => TokKind::Colon,
            '.' => TokKind::Dot,
            '(' => TokKind::LParen,
            ')' => TokKind::RParen,
            '{' => TokKind::LBrace,
            '}' => TokKind::RBrace,
            '[' => TokKind::LBracket,
            ']' => TokKind::RBracket,
            '+' => TokKind::Plus,
            '-' => TokKind::Minus,
            '*' => TokKind::Star,
            '/' => TokKind::Slash,
            '!' => TokKind::Bang,
            '=' => TokKind::Eq,
            '<' => TokKind::Lt,
            '>' => TokKind::Gt,
            '~' => TokKind::Tilde,
            '^' => TokKind::Caret,
            _ => return Err(LexError::UnexpectedChar { ch: c, span }),
        };
        push!(one, span);
        i += 1;
        col += 1;
    }
    toks.push(Token {
        kind: TokKind::Eof,
        span: Span { line, col },
    });
    Ok(toks)
}
