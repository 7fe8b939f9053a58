use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::KernelError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Float(f64),
    Int(i64),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

// Longest first so that `+=` wins over `+`.
const PUNCTS: [&str; 31] = [
    "+=", "-=", "*=", "/=", "++", "--", "<=", ">=", "==", "!=", "&&", "||", "(", ")", "[", "]", "{", "}", ";", ",",
    ".", "?", ":", "+", "-", "*", "/", "<", ">", "=", "!",
];

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, KernelError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut pos, mut line, mut col) = (0usize, 1usize, 1usize);

    let advance = |pos: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for &b in &bytes[*pos..*pos + n] {
            if b == b'\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *pos += n;
    };

    while pos < bytes.len() {
        let c = bytes[pos];
        let rest = &src[pos..];
        if c.is_ascii_whitespace() {
            advance(&mut pos, &mut line, &mut col, 1);
        } else if rest.starts_with("//") {
            let n = rest.find('\n').unwrap_or(rest.len());
            advance(&mut pos, &mut line, &mut col, n);
        } else if let Some(body) = rest.strip_prefix("/*") {
            let Some(end) = body.find("*/") else {
                return Err(KernelError::Syntax {
                    line,
                    col,
                    message: "unterminated comment".into(),
                });
            };
            advance(&mut pos, &mut line, &mut col, end + 4);
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let n = rest
                .bytes()
                .position(|b| !(b.is_ascii_alphanumeric() || b == b'_'))
                .unwrap_or(rest.len());
            out.push(Token {
                tok: Tok::Ident(rest[..n].to_string()),
                line,
                col,
            });
            advance(&mut pos, &mut line, &mut col, n);
        } else if c.is_ascii_digit() || (c == b'.' && rest.as_bytes().get(1).is_some_and(u8::is_ascii_digit)) {
            let (tok, n) = number(rest).ok_or_else(|| KernelError::Syntax {
                line,
                col,
                message: "malformed number".into(),
            })?;
            out.push(Token { tok, line, col });
            advance(&mut pos, &mut line, &mut col, n);
        } else if let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            out.push(Token {
                tok: Tok::Punct(p),
                line,
                col,
            });
            advance(&mut pos, &mut line, &mut col, p.len());
        } else {
            let ch = rest.chars().next().unwrap_or('?');
            return Err(KernelError::Syntax {
                line,
                col,
                message: alloc::format!("unexpected character `{ch}`"),
            });
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

fn number(s: &str) -> Option<(Tok, usize)> {
    let b = s.as_bytes();
    let mut n = 0;
    let digits = |n: &mut usize| {
        while *n < b.len() && b[*n].is_ascii_digit() {
            *n += 1;
        }
    };
    digits(&mut n);
    let mut float = false;
    if n < b.len() && b[n] == b'.' {
        float = true;
        n += 1;
        digits(&mut n);
    }
    if n < b.len() && (b[n] == b'e' || b[n] == b'E') {
        let mut m = n + 1;
        if m < b.len() && (b[m] == b'+' || b[m] == b'-') {
            m += 1;
        }
        if m < b.len() && b[m].is_ascii_digit() {
            float = true;
            n = m;
            digits(&mut n);
        } else {
            return None;
        }
    }
    let text = &s[..n];
    // C-style literal suffixes.
    let mut len = n;
    if n < b.len() && matches!(b[n], b'f' | b'F' | b'l' | b'L') {
        len += 1;
        float |= matches!(b[n], b'f' | b'F');
    }
    if len < b.len() && (b[len].is_ascii_alphanumeric() || b[len] == b'_') {
        return None;
    }
    let tok = if float {
        Tok::Float(text.parse().ok()?)
    } else {
        Tok::Int(text.parse().ok()?)
    };
    Some((tok, len))
}
