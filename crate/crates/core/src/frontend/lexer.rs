use std::fmt;

use crate::error::{Error, Result, Span};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(String),
    /// Punctuation and operators, including `->` and `::`.
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Number(s) => write!(f, "number `{s}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

const PUNCT: &[&str] = &[
    "->", "::", "(", ")", "{", "}", "[", "]", ",", ";", "=", "+", "-", "*", "/", "'", "@", ":",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
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
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                span,
            });
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            out.push(Token {
                tok: Tok::Number(chars[start..i].iter().collect()),
                span,
            });
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let p = PUNCT
                .iter()
                .find(|p| rest.starts_with(**p))
                .ok_or_else(|| Error::Syntax {
                    span,
                    message: format!("unexpected character `{c}`"),
                })?;
            i += p.chars().count();
            out.push(Token {
                tok: Tok::Punct(p),
                span,
            });
        }
        col += i - start;
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn arrows_and_conjugates() {
        assert_eq!(
            kinds("(x::R) -> x'"),
            vec![
                Tok::Punct("("),
                Tok::Ident("x".into()),
                Tok::Punct("::"),
                Tok::Ident("R".into()),
                Tok::Punct(")"),
                Tok::Punct("->"),
                Tok::Ident("x".into()),
                Tok::Punct("'"),
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn numbers_and_spans() {
        let t = tokenize("a\n  2.5e-3 # note\n1/3").unwrap();
        assert_eq!(t[1].tok, Tok::Number("2.5e-3".into()));
        assert_eq!(t[1].span, Span { line: 2, col: 3 });
        assert_eq!(t[2].tok, Tok::Number("1".into()));
        assert_eq!(t[3].tok, Tok::Punct("/"));
    }

    #[test]
    fn stray_character_is_located() {
        match tokenize("x $ y") {
            Err(Error::Syntax { span, .. }) => assert_eq!(span, Span { line: 1, col: 3 }),
            other => panic!("{other:?}"),
        }
    }
}
