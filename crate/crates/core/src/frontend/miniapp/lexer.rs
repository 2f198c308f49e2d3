use super::ast::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Ident(String),
    Int(i64),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl Token {
    pub fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("`{s}`"),
            Token::Int(i) => format!("integer {i}"),
            Token::Str(s) => format!("string {s:?}"),
            Token::Punct(p) => format!("`{p}`"),
            Token::Eof => "end of file".into(),
        }
    }
}

const PUNCT: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "{", "}", "(", ")", ";", ",", ".", "=", "<", ">", "+", "-", "*", "/", "!",
];

pub struct LexError {
    pub offset: usize,
    pub message: String,
}

pub fn tokenize(text: &str) -> Result<Vec<(Token, Span)>, LexError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if text[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if text[i..].starts_with("/*") {
            match text[i + 2..].find("*/") {
                Some(end) => {
                    i += end + 4;
                    continue;
                }
                None => {
                    return Err(LexError {
                        offset: i,
                        message: "unterminated comment".into(),
                    })
                }
            }
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Token::Ident(text[start..i].to_owned()), Span { start, end: i }));
            continue;
        }
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let value = text[start..i].parse().map_err(|_| LexError {
                offset: start,
                message: "integer literal out of range".into(),
            })?;
            out.push((Token::Int(value), Span { start, end: i }));
            continue;
        }
        if c == b'"' {
            i += 1;
            let mut value = String::new();
            loop {
                let Some(ch) = text[i..].chars().next() else {
                    return Err(LexError {
                        offset: start,
                        message: "unterminated string".into(),
                    });
                };
                match ch {
                    '"' => {
                        i += 1;
                        break;
                    }
                    '\n' => {
                        return Err(LexError {
                            offset: start,
                            message: "unterminated string".into(),
                        })
                    }
                    '\\' => {
                        let esc = text[i + 1..].chars().next();
                        match esc {
                            Some('n') => value.push('\n'),
                            Some('t') => value.push('\t'),
                            Some(e @ ('"' | '\\')) => value.push(e),
                            _ => {
                                return Err(LexError {
                                    offset: i,
                                    message: "invalid escape".into(),
                                })
                            }
                        }
                        i += 2;
                    }
                    other => {
                        value.push(other);
                        i += other.len_utf8();
                    }
                }
            }
            out.push((Token::Str(value), Span { start, end: i }));
            continue;
        }
        for p in PUNCT {
            if text[i..].starts_with(p) {
                i += p.len();
                out.push((Token::Punct(p), Span { start, end: i }));
                continue 'outer;
            }
        }
        let ch = text[i..].chars().next().unwrap_or('?');
        return Err(LexError {
            offset: i,
            message: format!("unexpected character `{ch}`"),
        });
    }
    out.push((Token::Eof, Span { start: text.len(), end: text.len() }));
    Ok(out)
}
