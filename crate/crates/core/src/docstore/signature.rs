//! A small recursive-descent parser for unsafe API signatures.
//!
//! The grammar covers what standard-library unsafe items use: qualifiers
//! (`pub`, `const`, `unsafe`, `extern "C"`), generics, a receiver, named
//! parameters whose types may nest brackets and function pointers, a return
//! type, and an unparsed `where` clause. `unsafe trait Name` is accepted for
//! marker traits.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Receiver {
    None,
    ByValue,
    SharedRef,
    MutRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignatureKind {
    Fn,
    /// An unsafe marker trait; `Self` is the implementing type.
    Trait,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Param {
    pub name: String,
    pub type_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiSignature {
    pub raw: String,
    pub kind: SignatureKind,
    pub name: String,
    /// Non-receiver parameters in declaration order.
    pub params: Vec<Param>,
    /// `()` when the signature has no return type.
    pub return_type: String,
    pub receiver: Receiver,
    /// Generic parameter list including the angle brackets, or empty.
    pub generics_text: String,
    pub where_text: String,
}

impl ApiSignature {
    pub fn param(&self, name: &str) -> Option<(usize, &Param)> {
        self.params.iter().enumerate().find(|(_, p)| p.name == name)
    }

    /// Re-serializes as `fn name<G>(self, p: T, ..) -> R`.
    pub fn to_canonical(&self) -> String {
        if self.kind == SignatureKind::Trait {
            return format!("unsafe trait {}{}", self.name, self.generics_text);
        }
        let mut parts = Vec::new();
        match self.receiver {
            Receiver::None => {}
            Receiver::ByValue => parts.push("self".to_string()),
            Receiver::SharedRef => parts.push("&self".to_string()),
            Receiver::MutRef => parts.push("&mut self".to_string()),
        }
        parts.extend(self.params.iter().map(|p| format!("{}: {}", p.name, p.type_text)));
        let mut out = format!("fn {}{}({})", self.name, self.generics_text, parts.join(", "));
        if self.return_type != "()" {
            out.push_str(" -> ");
            out.push_str(&self.return_type);
        }
        if !self.where_text.is_empty() {
            out.push_str(" where ");
            out.push_str(&self.where_text);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignatureError {
    #[error("empty signature")]
    Empty,
    #[error("unbalanced brackets at offset {offset}: {detail}")]
    Unbalanced { offset: usize, detail: String },
    #[error("parameter {index} has no name: `{text}`")]
    MissingParamName { index: usize, text: String },
    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),
    #[error("expected {expected} at offset {offset}, found {found}")]
    Unexpected {
        expected: &'static str,
        found: String,
        offset: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Lifetime(String),
    Str(String),
    Arrow,
    PathSep,
    Punct(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) | Tok::Lifetime(w) => f.write_str(w),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Arrow => f.write_str("->"),
            Tok::PathSep => f.write_str("::"),
            Tok::Punct(c) => write!(f, "{c}"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, SignatureError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = src[i..].chars().next().unwrap();
        let start = i;
        if c.is_whitespace() {
            i += c.len_utf8();
        } else if c.is_alphanumeric() || c == '_' {
            while i < bytes.len() {
                let d = src[i..].chars().next().unwrap();
                if d.is_alphanumeric() || d == '_' {
                    i += d.len_utf8();
                } else {
                    break;
                }
            }
            out.push((Tok::Word(src[start..i].to_string()), start));
        } else if c == '\'' {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Lifetime(src[start..i].to_string()), start));
        } else if c == '"' {
            i += 1;
            while i < bytes.len() && bytes[i] != b'"' {
                i += 1;
            }
            if i >= bytes.len() {
                return Err(SignatureError::Unbalanced { offset: start, detail: "unterminated string".into() });
            }
            out.push((Tok::Str(src[start + 1..i].to_string()), start));
            i += 1;
        } else if src[i..].starts_with("->") {
            out.push((Tok::Arrow, start));
            i += 2;
        } else if src[i..].starts_with("::") {
            out.push((Tok::PathSep, start));
            i += 2;
        } else {
            out.push((Tok::Punct(c), start));
            i += c.len_utf8();
        }
    }
    Ok(out)
}

const SPACED_KEYWORDS: &[&str] = &["mut", "const", "dyn", "impl", "unsafe", "extern", "as", "where"];

/// Joins tokens with canonical spacing so that equivalent type texts compare
/// equal regardless of the author's whitespace.
fn join(tokens: &[(Tok, usize)]) -> String {
    let mut out = String::new();
    let mut prev: Option<&Tok> = None;
    for (tok, _) in tokens {
        let space = match (prev, tok) {
            (None, _) => false,
            (Some(Tok::Punct(',')), _) | (Some(Tok::Punct(';')), _) => true,
            (Some(Tok::Punct(':')), _) => true,
            (_, Tok::Arrow) | (Some(Tok::Arrow), _) => true,
            (_, Tok::Punct('+')) | (Some(Tok::Punct('+')), _) => true,
            (_, Tok::Punct('=')) | (Some(Tok::Punct('=')), _) => true,
            (_, Tok::Punct(',' | ';' | ':' | '>' | ')' | ']' | '}')) => false,
            (_, Tok::PathSep) | (Some(Tok::PathSep), _) => false,
            (Some(Tok::Word(w)), Tok::Punct(_)) if SPACED_KEYWORDS.contains(&w.as_str()) => true,
            (Some(Tok::Lifetime(_)), Tok::Punct(_)) => true,
            (Some(Tok::Word(_) | Tok::Lifetime(_) | Tok::Str(_)), Tok::Word(_) | Tok::Lifetime(_) | Tok::Str(_)) => true,
            (Some(Tok::Punct('>' | ')' | ']')), Tok::Word(_)) => true,
            _ => false,
        };
        if space {
            out.push(' ');
        }
        out.push_str(&tok.to_string());
        prev = Some(tok);
    }
    out
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |(_, o)| *o)
    }

    fn found(&self) -> String {
        self.peek().map_or_else(|| "end of input".to_string(), |t| format!("`{t}`"))
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Word(x)) if x == w) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self, expected: &'static str) -> Result<String, SignatureError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                self.pos += 1;
                Ok(w.clone())
            }
            _ => Err(SignatureError::Unexpected { expected, found: self.found(), offset: self.offset() }),
        }
    }

    /// Consumes a bracketed group starting at the current opening token and
    /// returns the index one past its closing token.
    fn group_end(&self, start: usize) -> Result<usize, SignatureError> {
        let mut stack: Vec<char> = Vec::new();
        for (i, (tok, off)) in self.toks.iter().enumerate().skip(start) {
            if let Tok::Punct(c) = tok {
                match c {
                    '(' | '[' | '{' | '<' => stack.push(*c),
                    ')' | ']' | '}' | '>' => {
                        let open = match c {
                            ')' => '(',
                            ']' => '[',
                            '}' => '{',
                            _ => '<',
                        };
                        match stack.pop() {
                            Some(o) if o == open => {}
                            Some(o) => {
                                return Err(SignatureError::Unbalanced {
                                    offset: *off,
                                    detail: format!("`{c}` closes `{o}`"),
                                })
                            }
                            None => {
                                return Err(SignatureError::Unbalanced {
                                    offset: *off,
                                    detail: format!("unexpected `{c}`"),
                                })
                            }
                        }
                        if stack.is_empty() {
                            return Ok(i + 1);
                        }
                    }
                    _ => {}
                }
            }
        }
        Err(SignatureError::Unbalanced {
            offset: self.toks.get(start).map_or(self.len, |t| t.1),
            detail: format!("`{}` is never closed", stack.first().copied().unwrap_or('(')),
        })
    }
}

/// Splits `toks` on commas that are not nested inside any bracket.
fn split_top_level(toks: &[(Tok, usize)]) -> Result<Vec<&[(Tok, usize)]>, SignatureError> {
    let mut parts = Vec::new();
    let mut depth: Vec<char> = Vec::new();
    let mut start = 0;
    for (i, (tok, off)) in toks.iter().enumerate() {
        match tok {
            Tok::Punct(c @ ('(' | '[' | '{' | '<')) => depth.push(*c),
            Tok::Punct(c @ (')' | ']' | '}' | '>')) => {
                if depth.pop().is_none() {
                    return Err(SignatureError::Unbalanced { offset: *off, detail: format!("unexpected `{c}`") });
                }
            }
            Tok::Punct(',') if depth.is_empty() => {
                parts.push(&toks[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if let Some(open) = depth.first() {
        let off = toks.first().map_or(0, |t| t.1);
        return Err(SignatureError::Unbalanced { offset: off, detail: format!("`{open}` is never closed") });
    }
    if start < toks.len() {
        parts.push(&toks[start..]);
    }
    Ok(parts)
}

fn receiver_of(part: &[(Tok, usize)]) -> Option<Receiver> {
    let words: Vec<&Tok> = part.iter().map(|(t, _)| t).collect();
    let is_self = |t: &Tok| matches!(t, Tok::Word(w) if w == "self");
    let is_mut = |t: &Tok| matches!(t, Tok::Word(w) if w == "mut");
    let amp = Tok::Punct('&');
    match words.as_slice() {
        [s] if is_self(s) => Some(Receiver::ByValue),
        [m, s] if is_mut(m) && is_self(s) => Some(Receiver::ByValue),
        [a, s] if **a == amp && is_self(s) => Some(Receiver::SharedRef),
        [a, Tok::Lifetime(_), s] if **a == amp && is_self(s) => Some(Receiver::SharedRef),
        [a, m, s] if **a == amp && is_mut(m) && is_self(s) => Some(Receiver::MutRef),
        [a, Tok::Lifetime(_), m, s] if **a == amp && is_mut(m) && is_self(s) => Some(Receiver::MutRef),
        [first, ..] if is_self(first) || (is_mut(first) && words.get(1).is_some_and(|t| is_self(t))) => {
            // `self: Type`
            let colon = part.iter().position(|(t, _)| *t == Tok::Punct(':'))?;
            let ty = join(&part[colon + 1..]);
            Some(if ty.starts_with("&mut") {
                Receiver::MutRef
            } else if ty.starts_with('&') {
                Receiver::SharedRef
            } else {
                Receiver::ByValue
            })
        }
        _ => None,
    }
}

pub fn parse_signature(raw: &str) -> Result<ApiSignature, SignatureError> {
    if raw.trim().is_empty() {
        return Err(SignatureError::Empty);
    }
    let toks = lex(raw)?;
    let mut p = Parser { toks: &toks, pos: 0, len: raw.len() };

    loop {
        if p.eat_word("pub") {
            if p.peek() == Some(&Tok::Punct('(')) {
                p.pos = p.group_end(p.pos)?;
            }
        } else if p.eat_word("const") || p.eat_word("unsafe") || p.eat_word("async") || p.eat_word("default") {
        } else if p.eat_word("extern") {
            if matches!(p.peek(), Some(Tok::Str(_))) {
                p.pos += 1;
            }
        } else {
            break;
        }
    }

    let kind = if p.eat_word("fn") {
        SignatureKind::Fn
    } else if p.eat_word("trait") {
        SignatureKind::Trait
    } else {
        return Err(SignatureError::Unexpected { expected: "`fn` or `trait`", found: p.found(), offset: p.offset() });
    };
    let name = p.ident("item name")?;

    let mut generics_text = String::new();
    if p.peek() == Some(&Tok::Punct('<')) {
        let end = p.group_end(p.pos)?;
        generics_text = join(&toks[p.pos..end]);
        p.pos = end;
    }

    if kind == SignatureKind::Trait {
        if p.pos != toks.len() {
            return Err(SignatureError::Unexpected { expected: "end of input", found: p.found(), offset: p.offset() });
        }
        return Ok(ApiSignature {
            raw: raw.to_string(),
            kind,
            name,
            params: Vec::new(),
            return_type: "()".into(),
            receiver: Receiver::ByValue,
            generics_text,
            where_text: String::new(),
        });
    }

    if p.peek() != Some(&Tok::Punct('(')) {
        return Err(SignatureError::Unexpected { expected: "`(`", found: p.found(), offset: p.offset() });
    }
    let close = p.group_end(p.pos)?;
    let inner = &toks[p.pos + 1..close - 1];
    p.pos = close;

    let mut receiver = Receiver::None;
    let mut params = Vec::new();
    for (index, part) in split_top_level(inner)?.into_iter().enumerate() {
        if part.is_empty() {
            return Err(SignatureError::MissingParamName { index, text: String::new() });
        }
        if index == 0 {
            if let Some(r) = receiver_of(part) {
                receiver = r;
                continue;
            }
        }
        let colon = part
            .iter()
            .position(|(t, _)| *t == Tok::Punct(':'))
            .ok_or_else(|| SignatureError::MissingParamName { index, text: join(part) })?;
        let pattern: Vec<&Tok> = part[..colon].iter().map(|(t, _)| t).collect();
        let pname = match pattern.as_slice() {
            [Tok::Word(n)] => n.clone(),
            [Tok::Word(m), Tok::Word(n)] if m == "mut" => n.clone(),
            _ => return Err(SignatureError::MissingParamName { index, text: join(part) }),
        };
        if part.len() == colon + 1 {
            return Err(SignatureError::Unexpected {
                expected: "parameter type",
                found: "end of parameter".into(),
                offset: part[colon].1,
            });
        }
        if params.iter().any(|q: &Param| q.name == pname) {
            return Err(SignatureError::DuplicateParam(pname));
        }
        params.push(Param { name: pname, type_text: join(&part[colon + 1..]) });
    }

    let mut return_type = "()".to_string();
    if p.peek() == Some(&Tok::Arrow) {
        p.pos += 1;
        let start = p.pos;
        let mut depth = 0i32;
        while let Some(t) = p.peek() {
            match t {
                Tok::Word(w) if w == "where" && depth == 0 => break,
                Tok::Punct('(' | '[' | '<' | '{') => depth += 1,
                Tok::Punct(')' | ']' | '>' | '}') => {
                    depth -= 1;
                    if depth < 0 {
                        return Err(SignatureError::Unbalanced {
                            offset: p.offset(),
                            detail: format!("unexpected {}", p.found()),
                        });
                    }
                }
                _ => {}
            }
            p.pos += 1;
        }
        if depth != 0 {
            return Err(SignatureError::Unbalanced {
                offset: toks[start].1,
                detail: "return type bracket is never closed".into(),
            });
        }
        if start == p.pos {
            return Err(SignatureError::Unexpected { expected: "return type", found: p.found(), offset: p.offset() });
        }
        return_type = join(&toks[start..p.pos]);
    }

    let mut where_text = String::new();
    if p.eat_word("where") {
        where_text = join(&toks[p.pos..]);
        p.pos = toks.len();
    }
    if p.pos != toks.len() {
        return Err(SignatureError::Unexpected { expected: "end of signature", found: p.found(), offset: p.offset() });
    }

    Ok(ApiSignature {
        raw: raw.to_string(),
        kind,
        name,
        params,
        return_type,
        receiver,
        generics_text,
        where_text,
    })
}
