use std::collections::BTreeMap;

use super::{Confidence, Method, Position, ResolutionCandidate};
use crate::docstore::{ApiRecord, DocDatabase, Receiver, SignatureKind};
use crate::scanner::{is_call_like, strip_comments_and_strings};

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

/// The identifier token under the cursor and how it is written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSite {
    pub name: String,
    /// Byte range of the token in the document.
    pub start: usize,
    pub end: usize,
    /// Written path segments before the name, after any import expansion.
    pub qualifier: Vec<String>,
    pub method_call: bool,
    pub call_like: bool,
    /// Type names inside a turbofish right after the token.
    pub turbofish: Vec<String>,
}

/// Byte offset of a line/UTF-16 position, or `None` when out of bounds.
pub fn byte_offset(text: &str, pos: Position) -> Option<usize> {
    let mut line_start = 0;
    for _ in 0..pos.line {
        line_start += text[line_start..].find('\n')? + 1;
    }
    let line_end = text[line_start..].find('\n').map_or(text.len(), |p| line_start + p);
    let line = text[line_start..line_end].strip_suffix('\r').unwrap_or(&text[line_start..line_end]);
    let mut units = 0u32;
    for (off, ch) in line.char_indices() {
        if units >= pos.character {
            return (units == pos.character).then_some(line_start + off);
        }
        units += ch.len_utf16() as u32;
    }
    (units == pos.character).then_some(line_start + line.len())
}

/// Line/UTF-16 position of a byte offset.
pub fn position_of(text: &str, offset: usize) -> Position {
    let before = &text[..offset];
    let line = before.matches('\n').count() as u32;
    let line_start = before.rfind('\n').map_or(0, |p| p + 1);
    Position { line, character: before[line_start..].encode_utf16().count() as u32 }
}

fn skip_ws_back(b: &[u8], mut i: usize) -> usize {
    while i > 0 && b[i - 1].is_ascii_whitespace() {
        i -= 1;
    }
    i
}

/// Start of the `<...>` group whose closing `>` ends just before `end`.
fn angle_group_start(b: &[u8], end: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut i = end;
    while i > 0 {
        i -= 1;
        match b[i] {
            b'>' if i > 0 && b[i - 1] == b'-' => {}
            b'>' => depth += 1,
            b'<' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            b';' | b'{' | b'}' => return None,
            _ => {}
        }
    }
    None
}

fn ident_before(b: &[u8], end: usize) -> Option<usize> {
    let mut i = end;
    while i > 0 && is_ident(b[i - 1]) {
        i -= 1;
    }
    (i < end).then_some(i)
}

/// Last identifiers of a path, generic arguments dropped: `a::B<T>` gives `[a, B]`.
fn plain_path(text: &str) -> Vec<String> {
    let mut depth = 0usize;
    let mut top = String::new();
    for c in text.chars() {
        match c {
            '<' => depth += 1,
            '>' => depth = depth.saturating_sub(1),
            _ if depth == 0 => top.push(c),
            _ => {}
        }
    }
    top.split("::").map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// Segments named by a qualified-path head such as `<*const T>` or
/// `<I as SliceIndex<T>>`.
fn qualified_head(inner: &str) -> Vec<String> {
    let inner = inner.trim();
    if let Some((_, tr)) = inner.split_once(" as ") {
        return plain_path(tr);
    }
    if inner.starts_with("*const") || inner.starts_with("*mut") {
        return vec!["pointer".into()];
    }
    if inner.starts_with('[') {
        return vec!["slice".into()];
    }
    if inner.starts_with("&str") || inner == "str" {
        return vec!["str".into()];
    }
    plain_path(inner)
}

/// Path segments written before the token starting at `start`.
fn qualifier_before(b: &[u8], text: &str, start: usize) -> Vec<String> {
    let mut segs: Vec<String> = Vec::new();
    let mut i = start;
    loop {
        let j = skip_ws_back(b, i);
        if j < 2 || &b[j - 2..j] != b"::" {
            break;
        }
        let k = skip_ws_back(b, j - 2);
        if k > 0 && b[k - 1] == b'>' {
            let Some(open) = angle_group_start(b, k) else { break };
            let before = skip_ws_back(b, open);
            if before >= 2 && &b[before - 2..before] == b"::" {
                // turbofish on the previous segment: skip it
                let k2 = skip_ws_back(b, before - 2);
                if let Some(s) = ident_before(b, k2) {
                    segs.insert(0, text[s..k2].to_string());
                    i = s;
                    continue;
                }
                break;
            }
            if let Some(s) = ident_before(b, before).filter(|_| before == open) {
                segs.insert(0, text[s..before].to_string());
                i = s;
                continue;
            }
            let head = qualified_head(&text[open + 1..k - 1]);
            segs.splice(0..0, head);
            break;
        }
        match ident_before(b, k) {
            Some(s) => {
                segs.insert(0, text[s..k].to_string());
                i = s;
            }
            None => break,
        }
    }
    segs
}

fn turbofish_after(b: &[u8], text: &str, end: usize) -> Vec<String> {
    let mut i = end;
    while i < b.len() && b[i].is_ascii_whitespace() {
        i += 1;
    }
    if !b[i..].starts_with(b"::") {
        return vec![];
    }
    let Some(open) = b[i + 2..].iter().position(|c| !c.is_ascii_whitespace()).map(|p| i + 2 + p) else { return vec![] };
    if b[open] != b'<' {
        return vec![];
    }
    let mut depth = 0usize;
    let mut close = None;
    for (k, &c) in b.iter().enumerate().skip(open) {
        match c {
            b'<' => depth += 1,
            b'>' if b[k - 1] != b'-' => {
                depth -= 1;
                if depth == 0 {
                    close = Some(k);
                    break;
                }
            }
            _ => {}
        }
    }
    let Some(close) = close else { return vec![] };
    text[open + 1..close]
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| w.chars().next().is_some_and(char::is_uppercase))
        .map(str::to_string)
        .collect()
}

/// `use` imports: alias → full path.
pub fn imports(stripped: &str) -> BTreeMap<String, Vec<String>> {
    let mut out = BTreeMap::new();
    let b = stripped.as_bytes();
    let mut search = 0;
    while let Some(p) = stripped[search..].find("use") {
        let at = search + p;
        search = at + 3;
        let boundary = (at == 0 || !is_ident(b[at - 1])) && b.get(at + 3).is_some_and(|c| c.is_ascii_whitespace());
        if !boundary {
            continue;
        }
        let Some(semi) = stripped[at..].find(';') else { break };
        use_tree(&stripped[at + 3..at + semi], &[], &mut out);
        search = at + semi;
    }
    out
}

fn split_top(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut last) = (0usize, 0);
    for (i, c) in text.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&text[last..i]);
                last = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[last..]);
    parts
}

fn use_tree(tree: &str, prefix: &[String], out: &mut BTreeMap<String, Vec<String>>) {
    let tree = tree.trim().trim_start_matches("::");
    if let Some(open) = tree.find('{') {
        let mut base = prefix.to_vec();
        base.extend(tree[..open].split("::").map(str::trim).filter(|s| !s.is_empty()).map(str::to_string));
        let inner = tree[open + 1..].trim_end().strip_suffix('}').unwrap_or(&tree[open + 1..]);
        for part in split_top(inner) {
            use_tree(part, &base, out);
        }
        return;
    }
    let (path, alias) = match tree.split_once(" as ") {
        Some((p, a)) => (p, Some(a.trim())),
        None => (tree, None),
    };
    let mut full = prefix.to_vec();
    full.extend(path.split("::").map(str::trim).filter(|s| !s.is_empty()).map(str::to_string));
    if full.last().is_some_and(|s| s == "self") {
        full.pop();
    }
    let Some(last) = full.last().cloned() else { return };
    let alias = alias.unwrap_or(&last).to_string();
    if alias != "_" && alias != "*" && last != "*" {
        out.insert(alias, full);
    }
}

/// The call site under `offset`, or `None` over whitespace, punctuation,
/// comments and literals.
pub fn call_site(text: &str, offset: usize) -> Option<CallSite> {
    let stripped = strip_comments_and_strings(text);
    let b = stripped.as_bytes();
    let on = |i: usize| i < b.len() && is_ident(b[i]);
    let probe = if on(offset) {
        offset
    } else if offset > 0 && on(offset - 1) {
        offset - 1
    } else {
        return None;
    };
    let mut start = probe;
    while start > 0 && is_ident(b[start - 1]) {
        start -= 1;
    }
    let mut end = probe;
    while end < b.len() && is_ident(b[end]) {
        end += 1;
    }
    if b[start].is_ascii_digit() {
        return None;
    }
    let name = stripped[start..end].to_string();
    let before = skip_ws_back(b, start);
    let method_call = before > 0 && b[before - 1] == b'.' && !(before > 1 && b[before - 2] == b'.');
    let mut qualifier = if method_call { vec![] } else { qualifier_before(b, &stripped, start) };
    let imported = imports(&stripped);
    if !method_call {
        let lookup = qualifier.first().cloned().unwrap_or_else(|| name.clone());
        if let Some(full) = imported.get(&lookup) {
            let mut expanded = full.clone();
            if qualifier.is_empty() {
                expanded.pop();
            } else {
                expanded.extend(qualifier.drain(1..));
            }
            qualifier = expanded;
        }
    }
    let mut turbofish = turbofish_after(b, &stripped, end);
    if method_call {
        turbofish.extend(imported.values().filter_map(|p| p.last()).filter(|s| s.chars().next().is_some_and(char::is_uppercase)).cloned());
    }
    Some(CallSite { call_like: is_call_like(&stripped, end), name, start, end, qualifier, method_call, turbofish })
}

fn segments_end_with(record: &ApiRecord, path: &[String]) -> bool {
    let segs = record.identifier.path_segments();
    segs.len() >= path.len() && segs[segs.len() - path.len()..].iter().zip(path).all(|(a, b)| a == b)
}

fn candidates(records: Vec<&ApiRecord>, confidence: Confidence, method: Method) -> Vec<ResolutionCandidate> {
    records.into_iter().map(|r| ResolutionCandidate { identifier: r.identifier.clone(), confidence, method }).collect()
}

/// Ranks the records the site may refer to.
pub fn resolve_site(site: &CallSite, db: &DocDatabase) -> Vec<ResolutionCandidate> {
    if !site.qualifier.is_empty() {
        let mut path: Vec<String> = site.qualifier.clone();
        if matches!(path.first().map(String::as_str), Some("std" | "core" | "alloc")) {
            path.remove(0);
        }
        path.push(site.name.clone());
        let hits: Vec<&ApiRecord> = db.iter().filter(|r| segments_end_with(r, &path)).collect();
        return candidates(hits, Confidence::High, Method::PathMatch);
    }
    let compatible = |r: &&ApiRecord| match (r.signature.kind, site.method_call, site.call_like) {
        (SignatureKind::Trait, method, _) => !method,
        (SignatureKind::Fn, true, _) => r.signature.receiver != Receiver::None,
        (SignatureKind::Fn, false, call) => call && r.signature.receiver == Receiver::None,
    };
    let named: Vec<&ApiRecord> = db.by_name(&site.name).filter(compatible).collect();
    if site.method_call && !site.turbofish.is_empty() {
        let hinted: Vec<&ApiRecord> = named
            .iter()
            .copied()
            .filter(|r| {
                let segs = r.identifier.path_segments();
                let item = segs.len().checked_sub(2).map(|i| segs[i]);
                site.turbofish.iter().any(|t| Some(t.as_str()) == item) || site.turbofish.iter().any(|t| *t == r.impl_type.split('<').next().unwrap_or(""))
            })
            .collect();
        if !hinted.is_empty() && hinted.len() < named.len() {
            return candidates(hinted, Confidence::Medium, Method::ReceiverHint);
        }
    }
    match named.len() {
        0 => vec![],
        1 => candidates(named, Confidence::Medium, Method::UniqueName),
        _ => candidates(named, Confidence::Low, Method::UniqueName),
    }
}
