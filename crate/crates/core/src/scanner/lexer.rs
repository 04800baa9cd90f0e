//! Blanks out comments and string-like literals so that token matching only
//! sees code. Every removed byte becomes a space (newlines are kept), so
//! byte offsets and line numbers are unchanged.

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

struct Blanker<'a> {
    src: &'a [u8],
    out: Vec<u8>,
    i: usize,
}

impl Blanker<'_> {
    fn keep(&mut self, n: usize) {
        let end = (self.i + n).min(self.src.len());
        self.out.extend_from_slice(&self.src[self.i..end]);
        self.i = end;
    }

    fn blank(&mut self, n: usize) {
        let end = (self.i + n).min(self.src.len());
        for &b in &self.src[self.i..end] {
            self.out.push(if b == b'\n' { b'\n' } else { b' ' });
        }
        self.i = end;
    }

    fn at(&self, k: usize) -> Option<u8> {
        self.src.get(self.i + k).copied()
    }

    fn line_comment(&mut self) {
        let len = self.src[self.i..].iter().position(|&b| b == b'\n').unwrap_or(self.src.len() - self.i);
        self.blank(len);
    }

    fn block_comment(&mut self) {
        let mut depth = 0usize;
        let mut j = self.i;
        while j < self.src.len() {
            if self.src[j..].starts_with(b"/*") {
                depth += 1;
                j += 2;
            } else if self.src[j..].starts_with(b"*/") {
                depth -= 1;
                j += 2;
                if depth == 0 {
                    break;
                }
            } else {
                j += 1;
            }
        }
        self.blank(j - self.i);
    }

    /// Quoted string starting after `prefix` bytes, with backslash escapes.
    fn string(&mut self, prefix: usize) {
        let mut j = self.i + prefix + 1;
        while j < self.src.len() {
            match self.src[j] {
                b'\\' => j += 2,
                b'"' => {
                    j += 1;
                    break;
                }
                _ => j += 1,
            }
        }
        self.blank(j.min(self.src.len()) - self.i);
    }

    /// Raw string `r#*"..."#*` starting after `prefix` bytes.
    fn raw_string(&mut self, prefix: usize) {
        let start = self.i + prefix;
        let hashes = self.src[start..].iter().take_while(|&&b| b == b'#').count();
        let body = start + hashes + 1;
        let mut close = vec![b'"'];
        close.extend(std::iter::repeat_n(b'#', hashes));
        let end = self.src[body.min(self.src.len())..]
            .windows(close.len())
            .position(|w| w == close.as_slice())
            .map_or(self.src.len(), |p| body + p + close.len());
        self.blank(end - self.i);
    }

    /// A char literal, or a lifetime left in place.
    fn quote(&mut self) {
        let rest = &self.src[self.i + 1..];
        let len = if rest.first() == Some(&b'\\') {
            rest.iter().skip(2).position(|&b| b == b'\'').map(|p| p + 4)
        } else {
            let width = rest.first().map_or(1, |&b| utf8_width(b));
            (rest.get(width) == Some(&b'\'')).then_some(width + 2)
        };
        match len {
            Some(n) => self.blank(n),
            None => self.keep(1),
        }
    }

    /// Whether a raw-string opener `r"`/`r#"` begins `k` bytes ahead.
    fn raw_opener(&self, k: usize) -> bool {
        let mut j = self.i + k;
        while self.src.get(j) == Some(&b'#') {
            j += 1;
        }
        self.src.get(j) == Some(&b'"')
    }
}

fn utf8_width(b: u8) -> usize {
    match b {
        0xF0.. => 4,
        0xE0.. => 3,
        0xC0.. => 2,
        _ => 1,
    }
}

pub fn strip_comments_and_strings(source: &str) -> String {
    let mut s = Blanker { src: source.as_bytes(), out: Vec::with_capacity(source.len()), i: 0 };
    while s.i < s.src.len() {
        let b = s.src[s.i];
        let word_start = s.i == 0 || !is_ident(s.src[s.i - 1]);
        match b {
            b'/' if s.at(1) == Some(b'/') => s.line_comment(),
            b'/' if s.at(1) == Some(b'*') => s.block_comment(),
            b'"' => s.string(0),
            b'\'' => s.quote(),
            b'r' if word_start && s.raw_opener(1) && s.at(1).is_some() => s.raw_string(1),
            b'b' | b'c' if word_start && s.at(1) == Some(b'r') && s.raw_opener(2) => s.raw_string(2),
            b'b' | b'c' if word_start && s.at(1) == Some(b'"') => s.string(1),
            b'b' if word_start && s.at(1) == Some(b'\'') => {
                s.keep(1);
                s.quote();
            }
            _ => s.keep(1),
        }
    }
    String::from_utf8(s.out).expect("only ASCII bytes are substituted, at whole-character boundaries")
}
