use super::{ArenaNode, UltrametricTree, DEFAULT_ULTRAMETRIC_TOL};
use crate::error::{Error, Result};

/// Parses a single semicolon-terminated Newick tree.
///
/// Every non-root node needs a branch length. Labels may be bare or
/// single-quoted (`''` escapes a quote); `[...]` comments are skipped.
pub fn parse_newick(text: &str) -> Result<UltrametricTree> {
    parse_newick_with_tol(text, DEFAULT_ULTRAMETRIC_TOL)
}

/// As [`parse_newick`], with a custom relative ultrametricity tolerance.
pub fn parse_newick_with_tol(text: &str, rel_tol: f64) -> Result<UltrametricTree> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
        arena: Vec::new(),
    };
    let root = parser.subtree()?;
    parser.skip_ws();
    if parser.peek() == Some(b':') {
        // A root edge length is allowed and ignored.
        parser.pos += 1;
        parser.number()?;
        parser.skip_ws();
    }
    parser.expect(b';')?;
    parser.skip_ws();
    if parser.pos != parser.src.len() {
        return Err(parser.error("trailing characters after ';'"));
    }
    UltrametricTree::from_arena(&parser.arena, root, rel_tol)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    arena: Vec<ArenaNode>,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::NewickSyntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else if c == b'[' {
                while let Some(c) = self.peek() {
                    self.pos += 1;
                    if c == b']' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn subtree(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        let mut children = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                let child = self.subtree()?;
                self.skip_ws();
                if self.peek() == Some(b':') {
                    self.pos += 1;
                    let len = self.number()?;
                    self.arena[child].length = Some(len);
                }
                children.push(child);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.error("expected ',' or ')'")),
                }
            }
        }
        let label = self.label()?;
        if children.is_empty() && label.is_none() {
            return Err(self.error("expected a leaf label or '('"));
        }
        self.arena.push(ArenaNode {
            children,
            length: None,
            label,
            pos: start,
        });
        Ok(self.arena.len() - 1)
    }

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_ws();
        if self.peek() == Some(b'\'') {
            self.pos += 1;
            let mut out = Vec::new();
            loop {
                match self.peek() {
                    None => return Err(self.error("unterminated quoted label")),
                    Some(b'\'') => {
                        self.pos += 1;
                        if self.peek() == Some(b'\'') {
                            out.push(b'\'');
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
            return String::from_utf8(out)
                .map(Some)
                .map_err(|_| self.error("label is not valid UTF-8"));
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if b"(),:;[]'".contains(&c) || c.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Ok(None);
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .map(|s| Some(s.to_string()))
            .map_err(|_| self.error("label is not valid UTF-8"))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || b"+-.eE".contains(&c) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        s.parse::<f64>().map_err(|_| Error::NewickSyntax {
            pos: start,
            msg: format!("invalid branch length {s:?}"),
        })
    }
}

pub(super) fn write(tree: &UltrametricTree) -> String {
    let mut out = String::new();
    write_node(tree, tree.root(), &mut out);
    out.push(';');
    out
}

fn write_node(tree: &UltrametricTree, v: usize, out: &mut String) {
    let kids = tree.children(v);
    if !kids.is_empty() {
        out.push('(');
        for (i, &c) in kids.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_node(tree, c, out);
        }
        out.push(')');
    }
    if let Some(label) = tree.label(v) {
        out.push_str(&quote_label(label));
    }
    if v != tree.root() {
        out.push(':');
        out.push_str(&format_significant(tree.branch_length(v), 10));
    }
}

fn quote_label(label: &str) -> String {
    if label
        .bytes()
        .any(|c| b"(),:;[]'".contains(&c) || c.is_ascii_whitespace())
    {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

/// Formats `x` with `digits` significant digits, trailing zeros trimmed.
pub(crate) fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{:.*e}", digits - 1, x);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
