//! Line-delimited text formats. Every file opens with a versioned header
//! line `#lattice-fusion/<kind>/v1`; blank lines and other `#` lines are
//! ignored unless a format gives them meaning.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! written file parses back to bit-identical values.

use std::str::{FromStr, SplitWhitespace};

use crate::error::{Error, Result};

pub mod annot;
pub mod detections;
pub mod hmm;
pub mod prism;
pub mod scenario;
pub mod track;
pub mod unified;

pub fn header(kind: &str) -> String {
    format!("#lattice-fusion/{kind}/v1")
}

/// A non-blank line after the header, with its 1-based line number.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Line<'a> {
    pub number: usize,
    pub text: &'a str,
}

impl<'a> Line<'a> {
    pub fn fields(&self) -> Fields<'a> {
        Fields {
            line: self.number,
            it: self.text.split_whitespace(),
        }
    }

    /// The rest of a `#key ...` meta line, if this is one.
    pub fn meta(&self, key: &str) -> Option<Fields<'a>> {
        let rest = self.text.strip_prefix('#')?.strip_prefix(key)?;
        if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
            return None;
        }
        Some(Fields {
            line: self.number,
            it: rest.split_whitespace(),
        })
    }

    pub fn is_comment(&self) -> bool {
        self.text.starts_with('#')
    }
}

/// Checks the header and returns the remaining non-blank lines.
pub(crate) fn body<'a>(text: &'a str, kind: &str) -> Result<Vec<Line<'a>>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| Line {
            number: i + 1,
            text: l.trim(),
        })
        .filter(|l| !l.text.is_empty());
    let expected = header(kind);
    match lines.next() {
        Some(l) if l.text == expected => Ok(lines.collect()),
        Some(l) => Err(Error::parse(
            l.number,
            format!("expected header '{expected}', found '{}'", l.text),
        )),
        None => Err(Error::parse(1, format!("empty file, expected header '{expected}'"))),
    }
}

pub(crate) struct Fields<'a> {
    line: usize,
    it: SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    pub fn line(&self) -> usize {
        self.line
    }

    pub fn str(&mut self, name: &str) -> Result<&'a str> {
        self.it
            .next()
            .ok_or_else(|| Error::parse(self.line, format!("missing field '{name}'")))
    }

    pub fn parse<T: FromStr>(&mut self, name: &str) -> Result<T> {
        let raw = self.str(name)?;
        raw.parse()
            .map_err(|_| Error::parse(self.line, format!("bad value '{raw}' for '{name}'")))
    }

    pub fn f64s(&mut self, n: usize, name: &str) -> Result<Vec<f64>> {
        (0..n).map(|_| self.parse(name)).collect()
    }

    pub fn keyword(&mut self, expected: &str) -> Result<()> {
        let found = self.str(expected)?;
        if found == expected {
            Ok(())
        } else {
            Err(Error::parse(
                self.line,
                format!("expected '{expected}', found '{found}'"),
            ))
        }
    }

    /// Remaining fields, consuming them.
    pub fn rest(&mut self) -> Vec<&'a str> {
        self.it.by_ref().collect()
    }

    pub fn finish(mut self) -> Result<()> {
        match self.it.next() {
            None => Ok(()),
            Some(extra) => Err(Error::parse(self.line, format!("unexpected field '{extra}'"))),
        }
    }
}

/// Rewrites a domain error raised while building a value from line `line`
/// as a parse error there.
pub(crate) fn at_line<T>(line: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { .. } | Error::Io(_) => e,
        other => Error::parse(line, other.to_string()),
    })
}

pub(crate) fn join<T: std::fmt::Display>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}
