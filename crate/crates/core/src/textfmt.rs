//! Line-oriented `key value...` text files used for checkpoints and datasets.
//!
//! Floats are written with `{:e}`, which prints the shortest string that
//! parses back to the same bits.

use std::fmt::Write;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Default)]
pub(crate) struct Writer {
    pub out: String,
}

impl Writer {
    pub fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{key} {value}");
    }

    pub fn floats<'a>(&mut self, key: &str, values: impl IntoIterator<Item = &'a f64>) {
        self.out.push_str(key);
        for v in values {
            let _ = write!(self.out, " {v:e}");
        }
        self.out.push('\n');
    }
}

/// Reader over non-empty, non-comment lines that remembers line numbers.
pub(crate) struct Reader<'a> {
    lines: Box<dyn Iterator<Item = (usize, &'a str)> + 'a>,
    last: usize,
}

impl<'a> Reader<'a> {
    pub fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')),
        );
        Self {
            lines: it,
            last: 0,
        }
    }

    pub fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.last,
            message: message.into(),
        }
    }

    /// Next line, which must start with `key`; returns the remaining fields.
    pub fn fields(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let Some((n, line)) = self.lines.next() else {
            return Err(self.err(format!("unexpected end of input, expected `{key}`")));
        };
        self.last = n;
        let mut it = line.split_whitespace();
        match it.next() {
            Some(k) if k == key => Ok(it.collect()),
            Some(k) => Err(self.err(format!("expected `{key}`, found `{k}`"))),
            None => Err(self.err("empty line")),
        }
    }

    pub fn value<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let f = self.fields(key)?;
        if f.len() != 1 {
            return Err(self.err(format!("`{key}` takes one value")));
        }
        self.parse(f[0])
    }

    pub fn parse<T: FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse `{s}`")))
    }

    pub fn floats(&mut self, key: &str, len: usize) -> Result<Vec<f64>> {
        let f = self.fields(key)?;
        if f.len() != len {
            return Err(self.err(format!("`{key}` needs {len} values, found {}", f.len())));
        }
        f.iter().map(|s| self.parse(s)).collect()
    }

    pub fn header(&mut self, magic: &str) -> Result<()> {
        let f = self.fields("format")?;
        if f != [magic] {
            return Err(self.err(format!("expected format `{magic}`")));
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        match self.lines.next() {
            None => Ok(()),
            Some((n, _)) => {
                self.last = n;
                Err(self.err("trailing content"))
            }
        }
    }
}
