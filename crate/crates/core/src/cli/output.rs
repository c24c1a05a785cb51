//! CSV and JSON emission. Floats are written with 17 significant digits so
//! they read back bit-exactly; rows end in `\n`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::CliError;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub enum Cell<'a> {
    F(f64),
    U(u64),
    B(bool),
    S(&'a str),
}

impl Cell<'_> {
    fn render(&self, out: &mut String) {
        match self {
            Cell::F(x) => out.push_str(&fmt_f64(*x)),
            Cell::U(n) => write!(out, "{n}").expect("string write"),
            Cell::B(b) => out.push_str(if *b { "true" } else { "false" }),
            Cell::S(s) => out.push_str(s),
        }
    }
}

pub struct Csv {
    buf: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self { buf, width: header.len() }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.width, "row width does not match header");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            c.render(&mut self.buf);
        }
        self.buf.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, &self.buf).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
