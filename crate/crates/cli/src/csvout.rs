//! Minimal CSV assembly. Floats are written with `{}` (shortest exact
//! round-trip), so equal runs produce byte-equal files and readers recover
//! the exact binary values.

use std::fmt::Write as _;

pub struct Csv {
    buf: String,
    cols: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Csv { buf, cols: header.len() }
    }

    /// All-numeric row.
    pub fn num_row(&mut self, vals: &[f64]) {
        debug_assert_eq!(vals.len(), self.cols);
        for (i, v) in vals.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            let _ = write!(self.buf, "{v}");
        }
        self.buf.push('\n');
    }

    /// Preformatted row, for mixed integer/float/empty cells.
    pub fn raw_row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.cols);
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}
