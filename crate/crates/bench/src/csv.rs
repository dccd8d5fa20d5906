use std::io::{self, Write};

/// Scientific notation with a `.` decimal separator.
pub fn float(v: f64) -> String {
    format!("{v:e}")
}

/// Writes a header row, then rows of the same width.
pub struct CsvWriter<'a> {
    out: &'a mut dyn Write,
    width: usize,
}

impl<'a> CsvWriter<'a> {
    pub fn new(out: &'a mut dyn Write, header: &[String]) -> io::Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            width: header.len(),
        })
    }

    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        debug_assert_eq!(fields.len(), self.width);
        writeln!(self.out, "{}", fields.join(","))
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}
