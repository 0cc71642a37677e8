//! Command output: `key<TAB>value` lines on stdout, a readable table on stderr.

use std::fmt::Display;
use std::io::Write;

#[derive(Debug, Default)]
pub struct Report {
    rows: Vec<(String, String)>,
    table: Vec<Vec<String>>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn put(&mut self, key: impl Into<String>, value: impl Display) {
        self.rows.push((key.into(), value.to_string()));
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.put(key, format!("{value:.6}"));
    }

    /// Adds a table row; the first row added is the header.
    pub fn row(&mut self, cells: Vec<String>) {
        self.table.push(cells);
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
        self.table.extend(other.table);
    }

    pub fn emit(&self) {
        let mut out = std::io::stdout().lock();
        for (k, v) in &self.rows {
            let _ = writeln!(out, "{k}\t{v}");
        }
        let _ = out.flush();
        let mut err = std::io::stderr().lock();
        let _ = err.write_all(self.render_table().as_bytes());
    }

    fn render_table(&self) -> String {
        let table: Vec<Vec<String>> = if self.table.is_empty() {
            self.rows.iter().map(|(k, v)| vec![k.clone(), v.clone()]).collect()
        } else {
            self.table.clone()
        };
        let cols = table.iter().map(Vec::len).max().unwrap_or(0);
        let widths: Vec<usize> = (0..cols).map(|c| table.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0)).collect();
        let mut s = String::new();
        for r in &table {
            let cells: Vec<String> = r.iter().enumerate().map(|(c, v)| format!("{v:<w$}", w = widths[c])).collect();
            s.push_str(cells.join("  ").trim_end());
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_alignment() {
        let mut r = Report::new();
        r.row(vec!["res".into(), "L1".into()]);
        r.row(vec!["128".into(), "0.5".into()]);
        assert_eq!(r.render_table(), "res  L1\n128  0.5\n");
        let mut kv = Report::new();
        kv.put("loops", 2);
        assert_eq!(kv.render_table(), "loops  2\n");
    }
}
