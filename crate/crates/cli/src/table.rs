//! Result tables and their CSV form.

use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) if x.is_nan() => "nan".into(),
            Cell::Float(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => u8::from(*b).to_string(),
            Cell::Text(s) => s.replace([',', '\n'], ";"),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            Cell::Bool(b) => Some(f64::from(u8::from(*b))),
            Cell::Text(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(i64::from(x))
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Named columns, each with a one-line description written as a `#` header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    columns: Vec<(String, String)>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|(c, d)| (c.to_string(), d.to_string())).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let i = self.columns.iter().position(|(c, _)| c == name)?;
        Some(self.rows.iter().map(|r| r[i].clone()).collect())
    }

    /// Numeric column; text cells read as NaN.
    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        Some(self.column(name)?.iter().map(|c| c.as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (c, d) in &self.columns {
            let _ = writeln!(s, "# {c}: {d}");
        }
        let header: Vec<&str> = self.columns.iter().map(|(c, _)| c.as_str()).collect();
        let _ = writeln!(s, "{}", header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_documented_header_and_full_precision() {
        let mut t = Table::new("x", &[("a", "first"), ("b", "second"), ("ok", "flag")]);
        t.push(vec![0.1.into(), f64::NAN.into(), true.into()]);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# a: first");
        assert_eq!(lines[3], "a,b,ok");
        assert_eq!(lines[4], "1.0000000000000001e-1,nan,1");
        let back: f64 = lines[4].split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 0.1);
        assert_eq!(t.floats("b").unwrap()[0].is_nan(), true);
    }
}
