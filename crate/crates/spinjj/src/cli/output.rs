//! Deterministic output formatting: 12-significant-digit numbers, CSV tables
//! with comma delimiters and Unix newlines, and finite-checked JSON numbers.

use super::CliError;

/// Formats a finite value with exactly 12 significant digits in normalized
/// scientific notation (`d.ddddddddddde±x`). Negative zero collapses to
/// zero so byte-level comparisons are stable.
pub fn fmt_sig12(x: f64) -> Result<String, CliError> {
    if !x.is_finite() {
        return Err(CliError::Numerical(format!(
            "non-finite value {x} in CSV output"
        )));
    }
    let x = if x == 0.0 { 0.0 } else { x };
    Ok(format!("{x:.11e}"))
}

/// JSON number that is guaranteed finite; the output contract forbids
/// NaN/Inf anywhere in the summary.
pub fn finite_json(name: &str, x: f64) -> Result<serde_json::Value, CliError> {
    if !x.is_finite() {
        return Err(CliError::Numerical(format!(
            "non-finite value in summary field '{name}'"
        )));
    }
    Ok(serde_json::json!(x))
}

/// Numeric table rendered as CSV: header row, comma delimiter, '.' decimal
/// separator, Unix newlines, trailing newline.
#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            header: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> Result<String, CliError> {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            if row.len() != self.header.len() {
                return Err(CliError::Numerical(format!(
                    "internal: row has {} fields but the header has {}",
                    row.len(),
                    self.header.len()
                )));
            }
            for (i, value) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&fmt_sig12(*value)?);
            }
            out.push('\n');
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_twelve_significant_digits() {
        assert_eq!(fmt_sig12(1.0).unwrap(), "1.00000000000e0");
        assert_eq!(fmt_sig12(0.0).unwrap(), "0.00000000000e0");
        assert_eq!(fmt_sig12(-0.0).unwrap(), "0.00000000000e0");
        assert_eq!(fmt_sig12(620.0).unwrap(), "6.20000000000e2");
        assert_eq!(fmt_sig12(-1.75e-6).unwrap(), "-1.75000000000e-6");
        assert_eq!(fmt_sig12(0.514203).unwrap(), "5.14203000000e-1");
    }

    #[test]
    fn rejects_non_finite_values() {
        assert!(fmt_sig12(f64::NAN).is_err());
        assert!(fmt_sig12(f64::INFINITY).is_err());
        assert!(finite_json("x", f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn renders_csv_with_unix_newlines() {
        let mut table = CsvTable::new(&["a", "b"]);
        table.push(vec![1.0, 2.5]);
        table.push(vec![-0.0, 1e-3]);
        let text = table.render().unwrap();
        assert_eq!(
            text,
            "a,b\n1.00000000000e0,2.50000000000e0\n0.00000000000e0,1.00000000000e-3\n"
        );
        assert!(!text.contains('\r'));
    }

    #[test]
    fn render_rejects_width_mismatch() {
        let mut table = CsvTable::new(&["a", "b"]);
        table.push(vec![1.0]);
        assert!(table.render().is_err());
    }
}
