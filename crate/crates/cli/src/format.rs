//! Number formatting and CSV output.

use std::path::Path;

use crate::CliError;

/// `%.12g`-style formatting: 12 significant digits, trailing zeros
/// removed, exponent form outside `[1e-4, 1e12)`. Non-finite values print
/// as `inf`, `-inf` and `nan`.
pub fn number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// In-memory table written as one CSV file with a header row.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `metric,value,std_error` summary table.
pub struct Summary(Table);

impl Default for Summary {
    fn default() -> Self {
        Self::new()
    }
}

impl Summary {
    pub fn new() -> Self {
        Self(Table::new(&["metric", "value", "std_error"]))
    }

    pub fn value(&mut self, metric: &str, value: f64) {
        self.0.push(vec![metric.into(), number(value), String::new()]);
    }

    pub fn estimate(&mut self, metric: &str, e: horizon_core::Estimate) {
        self.0.push(vec![metric.into(), number(e.value), number(e.std_error)]);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        self.0.write(path)
    }
}

#[cfg(test)]
mod tests {
    use super::number;

    #[test]
    fn matches_printf_g() {
        assert_eq!(number(0.4166666666666667), "0.416666666667");
        assert_eq!(number(100.0), "100");
        assert_eq!(number(1.5e-5), "1.5e-05");
        assert_eq!(number(2.584318359252211e-5), "2.58431835925e-05");
        assert_eq!(number(-143.26563585763364), "-143.265635858");
        assert_eq!(number(1e12), "1e+12");
        assert_eq!(number(999999999999.4), "999999999999");
        assert_eq!(number(0.0001), "0.0001");
        assert_eq!(number(f64::INFINITY), "inf");
        assert_eq!(number(-0.0), "0");
        assert_eq!(number(f64::NAN), "nan");
    }
}
