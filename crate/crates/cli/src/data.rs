//! Headered, comma-separated numeric input.

use std::path::Path;

use crate::exit::CliError;

#[derive(Debug, Clone)]
pub struct CsvDataset {
    pub headers: Vec<String>,
    records: Vec<Vec<String>>,
}

impl CsvDataset {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            records.push(rec.iter().map(str::to_string).collect());
        }
        if records.is_empty() {
            return Err(CliError::Input(format!("{}: no data rows", path.display())));
        }
        Ok(CsvDataset { headers, records })
    }

    pub fn rows(&self) -> usize {
        self.records.len()
    }

    pub fn index(&self, name: &str) -> Result<usize, CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("no column named '{name}' (have: {})", self.headers.join(", "))))
    }

    /// Parses a column as finite reals.
    pub fn column(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let j = self.index(name)?;
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let raw = r.get(j).map(String::as_str).unwrap_or("");
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(CliError::Input(format!("column '{name}', data row {}: '{raw}' is not a finite number", i + 1))),
                }
            })
            .collect()
    }
}
