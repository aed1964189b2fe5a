//! The `energies.csv` time-series format.

use crate::diagnostics::energy::EnergyRecord;
use crate::error::{FsiError, Result};

pub const CSV_HEADER: &str = "t,E,D,E1,D1,E2,D2,X,R1,R2,iface_res,det_dev,ellip_min";

/// Scientific notation with 17 significant digits; round-trips every `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_row(r: &EnergyRecord) -> [f64; 13] {
    [
        r.t,
        r.e,
        r.d,
        r.e1,
        r.d1,
        r.e2,
        r.d2,
        r.x,
        r.r1,
        r.r2,
        r.interface_residual,
        r.det_deviation,
        r.ellipticity_min,
    ]
}

pub fn energies_csv<'a>(records: impl IntoIterator<Item = &'a EnergyRecord>) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let row: Vec<String> = csv_row(r).iter().map(|v| format_f64(*v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Parses a file written by [`energies_csv`].
pub fn parse_energies_csv(text: &str) -> Result<Vec<[f64; 13]>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(FsiError::Parse("energies.csv: unexpected header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let vals: Vec<f64> = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| FsiError::Parse(format!("energies.csv line {}: {e}", i + 2)))?;
            vals.try_into().map_err(|_| {
                FsiError::Parse(format!("energies.csv line {}: expected 13 columns", i + 2))
            })
        })
        .collect()
}
