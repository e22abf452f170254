//! CSV exchange of radial profiles.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::problem::RadialGrid;
use crate::scalar::Scalar;

/// Column order shared by analytic and discrete profile exports.
pub const PROFILE_HEADER: [&str; 6] = ["r", "u", "du_dr", "lambda", "F", "theta_abs"];

/// Writes one row per node in shortest round-trip form.
pub fn write_profile_csv<T: Scalar, W: Write>(
    out: W,
    r: &[T],
    u: &[T],
    du_dr: &[T],
    lam: &[T],
    f: &[T],
    theta_abs: &[T],
) -> Result<()> {
    let columns = [r, u, du_dr, lam, f, theta_abs];
    if columns.iter().any(|c| c.len() != r.len()) {
        return Err(Error::Profile("profile columns differ in length".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Profile(e.to_string());
    w.write_record(PROFILE_HEADER).map_err(to_err)?;
    for i in 0..r.len() {
        w.write_record(columns.map(|c| format!("{:?}", c[i]))).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Profile(e.to_string()))
}

/// Nodal values read back from a profile CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalProfile<T: Scalar> {
    pub grid: RadialGrid<T>,
    pub u: Vec<T>,
}

/// Reads the `r` and `u` columns of a CSV with a header row; other columns are ignored.
pub fn read_profile_csv<T: Scalar, R: Read>(input: R) -> Result<NodalProfile<T>> {
    let mut rd = csv::Reader::from_reader(input);
    let to_err = |e: csv::Error| Error::Profile(e.to_string());
    let headers = rd.headers().map_err(to_err)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Profile(format!("missing column `{name}`")))
    };
    let (ir, iu) = (col("r")?, col("u")?);
    let mut r = Vec::new();
    let mut u = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(to_err)?;
        let parse = |i: usize| -> Result<T> {
            let field = rec.get(i).unwrap_or("").trim();
            let v: f64 =
                field.parse().map_err(|_| Error::Profile(format!("row {}: cannot parse `{field}`", line + 1)))?;
            T::from_f64(v).ok_or_else(|| Error::Profile(format!("row {}: value out of range", line + 1)))
        };
        r.push(parse(ir)?);
        u.push(parse(iu)?);
    }
    let grid = RadialGrid::new(r).map_err(|e| Error::Profile(e.to_string()))?;
    Ok(NodalProfile { grid, u })
}
