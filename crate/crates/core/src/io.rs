//! Plain CSV matrices. A first row that does not parse as numbers is treated
//! as a header and skipped.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(first) = rows.first() {
                    if first.len() != row.len() {
                        return Err(Error::Parse(format!(
                            "{}: row {} has {} fields, expected {}",
                            path.display(),
                            line + 1,
                            row.len(),
                            first.len()
                        )));
                    }
                }
                rows.push(row);
            }
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(Error::Parse(format!(
                    "{}: row {}: {e}",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no numeric rows", path.display())));
    }
    let (n, p) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

/// Reads a vector stored either as one row or one column.
pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let path = path.as_ref();
    let m = read_matrix_csv(path)?;
    if m.nrows() == 1 {
        Ok(DVector::from_iterator(m.ncols(), m.row(0).iter().copied()))
    } else if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else {
        Err(Error::Parse(format!(
            "{}: expected a single row or column, got {}x{}",
            path.display(),
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn write_matrix_csv(
    path: impl AsRef<Path>,
    m: &DMatrix<f64>,
    header: Option<&[String]>,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    if let Some(h) = header {
        writer.write_record(h)?;
    }
    for i in 0..m.nrows() {
        writer.write_record(m.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    writer.flush()?;
    Ok(())
}

/// `x1, …, xp`.
pub fn coordinate_header(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn round_trip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = dmatrix![1.0, -2.5e-17; 3.25, 4.0; 0.1, 1e300];
        write_matrix_csv(&path, &m, Some(&coordinate_header(2))).unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap(), m);
    }

    #[test]
    fn ragged_and_empty_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1,2\n3\n").unwrap();
        assert!(read_matrix_csv(&path).is_err());
        std::fs::write(&path, "a,b\n").unwrap();
        assert!(matches!(read_matrix_csv(&path), Err(Error::Parse(_))));
        std::fs::write(&path, "1,2\nx,3\n").unwrap();
        assert!(matches!(read_matrix_csv(&path), Err(Error::Parse(_))));
    }

    #[test]
    fn vectors_either_orientation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        std::fs::write(&path, "1\n2\n3\n").unwrap();
        assert_eq!(read_vector_csv(&path).unwrap().len(), 3);
        std::fs::write(&path, "1,2,3\n").unwrap();
        assert_eq!(read_vector_csv(&path).unwrap().len(), 3);
    }
}
