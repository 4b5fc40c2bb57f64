use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::json::{to_json_string, FloatStyle};
use crate::error::{Error, Result};

/// A `T × d` matrix of frame or token embeddings. Always at least one row and
/// one column, and every value finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix(Array2<f64>);

impl EmbeddingMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows == 0 || cols == 0 {
            return Err(Error::validation(format!(
                "embedding shape [{rows}, {cols}] must be at least [1, 1]"
            )));
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::validation(format!(
                "embedding value at [{r}, {c}] is not finite ({v})"
            )));
        }
        Ok(EmbeddingMatrix(values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::validation(format!(
                "embedding row {i} has {} values, expected {cols}",
                r.len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), cols), flat)
            .map_err(|e| Error::validation(e.to_string()))?;
        Self::new(values)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.row(i)
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

#[derive(Deserialize)]
struct EmbeddingDoc {
    shape: [usize; 2],
    values: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct EmbeddingDocOut {
    shape: [usize; 2],
    values: Vec<Vec<f64>>,
}

/// Parse an embedding document from a string.
///
/// JSON cannot express NaN or infinity, and numbers too large for an `f64`
/// are rejected by the JSON reader as parse errors.
pub fn parse_embedding_str(input: &str) -> Result<EmbeddingMatrix> {
    let doc: EmbeddingDoc = serde_json::from_str(input)?;
    let [t, d] = doc.shape;
    if doc.values.len() != t {
        return Err(Error::validation(format!(
            "declared shape [{t}, {d}] but found {} rows",
            doc.values.len()
        )));
    }
    if let Some((i, row)) = doc.values.iter().enumerate().find(|(_, r)| r.len() != d) {
        return Err(Error::validation(format!(
            "declared shape [{t}, {d}] but row {i} has {} values",
            row.len()
        )));
    }
    EmbeddingMatrix::from_rows(&doc.values)
}

pub fn parse_embedding(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_embedding_str(&text)
}

pub fn write_embedding(matrix: &EmbeddingMatrix) -> String {
    let doc = EmbeddingDocOut {
        shape: [matrix.rows(), matrix.dim()],
        values: matrix.0.rows().into_iter().map(|r| r.to_vec()).collect(),
    };
    to_json_string(&doc, FloatStyle::Shortest, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_row() {
        let m = parse_embedding_str(r#"{"shape":[1,4],"values":[[0,0,0,0]]}"#).unwrap();
        assert_eq!((m.rows(), m.dim()), (1, 4));
        assert!(m.view().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn row_major_read() {
        let m = parse_embedding_str(r#"{"shape":[2,3],"values":[[1,2,3],[4,5,6]]}"#).unwrap();
        assert_eq!(m.row(1).to_vec(), vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn row_count_mismatch() {
        let err = parse_embedding_str(r#"{"shape":[2,3],"values":[[1,2,3]]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn column_count_mismatch() {
        let err = parse_embedding_str(r#"{"shape":[2,3],"values":[[1,2,3],[4,5]]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn empty_shape_rejected() {
        assert!(parse_embedding_str(r#"{"shape":[0,3],"values":[]}"#).is_err());
    }

    #[test]
    fn non_finite_rejected_in_memory() {
        let a = Array2::from_shape_vec((1, 2), vec![1.0, f64::NAN]).unwrap();
        assert!(matches!(EmbeddingMatrix::new(a), Err(Error::Validation(_))));
        let a = Array2::from_shape_vec((1, 2), vec![f64::INFINITY, 0.0]).unwrap();
        assert!(EmbeddingMatrix::new(a).is_err());
    }

    #[test]
    fn round_trip() {
        let m = EmbeddingMatrix::from_rows(&[vec![0.1, -2.5e-7], vec![3.0, 1e10]]).unwrap();
        assert_eq!(parse_embedding_str(&write_embedding(&m)).unwrap(), m);
    }
}
