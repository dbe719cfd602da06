use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row/column-labelled matrix. `None` marks masked entries (for example a
/// correlation involving a constant column). Serializes masked cells as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub data: Vec<Vec<Option<f64>>>,
}

impl LabeledMatrix {
    pub fn new(rows: Vec<String>, cols: Vec<String>, data: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if data.len() != rows.len() {
            return Err(Error::LengthMismatch(data.len(), rows.len()));
        }
        if let Some(r) = data.iter().find(|r| r.len() != cols.len()) {
            return Err(Error::LengthMismatch(r.len(), cols.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_dense(rows: Vec<String>, cols: Vec<String>, m: &DMatrix<f64>) -> Result<Self> {
        let data = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| Some(m[(i, j)])).collect())
            .collect();
        Self::new(rows, cols, data)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.data[i][j]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    /// Dense copy; masked entries become `fill`.
    pub fn to_dense(&self, fill: f64) -> DMatrix<f64> {
        let (r, c) = self.shape();
        DMatrix::from_fn(r, c, |i, j| self.data[i][j].unwrap_or(fill))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for c in &self.cols {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (label, row) in self.rows.iter().zip(&self.data) {
            out.push_str(label);
            for v in row {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Reorder rows and columns by `order` (square matrices).
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            rows: order.iter().map(|&i| self.rows[i].clone()).collect(),
            cols: order.iter().map(|&i| self.cols[i].clone()).collect(),
            data: order
                .iter()
                .map(|&i| order.iter().map(|&j| self.data[i][j]).collect())
                .collect(),
        }
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Pearson correlation; `None` if either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 1e-300 || syy <= 1e-300 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Rows of `data` as a dense matrix; all rows must share one length.
pub fn to_matrix(data: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let cols = data.first().map_or(0, Vec::len);
    if let Some(r) = data.iter().find(|r| r.len() != cols) {
        return Err(Error::LengthMismatch(r.len(), cols));
    }
    Ok(DMatrix::from_fn(data.len(), cols, |i, j| data[i][j]))
}

/// Pearson correlation matrix of the columns of `x`. Constant columns are
/// masked; the diagonal of a non-constant column is exactly 1.
pub fn correlation_of_columns(x: &DMatrix<f64>) -> Vec<Vec<Option<f64>>> {
    let cols: Vec<Vec<f64>> = (0..x.ncols()).map(|j| x.column(j).iter().copied().collect()).collect();
    let p = cols.len();
    let mut out = vec![vec![None; p]; p];
    for i in 0..p {
        for j in i..p {
            let r = if i == j {
                pearson(&cols[i], &cols[i]).map(|_| 1.0)
            } else {
                pearson(&cols[i], &cols[j])
            };
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&x, &[2.0; 4]), None);
    }

    #[test]
    fn csv_masks_blank() {
        let m = LabeledMatrix::new(
            vec!["a".into()],
            vec!["x".into(), "y".into()],
            vec![vec![Some(0.5), None]],
        )
        .unwrap();
        assert_eq!(m.to_csv(), "label,x,y\na,0.5,\n");
        assert!(serde_json::to_string(&m).unwrap().contains("null"));
    }
}
