//! Pseudo-label targets for missing entries.
//!
//! Every missing entry starts at 0.5 and is overwritten with the model's
//! prediction once per epoch. Observed entries never have a pseudo-label.

use std::io::Write;

use ndarray::Array2;

use crate::dataset::LabelMatrix;
use crate::error::{Error, Result};

pub const INITIAL_PSEUDO_LABEL: f64 = 0.5;

/// Sparse map from missing `(row, col)` positions to targets in `[0, 1]`.
///
/// Keys are stored row-major with per-row offsets, so the key set is fixed
/// at construction and row lookups are a slice plus a binary search.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelStore {
    shape: (usize, usize),
    row_offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl PseudoLabelStore {
    pub fn init(labels: &LabelMatrix) -> Self {
        let shape = labels.dim();
        let mut row_offsets = Vec::with_capacity(shape.0 + 1);
        let mut cols = Vec::new();
        row_offsets.push(0);
        for row in labels.entries().outer_iter() {
            cols.extend(
                row.iter()
                    .enumerate()
                    .filter(|(_, z)| z.is_missing())
                    .map(|(j, _)| j),
            );
            row_offsets.push(cols.len());
        }
        let values = vec![INITIAL_PSEUDO_LABEL; cols.len()];
        Self {
            shape,
            row_offsets,
            cols,
            values,
        }
    }

    /// Overwrites every stored target with the prediction at its position.
    pub fn update(&mut self, predictions: &Array2<f64>) -> Result<()> {
        if predictions.dim() != self.shape {
            return Err(Error::Shape(format!(
                "pseudo store is {:?} but predictions are {:?}",
                self.shape,
                predictions.dim()
            )));
        }
        for i in 0..self.shape.0 {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let v = predictions[[i, self.cols[k]]];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Numeric(format!(
                        "prediction {v} at ({i}, {}) outside [0, 1]",
                        self.cols[k]
                    )));
                }
                self.values[k] = v;
            }
        }
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let (cols, vals) = self.row(row);
        cols.binary_search(&col).ok().map(|k| vals[k])
    }

    /// Missing columns of `row` and their targets.
    pub fn row(&self, row: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[row]..self.row_offsets[row + 1];
        (&self.cols[r.clone()], &self.values[r])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.shape.0).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Debug dump as `row,col,value` CSV with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,col,value")?;
        for (i, j, v) in self.iter() {
            writeln!(w, "{i},{j},{v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label::{Missing as M, Neg as N, Pos as P};
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn init_keys_missing_entries() {
        let z = LabelMatrix::new(array![[P, M, M]]);
        let s = PseudoLabelStore::init(&z);
        let all: Vec<_> = s.iter().collect();
        assert_eq!(all, vec![(0, 1, 0.5), (0, 2, 0.5)]);
        assert_eq!(s.get(0, 0), None);
    }

    #[test]
    fn fully_observed_gives_empty_store() {
        let s = PseudoLabelStore::init(&LabelMatrix::new(array![[P, N], [N, P]]));
        assert!(s.is_empty());
        let mut s2 = s.clone();
        s2.update(&array![[0.3, 0.2], [0.9, 0.1]]).unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn all_missing_two_by_two() {
        let s = PseudoLabelStore::init(&LabelMatrix::new(array![[M, M], [M, M]]));
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|(_, _, v)| v == 0.5));
    }

    #[test]
    fn update_copies_predictions() {
        let mut s = PseudoLabelStore::init(&LabelMatrix::new(array![[P, M]]));
        let yhat = array![[0.4, 0.83]];
        s.update(&yhat).unwrap();
        assert_eq!(s.get(0, 1), Some(0.83));
        let once = s.clone();
        s.update(&yhat).unwrap();
        assert_eq!(s, once);
    }

    #[test]
    fn update_rejects_shape_mismatch() {
        let mut s = PseudoLabelStore::init(&LabelMatrix::new(array![[P, M]]));
        assert!(matches!(s.update(&array![[0.5, 0.5, 0.5]]), Err(Error::Shape(_))));
    }

    #[test]
    fn csv_dump() {
        let mut s = PseudoLabelStore::init(&LabelMatrix::new(array![[P, M], [M, N]]));
        s.update(&array![[0.1, 0.25], [0.75, 0.2]]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "row,col,value\n0,1,0.25\n1,0,0.75\n");
    }

    fn label_matrix() -> impl Strategy<Value = LabelMatrix> {
        (1usize..6, 2usize..6).prop_flat_map(|(n, l)| {
            prop::collection::vec(0u8..3, n * l).prop_map(move |v| {
                let e = v.into_iter().map(|t| [N, P, M][t as usize]).collect();
                LabelMatrix::new(Array2::from_shape_vec((n, l), e).unwrap())
            })
        })
    }

    proptest! {
        #[test]
        fn key_set_and_range_are_preserved(z in label_matrix(), seeds in prop::collection::vec(0.0f64..=1.0, 1..4)) {
            let mut s = PseudoLabelStore::init(&z);
            let keys: Vec<_> = s.iter().map(|(i, j, _)| (i, j)).collect();
            let expected: Vec<_> = z.entries().indexed_iter()
                .filter(|(_, e)| e.is_missing()).map(|(ij, _)| ij).collect();
            prop_assert_eq!(&keys, &expected);
            for (k, base) in seeds.iter().enumerate() {
                let (n, l) = z.dim();
                let p = Array2::from_shape_fn((n, l), |(i, j)| (base + 0.37 * (i * l + j + k) as f64) % 1.0);
                s.update(&p).unwrap();
                let after: Vec<_> = s.iter().map(|(i, j, _)| (i, j)).collect();
                prop_assert_eq!(&after, &keys);
                prop_assert!(s.iter().all(|(i, j, v)| (0.0..=1.0).contains(&v) && v == p[[i, j]]));
            }
        }
    }
}
