//! Row-major sample matrices.
//!
//! Every estimator and training routine works on flat `n × d` matrices of
//! `f64` with `d` ∈ {1, 2} in practice (the type itself allows any `d ≥ 1`).

use crate::error::{Error, Result};

/// An `n × d` matrix of samples, one row per point, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Samples {
    pub fn new(data: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("sample dimension must be >= 1"));
        }
        if data.len() % d != 0 {
            return Err(Error::invalid(format!(
                "data length {} is not a multiple of dimension {}",
                data.len(),
                d
            )));
        }
        Ok(Samples {
            n: data.len() / d,
            data,
            d,
        })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Samples {
            data: vec![0.0; n * d],
            n,
            d,
        }
    }

    /// 1D convenience constructor.
    pub fn from_1d(xs: Vec<f64>) -> Self {
        Samples {
            n: xs.len(),
            data: xs,
            d: 1,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.d);
        self.data.extend_from_slice(row);
        self.n += 1;
    }

    /// Indices 0..n sorted lexicographically by row content; ties keep index
    /// order. Used to fix a permutation-invariant summation order.
    pub fn lex_sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n).collect();
        idx.sort_by(|&a, &b| {
            let ra = self.row(a);
            let rb = self.row(b);
            for (u, v) in ra.iter().zip(rb) {
                match u.partial_cmp(v) {
                    Some(std::cmp::Ordering::Equal) | None => continue,
                    Some(o) => return o,
                }
            }
            a.cmp(&b)
        });
        idx
    }

    /// A copy with rows rearranged into the given index order.
    pub fn gather(&self, order: &[usize]) -> Samples {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        Samples {
            data,
            n: order.len(),
            d: self.d,
        }
    }
}
