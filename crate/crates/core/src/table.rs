use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{MsvError, Result};

/// Dense real table indexed by `(state, action)`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaTable {
    n_states: usize,
    n_actions: usize,
    data: Vec<f64>,
}

impl SaTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            data: vec![value; n_states * n_actions],
        }
    }

    pub fn from_vec(n_states: usize, n_actions: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_states * n_actions {
            return Err(MsvError::Dimension(format!(
                "table of {n_states}x{n_actions} needs {} entries, got {}",
                n_states * n_actions,
                data.len()
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            data,
        })
    }

    pub fn from_fn(n_states: usize, n_actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                data.push(f(s, a));
            }
        }
        Self {
            n_states,
            n_actions,
            data,
        }
    }

    /// Builds a table from nested rows (one row per state).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_states * n_actions);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != n_actions {
                return Err(MsvError::Dimension(format!(
                    "row {s} has {} entries, expected {n_actions}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            n_states,
            n_actions,
            data,
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n_actions.max(1)).map(<[f64]>::to_vec).collect()
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n_states, self.n_actions)
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n_actions..(s + 1) * self.n_actions]
    }

    #[inline]
    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.data[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_actions.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n_states: self.n_states,
            n_actions: self.n_actions,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check_shape(&self, n_states: usize, n_actions: usize, what: &str) -> Result<()> {
        if self.shape() != (n_states, n_actions) {
            return Err(MsvError::Dimension(format!(
                "{what} is {}x{}, expected {n_states}x{n_actions}",
                self.n_states, self.n_actions
            )));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for SaTable {
    type Output = f64;

    #[inline]
    fn index(&self, (s, a): (usize, usize)) -> &f64 {
        &self.data[s * self.n_actions + a]
    }
}

impl IndexMut<(usize, usize)> for SaTable {
    #[inline]
    fn index_mut(&mut self, (s, a): (usize, usize)) -> &mut f64 {
        &mut self.data[s * self.n_actions + a]
    }
}
