use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Sparse rate matrix with an implicit diagonal `-Σ_{x'} r(x, x')`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl GeneratorMatrix {
    pub fn builder(dim: usize) -> GeneratorBuilder {
        GeneratorBuilder { rows: vec![Vec::new(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Off-diagonal entries of row `x`, sorted by target, all positive.
    pub fn row(&self, x: usize) -> &[(usize, f64)] {
        &self.rows[x]
    }

    pub fn exit_rate(&self, x: usize) -> f64 {
        self.rows[x].iter().map(|(_, r)| r).sum()
    }

    pub fn rate(&self, x: usize, to: usize) -> f64 {
        match self.rows[x].binary_search_by_key(&to, |e| e.0) {
            Ok(p) => self.rows[x][p].1,
            Err(_) => 0.0,
        }
    }

    /// Matrix entry `G(x, x')`, including the diagonal.
    pub fn entry(&self, x: usize, to: usize) -> f64 {
        if x == to {
            -self.exit_rate(x)
        } else {
            self.rate(x, to)
        }
    }

    /// `Gf(x) = Σ_{x'} r(x,x') (f(x') - f(x))`; exactly zero on constants.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.dim());
        self.rows
            .iter()
            .enumerate()
            .map(|(x, row)| row.iter().map(|&(y, r)| r * (f[y] - f[x])).sum())
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (x, row) in self.rows.iter().enumerate() {
            for &(y, r) in row {
                m[(x, y)] = r;
            }
            m[(x, x)] = -self.exit_rate(x);
        }
        m
    }

    /// Largest `|Σ_{x'} G(x, x')|` over rows of the dense form.
    pub fn max_row_sum(&self) -> f64 {
        let d = self.to_dense();
        d.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max)
    }

    /// Checks that every stored rate is finite and positive.
    pub fn check(&self) -> Result<()> {
        for (x, row) in self.rows.iter().enumerate() {
            if let Some(&(y, r)) = row.iter().find(|(y, r)| !(r.is_finite() && *r > 0.0) || *y == x) {
                return Err(Error::InvariantViolated(format!("bad generator entry ({x}, {y}) = {r}")));
            }
        }
        Ok(())
    }
}

pub struct GeneratorBuilder {
    rows: Vec<Vec<(usize, f64)>>,
}

impl GeneratorBuilder {
    /// Adds rate `r` to the transition `from → to`; self-loops and zero rates are dropped.
    pub fn add(&mut self, from: usize, to: usize, r: f64) {
        if from != to && r != 0.0 {
            self.rows[from].push((to, r));
        }
    }

    pub fn build(mut self) -> GeneratorMatrix {
        for row in &mut self.rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(y, r) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == y => last.1 += r,
                    _ => merged.push((y, r)),
                }
            }
            *row = merged;
        }
        GeneratorMatrix { rows: self.rows }
    }
}

/// Law at time `t` of the chain with generator `g` started from `init`: `init · exp(tG)`.
pub fn evolve_law(g: &GeneratorMatrix, init: &[f64], t: f64) -> Vec<f64> {
    let e = (g.to_dense() * t).exp();
    let row = nalgebra::RowDVector::from_row_slice(init) * e;
    row.iter().copied().collect()
}
