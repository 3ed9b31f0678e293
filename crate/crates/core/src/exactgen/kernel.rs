use crate::error::{invalid, Result};

use super::state::{check_level, pattern, space_size};

/// Row `p(x_i, ·)` of the block kernel for a two-site pattern.
pub fn block_row(pattern: u8, xi: f64) -> [f64; 2] {
    match pattern & 3 {
        0 => [1.0, 0.0],
        3 => [0.0, 1.0],
        _ => [xi, 1.0 - xi],
    }
}

/// Product kernel `P(x, y) = Π_i p(x_i, y(i))` from `S_n` to `S_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: u32,
    xi: f64,
}

pub fn build_kernel(n: u32, xi: f64) -> Result<KernelMatrix> {
    check_level(n)?;
    if n == 0 {
        return Err(invalid("the kernel needs n >= 1"));
    }
    if !(xi > 0.0 && xi <= 0.5) {
        return Err(invalid(format!("xi must lie in (0, 1/2], got {xi}")));
    }
    Ok(KernelMatrix { n, xi })
}

impl KernelMatrix {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn rows(&self) -> usize {
        space_size(self.n)
    }

    pub fn cols(&self) -> usize {
        space_size(self.n - 1)
    }

    fn blocks(&self) -> usize {
        1 << (self.n - 1)
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        let mut prod = 1.0;
        for i in 0..self.blocks() {
            prod *= block_row(pattern(x, i), self.xi)[y >> i & 1];
        }
        prod
    }

    /// Nonzero entries of row `x`, multiplied in the same block order as [`Self::entry`].
    pub fn row(&self, x: usize) -> Vec<(usize, f64)> {
        let mut out = vec![(0usize, 1.0f64)];
        for i in 0..self.blocks() {
            let p = block_row(pattern(x, i), self.xi);
            out = out
                .into_iter()
                .flat_map(|(y, v)| {
                    [(y, v * p[0]), (y | 1 << i, v * p[1])].into_iter().filter(|e| e.1 != 0.0)
                })
                .collect();
        }
        out.sort_by_key(|e| e.0);
        out
    }

    /// `Σ_y P(x, y) g(y)`, contracted one block at a time so that constants map
    /// to themselves exactly.
    pub fn apply_row(&self, x: usize, g: &[f64]) -> f64 {
        assert_eq!(g.len(), self.cols());
        let mut v = g.to_vec();
        for i in (0..self.blocks()).rev() {
            let p = block_row(pattern(x, i), self.xi);
            let half = 1 << i;
            for r in 0..half {
                v[r] = p[0] * v[r] + p[1] * v[r + half];
            }
            v.truncate(half);
        }
        v[0]
    }

    /// `Pg` as a function on `S_n`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        (0..self.rows()).map(|x| self.apply_row(x, g)).collect()
    }

    /// Largest `|Σ_y P(x, y) - 1|` with the row summed entry by entry.
    pub fn max_row_deviation(&self) -> f64 {
        (0..self.rows())
            .map(|x| (self.row(x).iter().map(|e| e.1).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let xi = 0.3;
        let p = build_kernel(1, xi).unwrap();
        assert_eq!(p.entry(0b01, 0), xi);
        assert_eq!(p.entry(0b01, 1), 1.0 - xi);
        assert_eq!(p.row(0b11), vec![(1, 1.0)]);
        assert_eq!(p.row(0), vec![(0, 1.0)]);

        let p = build_kernel(2, xi).unwrap();
        // blocks (01, 11): y(0) free, y(1) = 1.
        let x = 0b1110;
        assert_eq!(p.row(x), vec![(0b10, xi), (0b11, 1.0 - xi)]);
        assert_eq!(p.row(0b1111), vec![(0b11, 1.0)]);
    }

    #[test]
    fn rows_and_contraction_agree() {
        let p = build_kernel(3, 0.37).unwrap();
        let g: Vec<f64> = (0..p.cols()).map(|y| (y as f64).sin()).collect();
        for x in 0..p.rows() {
            let direct: f64 = p.row(x).iter().map(|&(y, v)| v * g[y]).sum();
            assert!((direct - p.apply_row(x, &g)).abs() < 1e-14);
            for &(y, v) in &p.row(x) {
                assert_eq!(v, p.entry(x, y));
            }
            assert_eq!(p.apply_row(x, &vec![1.0; p.cols()]), 1.0);
        }
        assert!(p.max_row_deviation() < 1e-15);
    }

    #[test]
    fn xi_range() {
        assert!(build_kernel(1, 0.0).is_err());
        assert!(build_kernel(1, 0.51).is_err());
        assert!(build_kernel(1, 0.5).is_ok());
        assert!(build_kernel(0, 0.2).is_err());
        assert!(build_kernel(5, 0.2).is_err());
    }
}
