//! Integer lattice `{0..N}^d \ {0}` with row-major indexing.
//!
//! Dense arrays over the lattice have length `(N+1)^d`; slot 0 is the origin
//! and always holds zero.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    dim: usize,
    extent: usize,
    strides: Vec<usize>,
    len: usize,
}

impl Lattice {
    pub fn new(dim: usize, extent: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "lattice dimension must be positive".into(),
            ));
        }
        if extent == 0 {
            return Err(Error::InvalidParameter(
                "lattice extent N must be at least 1".into(),
            ));
        }
        let side = extent + 1;
        let mut strides = vec![1usize; dim];
        for l in (0..dim.saturating_sub(1)).rev() {
            strides[l] = strides[l + 1]
                .checked_mul(side)
                .ok_or_else(|| Error::InvalidParameter("lattice too large".into()))?;
        }
        let len = strides[0]
            .checked_mul(side)
            .ok_or_else(|| Error::InvalidParameter("lattice too large".into()))?;
        Ok(Self {
            dim,
            extent,
            strides,
            len,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Length of a dense array, origin slot included.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Dense index of a point, `None` outside the box.
    pub fn index(&self, point: &[usize]) -> Option<usize> {
        if point.len() != self.dim || point.iter().any(|&p| p > self.extent) {
            return None;
        }
        Some(point.iter().zip(&self.strides).map(|(p, s)| p * s).sum())
    }

    pub fn point(&self, mut index: usize) -> Vec<usize> {
        debug_assert!(index < self.len);
        let mut p = vec![0; self.dim];
        for (l, s) in self.strides.iter().enumerate() {
            p[l] = index / s;
            index %= s;
        }
        p
    }

    /// ℓ¹ size of the point at `index`.
    pub fn size_of(&self, index: usize) -> usize {
        self.point(index).iter().sum()
    }

    /// Largest ℓ¹ size on the lattice, `d·N`.
    pub fn max_size(&self) -> usize {
        self.dim * self.extent
    }

    /// Indices of all lattice points (origin excluded), in row-major order.
    pub fn indices(&self) -> std::ops::Range<usize> {
        1..self.len
    }

    /// Column label such as `1_0` for the point `(1, 0)`.
    pub fn label(&self, index: usize) -> String {
        self.point(index)
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join("_")
    }
}
