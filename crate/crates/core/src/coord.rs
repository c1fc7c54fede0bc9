//! Torus coordinates and topology geometry.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::CoreError;

/// Highest supported torus dimensionality.
pub const MAX_DIMS: usize = 3;

/// Position of a node in an n-dimensional torus.
///
/// Ordering is lexicographic, which is row-major with dimension 0 most
/// significant; the simulator walks nodes in this order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusCoord(Vec<u32>);

impl TorusCoord {
    pub fn new(coords: impl Into<Vec<u32>>) -> Self {
        TorusCoord(coords.into())
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, dim: usize) -> u32 {
        self.0[dim]
    }
}

impl From<Vec<u32>> for TorusCoord {
    fn from(v: Vec<u32>) -> Self {
        TorusCoord(v)
    }
}

impl From<&[u32]> for TorusCoord {
    fn from(v: &[u32]) -> Self {
        TorusCoord(v.to_vec())
    }
}

impl fmt::Display for TorusCoord {
    /// `1:0:3` style; avoids commas so the form can sit in a CSV cell.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(":")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Travel direction along one torus dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    pub fn sign(self) -> i64 {
        match self {
            Direction::Plus => 1,
            Direction::Minus => -1,
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Plus => Direction::Minus,
            Direction::Minus => Direction::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Direction::Plus => '+',
            Direction::Minus => '-',
        }
    }
}

/// Sizes of an n-dimensional torus (1 to 3 dimensions, each size at least 1).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Topology {
    sizes: Vec<u32>,
}

impl TryFrom<Vec<u32>> for Topology {
    type Error = CoreError;

    fn try_from(sizes: Vec<u32>) -> Result<Self, CoreError> {
        Topology::new(sizes)
    }
}

impl From<Topology> for Vec<u32> {
    fn from(t: Topology) -> Self {
        t.sizes
    }
}

impl Topology {
    pub fn new(sizes: impl Into<Vec<u32>>) -> Result<Self, CoreError> {
        let sizes = sizes.into();
        if sizes.is_empty() || sizes.len() > MAX_DIMS {
            return Err(CoreError::BadDimensionCount(sizes.len()));
        }
        if let Some(d) = sizes.iter().position(|&s| s == 0) {
            return Err(CoreError::ZeroSize { dim: d });
        }
        Ok(Topology { sizes })
    }

    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    pub fn node_count(&self) -> usize {
        self.sizes.iter().map(|&s| s as usize).product()
    }

    pub fn contains(&self, c: &TorusCoord) -> bool {
        c.dims() == self.dims() && c.0.iter().zip(&self.sizes).all(|(&x, &s)| x < s)
    }

    pub fn check(&self, c: &TorusCoord) -> Result<(), CoreError> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(CoreError::CoordOutOfRange {
                coord: c.clone(),
                sizes: self.sizes.clone(),
            })
        }
    }

    /// Row-major linear index (dimension 0 most significant).
    pub fn index_of(&self, c: &TorusCoord) -> usize {
        debug_assert!(self.contains(c), "{c} not in torus {:?}", self.sizes);
        c.0.iter()
            .zip(&self.sizes)
            .fold(0usize, |acc, (&x, &s)| acc * s as usize + x as usize)
    }

    pub fn coord_of(&self, mut index: usize) -> TorusCoord {
        let mut v = vec![0u32; self.dims()];
        for d in (0..self.dims()).rev() {
            let s = self.sizes[d] as usize;
            v[d] = (index % s) as u32;
            index /= s;
        }
        TorusCoord(v)
    }

    /// All coordinates in row-major order.
    pub fn coords(&self) -> impl Iterator<Item = TorusCoord> + '_ {
        (0..self.node_count()).map(|i| self.coord_of(i))
    }

    /// Minimal signed wrap-aware offset from `cur` to `dest` along `dim`.
    ///
    /// On a tie (the two directions are equally long) the positive offset
    /// wins.
    ///
    /// Panics if `dim` is not a dimension of this torus.
    pub fn offset(&self, cur: &TorusCoord, dest: &TorusCoord, dim: usize) -> i64 {
        assert!(
            dim < self.dims(),
            "dimension {dim} out of range for a {}-dim torus",
            self.dims()
        );
        let k = i64::from(self.sizes[dim]);
        let diff = (i64::from(dest.0[dim]) - i64::from(cur.0[dim])).rem_euclid(k);
        if 2 * diff <= k {
            diff
        } else {
            diff - k
        }
    }

    /// Neighbour one hop away along `dim` in direction `dir`, with wraparound.
    pub fn neighbor(&self, c: &TorusCoord, dim: usize, dir: Direction) -> TorusCoord {
        let k = i64::from(self.sizes[dim]);
        let mut v = c.0.clone();
        v[dim] = (i64::from(v[dim]) + dir.sign()).rem_euclid(k) as u32;
        TorusCoord(v)
    }

    /// Whether a hop from `c` along `dim` in `dir` uses the ring's wrap link.
    pub fn crosses_dateline(&self, c: &TorusCoord, dim: usize, dir: Direction) -> bool {
        match dir {
            Direction::Plus => c.0[dim] == self.sizes[dim] - 1,
            Direction::Minus => c.0[dim] == 0,
        }
    }
}

/// Free-function form of [`Topology::offset`] over raw size lists.
pub fn coord_offset(cur: &TorusCoord, dest: &TorusCoord, sizes: &[u32], dim: usize) -> i64 {
    assert!(dim < sizes.len(), "dimension {dim} out of range");
    let k = i64::from(sizes[dim]);
    let diff = (i64::from(dest.get(dim)) - i64::from(cur.get(dim))).rem_euclid(k);
    if 2 * diff <= k {
        diff
    } else {
        diff - k
    }
}
