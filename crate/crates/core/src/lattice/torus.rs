use serde::{Deserialize, Serialize};

/// A lattice site on the torus, coordinates in `[0, side)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub coords: Vec<usize>,
}

impl Site {
    pub fn new(coords: Vec<usize>) -> Self {
        Self { coords }
    }

    pub fn origin(d: usize) -> Self {
        Self { coords: vec![0; d] }
    }
}

/// Signed unit vector `sign * e_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Direction {
    pub axis: usize,
    pub positive: bool,
}

impl Direction {
    /// Index in `0..2d`: `2 * axis` for `+e_axis`, `2 * axis + 1` for `-e_axis`.
    pub fn index(self) -> usize {
        2 * self.axis + usize::from(!self.positive)
    }

    pub fn from_index(j: usize) -> Self {
        Self { axis: j / 2, positive: j % 2 == 0 }
    }

    pub fn all(d: usize) -> impl Iterator<Item = Direction> {
        (0..2 * d).map(Direction::from_index)
    }
}

/// Periodic box `(Z / side Z)^d` with row-major site indexing
/// (axis 0 varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Torus {
    d: usize,
    side: usize,
    strides: Vec<usize>,
}

impl Torus {
    pub fn new(d: usize, side: usize) -> Self {
        let strides = (0..d).map(|i| side.pow(i as u32)).collect();
        Self { d, side, strides }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, site: &Site) -> usize {
        site.coords.iter().zip(&self.strides).map(|(c, s)| (c % self.side) * s).sum()
    }

    pub fn site(&self, mut index: usize) -> Site {
        let mut coords = Vec::with_capacity(self.d);
        for _ in 0..self.d {
            coords.push(index % self.side);
            index /= self.side;
        }
        Site { coords }
    }

    /// Coordinate `axis` of the site with this index.
    pub fn coord(&self, index: usize, axis: usize) -> usize {
        (index / self.strides[axis]) % self.side
    }

    pub fn shift(&self, site: &Site, dir: Direction) -> Site {
        let mut coords = site.coords.clone();
        let c = &mut coords[dir.axis];
        *c = if dir.positive { (*c + 1) % self.side } else { (*c + self.side - 1) % self.side };
        Site { coords }
    }

    pub fn shift_index(&self, index: usize, dir: Direction) -> usize {
        let c = self.coord(index, dir.axis);
        let stride = self.strides[dir.axis];
        if dir.positive {
            if c + 1 == self.side {
                index - c * stride
            } else {
                index + stride
            }
        } else if c == 0 {
            index + (self.side - 1) * stride
        } else {
            index - stride
        }
    }

    /// The `2d` nearest neighbours of `site`, each tagged with the direction
    /// `neighbor - site`.
    pub fn neighbors(&self, site: &Site) -> Vec<(Site, Direction)> {
        Direction::all(self.d).map(|dir| (self.shift(site, dir), dir)).collect()
    }

    /// Flat neighbour table: entry `2d * x + dir.index()` is the index of
    /// `x + dir`.
    pub fn neighbor_table(&self) -> Vec<u32> {
        assert!(self.len() <= u32::MAX as usize, "torus too large for u32 indices");
        let mut table = Vec::with_capacity(self.len() * 2 * self.d);
        for x in 0..self.len() {
            for dir in Direction::all(self.d) {
                table.push(self.shift_index(x, dir) as u32);
            }
        }
        table
    }

    /// Macroscopic position `x / n` of a site index.
    pub fn position(&self, index: usize, n: f64) -> Vec<f64> {
        (0..self.d).map(|a| self.coord(index, a) as f64 / n).collect()
    }
}
