//! Square pixel lattice with a 4-neighbourhood, undirected edge enumeration
//! and the per-site velocity support.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Default bound on each velocity component (`d_max - 1`).
pub const DEFAULT_MAX_SPEED: i32 = 5;

/// Integer displacement in pixels/frame. The source pixel of site `i` in the
/// previous frame is `i - d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Velocity {
    pub vx: i32,
    pub vy: i32,
}

impl Velocity {
    pub const ZERO: Velocity = Velocity { vx: 0, vy: 0 };

    pub const fn new(vx: i32, vy: i32) -> Self {
        Velocity { vx, vy }
    }

    pub fn norm_sq(self) -> i32 {
        self.vx * self.vx + self.vy * self.vy
    }

    pub fn norm(self) -> f64 {
        f64::from(self.norm_sq()).sqrt()
    }

    pub fn as_f64(self) -> [f64; 2] {
        [f64::from(self.vx), f64::from(self.vy)]
    }

    pub fn dist_sq(self, other: Velocity) -> i32 {
        let dx = self.vx - other.vx;
        let dy = self.vy - other.vy;
        dx * dx + dy * dy
    }
}

impl std::ops::Neg for Velocity {
    type Output = Velocity;
    fn neg(self) -> Velocity {
        Velocity::new(-self.vx, -self.vy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// Undirected nearest-neighbour pair. `a` is the left (horizontal) or upper
/// (vertical) pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub orientation: Orientation,
}

/// Rectangular set of admissible velocities at one site: every component is
/// bounded by the maximum speed and the source pixel stays inside the frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Support {
    pub vx_lo: i32,
    pub vx_hi: i32,
    pub vy_lo: i32,
    pub vy_hi: i32,
}

impl Support {
    pub fn width(&self) -> usize {
        (self.vx_hi - self.vx_lo + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.width() * (self.vy_hi - self.vy_lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, v: Velocity) -> bool {
        (self.vx_lo..=self.vx_hi).contains(&v.vx) && (self.vy_lo..=self.vy_hi).contains(&v.vy)
    }

    /// Position of `v` in iteration order (rows of constant `vy`).
    pub fn index_of(&self, v: Velocity) -> Option<usize> {
        self.contains(v).then(|| {
            (v.vy - self.vy_lo) as usize * self.width() + (v.vx - self.vx_lo) as usize
        })
    }

    pub fn get(&self, k: usize) -> Velocity {
        let w = self.width();
        Velocity::new(self.vx_lo + (k % w) as i32, self.vy_lo + (k / w) as i32)
    }

    pub fn iter(&self) -> impl Iterator<Item = Velocity> + '_ {
        (self.vy_lo..=self.vy_hi)
            .flat_map(move |vy| (self.vx_lo..=self.vx_hi).map(move |vx| Velocity::new(vx, vy)))
    }

    /// Clamp a real-valued velocity to the nearest integer velocity inside the
    /// support, rounding half away from zero.
    pub fn quantize(&self, d: [f64; 2]) -> Velocity {
        let q = |x: f64, lo: i32, hi: i32| -> i32 {
            let r = x.round();
            if r.is_nan() {
                0.clamp(lo, hi)
            } else {
                (r as i64).clamp(i64::from(lo), i64::from(hi)) as i32
            }
        };
        Velocity::new(
            q(d[0], self.vx_lo, self.vx_hi),
            q(d[1], self.vy_lo, self.vy_hi),
        )
    }
}

/// Neighbour of a site together with the edge joining them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Adjacent {
    pub site: usize,
    pub edge: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    width: usize,
    height: usize,
    max_speed: i32,
    edges: Vec<Edge>,
    // CSR layout of neighbours in the order left, right, up, down.
    adj_start: Vec<usize>,
    adj: Vec<Adjacent>,
    supports: Vec<Support>,
}

impl Lattice {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::with_max_speed(width, height, DEFAULT_MAX_SPEED)
    }

    pub fn with_max_speed(width: usize, height: usize, max_speed: i32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ModelError::Domain(format!(
                "lattice must be non-empty, got {width}x{height}"
            )));
        }
        if max_speed < 0 {
            return Err(ModelError::Domain(format!(
                "maximum speed must be non-negative, got {max_speed}"
            )));
        }
        let h_edges = (width - 1) * height;
        let mut edges = Vec::with_capacity(h_edges + width * (height - 1));
        for y in 0..height {
            for x in 0..width - 1 {
                let a = y * width + x;
                edges.push(Edge {
                    a,
                    b: a + 1,
                    orientation: Orientation::Horizontal,
                });
            }
        }
        for y in 0..height - 1 {
            for x in 0..width {
                let a = y * width + x;
                edges.push(Edge {
                    a,
                    b: a + width,
                    orientation: Orientation::Vertical,
                });
            }
        }
        let h_index = |x: usize, y: usize| y * (width - 1) + x;
        let v_index = |x: usize, y: usize| h_edges + y * width + x;

        let n = width * height;
        let mut adj_start = Vec::with_capacity(n + 1);
        let mut adj = Vec::with_capacity(4 * n);
        let mut supports = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                adj_start.push(adj.len());
                let i = y * width + x;
                if x > 0 {
                    adj.push(Adjacent { site: i - 1, edge: h_index(x - 1, y) });
                }
                if x + 1 < width {
                    adj.push(Adjacent { site: i + 1, edge: h_index(x, y) });
                }
                if y > 0 {
                    adj.push(Adjacent { site: i - width, edge: v_index(x, y - 1) });
                }
                if y + 1 < height {
                    adj.push(Adjacent { site: i + width, edge: v_index(x, y) });
                }
                let (xi, yi) = (x as i32, y as i32);
                supports.push(Support {
                    vx_lo: (xi - width as i32 + 1).max(-max_speed),
                    vx_hi: xi.min(max_speed),
                    vy_lo: (yi - height as i32 + 1).max(-max_speed),
                    vy_hi: yi.min(max_speed),
                });
            }
        }
        adj_start.push(adj.len());

        Ok(Lattice {
            width,
            height,
            max_speed,
            edges,
            adj_start,
            adj,
            supports,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_speed(&self) -> i32 {
        self.max_speed
    }

    pub fn num_sites(&self) -> usize {
        self.width * self.height
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    pub fn neighbors(&self, site: usize) -> &[Adjacent] {
        &self.adj[self.adj_start[site]..self.adj_start[site + 1]]
    }

    pub fn support(&self, site: usize) -> Support {
        self.supports[site]
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.width, site / self.width)
    }

    /// Source pixel `i - d` in the previous frame, if it lies inside the frame.
    pub fn source(&self, site: usize, d: Velocity) -> Option<usize> {
        let (x, y) = self.coords(site);
        let sx = x as i64 - i64::from(d.vx);
        let sy = y as i64 - i64::from(d.vy);
        ((0..self.width as i64).contains(&sx) && (0..self.height as i64).contains(&sy))
            .then(|| sy as usize * self.width + sx as usize)
    }

    /// Index of the edge joining `a` and `b`, if they are nearest neighbours.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.neighbors(a).iter().find(|n| n.site == b).map(|n| n.edge)
    }

    /// Number of ordered nearest-neighbour pairs (each edge counted twice).
    pub fn num_ordered_pairs(&self) -> usize {
        2 * self.edges.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_sites_have_four_neighbours() {
        let lat = Lattice::new(5, 4).unwrap();
        for site in 0..lat.num_sites() {
            let (x, y) = lat.coords(site);
            let interior = x > 0 && x < 4 && y > 0 && y < 3;
            let n = lat.neighbors(site).len();
            assert!(n <= 4);
            if interior {
                assert_eq!(n, 4);
            }
        }
        assert_eq!(lat.neighbors(0).len(), 2);
    }

    #[test]
    fn every_edge_appears_once() {
        let lat = Lattice::new(4, 3).unwrap();
        assert_eq!(lat.num_edges(), 3 * 3 + 4 * 2);
        let mut seen = std::collections::HashSet::new();
        for e in lat.edges() {
            assert!(e.a < e.b);
            assert!(seen.insert((e.a, e.b)));
        }
        // each edge is reachable from both endpoints with the same index
        for (k, e) in lat.edges().iter().enumerate() {
            assert_eq!(lat.edge_between(e.a, e.b), Some(k));
            assert_eq!(lat.edge_between(e.b, e.a), Some(k));
        }
    }

    #[test]
    fn support_counts() {
        let lat = Lattice::new(30, 30).unwrap();
        assert_eq!(lat.support(lat.site(15, 15)).len(), 121);
        // top-left corner: vx, vy in [-5, 0]
        assert_eq!(lat.support(0).len(), 36);
        let tiny = Lattice::with_max_speed(2, 2, 1).unwrap();
        for site in 0..4 {
            assert_eq!(tiny.support(site).len(), 4);
        }
    }

    #[test]
    fn support_sources_stay_in_frame() {
        let lat = Lattice::with_max_speed(7, 5, 3).unwrap();
        for site in 0..lat.num_sites() {
            let sup = lat.support(site);
            for (k, v) in sup.iter().enumerate() {
                assert!(lat.source(site, v).is_some());
                assert_eq!(sup.index_of(v), Some(k));
                assert_eq!(sup.get(k), v);
            }
        }
    }

    #[test]
    fn quantize_rounds_half_away_from_zero() {
        let sup = Support { vx_lo: -5, vx_hi: 5, vy_lo: -5, vy_hi: 5 };
        assert_eq!(sup.quantize([2.4, -1.6]), Velocity::new(2, -2));
        assert_eq!(sup.quantize([2.5, -2.5]), Velocity::new(3, -3));
        assert_eq!(sup.quantize([9.0, -9.0]), Velocity::new(5, -5));
    }
}
