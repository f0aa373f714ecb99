use crate::error::{ModelError, Result};
use crate::lattice::{Lattice, Velocity};

/// 8-bit grayscale image in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(ModelError::shape(
                format!("{} pixels for {width}x{height}", width * height),
                format!("{} pixels", data.len()),
            ));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// Two consecutive frames sharing one lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FramePair {
    pub prev: GrayImage,
    pub curr: GrayImage,
}

impl FramePair {
    pub fn new(prev: GrayImage, curr: GrayImage) -> Result<Self> {
        if prev.width != curr.width || prev.height != curr.height {
            return Err(ModelError::shape(
                format!("{}x{}", prev.width, prev.height),
                format!("{}x{}", curr.width, curr.height),
            ));
        }
        Ok(FramePair { prev, curr })
    }

    pub fn width(&self) -> usize {
        self.prev.width
    }

    pub fn height(&self) -> usize {
        self.prev.height
    }
}

/// Frames bound to their lattice, with the per-site displaced-frame residuals
/// and per-edge grayscale gaps that every energy evaluation reads.
#[derive(Clone, Debug)]
pub struct Observation {
    lattice: Lattice,
    frames: FramePair,
    // residual[offset[i] + k] = (x_i^curr - x_{i-d_k}^prev)^2 for the k-th support velocity
    residual_offset: Vec<usize>,
    residual: Vec<f64>,
    gap_sq: Vec<f64>,
}

impl Observation {
    pub fn new(frames: FramePair, max_speed: i32) -> Result<Self> {
        let lattice = Lattice::with_max_speed(frames.width(), frames.height(), max_speed)?;
        Self::with_lattice(lattice, frames)
    }

    pub fn with_lattice(lattice: Lattice, frames: FramePair) -> Result<Self> {
        if lattice.width() != frames.width() || lattice.height() != frames.height() {
            return Err(ModelError::shape(
                format!("{}x{}", lattice.width(), lattice.height()),
                format!("{}x{}", frames.width(), frames.height()),
            ));
        }
        let curr = frames.curr.pixels();
        let prev = frames.prev.pixels();
        let mut residual_offset = Vec::with_capacity(lattice.num_sites() + 1);
        let mut residual = Vec::new();
        for site in 0..lattice.num_sites() {
            residual_offset.push(residual.len());
            for v in lattice.support(site).iter() {
                let src = lattice
                    .source(site, v)
                    .expect("support velocities have in-frame sources");
                let diff = f64::from(curr[site]) - f64::from(prev[src]);
                residual.push(diff * diff);
            }
        }
        residual_offset.push(residual.len());
        let gap_sq = lattice
            .edges()
            .iter()
            .map(|e| {
                let diff = f64::from(curr[e.a]) - f64::from(curr[e.b]);
                (diff * diff).max(1.0)
            })
            .collect();
        Ok(Observation {
            lattice,
            frames,
            residual_offset,
            residual,
            gap_sq,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn frames(&self) -> &FramePair {
        &self.frames
    }

    /// Squared residual for every velocity of the site's support, in support order.
    pub fn residuals(&self, site: usize) -> &[f64] {
        &self.residual[self.residual_offset[site]..self.residual_offset[site + 1]]
    }

    /// Squared residual `(x_i - x'_{i-d})^2`. Panics if `d` is outside the support.
    pub fn residual(&self, site: usize, d: Velocity) -> f64 {
        let k = self
            .lattice
            .support(site)
            .index_of(d)
            .unwrap_or_else(|| panic!("velocity {d:?} outside support of site {site}"));
        self.residual[self.residual_offset[site] + k]
    }

    /// Squared grayscale gap across an edge in the current frame, floored at 1.
    pub fn gap_sq(&self, edge: usize) -> f64 {
        self.gap_sq[edge]
    }
}
