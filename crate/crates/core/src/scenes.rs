//! Synthetic two-frame scenes with exact ground truth: a textured rectangle
//! moving over a flat background. Pixels the rectangle uncovers are painted
//! with a distinct grey level and marked unpredictable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::field::FieldState;
use crate::frames::{FramePair, GrayImage, Observation};
use crate::lattice::{Lattice, Velocity, DEFAULT_MAX_SPEED};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x as i64
            && y >= self.y as i64
            && x < (self.x + self.width) as i64
            && y < (self.y + self.height) as i64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub max_speed: i32,
    /// Object footprint in the previous frame.
    pub object: Rect,
    pub displacement: Velocity,
    pub background: u8,
    /// Grey level of uncovered pixels.
    pub exposed: u8,
    /// Inclusive range of the object's per-pixel texture.
    pub object_lo: u8,
    pub object_hi: u8,
    pub seed: u64,
}

impl Default for SceneSpec {
    /// 30x30 frame, 12x10 rectangle moving by (2, 1).
    fn default() -> Self {
        SceneSpec {
            width: 30,
            height: 30,
            max_speed: DEFAULT_MAX_SPEED,
            object: Rect { x: 8, y: 9, width: 12, height: 10 },
            displacement: Velocity::new(2, 1),
            background: 0,
            exposed: 40,
            object_lo: 10,
            object_hi: 30,
            seed: 1,
        }
    }
}

impl SceneSpec {
    /// Default scene rescaled to a `side x side` frame.
    pub fn square(side: usize) -> Self {
        let base = SceneSpec::default();
        let scale = |v: usize| (v * side).div_ceil(30).max(1);
        let (w, h) = (scale(base.object.width), scale(base.object.height));
        let room_x = side.saturating_sub(w + base.displacement.vx.max(0) as usize);
        let room_y = side.saturating_sub(h + base.displacement.vy.max(0) as usize);
        SceneSpec {
            width: side,
            height: side,
            object: Rect {
                x: scale(base.object.x).min(room_x),
                y: scale(base.object.y).min(room_y),
                width: w,
                height: h,
            },
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.displacement;
        if d.vx.abs() > self.max_speed || d.vy.abs() > self.max_speed {
            return Err(ModelError::Domain(format!(
                "displacement ({}, {}) exceeds maximum speed {}",
                d.vx, d.vy, self.max_speed
            )));
        }
        if self.object.width == 0 || self.object.height == 0 {
            return Err(ModelError::Domain("object must have positive size".into()));
        }
        if self.object_lo > self.object_hi {
            return Err(ModelError::Domain(format!(
                "object grey range {}..{} is empty",
                self.object_lo, self.object_hi
            )));
        }
        let inside = |x: i64, y: i64| {
            x >= 0
                && y >= 0
                && x + self.object.width as i64 <= self.width as i64
                && y + self.object.height as i64 <= self.height as i64
        };
        let (x, y) = (self.object.x as i64, self.object.y as i64);
        if !inside(x, y) || !inside(x + i64::from(d.vx), y + i64::from(d.vy)) {
            return Err(ModelError::Domain("object leaves the frame".into()));
        }
        Ok(())
    }

    fn moved(&self) -> Rect {
        Rect {
            x: (self.object.x as i64 + i64::from(self.displacement.vx)) as usize,
            y: (self.object.y as i64 + i64::from(self.displacement.vy)) as usize,
            ..self.object
        }
    }
}

/// Frames plus the fields that generated them.
#[derive(Clone, Debug)]
pub struct Scene {
    pub frames: FramePair,
    pub truth: FieldState,
    pub lattice: Lattice,
}

impl Scene {
    pub fn observation(&self) -> Observation {
        Observation::with_lattice(self.lattice.clone(), self.frames.clone())
            .expect("scene lattice matches its frames")
    }
}

pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let lattice = Lattice::with_max_speed(spec.width, spec.height, spec.max_speed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let r = spec.object;
    let texture: Vec<u8> = (0..r.width * r.height)
        .map(|_| rng.gen_range(spec.object_lo..=spec.object_hi))
        .collect();
    let moved = spec.moved();

    let mut prev = GrayImage::filled(spec.width, spec.height, spec.background);
    let mut curr = GrayImage::filled(spec.width, spec.height, spec.background);
    let mut truth = FieldState::zeros(&lattice);
    for oy in 0..r.height {
        for ox in 0..r.width {
            prev.set(r.x + ox, r.y + oy, texture[oy * r.width + ox]);
        }
    }
    for y in 0..spec.height {
        for x in 0..spec.width {
            let (xi, yi) = (x as i64, y as i64);
            let site = lattice.site(x, y);
            if moved.contains(xi, yi) {
                let (ox, oy) = (x - moved.x, y - moved.y);
                curr.set(x, y, texture[oy * r.width + ox]);
                truth.d[site] = spec.displacement;
            } else if r.contains(xi, yi) {
                curr.set(x, y, spec.exposed);
                truth.s[site] = 1;
            }
        }
    }
    for (e, edge) in lattice.edges().iter().enumerate() {
        let on = |site: usize| {
            let (x, y) = lattice.coords(site);
            moved.contains(x as i64, y as i64)
        };
        truth.l[e] = u8::from(on(edge.a) != on(edge.b));
    }
    let frames = FramePair::new(prev, curr)?;
    Ok(Scene { frames, truth, lattice })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_displacement_gives_identical_frames() {
        let spec = SceneSpec { displacement: Velocity::ZERO, ..SceneSpec::default() };
        let scene = generate(&spec).unwrap();
        assert_eq!(scene.frames.prev, scene.frames.curr);
        assert!(scene.truth.s.iter().all(|&s| s == 0));
        assert!(scene.truth.d.iter().all(|&d| d == Velocity::ZERO));
    }

    #[test]
    fn exposed_area_is_footprint_difference() {
        let spec = SceneSpec::default();
        let scene = generate(&spec).unwrap();
        let (a, b) = (spec.object, spec.moved());
        let mut expected = 0;
        for y in 0..30i64 {
            for x in 0..30i64 {
                expected += usize::from(a.contains(x, y) && !b.contains(x, y));
            }
        }
        assert_eq!(scene.truth.s.iter().filter(|&&s| s == 1).count(), expected);
        // 12x10 moved by (2, 1): 120 - 10 * 9
        assert_eq!(expected, 30);
    }

    #[test]
    fn predictable_pixels_match_their_source() {
        for seed in 0..5 {
            let spec = SceneSpec { seed, displacement: Velocity::new(-3, 2), ..SceneSpec::default() };
            let scene = generate(&spec).unwrap();
            scene.truth.validate(&scene.lattice).unwrap();
            for site in 0..scene.lattice.num_sites() {
                if scene.truth.s[site] == 0 {
                    let src = scene.lattice.source(site, scene.truth.d[site]).unwrap();
                    assert_eq!(scene.frames.curr.pixels()[site], scene.frames.prev.pixels()[src]);
                }
            }
        }
    }

    #[test]
    fn texture_is_seeded() {
        let a = generate(&SceneSpec::default()).unwrap();
        let b = generate(&SceneSpec::default()).unwrap();
        assert_eq!(a.frames, b.frames);
        let c = generate(&SceneSpec { seed: 2, ..SceneSpec::default() }).unwrap();
        assert_ne!(a.frames.prev, c.frames.prev);
    }

    #[test]
    fn lines_trace_the_moved_silhouette() {
        let scene = generate(&SceneSpec::default()).unwrap();
        // perimeter of a 12x10 rectangle away from the frame border
        assert_eq!(scene.truth.l.iter().filter(|&&l| l == 1).count(), 2 * (12 + 10));
    }

    #[test]
    fn invalid_specs() {
        let out = SceneSpec { displacement: Velocity::new(0, -10), ..SceneSpec::default() };
        assert!(generate(&out).is_err());
        let edge = SceneSpec { object: Rect { x: 25, y: 0, width: 5, height: 5 }, ..SceneSpec::default() };
        assert!(generate(&edge).is_err());
    }

    #[test]
    fn square_scenes_are_valid() {
        for side in [6, 10, 20, 30, 45] {
            generate(&SceneSpec::square(side)).unwrap();
        }
    }
}
