//! Procedural sharp frame sequences: textured backgrounds with moving
//! colored shapes and small saturated light sources.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blursynth::FrameSequence;
use crate::colorcore::{Domain, ImageF};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Rect { half_h: f64, half_w: f64 },
    Disk { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Sprite {
    shape: Shape,
    color: [f32; 3],
    y: f64,
    x: f64,
    vy: f64,
    vx: f64,
}

impl Sprite {
    fn covers(&self, t: f64, py: f64, px: f64) -> bool {
        let dy = py - (self.y + self.vy * t);
        let dx = px - (self.x + self.vx * t);
        match self.shape {
            Shape::Rect { half_h, half_w } => dy.abs() <= half_h && dx.abs() <= half_w,
            Shape::Disk { radius } => dy * dy + dx * dx <= radius * radius,
        }
    }
}

/// `frames` frames of a random scene; velocities are in pixels per frame.
pub fn moving_shapes(seed: u64, h: usize, w: usize, frames: usize) -> Result<FrameSequence> {
    if h == 0 || w == 0 || frames == 0 {
        return Err(Error::validation("scene needs positive size and frame count"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.25..0.7));
    let tilt: [f32; 3] = std::array::from_fn(|_| rng.random_range(-0.25..0.25));
    let freq = rng.random_range(0.1..0.4);
    let (fh, fw) = (h as f64, w as f64);
    let mut sprites = Vec::new();
    for i in 0..rng.random_range(3..7) {
        let size = rng.random_range(0.08..0.25) * fh.min(fw);
        let shape = if rng.random_bool(0.5) {
            Shape::Rect {
                half_h: size,
                half_w: size * rng.random_range(0.5..1.5),
            }
        } else {
            Shape::Disk { radius: size }
        };
        let color: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.05..0.95));
        let speed = rng.random_range(0.5..3.0);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        sprites.push(Sprite {
            shape,
            color,
            y: rng.random_range(0.0..fh),
            x: rng.random_range(0.0..fw),
            vy: speed * angle.sin(),
            vx: speed * angle.cos(),
        });
        // the first object doubles as a light source
        if i == 0 {
            sprites.push(Sprite {
                shape: Shape::Disk { radius: size * 0.3 + 1.0 },
                color: [1.0; 3],
                ..sprites[0]
            });
        }
    }
    let center = (frames as f64 - 1.0) / 2.0;
    let out = (0..frames)
        .map(|f| {
            let t = f as f64 - center;
            ImageF::from_fn(h, w, 3, Domain::Srgb, |y, x, c| {
                let (py, px) = (y as f64 + 0.5, x as f64 + 0.5);
                let hit = sprites.iter().rev().find(|s| s.covers(t, py, px));
                match hit {
                    Some(s) => s.color[c],
                    None => {
                        let stripe = ((px * freq).sin() * (py * freq * 0.7).cos()) as f32;
                        (base[c] + tilt[c] * (y as f32 / h as f32 - 0.5) + 0.1 * stripe).clamp(0.0, 1.0)
                    }
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(out, 30.0)
}

/// A white disk crossing a flat background horizontally; it sits at
/// `(cy, cx)` on the middle frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DotScene {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub radius: f64,
    pub cy: f64,
    pub cx: f64,
    /// Pixels per frame.
    pub speed: f64,
    pub background: f32,
}

impl DotScene {
    pub fn sequence(&self) -> Result<FrameSequence> {
        let dot = Sprite {
            shape: Shape::Disk { radius: self.radius },
            color: [1.0; 3],
            y: self.cy,
            x: self.cx,
            vy: 0.0,
            vx: self.speed,
        };
        let center = (self.frames as f64 - 1.0) / 2.0;
        let out = (0..self.frames)
            .map(|f| {
                let t = f as f64 - center;
                ImageF::from_fn(self.height, self.width, 3, Domain::Srgb, |y, x, _| {
                    if dot.covers(t, y as f64 + 0.5, x as f64 + 0.5) {
                        1.0
                    } else {
                        self.background
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FrameSequence::new(out, 30.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = moving_shapes(5, 24, 32, 7).unwrap();
        let b = moving_shapes(5, 24, 32, 7).unwrap();
        assert_eq!(a.frames(), b.frames());
        assert_ne!(a.frames()[0], a.frames()[6]);
        for f in a.frames() {
            f.check_srgb_range().unwrap();
        }
        assert_ne!(moving_shapes(6, 24, 32, 7).unwrap().frames(), a.frames());
    }

    #[test]
    fn dot_moves_by_speed() {
        let seq = DotScene {
            height: 9,
            width: 20,
            frames: 3,
            radius: 1.2,
            cy: 4.5,
            cx: 10.5,
            speed: 3.0,
            background: 0.1,
        }
        .sequence()
        .unwrap();
        assert_eq!(seq.frames()[1].get(4, 10, 0), 1.0);
        assert_eq!(seq.frames()[0].get(4, 7, 0), 1.0);
        assert_eq!(seq.frames()[2].get(4, 13, 0), 1.0);
        assert_eq!(seq.frames()[0].get(4, 13, 0), 0.1);
    }
}
