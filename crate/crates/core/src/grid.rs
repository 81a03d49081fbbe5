use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{clip_segment_to_rect, Point};
use crate::tessellation::Bounds;

/// Per-cell counts of segments crossing a regular grid over a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub bounds: Bounds,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `ny` rows of `nx` cells; row 0 is the lowest `t` band.
    pub counts: Vec<u32>,
}

impl DensityGrid {
    pub fn new(bounds: Bounds, nx: usize, ny: usize) -> Self {
        Self {
            bounds,
            nx,
            ny,
            counts: vec![0; nx * ny],
        }
    }

    pub fn get(&self, ix: usize, iy: usize) -> u32 {
        self.counts[iy * self.nx + ix]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn cell_bounds(&self, ix: usize, iy: usize) -> (Point, Point) {
        let b = &self.bounds;
        let w = (b.s1 - b.s0) / self.nx as f64;
        let h = (b.t1 - b.t0) / self.ny as f64;
        (
            [b.s0 + ix as f64 * w, b.t0 + iy as f64 * h],
            [b.s0 + (ix + 1) as f64 * w, b.t0 + (iy + 1) as f64 * h],
        )
    }

    /// Adds one to every (closed) cell the segment touches.
    pub fn add_segment(&mut self, a: Point, b: Point) {
        let bd = &self.bounds;
        let Some((t0, t1)) = clip_segment_to_rect(a, b, [bd.s0, bd.t0], [bd.s1, bd.t1]) else {
            return;
        };
        let lerp = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let (p, q) = (lerp(t0), lerp(t1));
        let cx = |s: f64| libm::floor((s - bd.s0) / (bd.s1 - bd.s0) * self.nx as f64) as isize;
        let cy = |t: f64| libm::floor((t - bd.t0) / (bd.t1 - bd.t0) * self.ny as f64) as isize;
        let clampx = |i: isize| i.clamp(0, self.nx as isize - 1) as usize;
        let clampy = |i: isize| i.clamp(0, self.ny as isize - 1) as usize;
        let (x0, x1) = (clampx(cx(p[0].min(q[0])) - 1), clampx(cx(p[0].max(q[0])) + 1));
        let (y0, y1) = (clampy(cy(p[1].min(q[1])) - 1), clampy(cy(p[1].max(q[1])) + 1));
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let (lo, hi) = self.cell_bounds(ix, iy);
                if clip_segment_to_rect(p, q, lo, hi).is_some() {
                    self.counts[iy * self.nx + ix] += 1;
                }
            }
        }
    }
}
