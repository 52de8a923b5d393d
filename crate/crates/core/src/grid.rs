//! Axis-aligned boxes and voxel-sampled fields.
//!
//! Voxel values are stored in row-major axis order: the flat index of voxel
//! `(ix, iy, iz)` is `(ix * ny + iy) * nz + iz`, so `z` varies fastest.

use crate::error::{Error, Result};
use crate::Point;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub lo: Point,
    pub hi: Point,
}

impl Aabb {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        for i in 0..3 {
            if !(lo[i].is_finite() && hi[i].is_finite()) || lo[i] >= hi[i] {
                return Err(Error::Domain(format!(
                    "box corners must satisfy lo < hi componentwise (axis {i}: {} vs {})",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self {
            lo: Point::zeros(),
            hi: Point::new(1.0, 1.0, 1.0),
        }
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn min_side(&self) -> f64 {
        self.side(0).min(self.side(1)).min(self.side(2))
    }

    pub fn volume(&self) -> f64 {
        self.side(0) * self.side(1) * self.side(2)
    }

    pub fn center(&self) -> Point {
        (self.lo + self.hi) * 0.5
    }

    pub fn diameter(&self) -> f64 {
        (self.hi - self.lo).norm()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &Point) -> bool {
        (0..3).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    /// Distance from an interior point to the nearest face; negative outside.
    pub fn clearance(&self, x: &Point) -> f64 {
        (0..3)
            .map(|i| (x[i] - self.lo[i]).min(self.hi[i] - x[i]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Euclidean distance from `x` to the box (zero inside).
    pub fn distance_to(&self, x: &Point) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let e = (self.lo[i] - x[i]).max(0.0).max(x[i] - self.hi[i]);
            d2 += e * e;
        }
        d2.sqrt()
    }
}

/// A field sampled at voxel centers of a uniform partition of a box.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<T> {
    pub bounds: Aabb,
    pub resolution: [usize; 3],
    pub values: Vec<T>,
}

/// Complex-valued voxel field (houses u, u0, p, q, n^2).
pub type GridField = VoxelGrid<Complex64>;

/// Real-valued voxel field (densities, impedance components).
pub type RealGrid = VoxelGrid<f64>;

impl<T: Clone> VoxelGrid<T> {
    pub fn filled(bounds: Aabb, resolution: [usize; 3], value: T) -> Result<Self> {
        check_resolution(resolution)?;
        let n = resolution.iter().product();
        Ok(Self {
            bounds,
            resolution,
            values: vec![value; n],
        })
    }

    pub fn from_fn(bounds: Aabb, resolution: [usize; 3], f: impl Fn(Point) -> T) -> Result<Self> {
        check_resolution(resolution)?;
        let mut values = Vec::with_capacity(resolution.iter().product());
        for ix in 0..resolution[0] {
            for iy in 0..resolution[1] {
                for iz in 0..resolution[2] {
                    values.push(f(voxel_center(&bounds, resolution, [ix, iy, iz])));
                }
            }
        }
        Ok(Self {
            bounds,
            resolution,
            values,
        })
    }

    pub fn from_values(bounds: Aabb, resolution: [usize; 3], values: Vec<T>) -> Result<Self> {
        check_resolution(resolution)?;
        let n: usize = resolution.iter().product();
        if values.len() != n {
            return Err(Error::Domain(format!(
                "expected {n} voxel values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            bounds,
            resolution,
            values,
        })
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> VoxelGrid<U> {
        VoxelGrid {
            bounds: self.bounds,
            resolution: self.resolution,
            values: self.values.iter().map(f).collect(),
        }
    }

    /// Nearest-voxel sample; points outside the box clamp to the boundary voxel.
    pub fn sample(&self, x: &Point) -> T {
        let mut idx = [0usize; 3];
        for (axis, slot) in idx.iter_mut().enumerate() {
            let n = self.resolution[axis];
            let t = (x[axis] - self.bounds.lo[axis]) / self.bounds.side(axis);
            let i = (t * n as f64).floor();
            *slot = i.clamp(0.0, (n - 1) as f64) as usize;
        }
        self.values[self.flat_index(idx)].clone()
    }
}

impl<T> VoxelGrid<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.bounds.side(i) / self.resolution[i] as f64)
    }

    pub fn voxel_volume(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.resolution[1] + idx[1]) * self.resolution[2] + idx[2]
    }

    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let nz = self.resolution[2];
        let ny = self.resolution[1];
        [flat / (ny * nz), (flat / nz) % ny, flat % nz]
    }

    pub fn center(&self, idx: [usize; 3]) -> Point {
        voxel_center(&self.bounds, self.resolution, idx)
    }

    pub fn center_of(&self, flat: usize) -> Point {
        self.center(self.unflatten(flat))
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.center_of(i)).collect()
    }

    pub fn get(&self, idx: [usize; 3]) -> &T {
        &self.values[self.flat_index(idx)]
    }

    /// Same box and resolution.
    pub fn is_conformal<U>(&self, other: &VoxelGrid<U>) -> bool {
        self.resolution == other.resolution && self.bounds == other.bounds
    }
}

impl GridField {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

fn voxel_center(bounds: &Aabb, resolution: [usize; 3], idx: [usize; 3]) -> Point {
    Point::from_fn(|axis, _| {
        let h = bounds.side(axis) / resolution[axis] as f64;
        bounds.lo[axis] + (idx[axis] as f64 + 0.5) * h
    })
}

fn check_resolution(resolution: [usize; 3]) -> Result<()> {
    if resolution.iter().any(|&n| n < 2) {
        return Err(Error::Domain(format!(
            "grid resolution must be at least 2 per axis, got {resolution:?}"
        )));
    }
    Ok(())
}
