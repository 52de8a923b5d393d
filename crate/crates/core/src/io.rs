//! Plain-text artifact formats. Floats are written with Rust's shortest
//! round-trip representation, so every reader recovers the exact bits.
//!
//! Grid file:
//! ```text
//! # manyscat-grid v1
//! box <lo.x> <lo.y> <lo.z> <hi.x> <hi.y> <hi.z>
//! resolution <nx> <ny> <nz>
//! k <k>
//! values
//! <re> <im>          one line per voxel, index (ix*ny + iy)*nz + iz
//! ```
//!
//! Ensemble manifest:
//! ```text
//! # manyscat-ensemble v1
//! a <a>
//! kappa <κ>
//! kappa1 <κ₁>
//! seed <seed>
//! spacing <d>
//! cube_counts <c0> <c1> ...
//! particles <M>
//! <index> <x> <y> <z> <Re ζ> <Im ζ>
//! ```
//!
//! Effective-field solution:
//! ```text
//! # manyscat-solution v1
//! residual <r>
//! iterations <n>
//! particles <M>
//! a <a>
//! kappa <κ>
//! kappa1 <κ₁>
//! <index> <Re u> <Im u> <Re Q> <Im Q>
//! ```

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::grid::{Aabb, GridField, VoxelGrid};
use crate::manybody::EffectiveFieldSolution;
use crate::Point;
use num_complex::Complex64;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

const GRID_MAGIC: &str = "# manyscat-grid v1";
const MANIFEST_MAGIC: &str = "# manyscat-ensemble v1";
const SOLUTION_MAGIC: &str = "# manyscat-solution v1";

struct Lines<R> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> Lines<R> {
    fn new(inner: R) -> Self {
        Self {
            inner,
            line: 0,
            buf: String::new(),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<Option<&str>> {
        self.buf.clear();
        let n = self.inner.read_line(&mut self.buf)?;
        if n == 0 {
            return Ok(None);
        }
        self.line += 1;
        Ok(Some(self.buf.trim_end_matches(['\n', '\r'])))
    }

    fn expect_line(&mut self) -> Result<String> {
        match self.next_line()? {
            Some(s) => Ok(s.to_string()),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn magic(&mut self, magic: &str) -> Result<()> {
        let l = self.expect_line()?;
        if l != magic {
            return Err(self.err(format!("expected header '{magic}', found '{l}'")));
        }
        Ok(())
    }

    /// Reads `key v1 v2 ...` and returns the value tokens.
    fn keyed(&mut self, key: &str) -> Result<Vec<String>> {
        let l = self.expect_line()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(self.err(format!("expected '{key}' line, found '{l}'")));
        }
        Ok(it.map(str::to_string).collect())
    }

    fn parse<T: std::str::FromStr>(&self, tok: &str) -> Result<T> {
        tok.parse().map_err(|_| self.err(format!("cannot parse '{tok}'")))
    }

    fn keyed_one<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.keyed(key)?;
        if v.len() != 1 {
            return Err(self.err(format!("'{key}' takes exactly one value")));
        }
        self.parse(&v[0])
    }

    fn fields<T: std::str::FromStr>(&mut self, count: usize) -> Result<Vec<T>> {
        let l = self.expect_line()?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != count {
            return Err(self.err(format!("expected {count} fields, found {}", toks.len())));
        }
        toks.iter().map(|t| self.parse(t)).collect()
    }

    fn expect_eof(&mut self) -> Result<()> {
        while let Some(l) = self.next_line()? {
            if !l.trim().is_empty() {
                return Err(self.err("trailing content"));
            }
        }
        Ok(())
    }
}

pub fn write_grid<W: Write>(mut w: W, grid: &GridField, k: f64) -> Result<()> {
    let b = &grid.bounds;
    let r = grid.resolution;
    let mut s = String::with_capacity(64 + grid.len() * 48);
    writeln!(s, "{GRID_MAGIC}").unwrap();
    writeln!(
        s,
        "box {} {} {} {} {} {}",
        b.lo[0], b.lo[1], b.lo[2], b.hi[0], b.hi[1], b.hi[2]
    )
    .unwrap();
    writeln!(s, "resolution {} {} {}", r[0], r[1], r[2]).unwrap();
    writeln!(s, "k {k}").unwrap();
    writeln!(s, "values").unwrap();
    for v in &grid.values {
        writeln!(s, "{} {}", v.re, v.im).unwrap();
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Returns the grid and the wavenumber recorded with it.
pub fn read_grid<R: BufRead>(r: R) -> Result<(GridField, f64)> {
    let mut lines = Lines::new(r);
    lines.magic(GRID_MAGIC)?;
    let bx = lines.keyed("box")?;
    if bx.len() != 6 {
        return Err(lines.err("'box' takes six values"));
    }
    let v: Vec<f64> = bx.iter().map(|t| lines.parse(t)).collect::<Result<_>>()?;
    let bounds = Aabb::new(Point::new(v[0], v[1], v[2]), Point::new(v[3], v[4], v[5]))?;
    let res = lines.keyed("resolution")?;
    if res.len() != 3 {
        return Err(lines.err("'resolution' takes three values"));
    }
    let n: Vec<usize> = res.iter().map(|t| lines.parse(t)).collect::<Result<_>>()?;
    let k: f64 = lines.keyed_one("k")?;
    if !lines.keyed("values")?.is_empty() {
        return Err(lines.err("'values' takes no arguments"));
    }
    let total = n
        .iter()
        .try_fold(1usize, |acc, v| acc.checked_mul(*v))
        .ok_or_else(|| lines.err("grid too large"))?;
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        let f: Vec<f64> = lines.fields(2)?;
        let c = Complex64::new(f[0], f[1]);
        if !c.is_finite() {
            return Err(lines.err("non-finite grid value"));
        }
        values.push(c);
    }
    lines.expect_eof()?;
    Ok((VoxelGrid::from_values(bounds, [n[0], n[1], n[2]], values)?, k))
}

/// Ensemble data as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub a: f64,
    pub kappa: f64,
    pub kappa1: f64,
    pub seed: u64,
    pub spacing: f64,
    pub cube_counts: Vec<usize>,
    pub centers: Vec<Point>,
    pub zeta: Vec<Complex64>,
}

impl Manifest {
    pub fn from_ensemble(e: &ParticleEnsemble) -> Self {
        Self {
            a: e.a,
            kappa: e.law.kappa(),
            kappa1: e.law.kappa1(),
            seed: e.seed,
            spacing: e.spacing,
            cube_counts: e.cube_counts.clone(),
            centers: e.centers.clone(),
            zeta: e.zeta.clone(),
        }
    }
}

pub fn write_manifest<W: Write>(mut w: W, m: &Manifest) -> Result<()> {
    let mut s = String::with_capacity(256 + m.centers.len() * 96);
    writeln!(s, "{MANIFEST_MAGIC}").unwrap();
    writeln!(s, "a {}", m.a).unwrap();
    writeln!(s, "kappa {}", m.kappa).unwrap();
    writeln!(s, "kappa1 {}", m.kappa1).unwrap();
    writeln!(s, "seed {}", m.seed).unwrap();
    writeln!(s, "spacing {}", m.spacing).unwrap();
    write!(s, "cube_counts").unwrap();
    for c in &m.cube_counts {
        write!(s, " {c}").unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "particles {}", m.centers.len()).unwrap();
    for (i, (x, z)) in m.centers.iter().zip(&m.zeta).enumerate() {
        writeln!(s, "{i} {} {} {} {} {}", x[0], x[1], x[2], z.re, z.im).unwrap();
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_manifest<R: BufRead>(r: R) -> Result<Manifest> {
    let mut lines = Lines::new(r);
    lines.magic(MANIFEST_MAGIC)?;
    let a = lines.keyed_one("a")?;
    let kappa = lines.keyed_one("kappa")?;
    let kappa1 = lines.keyed_one("kappa1")?;
    let seed = lines.keyed_one("seed")?;
    let spacing = lines.keyed_one("spacing")?;
    let cc = lines.keyed("cube_counts")?;
    let cube_counts = cc.iter().map(|t| lines.parse(t)).collect::<Result<Vec<usize>>>()?;
    let m: usize = lines.keyed_one("particles")?;
    let mut centers = Vec::with_capacity(m);
    let mut zeta = Vec::with_capacity(m);
    for i in 0..m {
        let l = lines.expect_line()?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 6 {
            return Err(lines.err(format!("expected 6 fields, found {}", toks.len())));
        }
        let idx: usize = lines.parse(toks[0])?;
        if idx != i {
            return Err(lines.err(format!("particle index {idx} out of order (expected {i})")));
        }
        let f: Vec<f64> = toks[1..].iter().map(|t| lines.parse(t)).collect::<Result<_>>()?;
        centers.push(Point::new(f[0], f[1], f[2]));
        zeta.push(Complex64::new(f[3], f[4]));
    }
    lines.expect_eof()?;
    Ok(Manifest {
        a,
        kappa,
        kappa1,
        seed,
        spacing,
        cube_counts,
        centers,
        zeta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRecord {
    pub residual: f64,
    pub iterations: usize,
    pub a: f64,
    pub kappa: f64,
    pub kappa1: f64,
    pub u: Vec<Complex64>,
    pub charges: Vec<Complex64>,
}

impl SolutionRecord {
    pub fn new(sol: &EffectiveFieldSolution, e: &ParticleEnsemble) -> Self {
        Self {
            residual: sol.residual_norm,
            iterations: sol.iterations,
            a: e.a,
            kappa: e.law.kappa(),
            kappa1: e.law.kappa1(),
            u: sol.u_at_centers.clone(),
            charges: sol.charges.clone(),
        }
    }
}

pub fn write_solution<W: Write>(mut w: W, s: &SolutionRecord) -> Result<()> {
    let mut out = String::with_capacity(256 + s.u.len() * 96);
    writeln!(out, "{SOLUTION_MAGIC}").unwrap();
    writeln!(out, "residual {}", s.residual).unwrap();
    writeln!(out, "iterations {}", s.iterations).unwrap();
    writeln!(out, "particles {}", s.u.len()).unwrap();
    writeln!(out, "a {}", s.a).unwrap();
    writeln!(out, "kappa {}", s.kappa).unwrap();
    writeln!(out, "kappa1 {}", s.kappa1).unwrap();
    for (i, (u, q)) in s.u.iter().zip(&s.charges).enumerate() {
        writeln!(out, "{i} {} {} {} {}", u.re, u.im, q.re, q.im).unwrap();
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_solution<R: BufRead>(r: R) -> Result<SolutionRecord> {
    let mut lines = Lines::new(r);
    lines.magic(SOLUTION_MAGIC)?;
    let residual = lines.keyed_one("residual")?;
    let iterations = lines.keyed_one("iterations")?;
    let m: usize = lines.keyed_one("particles")?;
    let a = lines.keyed_one("a")?;
    let kappa = lines.keyed_one("kappa")?;
    let kappa1 = lines.keyed_one("kappa1")?;
    let mut u = Vec::with_capacity(m);
    let mut charges = Vec::with_capacity(m);
    for i in 0..m {
        let f: Vec<f64> = lines.fields(5)?;
        if f[0] != i as f64 {
            return Err(lines.err(format!("record index {} out of order (expected {i})", f[0])));
        }
        u.push(Complex64::new(f[1], f[2]));
        charges.push(Complex64::new(f[3], f[4]));
    }
    lines.expect_eof()?;
    Ok(SolutionRecord {
        residual,
        iterations,
        a,
        kappa,
        kappa1,
        u,
        charges,
    })
}

/// CSV of the `z`-plane `iz`: `x,y,re,im,abs` per voxel.
pub fn grid_slice_csv(grid: &GridField, iz: usize) -> Result<String> {
    let [nx, ny, nz] = grid.resolution;
    if iz >= nz {
        return Err(Error::Domain(format!("slice index {iz} out of range 0..{nz}")));
    }
    let mut s = String::from("x,y,re,im,abs\n");
    for ix in 0..nx {
        for iy in 0..ny {
            let c = grid.center([ix, iy, iz]);
            let v = grid.get([ix, iy, iz]);
            writeln!(s, "{},{},{},{},{}", c[0], c[1], v.re, v.im, v.norm()).unwrap();
        }
    }
    Ok(s)
}

/// CSV of values on a set of probe points: `x,y,z,re,im,abs`.
pub fn points_csv(points: &[Point], values: &[Complex64]) -> String {
    let mut s = String::from("x,y,z,re,im,abs\n");
    for (p, v) in points.iter().zip(values) {
        writeln!(s, "{},{},{},{},{},{}", p[0], p[1], p[2], v.re, v.im, v.norm()).unwrap();
    }
    s
}
