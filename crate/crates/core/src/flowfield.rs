//! Planar domain and disturbance velocity fields.
//!
//! A [`FlowField`] is either the analytic double-gyre model or a lattice of
//! sampled velocities (bilinearly interpolated). Each field carries additive,
//! independent Gaussian noise on both velocity components that is drawn fresh
//! on every call to [`FlowField::sample_disturbance`].

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used to key lattice records and to test domain membership.
const COORD_TOL_KM: f64 = 1e-6;

/// Location in the plane, kilometers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Velocity vector, km/h.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity2 {
    pub vx: f64,
    pub vy: f64,
}

impl Velocity2 {
    pub const fn new(vx: f64, vy: f64) -> Self {
        Self { vx, vy }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// Parameters of the wind-driven double-gyre model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GyreParams {
    /// Current strength `A` (km/h scale factor).
    pub strength: f64,
    /// Gyre size `s` in kilometers.
    pub size_km: f64,
}

impl GyreParams {
    pub fn new(strength: f64, size_km: f64) -> Result<Self> {
        if !(size_km > 0.0 && size_km.is_finite()) || !strength.is_finite() {
            return Err(Error::Construction(format!(
                "invalid gyre parameters A={strength}, s={size_km}"
            )));
        }
        Ok(Self { strength, size_km })
    }
}

/// Standard deviations (km/h) of the independent velocity noise components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl NoiseParams {
    pub fn new(sigma_x: f64, sigma_y: f64) -> Result<Self> {
        if !(sigma_x >= 0.0 && sigma_y >= 0.0 && sigma_x.is_finite() && sigma_y.is_finite()) {
            return Err(Error::Construction(format!(
                "noise standard deviations must be finite and non-negative, got ({sigma_x}, {sigma_y})"
            )));
        }
        Ok(Self { sigma_x, sigma_y })
    }

    pub fn isotropic(sigma: f64) -> Result<Self> {
        Self::new(sigma, sigma)
    }

    pub fn zero() -> Self {
        Self::default()
    }
}

/// Axis-aligned rectangular planning region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(min: Point2, width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && min.is_finite()) {
            return Err(Error::Construction(format!(
                "degenerate domain {width}x{height} at ({}, {})",
                min.x, min.y
            )));
        }
        Ok(Self { min, width, height })
    }

    /// The 40 km x 40 km region anchored at the origin.
    pub fn default_ocean() -> Self {
        Self {
            min: Point2::new(0.0, 0.0),
            width: 40.0,
            height: 40.0,
        }
    }

    pub fn max(&self) -> Point2 {
        Point2::new(self.min.x + self.width, self.min.y + self.height)
    }

    pub fn contains(&self, p: Point2) -> bool {
        let max = self.max();
        p.x >= self.min.x - COORD_TOL_KM
            && p.x <= max.x + COORD_TOL_KM
            && p.y >= self.min.y - COORD_TOL_KM
            && p.y <= max.y + COORD_TOL_KM
    }

    /// Component-wise projection onto the rectangle.
    pub fn clamp(&self, p: Point2) -> Point2 {
        let max = self.max();
        Point2::new(p.x.clamp(self.min.x, max.x), p.y.clamp(self.min.y, max.y))
    }
}

/// Velocities sampled on a regular lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSamples {
    pub origin: Point2,
    pub cell_km: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major samples, index `j * nx + i`.
    pub samples: Vec<Velocity2>,
}

impl GridSamples {
    pub fn new(
        origin: Point2,
        cell_km: f64,
        nx: usize,
        ny: usize,
        samples: Vec<Velocity2>,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Construction(format!(
                "grid field needs at least 2x2 samples, got {nx}x{ny}"
            )));
        }
        if !(cell_km > 0.0) {
            return Err(Error::Construction(format!("invalid lattice spacing {cell_km}")));
        }
        if samples.len() != nx * ny {
            return Err(Error::Construction(format!(
                "expected {} samples, got {}",
                nx * ny,
                samples.len()
            )));
        }
        if samples.iter().any(|v| !(v.vx.is_finite() && v.vy.is_finite())) {
            return Err(Error::Construction("non-finite velocity sample".into()));
        }
        Ok(Self {
            origin,
            cell_km,
            nx,
            ny,
            samples,
        })
    }

    pub fn extent(&self) -> Rect {
        Rect {
            min: self.origin,
            width: (self.nx - 1) as f64 * self.cell_km,
            height: (self.ny - 1) as f64 * self.cell_km,
        }
    }

    fn at(&self, i: usize, j: usize) -> Velocity2 {
        self.samples[j * self.nx + i]
    }

    fn interpolate(&self, p: Point2) -> Velocity2 {
        let locate = |coord: f64, n: usize| {
            let f = (coord / self.cell_km).clamp(0.0, (n - 1) as f64);
            let i0 = (f.floor() as usize).min(n - 2);
            (i0, f - i0 as f64)
        };
        let (i0, tx) = locate(p.x - self.origin.x, self.nx);
        let (j0, ty) = locate(p.y - self.origin.y, self.ny);
        let v00 = self.at(i0, j0);
        let v10 = self.at(i0 + 1, j0);
        let v01 = self.at(i0, j0 + 1);
        let v11 = self.at(i0 + 1, j0 + 1);
        let w00 = (1.0 - tx) * (1.0 - ty);
        let w10 = tx * (1.0 - ty);
        let w01 = (1.0 - tx) * ty;
        let w11 = tx * ty;
        Velocity2::new(
            w00 * v00.vx + w10 * v10.vx + w01 * v01.vx + w11 * v11.vx,
            w00 * v00.vy + w10 * v10.vy + w01 * v01.vy + w11 * v11.vy,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    Analytic(GyreParams),
    GridSampled(GridSamples),
}

/// Static disturbance field with additive Gaussian uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    kind: FieldKind,
    noise: NoiseParams,
    domain: Rect,
}

/// Deterministic double-gyre velocity at `p`.
pub fn gyre_velocity(p: Point2, params: &GyreParams) -> Velocity2 {
    let a = PI * params.strength;
    let kx = PI * p.x / params.size_km;
    let ky = PI * p.y / params.size_km;
    Velocity2::new(-a * kx.sin() * ky.cos(), a * kx.cos() * ky.sin())
}

impl FlowField {
    /// Gyre field over `domain`.
    pub fn gyre(params: GyreParams, noise: NoiseParams, domain: Rect) -> Self {
        Self {
            kind: FieldKind::Analytic(params),
            noise,
            domain,
        }
    }

    /// Gyre over the default 40 km x 40 km ocean.
    pub fn default_gyre(strength: f64, noise: NoiseParams) -> Result<Self> {
        Ok(Self::gyre(
            GyreParams::new(strength, 20.0)?,
            noise,
            Rect::default_ocean(),
        ))
    }

    /// Sampled field; the domain is the lattice bounding box.
    pub fn grid(samples: GridSamples, noise: NoiseParams) -> Self {
        let domain = samples.extent();
        Self {
            kind: FieldKind::GridSampled(samples),
            noise,
            domain,
        }
    }

    /// Spatially uniform field over `domain` (a 2x2 lattice at the corners).
    pub fn uniform(velocity: Velocity2, noise: NoiseParams, domain: Rect) -> Self {
        // non-square domains use the larger spacing; interpolation of a
        // constant is exact so only the cover matters
        let cell = domain.width.max(domain.height);
        let samples = GridSamples {
            origin: domain.min,
            cell_km: cell,
            nx: 2,
            ny: 2,
            samples: vec![velocity; 4],
        };
        Self {
            kind: FieldKind::GridSampled(samples),
            noise,
            domain,
        }
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn noise(&self) -> NoiseParams {
        self.noise
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn with_noise(mut self, noise: NoiseParams) -> Self {
        self.noise = noise;
        self
    }

    /// Noise-free velocity at `p`.
    pub fn velocity(&self, p: Point2) -> Result<Velocity2> {
        if !p.is_finite() || !self.domain.contains(p) {
            return Err(Error::Domain(format!(
                "point ({:.6}, {:.6}) lies outside the field domain",
                p.x, p.y
            )));
        }
        Ok(match &self.kind {
            FieldKind::Analytic(params) => gyre_velocity(p, params),
            FieldKind::GridSampled(grid) => grid.interpolate(p),
        })
    }

    /// Velocity at `p` plus one independent Gaussian draw per component.
    pub fn sample_disturbance<R: Rng + ?Sized>(&self, p: Point2, rng: &mut R) -> Result<Velocity2> {
        let base = self.velocity(p)?;
        let (wx, wy) = sample_noise(self.noise, rng);
        Ok(Velocity2::new(base.vx + wx, base.vy + wy))
    }
}

/// One draw of `(w_x, w_y)` with the given standard deviations.
pub(crate) fn sample_noise<R: Rng + ?Sized>(noise: NoiseParams, rng: &mut R) -> (f64, f64) {
    // Normal::new only fails for negative or non-finite std, excluded by NoiseParams
    let nx = Normal::new(0.0, noise.sigma_x).expect("validated sigma_x");
    let ny = Normal::new(0.0, noise.sigma_y).expect("validated sigma_y");
    (nx.sample(rng), ny.sample(rng))
}

#[derive(Debug, Deserialize)]
struct LatticeRecord {
    x_km: f64,
    y_km: f64,
    vx_kmh: f64,
    vy_kmh: f64,
}

fn key(v: f64) -> i64 {
    (v / COORD_TOL_KM).round() as i64
}

/// Groups coordinate values that agree within tolerance; returns sorted unique values.
fn unique_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut all: Vec<f64> = values.collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for v in all {
        match out.last() {
            Some(&last) if (v - last).abs() <= COORD_TOL_KM => {}
            _ => out.push(v),
        }
    }
    out
}

/// Reads a lattice of `x_km,y_km,vx_kmh,vy_kmh` records into a grid field.
///
/// Records may come in any order; they are keyed by coordinate. The lattice
/// must be complete, duplicate-free, and uniformly spaced with equal spacing
/// along both axes.
pub fn load_grid_field<R: Read>(reader: R, noise: NoiseParams) -> Result<FlowField> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.deserialize::<LatticeRecord>() {
        let rec = rec.map_err(|e| Error::Format(format!("bad lattice record: {e}")))?;
        if ![rec.x_km, rec.y_km, rec.vx_kmh, rec.vy_kmh]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::Format("non-finite value in lattice record".into()));
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Format("empty lattice".into()));
    }

    let xs = unique_sorted(records.iter().map(|r| r.x_km));
    let ys = unique_sorted(records.iter().map(|r| r.y_km));
    let (nx, ny) = (xs.len(), ys.len());
    if nx < 2 || ny < 2 {
        return Err(Error::Format(format!("lattice must be at least 2x2, got {nx}x{ny}")));
    }
    let cell = xs[1] - xs[0];
    let uniform = |axis: &[f64]| {
        axis.windows(2)
            .all(|w| ((w[1] - w[0]) - cell).abs() <= 10.0 * COORD_TOL_KM)
    };
    if !uniform(&xs) || !uniform(&ys) {
        return Err(Error::Format(
            "lattice is not uniformly spaced with equal x/y spacing".into(),
        ));
    }

    let mut by_coord: HashMap<(i64, i64), Velocity2> = HashMap::with_capacity(records.len());
    for r in &records {
        let i = ((r.x_km - xs[0]) / cell).round();
        let j = ((r.y_km - ys[0]) / cell).round();
        let on_lattice = (xs[0] + i * cell - r.x_km).abs() <= 10.0 * COORD_TOL_KM
            && (ys[0] + j * cell - r.y_km).abs() <= 10.0 * COORD_TOL_KM;
        if !on_lattice {
            return Err(Error::Format(format!(
                "record ({}, {}) is off the lattice",
                r.x_km, r.y_km
            )));
        }
        if by_coord
            .insert((key(r.x_km), key(r.y_km)), Velocity2::new(r.vx_kmh, r.vy_kmh))
            .is_some()
        {
            return Err(Error::Format(format!(
                "duplicate lattice point ({}, {})",
                r.x_km, r.y_km
            )));
        }
    }
    if by_coord.len() != nx * ny {
        return Err(Error::Format(format!(
            "incomplete lattice: {} records for a {nx}x{ny} grid",
            by_coord.len()
        )));
    }

    let mut samples = Vec::with_capacity(nx * ny);
    for &y in &ys {
        for &x in &xs {
            let v = by_coord.get(&(key(x), key(y))).ok_or_else(|| {
                Error::Format(format!("missing lattice point ({x}, {y})"))
            })?;
            samples.push(*v);
        }
    }
    let grid = GridSamples::new(Point2::new(xs[0], ys[0]), cell, nx, ny, samples)?;
    Ok(FlowField::grid(grid, noise))
}

pub fn load_grid_field_path(path: &Path, noise: NoiseParams) -> Result<FlowField> {
    let file = std::fs::File::open(path)?;
    load_grid_field(std::io::BufReader::new(file), noise)
}
