//! Double-Hopf amplitude system
//!
//! ```text
//! r1' = r1 (nu1 + r1^2 + b r2^2)
//! r2' = r2 (nu2 + c r1^2 + d r2^2)
//! ```
//!
//! built from externally supplied normal-form coefficients, its fixed points and
//! the sector partition of the (sigma1, sigma2) plane.
//!
//! The amplitude system runs in rescaled time t' = eps1 t, so stability in the
//! delay parameters is read off the Jacobian multiplied by eps1.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize};

use crate::equilibria::{classify_trace_det, Classification};
use crate::{Error, Result};

pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Deserialize)]
#[serde(untagged)]
enum ComplexRepr {
    Real(f64),
    Pair([f64; 2]),
}

fn complex_from_json<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Complex64, D::Error> {
    Ok(match ComplexRepr::deserialize(d)? {
        ComplexRepr::Real(re) => Complex64::new(re, 0.0),
        ComplexRepr::Pair([re, im]) => Complex64::new(re, im),
    })
}

/// Cubic normal-form coefficients; JSON values are either a number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[allow(non_snake_case)]
pub struct NormalFormCoeffs {
    #[serde(deserialize_with = "complex_from_json")]
    pub B11: Complex64,
    #[serde(deserialize_with = "complex_from_json")]
    pub B21: Complex64,
    #[serde(deserialize_with = "complex_from_json")]
    pub B13: Complex64,
    #[serde(deserialize_with = "complex_from_json")]
    pub B23: Complex64,
    #[serde(deserialize_with = "complex_from_json")]
    pub B2100: Complex64,
    #[serde(deserialize_with = "complex_from_json")]
    pub B1011: Complex64,
    #[serde(deserialize_with = "complex_from_json")]
    pub B0021: Complex64,
    #[serde(deserialize_with = "complex_from_json")]
    pub B1110: Complex64,
}

impl NormalFormCoeffs {
    /// Real coefficients in the order B11, B21, B13, B23, B2100, B1011, B0021, B1110.
    pub fn from_real(b: [f64; 8]) -> Self {
        let c = |x: f64| Complex64::new(x, 0.0);
        NormalFormCoeffs {
            B11: c(b[0]),
            B21: c(b[1]),
            B13: c(b[2]),
            B23: c(b[3]),
            B2100: c(b[4]),
            B1011: c(b[5]),
            B0021: c(b[6]),
            B1110: c(b[7]),
        }
    }

    /// Coefficients at the double-Hopf point of the (c, p) = (0.25, 1.2) delayed system.
    pub fn reference_hh() -> Self {
        Self::from_real([-0.0512, 0.0478, 1.7736, -0.0706, -0.7294, -1.5826, -0.2410, -10.8681])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Linear map (sigma1, sigma2) -> (nu1, nu2) together with the cubic coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unfolding {
    pub map: [[f64; 2]; 2],
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub eps1: f64,
    pub eps2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnfoldingParams {
    pub nu1: f64,
    pub nu2: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub eps1: f64,
    pub eps2: f64,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

impl Unfolding {
    pub fn new(nf: &NormalFormCoeffs) -> Result<Self> {
        let (b2100, b0021) = (nf.B2100.re, nf.B0021.re);
        if b2100 == 0.0 || !b2100.is_finite() {
            return Err(Error::DegenerateRescale("Re B2100 = 0".into()));
        }
        if b0021 == 0.0 || !b0021.is_finite() {
            return Err(Error::DegenerateRescale("Re B0021 = 0".into()));
        }
        let eps1 = sign(b2100);
        let eps2 = sign(b0021);
        Ok(Unfolding {
            map: [[eps1 * nf.B11.re, eps1 * nf.B21.re], [eps1 * nf.B13.re, eps1 * nf.B23.re]],
            b: eps1 * eps2 * nf.B1011.re / b0021,
            c: nf.B1110.re / b2100,
            d: eps1 * eps2,
            eps1,
            eps2,
        })
    }

    pub fn nu(&self, sigma1: f64, sigma2: f64) -> (f64, f64) {
        let m = &self.map;
        (m[0][0] * sigma1 + m[0][1] * sigma2, m[1][0] * sigma1 + m[1][1] * sigma2)
    }

    pub fn at(&self, sigma1: f64, sigma2: f64) -> UnfoldingParams {
        let (nu1, nu2) = self.nu(sigma1, sigma2);
        self.with_nu(nu1, nu2)
    }

    pub fn with_nu(&self, nu1: f64, nu2: f64) -> UnfoldingParams {
        UnfoldingParams { nu1, nu2, b: self.b, c: self.c, d: self.d, eps1: self.eps1, eps2: self.eps2 }
    }

    /// Inverse of the sigma-to-nu map.
    pub fn sigma(&self, nu1: f64, nu2: f64) -> Result<(f64, f64)> {
        let m = &self.map;
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let scale = m.iter().flatten().fold(0.0_f64, |s, x| s.max(x.abs()));
        if det.abs() <= 1e-14 * scale * scale || !det.is_finite() {
            return Err(Error::SingularMap);
        }
        Ok(((m[1][1] * nu1 - m[0][1] * nu2) / det, (m[0][0] * nu2 - m[1][0] * nu1) / det))
    }
}

pub fn unfolding_from_coeffs(nf: &NormalFormCoeffs, sigma1: f64, sigma2: f64) -> Result<UnfoldingParams> {
    Ok(Unfolding::new(nf)?.at(sigma1, sigma2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchKind {
    Trivial,
    PureMode1,
    PureMode2,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeFixedPoint {
    pub r1: f64,
    pub r2: f64,
    pub kind: BranchKind,
    /// Jacobian eigenvalues of the amplitude system in its own time.
    pub eigenvalues: [(f64, f64); 2],
    /// Classification in the original time direction.
    pub classification: Classification,
    pub residual: f64,
}

impl AmplitudeFixedPoint {
    pub fn is_stable(&self) -> bool {
        self.classification.is_stable()
    }
}

pub fn amplitude_rhs(up: &UnfoldingParams, r1: f64, r2: f64) -> (f64, f64) {
    let (s1, s2) = (r1 * r1, r2 * r2);
    (r1 * (up.nu1 + s1 + up.b * s2), r2 * (up.nu2 + up.c * s1 + up.d * s2))
}

pub fn amplitude_jacobian(up: &UnfoldingParams, r1: f64, r2: f64) -> [[f64; 2]; 2] {
    let (s1, s2) = (r1 * r1, r2 * r2);
    [[up.nu1 + 3.0 * s1 + up.b * s2, 2.0 * up.b * r1 * r2], [2.0 * up.c * r1 * r2, up.nu2 + up.c * s1 + 3.0 * up.d * s2]]
}

fn eigenvalues(j: &[[f64; 2]; 2]) -> [(f64, f64); 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [(0.5 * (tr - s), 0.0), (0.5 * (tr + s), 0.0)]
    } else {
        let s = (-disc).sqrt();
        [(0.5 * tr, -0.5 * s), (0.5 * tr, 0.5 * s)]
    }
}

fn fixed_point(up: &UnfoldingParams, r1: f64, r2: f64, kind: BranchKind) -> AmplitudeFixedPoint {
    let j = amplitude_jacobian(up, r1, r2);
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let (f1, f2) = amplitude_rhs(up, r1, r2);
    AmplitudeFixedPoint {
        r1,
        r2,
        kind,
        eigenvalues: eigenvalues(&j),
        classification: classify_trace_det(up.eps1 * tr, det),
        residual: f1.abs().max(f2.abs()),
    }
}

pub fn amplitude_fixed_points(up: &UnfoldingParams) -> Vec<AmplitudeFixedPoint> {
    let mut out = vec![fixed_point(up, 0.0, 0.0, BranchKind::Trivial)];
    if up.nu1 < 0.0 {
        out.push(fixed_point(up, (-up.nu1).sqrt(), 0.0, BranchKind::PureMode1));
    }
    if up.nu2 / up.d < 0.0 {
        out.push(fixed_point(up, 0.0, (-up.nu2 / up.d).sqrt(), BranchKind::PureMode2));
    }
    let det = up.d - up.b * up.c;
    if det != 0.0 {
        let s1 = (-up.nu1 * up.d + up.b * up.nu2) / det;
        let s2 = (-up.nu2 + up.c * up.nu1) / det;
        if s1 > 0.0 && s2 > 0.0 {
            out.push(fixed_point(up, s1.sqrt(), s2.sqrt(), BranchKind::Mixed));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InventoryItem {
    pub kind: BranchKind,
    pub stable: bool,
}

pub fn inventory(up: &UnfoldingParams) -> Vec<InventoryItem> {
    amplitude_fixed_points(up).iter().map(|f| InventoryItem { kind: f.kind, stable: f.is_stable() }).collect()
}

/// Rectangle in (sigma1, sigma2) containing the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaWindow {
    pub sigma1: (f64, f64),
    pub sigma2: (f64, f64),
}

impl SigmaWindow {
    pub fn symmetric(h1: f64, h2: f64) -> Self {
        SigmaWindow { sigma1: (-h1, h1), sigma2: (-h2, h2) }
    }

    fn exit_point(&self, angle: f64) -> (f64, f64) {
        let (dx, dy) = (angle.cos(), angle.sin());
        let mut t = f64::INFINITY;
        if dx > 0.0 {
            t = t.min(self.sigma1.1 / dx);
        } else if dx < 0.0 {
            t = t.min(self.sigma1.0 / dx);
        }
        if dy > 0.0 {
            t = t.min(self.sigma2.1 / dy);
        } else if dy < 0.0 {
            t = t.min(self.sigma2.0 / dy);
        }
        (t * dx, t * dy)
    }
}

/// Critical line or ray through the origin in nu-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    /// nu1 = 0: Hopf of mode 1 from the trivial point.
    Nu1Zero,
    /// nu2 = 0: Hopf of mode 2 from the trivial point.
    Nu2Zero,
    /// nu2 = c nu1 with nu1 < 0: mixed branch leaves the mode-1 point.
    Mode1Exchange,
    /// nu1 = b nu2 / d with nu2 / d < 0: mixed branch leaves the mode-2 point.
    Mode2Exchange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRay {
    pub kind: BoundaryKind,
    /// Angle of the ray in the sigma plane, in [0, 2 pi).
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub label: String,
    pub angle_lo: f64,
    pub angle_hi: f64,
    pub sample: (f64, f64),
    pub inventory: Vec<InventoryItem>,
    /// Sector clipped to the window, counterclockwise from the origin.
    pub polygon: Vec<(f64, f64)>,
}

impl Region {
    pub fn stable_count(&self) -> usize {
        self.inventory.iter().filter(|i| i.stable).count()
    }

    pub fn contains(&self, sigma1: f64, sigma2: f64) -> bool {
        let a = sigma2.atan2(sigma1).rem_euclid(2.0 * PI);
        let hi = if self.angle_hi > self.angle_lo { self.angle_hi } else { self.angle_hi + 2.0 * PI };
        let a = if a < self.angle_lo { a + 2.0 * PI } else { a };
        a > self.angle_lo && a < hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationSet {
    pub unfolding: Unfolding,
    pub window: SigmaWindow,
    pub boundaries: Vec<BoundaryRay>,
    pub regions: Vec<Region>,
}

impl BifurcationSet {
    pub fn region_at(&self, sigma1: f64, sigma2: f64) -> Option<&Region> {
        self.regions.iter().find(|r| r.contains(sigma1, sigma2))
    }
}

fn ray_angle(un: &Unfolding, nu1: f64, nu2: f64) -> Result<f64> {
    let (s1, s2) = un.sigma(nu1, nu2)?;
    Ok(s2.atan2(s1).rem_euclid(2.0 * PI))
}

/// Sector partition of the sigma plane. Regions are numbered counterclockwise
/// starting from the one where the trivial point is the only fixed point and is stable.
pub fn bifurcation_set(un: &Unfolding, window: SigmaWindow) -> Result<BifurcationSet> {
    un.sigma(1.0, 0.0)?;
    if !(window.sigma1.0 < 0.0 && window.sigma1.1 > 0.0 && window.sigma2.0 < 0.0 && window.sigma2.1 > 0.0) {
        return Err(Error::InvalidParams("sigma window must contain the origin".into()));
    }
    let mut rays = vec![
        BoundaryRay { kind: BoundaryKind::Nu1Zero, angle: ray_angle(un, 0.0, 1.0)? },
        BoundaryRay { kind: BoundaryKind::Nu1Zero, angle: ray_angle(un, 0.0, -1.0)? },
        BoundaryRay { kind: BoundaryKind::Nu2Zero, angle: ray_angle(un, 1.0, 0.0)? },
        BoundaryRay { kind: BoundaryKind::Nu2Zero, angle: ray_angle(un, -1.0, 0.0)? },
        BoundaryRay { kind: BoundaryKind::Mode1Exchange, angle: ray_angle(un, -1.0, -un.c)? },
        BoundaryRay { kind: BoundaryKind::Mode2Exchange, angle: ray_angle(un, -un.b, -un.d)? },
    ];
    rays.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    rays.dedup_by(|a, b| (a.angle - b.angle).abs() < 1e-12);

    let corners = [
        (window.sigma1.1, window.sigma2.1),
        (window.sigma1.0, window.sigma2.1),
        (window.sigma1.0, window.sigma2.0),
        (window.sigma1.1, window.sigma2.0),
    ];
    let k = rays.len();
    let mut regions = Vec::with_capacity(k);
    for i in 0..k {
        let lo = rays[i].angle;
        let hi = if i + 1 < k { rays[i + 1].angle } else { rays[0].angle + 2.0 * PI };
        let mid = 0.5 * (lo + hi);
        let (ex, ey) = window.exit_point(mid);
        let sample = (0.5 * ex, 0.5 * ey);
        let inv = inventory(&un.at(sample.0, sample.1));
        let mut polygon = vec![(0.0, 0.0), window.exit_point(lo)];
        let mut corner_list: Vec<(f64, (f64, f64))> = corners
            .iter()
            .map(|&c| {
                let a = c.1.atan2(c.0).rem_euclid(2.0 * PI);
                (if a < lo { a + 2.0 * PI } else { a }, c)
            })
            .filter(|(a, _)| *a > lo && *a < hi)
            .collect();
        corner_list.sort_by(|a, b| a.0.total_cmp(&b.0));
        polygon.extend(corner_list.into_iter().map(|(_, c)| c));
        polygon.push(window.exit_point(hi));
        regions.push(Region { label: String::new(), angle_lo: lo, angle_hi: hi.rem_euclid(2.0 * PI), sample, inventory: inv, polygon });
    }
    let start = regions.iter().position(|r| r.inventory.len() == 1 && r.inventory[0].stable).unwrap_or(0);
    regions.rotate_left(start);
    for (i, r) in regions.iter_mut().enumerate() {
        r.label = format!("D{}", i + 1);
    }
    Ok(BifurcationSet { unfolding: *un, window, boundaries: rays, regions })
}
