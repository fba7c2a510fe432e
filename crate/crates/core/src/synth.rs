//! Deterministic test phantoms.
//!
//! Phantoms use isotropic spacing `1 / (max(dims) − 1)`, so the longest axis
//! spans one world unit. Solid shapes are described by a signed distance `d`
//! (negative inside) mapped to `0.5·(1 − tanh(d / w))`; the 0.5 isosurface
//! therefore sits exactly on the analytic shape. `w` is 2.5 grid steps.
//!
//! Parameter lists are in world units; an empty list selects the defaults
//! documented on [`SyntheticKind`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::volume::{Dtype, ScalarVolume, VolumeMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SyntheticKind {
    /// `[cx, cy, cz, r]`; default centred, `r = 0.3·min extent`.
    Sphere,
    /// `[c1x, c1y, c1z, r1, c2x, c2y, c2z, r2]`; default two separated spheres along x.
    TwoSpheres,
    /// `[c1x, c1y, c1z, c2x, c2y, c2z, r, neck_r]`; two spheres joined by a cylinder.
    Dumbbell,
    /// `[axis]`; `v = coord / extent` along `axis` (default z).
    Ramp,
    /// `[cx, cy, cz, r_outer, r_inner]`; hollow thick shell whose outer and
    /// inner boundaries are two concentric 0.5-isosurfaces.
    NestedSpheres,
    /// `[cx, cy, cz, r_outer, thickness, shell_density, (ix, iy, iz, ir, idensity)*]`;
    /// a thin shell of reduced density over a cavity holding dense inclusions.
    ShellWithInclusions,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 6] = [
        SyntheticKind::Sphere,
        SyntheticKind::TwoSpheres,
        SyntheticKind::Dumbbell,
        SyntheticKind::Ramp,
        SyntheticKind::NestedSpheres,
        SyntheticKind::ShellWithInclusions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Sphere => "sphere",
            SyntheticKind::TwoSpheres => "two-spheres",
            SyntheticKind::Dumbbell => "dumbbell",
            SyntheticKind::Ramp => "ramp",
            SyntheticKind::NestedSpheres => "nested-spheres",
            SyntheticKind::ShellWithInclusions => "shell-with-inclusions",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SyntheticKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown synthetic kind '{s}'")))
    }
}

impl TryFrom<String> for SyntheticKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SyntheticKind> for String {
    fn from(k: SyntheticKind) -> String {
        k.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub dims: [usize; 3],
    #[serde(default)]
    pub params: Vec<f64>,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, dims: [usize; 3]) -> Self {
        SyntheticSpec { kind, dims, params: Vec::new() }
    }

    pub fn cube(kind: SyntheticKind, n: usize) -> Self {
        Self::new(kind, [n; 3])
    }

    pub fn with_params(mut self, params: Vec<f64>) -> Self {
        self.params = params;
        self
    }

    /// Grid spacing used for this spec's phantom.
    pub fn spacing(&self) -> f64 {
        1.0 / (*self.dims.iter().max().unwrap_or(&2) - 1).max(1) as f64
    }

    pub fn extent(&self) -> Vec3 {
        let h = self.spacing();
        Vec3::new(
            (self.dims[0].max(2) - 1) as f64 * h,
            (self.dims[1].max(2) - 1) as f64 * h,
            (self.dims[2].max(2) - 1) as f64 * h,
        )
    }

    /// Smoothing width of the tanh profile.
    pub fn edge_width(&self) -> f64 {
        2.5 * self.spacing()
    }

    /// Resolved shape parameters, defaults filled in.
    pub fn resolved_params(&self) -> Result<Vec<f64>> {
        let e = self.extent();
        let c = e * 0.5;
        let m = e.x.min(e.y).min(e.z);
        let (expected, default): (&[usize], Vec<f64>) = match self.kind {
            SyntheticKind::Sphere => (&[4], vec![c.x, c.y, c.z, 0.3 * m]),
            SyntheticKind::TwoSpheres => (
                &[8],
                vec![c.x - 0.22 * e.x, c.y, c.z, 0.16 * m, c.x + 0.22 * e.x, c.y, c.z, 0.16 * m],
            ),
            SyntheticKind::Dumbbell => (
                &[8],
                vec![c.x - 0.25 * e.x, c.y, c.z, c.x + 0.25 * e.x, c.y, c.z, 0.17 * m, 0.06 * m],
            ),
            SyntheticKind::Ramp => (&[1], vec![2.0]),
            SyntheticKind::NestedSpheres => (&[5], vec![c.x, c.y, c.z, 0.35 * m, 0.2 * m]),
            SyntheticKind::ShellWithInclusions => (
                &[],
                vec![
                    c.x, c.y, c.z, 0.38 * m, 0.04 * m, 0.7,
                    c.x - 0.12 * m, c.y, c.z, 0.08 * m, 1.0,
                    c.x + 0.12 * m, c.y + 0.05 * m, c.z, 0.06 * m, 0.9,
                ],
            ),
        };
        if self.params.is_empty() {
            return Ok(default);
        }
        let ok = match self.kind {
            SyntheticKind::ShellWithInclusions => {
                self.params.len() >= 6 && (self.params.len() - 6) % 5 == 0
            }
            _ => expected.contains(&self.params.len()),
        };
        if !ok || self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config(format!(
                "{} expects {} parameters, got {:?}",
                self.kind,
                match self.kind {
                    SyntheticKind::ShellWithInclusions => "6 + 5k".to_string(),
                    _ => expected[0].to_string(),
                },
                self.params
            )));
        }
        if self.kind == SyntheticKind::Ramp && !(0.0..3.0).contains(&self.params[0]) {
            return Err(Error::Config(format!("ramp axis must be 0, 1 or 2, got {}", self.params[0])));
        }
        Ok(self.params.clone())
    }
}

/// Maps a signed distance (negative inside) onto `(0, 1)` with the 0.5 level
/// on the zero set.
#[inline]
pub fn smooth_inside(sdf: f64, width: f64) -> f64 {
    0.5 * (1.0 - (sdf / width).tanh())
}

/// Scalar field of a phantom at a world position. Exposed so tests can
/// compare against the analytic generating function.
pub fn field_value(kind: SyntheticKind, params: &[f64], width: f64, extent: Vec3, p: Vec3) -> f64 {
    let v3 = |i: usize| Vec3::new(params[i], params[i + 1], params[i + 2]);
    match kind {
        SyntheticKind::Sphere => smooth_inside((p - v3(0)).length() - params[3], width),
        SyntheticKind::TwoSpheres => {
            let a = (p - v3(0)).length() - params[3];
            let b = (p - v3(4)).length() - params[7];
            smooth_inside(a.min(b), width)
        }
        SyntheticKind::Dumbbell => {
            let (c1, c2) = (v3(0), v3(3));
            let (r, neck) = (params[6], params[7]);
            let a = (p - c1).length() - r;
            let b = (p - c2).length() - r;
            smooth_inside(a.min(b).min(capsule_sdf(p, c1, c2, neck)), width)
        }
        SyntheticKind::Ramp => {
            let axis = params[0] as usize;
            (p[axis] / extent[axis]).clamp(0.0, 1.0)
        }
        SyntheticKind::NestedSpheres => {
            let d = (p - v3(0)).length();
            let shell = (d - params[3]).max(params[4] - d);
            smooth_inside(shell, width)
        }
        SyntheticKind::ShellWithInclusions => {
            let d = (p - v3(0)).length();
            let (r_outer, thick, density) = (params[3], params[4], params[5]);
            let shell = (d - r_outer).max(r_outer - thick - d);
            let mut v = density * smooth_inside(shell, width);
            for inc in params[6..].chunks_exact(5) {
                let c = Vec3::new(inc[0], inc[1], inc[2]);
                v = v.max(inc[4] * smooth_inside((p - c).length() - inc[3], width));
            }
            v.clamp(0.0, 1.0)
        }
    }
}

/// Distance to a cylinder of radius `r` between `a` and `b` (finite, flat caps
/// replaced by the segment distance, i.e. a capsule).
fn capsule_sdf(p: Vec3, a: Vec3, b: Vec3, r: f64) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    (p - (a + ab * t)).length() - r
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<ScalarVolume> {
    let dims = spec.dims;
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::Config(format!("dims must be >= 2 per axis, got {dims:?}")));
    }
    let params = spec.resolved_params()?;
    let h = spec.spacing();
    let width = spec.edge_width();
    let extent = spec.extent();
    let plane = dims[0] * dims[1];
    let mut data = vec![0.0; plane * dims[2]];
    data.par_chunks_mut(plane).enumerate().for_each(|(k, slab)| {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let p = Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h);
                slab[i + j * dims[0]] = field_value(spec.kind, &params, width, extent, p);
            }
        }
    });
    let meta = VolumeMeta {
        dims,
        spacing: [h; 3],
        source_dtype: Dtype::F32Le,
        value_range: [0.0, 1.0],
    };
    ScalarVolume::from_normalized(meta, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_matches_definition() {
        let v = generate_synthetic(&SyntheticSpec::cube(SyntheticKind::Ramp, 16)).unwrap();
        for k in 0..16 {
            for j in 0..16 {
                for i in 0..16 {
                    assert!((v.value(i, j, k) - k as f64 / 15.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn unknown_kind_is_config_error() {
        let err = "torus".parse::<SyntheticKind>().unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let json = r#"{"kind":"torus","dims":[8,8,8]}"#;
        assert!(serde_json::from_str::<SyntheticSpec>(json).is_err());
    }

    #[test]
    fn wrong_param_count_rejected() {
        let spec = SyntheticSpec::cube(SyntheticKind::Sphere, 8).with_params(vec![0.5, 0.5]);
        assert!(matches!(generate_synthetic(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_and_bounded() {
        for kind in SyntheticKind::ALL {
            let spec = SyntheticSpec::cube(kind, 24);
            let a = generate_synthetic(&spec).unwrap();
            let b = generate_synthetic(&spec).unwrap();
            assert_eq!(a.data(), b.data(), "{kind}");
            assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)), "{kind}");
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in SyntheticKind::ALL {
            assert_eq!(kind.name().parse::<SyntheticKind>().unwrap(), kind);
        }
    }
}
