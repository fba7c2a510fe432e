mod common;

use common::phantom;
use isoscope::isoseg::shared_face;
use isoscope::volume::Dtype;
use isoscope::{face_contour_length, ScalarVolume, SyntheticKind, Vec3, VolumeMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn sphere_gradient_points_radially() {
    let (vol, p) = phantom(SyntheticKind::Sphere, 64);
    let c = Vec3::new(p[0], p[1], p[2]);
    let r = p[3];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let d = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if d.length() < 1e-3 {
            continue;
        }
        let n = d.normalized();
        let g = vol.gradient_central(c + n * r);
        // Density falls outward, so the gradient points at the centre.
        let cos = (-g.normalized()).dot(n).clamp(-1.0, 1.0);
        worst = worst.max(cos.acos().to_degrees());
    }
    assert!(worst < 2.0, "worst gradient deviation {worst} deg");
}

#[test]
fn linear_field_has_constant_gradient() {
    let dims = [9, 7, 5];
    let spacing = [0.5, 0.25, 1.0];
    let a = [0.02, 0.05, 0.03];
    let mut data = Vec::new();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                data.push(0.1 + a[0] * i as f64 * spacing[0] + a[1] * j as f64 * spacing[1] + a[2] * k as f64 * spacing[2]);
            }
        }
    }
    let meta = VolumeMeta { dims, spacing, source_dtype: Dtype::F32Le, value_range: [0.0, 1.0] };
    let vol = ScalarVolume::from_normalized(meta, data).unwrap();
    let ext = vol.extent();
    let s = vol.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        // Stay one step inside so the central difference never clamps.
        let p = Vec3::new(
            rng.random_range(s.x..ext.x - s.x),
            rng.random_range(s.y..ext.y - s.y),
            rng.random_range(s.z..ext.z - s.z),
        );
        let g = vol.gradient_central(p);
        for ax in 0..3 {
            assert!((g[ax] - a[ax]).abs() < 1e-9, "axis {ax}: {} vs {}", g[ax], a[ax]);
        }
    }
}

#[test]
fn sphere_area_from_face_contours() {
    let (vol, p) = phantom(SyntheticKind::Sphere, 128);
    let r = p[3];
    let s = vol.spacing();
    let cd = vol.cell_dims();
    let mut sum = 0.0;
    for k in 0..cd[2] {
        for j in 0..cd[1] {
            for i in 0..cd[0] {
                for axis in 0..3 {
                    let (face, fd) = shared_face(&vol, [i, j, k], axis);
                    sum += face_contour_length(&face, 0.5, fd) * s[axis];
                }
            }
        }
    }
    // Summed slice perimeters over the three axis families, isotropic
    // surface: each family integrates to area * pi / 4.
    let area = sum * 4.0 / (3.0 * std::f64::consts::PI);
    let exact = 4.0 * std::f64::consts::PI * r * r;
    let rel = (area - exact).abs() / exact;
    assert!(rel < 0.05, "area {area} vs {exact} ({:.2}%)", rel * 100.0);
}

#[test]
fn phantoms_are_normalized() {
    for kind in SyntheticKind::ALL {
        let (vol, _) = phantom(kind, 24);
        assert!(vol.data().iter().all(|v| (0.0..=1.0).contains(v)), "{kind:?}");
        assert_eq!(vol.dims(), [24; 3]);
    }
}
