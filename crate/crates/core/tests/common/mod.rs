#![allow(dead_code)]

use isoscope::{generate_synthetic, Camera, ScalarVolume, SyntheticKind, SyntheticSpec, Vec3};

pub fn phantom(kind: SyntheticKind, n: usize) -> (ScalarVolume, Vec<f64>) {
    let spec = SyntheticSpec::cube(kind, n);
    let params = spec.resolved_params().unwrap();
    (generate_synthetic(&spec).unwrap(), params)
}

pub fn look(eye: [f64; 3], at: [f64; 3], vfov: f64, w: u32, h: u32) -> Camera {
    Camera { eye: Vec3::from(eye), look_at: Vec3::from(at), up: Vec3::new(0.0, 1.0, 0.0), vfov_deg: vfov, image_dims: [w, h] }
}

pub fn front_camera(w: u32, h: u32) -> Camera {
    look([0.5, 0.5, 2.6], [0.5, 0.5, 0.5], 30.0, w, h)
}

pub fn max_channel_diff(a: &[u8], b: &[u8]) -> u8 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0)
}
