mod common;

use common::{front_camera, look, phantom};
use isoscope::enhance::{EnhanceParams, DEFAULT_DEEP_MAX_STEPS};
use isoscope::fvr::FvrOptions;
use isoscope::raycast::pixel_ray;
use isoscope::{
    accumulate_color, build_speed_color_map, intersect_isosurface, lookup_color, rate_deep, rate_shallow, render_fvr,
    CropBounds, LocalTransferFunction, RateMode, Rgb, SyntheticKind, TfEntry, TransferFunctionSpec, TransitionalTF1D,
    Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Front-to-back compositing of the transitional section cut into `subs`
/// equal slabs. `std` is the length over which an entry's alpha is defined;
/// at `speed` the section spans `std / speed`.
fn brute_composite(tf: &LocalTransferFunction, speed: f64, subs: usize) -> Rgb {
    let n = tf.len();
    let slab = 1.0 / (speed * subs as f64);
    let mut color = [0.0; 3];
    let mut alpha = 0.0;
    for k in 0..subs {
        let e = tf.entries[k * n / subs];
        let a = 1.0 - (1.0 - e.alpha).powf(slab);
        let w = (1.0 - alpha) * a;
        for c in 0..3 {
            color[c] += w * e.rgb[c];
        }
        alpha += w;
    }
    color
}

fn random_tf(rng: &mut ChaCha8Rng, n: usize) -> LocalTransferFunction {
    let mut entries: Vec<TfEntry> = (0..n)
        .map(|_| TfEntry { alpha: rng.random_range(0.05..0.95), rgb: std::array::from_fn(|_| rng.random_range(0.0..1.0)) })
        .collect();
    entries.last_mut().unwrap().alpha = 1.0;
    LocalTransferFunction::new(entries).unwrap()
}

#[test]
fn accumulation_matches_fine_compositing() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let tf = random_tf(&mut rng, 4);
        for speed in [0.7, 0.2, 1.0, 3.5] {
            let closed = accumulate_color(&tf, speed);
            let brute = brute_composite(&tf, speed, 4096);
            for c in 0..3 {
                assert!(
                    (closed[c] - brute[c]).abs() <= 2.0 / 255.0,
                    "speed {speed}: {closed:?} vs {brute:?}"
                );
            }
        }
    }
}

#[test]
fn red_weight_grows_with_speed_for_blue_to_red() {
    let tf = LocalTransferFunction::gradient([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 8);
    let mut prev = -1.0;
    for k in 0..200 {
        let speed = 0.05 * 1.05f64.powi(k);
        let red = accumulate_color(&tf, speed)[0];
        assert!(red >= prev - 1e-12, "red fell at speed {speed}");
        prev = red;
    }
}

#[test]
fn lookup_reproduces_map_entries() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tf = random_tf(&mut rng, 6);
    let map = build_speed_color_map(&tf, 256);
    for j in 1..=map.m() {
        let s = map.speed_of(j);
        assert_eq!(lookup_color(&map, s), map.entry(j));
        assert_eq!(map.entry(j), accumulate_color(&tf, s));
    }
}

#[test]
fn shallow_rate_is_gradient_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100_000 {
        let g = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let d = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if d.length() < 1e-3 || g.length() < 1e-3 {
            continue;
        }
        let d = d.normalized();
        let cos = g.dot(d) / g.length();
        let expect = (g.length() * cos).abs();
        if expect < 1e-5 {
            continue;
        }
        assert!((rate_shallow(g, d) - expect).abs() < 1e-12);
    }
}

#[test]
fn deep_rate_sees_through_a_thin_shell() {
    let (vol, _) = phantom(SyntheticKind::ShellWithInclusions, 96);
    let iso = 0.3;
    let params = EnhanceParams {
        isovalue: iso,
        delta_v: 0.5,
        std_sample_distance: vol.spacing().x,
        mode: RateMode::Deep,
        deep_step: 0.5 * vol.spacing().x,
        deep_max_steps: DEFAULT_DEEP_MAX_STEPS,
    };
    let cam = front_camera(48, 48);
    let crop = CropBounds::for_volume(&vol);
    let (mut hits, mut much_slower) = (0, 0);
    for y in 0..48 {
        for x in 0..48 {
            let ray = pixel_ray(&cam, x, y);
            let Some(h) = intersect_isosurface(&ray, &vol, iso, &crop, 0) else { continue };
            hits += 1;
            let shallow = rate_shallow(vol.gradient_central(h.position), ray.dir);
            let deep = rate_deep(&vol, h.position, &ray, &params);
            if deep < 0.2 * shallow {
                much_slower += 1;
            }
        }
    }
    assert!(hits > 500);
    assert!(much_slower as f64 > 0.9 * hits as f64, "{much_slower} of {hits}");
}

#[test]
fn fvr_of_a_ramp_is_the_accumulated_color() {
    let (vol, _) = phantom(SyntheticKind::Ramp, 48);
    let std = 0.25 * vol.spacing().x;
    let spec = TransferFunctionSpec::example(0.5, std);
    let tf = TransitionalTF1D::from_spec(&spec).unwrap();
    // Ramp along z with unit slope; the eye looks straight down the axis.
    let cam = look([0.5, 0.5, -2.0], [0.5, 0.5, 0.5], 8.0, 32, 32);
    let img = render_fvr(&vol, &cam, &tf, 0.25 * std, &CropBounds::for_volume(&vol), &FvrOptions::default());
    let params = spec.params_for(&vol).unwrap();
    let dir = pixel_ray(&cam, 16, 16).dir;
    let speed = params.speed(dir.z.abs());
    let expect = accumulate_color(&spec.local_tf().unwrap(), speed);
    for y in 0..32 {
        for x in 0..32 {
            let got = img.get(x, y);
            let ray = pixel_ray(&cam, x, y);
            let px_expect = accumulate_color(&spec.local_tf().unwrap(), params.speed(ray.dir.z.abs()));
            for c in 0..3 {
                assert!((got[c] - px_expect[c]).abs() <= 3.0 / 255.0, "({x},{y}) {got:?} vs {px_expect:?}");
                assert!((got[c] - expect[c]).abs() <= 3.0 / 255.0, "plane is not flat at ({x},{y})");
            }
        }
    }
}
