mod common;

use common::ray;
use mmray::channel::jadpp;
use mmray::cluster::{doppler, Angles};
use mmray::em::{fresnel_coefficients, WaveContext};
use mmray::fixtures::{random_clear_point, random_walls};
use mmray::geometry::{DigitalMap, Vec2, Vec3};
use mmray::scenario::trajectory_from_waypoints;
use mmray::tracer::{associate_paths, fsbr_trace, TracerConfig};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit(az: f64, el: f64) -> Vec3 {
    Vec3::from_angles(az, el)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fresnel_magnitudes_never_exceed_one(theta in 1e-6f64..=std::f64::consts::FRAC_PI_2, eps in 1.0001f64..80.0) {
        let (par, perp) = fresnel_coefficients(theta, eps).unwrap();
        prop_assert!(par.norm() <= 1.0 + 1e-12 && perp.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn doppler_is_bounded_by_the_speed(speed in 0.0f64..40.0, vaz in -3.2f64..3.2, vel in -1.5f64..1.5, az in -3.2f64..3.2, el in -1.5f64..1.5) {
        let ctx = WaveContext::new(28e9).unwrap();
        let v = unit(vaz, vel) * speed;
        let nu = doppler(v, unit(az, el), &ctx);
        let bound = 28e9 * speed / mmray::SPEED_OF_LIGHT;
        prop_assert!(nu.abs() <= bound * (1.0 + 1e-12));
        let parallel = doppler(v, unit(vaz, vel), &ctx);
        prop_assert!((parallel - bound).abs() <= 1e-9 * (1.0 + bound));
    }

    #[test]
    fn reflection_paths_obey_the_mirror_law(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_walls(seed, 8, 60.0);
        let bs = random_clear_point(&mut rng, &map, 60.0, 0.1);
        let ue = random_clear_point(&mut rng, &map, 60.0, 0.1);
        let mut cfg = TracerConfig::new(Vec3::new(bs.x, bs.y, 10.0));
        cfg.max_bounce = 2;
        let rays = fsbr_trace(&map, &cfg);
        for path in associate_paths(&rays, Vec3::new(ue.x, ue.y, 1.5), &map, &cfg) {
            for (k, id) in path.surfaces.iter().enumerate() {
                let wall = map.surface(*id).unwrap();
                let (a, p, b) = (path.vertices[k], path.vertices[k + 1], path.vertices[k + 2]);
                let along = (p - wall.p1).cross(wall.p2 - wall.p1).abs() / wall.length();
                prop_assert!(along < 1e-9, "vertex off its wall by {along}");
                let incoming = (p - a).normalized();
                let outgoing = (b - p).normalized();
                prop_assert!((wall.reflect_dir(incoming) - outgoing).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn trajectory_samples_are_evenly_spaced(
        pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..5),
        speed in 0.5f64..5.0,
        interval in 0.05f64..1.0,
    ) {
        let points: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        prop_assume!(points.windows(2).all(|w| w[0].distance(w[1]) > 1e-3));
        let states = trajectory_from_waypoints(&points, 1.5, speed, interval).unwrap();
        let length: f64 = points.windows(2).map(|w| w[0].distance(w[1])).sum();
        let step = speed * interval;
        prop_assert_eq!(states.len(), (length / step + 1e-9).floor() as usize + 1);
        for w in states.windows(2) {
            prop_assert!(w[0].position.distance(w[1].position) <= step + 1e-9);
            prop_assert!((w[1].time - w[0].time - interval).abs() < 1e-9);
            prop_assert!((w[0].velocity.norm() - speed).abs() < 1e-9);
        }
    }

    #[test]
    fn map_json_round_trips(seed in 0u64..500, count in 1usize..25) {
        let map = random_walls(seed, count, 80.0);
        let back = DigitalMap::from_json_str(&map.to_json_string()).unwrap();
        prop_assert_eq!(&back.surfaces, &map.surfaces);
        prop_assert_eq!(back.summary(), map.summary());
    }

    #[test]
    fn jadpp_keeps_all_power(rays in prop::collection::vec((1e-9f64..1e-6, -std::f64::consts::PI..std::f64::consts::PI, 1e-8f64..1e-3), 1..60)) {
        let subrays: Vec<_> = rays
            .iter()
            .map(|&(delay, az, amp)| {
                let mut r = ray(Complex64::new(amp, 0.0), delay, 0.0);
                r.doa = Angles { azimuth: az, elevation: 0.0 };
                r
            })
            .collect();
        let map = jadpp(&subrays, 36, 20).unwrap();
        let total: f64 = subrays.iter().map(|r| r.power()).sum();
        prop_assert!((map.total() - total).abs() <= 1e-12 * total);
    }
}
