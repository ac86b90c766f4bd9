use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smoothrace::metrics::{amplitude_spectrum, smoothness};
use smoothrace::regularizers::{combine_penalty, ir_weight};
use smoothrace::simulator::{advance, make_track, place_at, ActionCmd, Observation, TrackPreset, DEFAULT_DT};
use smoothrace::transforms::{
    apply_geometric, apply_photometric, rand_conv, TransformParams, ALL_GEOMETRIC, ALL_PHOTOMETRIC,
};

fn image() -> impl Strategy<Value = Observation> {
    (2usize..20, 2usize..20).prop_flat_map(|(w, h)| {
        prop::collection::vec(0.0f32..=1.0, w * h).prop_map(move |px| Observation::new(w, h, px).unwrap())
    })
}

proptest! {
    #[test]
    fn ir_weight_is_bounded_by_its_inputs(s in 0.0f64..=1.0, r in 0.0f64..=1.0) {
        let w = ir_weight(s, r).unwrap();
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!(w >= s.min(r) - 1e-12 && w <= s.max(r) + 1e-12);
        prop_assert!((w * w - s * r).abs() < 1e-12);
    }

    #[test]
    fn unit_ir_weights_match_the_plain_penalty(
        rows in prop::collection::vec((0.0f64..2.0, 0.0f64..2.0), 1..40),
        lt in 0.0f64..5.0,
        ls in 0.0f64..5.0,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        let ones = vec![1.0; a.len()];
        let plain = combine_penalty(&a, &b, lt, ls, None).unwrap();
        let weighted = combine_penalty(&a, &b, lt, ls, Some(&ones)).unwrap();
        prop_assert!((plain - weighted).abs() <= 1e-12 * (1.0 + plain));
        prop_assert!(plain >= 0.0);
    }

    #[test]
    fn transforms_keep_shape_and_range(img in image(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = TransformParams::default();
        for kind in ALL_PHOTOMETRIC {
            let out = apply_photometric(&img, kind, &p, &mut rng).unwrap();
            prop_assert!(out.same_size(&img) && out.in_unit_range());
        }
        for kind in ALL_GEOMETRIC {
            let out = apply_geometric(&img, kind, &p, &mut rng);
            prop_assert!(out.same_size(&img) && out.in_unit_range());
        }
        let out = rand_conv(&img, &mut rng, &p.randconv_kernels).unwrap();
        prop_assert!(out.same_size(&img) && out.in_unit_range());
    }

    #[test]
    fn smoothness_is_shift_invariant_and_scales(
        x in prop::collection::vec(-1.0f64..1.0, 2..80),
        offset in -3.0f64..3.0,
        k in -4.0f64..4.0,
    ) {
        let base = smoothness(&x, 30.0).unwrap();
        let moved: Vec<f64> = x.iter().map(|v| v + offset).collect();
        let scaled: Vec<f64> = x.iter().map(|v| k * v).collect();
        prop_assert!((smoothness(&moved, 30.0).unwrap() - base).abs() < 1e-9);
        prop_assert!((smoothness(&scaled, 30.0).unwrap() - k.abs() * base).abs() < 1e-9);
        let s = amplitude_spectrum(&x, 30.0).unwrap();
        prop_assert_eq!(s.amplitudes.len(), x.len() / 2 + 1);
        prop_assert!(s.amplitudes.iter().all(|m| *m >= 0.0));
    }

    #[test]
    fn reward_stays_in_unit_interval(
        s0 in 0.0f64..1.0,
        actions in prop::collection::vec((-1.0f64..=1.0, -1.0f64..=1.0), 1..200),
    ) {
        let track = make_track(TrackPreset::SCurve, 0.6).unwrap();
        let mut state = place_at(&track, s0 * track.length());
        for (steer, speed) in actions {
            let (next, r, term) = advance(&track, &state, ActionCmd::new(steer, speed), DEFAULT_DT).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            if term.is_done() {
                break;
            }
            state = next;
        }
    }
}
