mod common;

use proptest::prelude::*;
use segprop_core::eval::{
    ablation_against_ground_truth, ablation_propagation_length, confusion, evaluate_frames, format_score,
};
use segprop_core::segprop::{PropagationConfig, Propagator};
use segprop_core::synth::{render_scene, SceneSpec};
use segprop_core::LabelMap;

fn pair_strategy() -> impl Strategy<Value = (LabelMap, LabelMap)> {
    (1u8..6, any::<u64>()).prop_map(|(c, seed)| {
        let mut r = common::rng(seed);
        (
            common::random_labels(32, 32, 0, c, &mut r),
            common::random_labels(32, 32, 0, c, &mut r),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn confusion_matches_double_loop((pred, gt) in pair_strategy()) {
        let m = confusion(&pred, &gt, 6).unwrap();
        prop_assert_eq!(m.total(), 32 * 32);
        for g in 0..6 {
            for p in 0..6 {
                let mut n = 0;
                for y in 0..32 {
                    for x in 0..32 {
                        n += u64::from(gt.get(x, y) as usize == g && pred.get(x, y) as usize == p);
                    }
                }
                prop_assert_eq!(m.get(g, p), n);
            }
        }
    }

    #[test]
    fn mean_f_ignores_class_names((pred, gt) in pair_strategy(), shuffle in Just(()).prop_perturb(|_, mut r| {
        let mut perm: Vec<u8> = (0..12).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, (r.next_u32() as usize) % (i + 1));
        }
        perm
    })) {
        let relabel = |l: &LabelMap| {
            LabelMap::from_vec(32, 32, 0, l.as_slice().iter().map(|&c| shuffle[c as usize]).collect()).unwrap()
        };
        let a = confusion(&pred, &gt, 12).unwrap().mean_f();
        let b = confusion(&relabel(&pred), &relabel(&gt), 12).unwrap().mean_f();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn swapping_roles_swaps_precision_and_recall((pred, gt) in pair_strategy()) {
        let forward = confusion(&pred, &gt, 6).unwrap();
        let swapped = confusion(&gt, &pred, 6).unwrap();
        for c in 0..6 {
            prop_assert_eq!(forward.precision(c), swapped.recall(c));
            prop_assert_eq!(forward.recall(c), swapped.precision(c));
            prop_assert_eq!(forward.f_measure(c), swapped.f_measure(c));
            let f = forward.f_measure(c);
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}

#[test]
fn identical_maps_score_perfectly() {
    let mut r = common::rng(3);
    let l = common::blob_labels(20, 20, 0, 5, 8, &mut r);
    let m = confusion(&l, &l, 5).unwrap();
    for g in 0..5 {
        for p in 0..5 {
            if g != p {
                assert_eq!(m.get(g, p), 0);
            }
        }
    }
    let report = evaluate_frames(&[(&l, &l)], 5).unwrap();
    assert_eq!(report.mean_f, 1.0);
    assert_eq!(report.pooled_mean_f, 1.0);
}

#[test]
fn a_missed_class_scores_zero_and_counts() {
    // Ground truth has classes 0 and 3; class 3 is never predicted.
    let gt = LabelMap::from_vec(4, 1, 0, vec![0, 0, 3, 3]).unwrap();
    let pred = LabelMap::filled(4, 1, 0, 0);
    let m = confusion(&pred, &gt, 4).unwrap();
    assert_eq!(format_score(m.f_measure(3)), ".000");
    assert!((m.f_measure(0) - 2.0 / 3.0).abs() < 1e-15);
    assert!((m.mean_f() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn single_pixel_miss_is_off_diagonal() {
    let m = confusion(&LabelMap::filled(1, 1, 0, 2), &LabelMap::filled(1, 1, 0, 1), 3).unwrap();
    assert_eq!(m.get(1, 2), 1);
    assert_eq!(m.total(), 1);
}

#[test]
fn stride_at_annotation_rate_has_nothing_to_score() {
    let scene = render_scene(&SceneSpec::translating_rectangles(32, 24, 21, 2, 4)).unwrap();
    let flows = scene.flow_store();
    let keys: Vec<LabelMap> = (0..21).step_by(5).map(|t| scene.labels[t].clone()).collect();
    let propagator = Propagator::new(PropagationConfig::default()).unwrap();
    let table = ablation_propagation_length(&keys, 21, &flows, &propagator, &[5, 10, 20]).unwrap();
    assert!(table.rows[0].report.is_none());
    assert!(table.rows[0].hidden_keyframes.is_empty());
    assert_eq!(table.rows[1].hidden_keyframes, vec![5, 15]);
    assert_eq!(table.rows[2].kept_keyframes, vec![0, 20]);
    assert!(table.rows[1..].iter().all(|r| r.report.is_some()));
    assert!(table.format_text("segprop").contains('-'));

    let dense = ablation_against_ground_truth(&keys, &scene.labels, &flows, &propagator, &[5]).unwrap();
    assert_eq!(dense.rows[0].report.as_ref().unwrap().frames.len(), 21 - 5);
    assert!(ablation_propagation_length(&keys, 21, &flows, &propagator, &[3]).is_err());
}
