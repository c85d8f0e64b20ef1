mod common;

use aveid::analytics::{period_features, segment_episodes, window_attention, SegmentOptions};
use aveid::gaze::{assign_entity, label_pipeline};
use aveid::ingest::GazePointRecord;
use aveid::model::{
    EmotionLabel, FrameRecord, GazeEntity, LabelStream, ObservationWindow, Rect, RegionConfig,
    Subject,
};
use aveid::stats::{correlation_p_value, ks_statistic, student_t_two_tailed};
use aveid::synthetic::{expected_features, GeneratorSpec, SeededRng};

use common::*;

fn assert_matches_reference(labels: &[GazeEntity], fps: f64) {
    let window = ObservationWindow::new(0, labels.len() as u64, fps).unwrap();
    let got = window_attention(labels, &window, fps, SegmentOptions::default());
    match reference_features(labels, fps) {
        None => assert!(got.is_err()),
        Some(want) => {
            let got = got.unwrap();
            for (k, (a, b)) in got.to_vector().iter().zip(want.vector()).enumerate() {
                assert!(close(*a, b, 1e-12), "feature {k}: {a} vs {b}");
            }
            assert_eq!(got.episode_count, want.count);
            assert_eq!(got.transition_count, want.transition_count);
            assert_eq!(got.detected_frames, want.detected);
        }
    }
}

#[test]
fn streaming_features_match_run_enumeration() {
    let mut rng = SeededRng::new(11);
    for _ in 0..200 {
        let len = 1 + rng.below(2000) as usize;
        let undetected = rng.range(0.0, 0.3);
        let labels = random_labels(&mut rng, len, undetected);
        assert_matches_reference(&labels, [1.0, 7.5, 25.0, 30.0][rng.below(4) as usize]);
    }
}

#[test]
fn worked_example_episodes() {
    use GazeEntity::{Elsewhere as E, Facilitator as F, Tablet as T};
    let eps = segment_episodes(&[T, T, F, F, T, E], 1.0, 0);
    let got: Vec<_> = eps.iter().map(|e| (e.entity, e.duration_s)).collect();
    assert_eq!(got, vec![(T, 2.0), (F, 2.0), (T, 1.0), (E, 1.0)]);
    assert_matches_reference(&[T, T, F, F, T, E], 1.0);
}

#[test]
fn period_features_match_sliced_recomputation() {
    let mut rng = SeededRng::new(5);
    for _ in 0..30 {
        let fps = 4.0;
        let len = 400 + rng.below(400) as usize;
        let labels = random_labels(&mut rng, len, 0.2);
        let records = labels
            .iter()
            .enumerate()
            .map(|(i, &gaze)| FrameRecord {
                frame_index: i as u64,
                subject: Subject::Pwd,
                gaze,
                emotion: EmotionLabel::Neutral,
            })
            .collect();
        let stream = LabelStream::new("s", fps, records).unwrap();
        // Random partition on whole-frame boundaries.
        let mut cuts: Vec<usize> = (0..4)
            .map(|_| 1 + rng.below(len as u64 - 1) as usize)
            .collect();
        cuts.extend([0, len]);
        cuts.sort();
        cuts.dedup();
        let periods: Vec<(f64, f64)> = cuts
            .windows(2)
            .map(|w| (w[0] as f64 / fps, w[1] as f64 / fps))
            .collect();
        let got = period_features(&stream, &periods, SegmentOptions::default()).unwrap();
        for (f, w) in got.iter().zip(cuts.windows(2)) {
            let want = reference_features(&labels[w[0]..w[1]], fps);
            match (f, want) {
                (None, None) => {}
                (Some(f), Some(want)) => {
                    for (a, b) in f.to_vector().iter().zip(want.vector()) {
                        assert!(close(*a, b, 1e-12));
                    }
                }
                other => panic!("definedness differs: {other:?}"),
            }
        }
    }
}

#[test]
fn pipeline_matches_reference_on_random_points() {
    let regions = RegionConfig::new(
        640,
        480,
        Rect::new(50.0, 200.0, 250.0, 200.0).unwrap(),
        Rect::new(200.0, 100.0, 300.0, 250.0).unwrap(),
        Rect::new(400.0, 10.0, 100.0, 80.0).unwrap(),
    )
    .unwrap();
    let mut rng = SeededRng::new(99);
    let points: Vec<GazePointRecord> = (0..100)
        .map(|i| GazePointRecord {
            frame_index: i,
            subject: Subject::Pwd,
            point: (rng.uniform() > 0.1).then(|| (rng.range(0.0, 640.0), rng.range(0.0, 480.0))),
        })
        .collect();
    let raw: Vec<_> = points
        .iter()
        .map(|p| reference_assign(p, &regions))
        .collect();
    assert_eq!(
        points
            .iter()
            .map(|p| assign_entity(p, &regions))
            .collect::<Vec<_>>(),
        raw
    );
    for k in [1, 3, 5, 9] {
        assert_eq!(
            label_pipeline(&points, &regions, k).unwrap(),
            reference_smooth(&raw, k),
            "k = {k}"
        );
    }
}

#[test]
fn correlation_p_values_match_simpson_tail() {
    for (r, n) in [
        (0.2, 20usize),
        (0.5, 30),
        (0.8, 10),
        (-0.5, 30),
        (0.05, 200),
    ] {
        let df = (n - 2) as u32;
        let t: f64 = r * f64::from(df).sqrt() / (1.0 - r * r).sqrt();
        let want = t_tail_simpson(t, df);
        let got = correlation_p_value(r, n);
        assert!(
            ((got - want) / want).abs() < 1e-6,
            "r = {r}, n = {n}: {got} vs {want}"
        );
        let via_t = student_t_two_tailed(t, f64::from(df));
        assert!(((via_t - want) / want).abs() < 1e-6);
    }
}

#[test]
fn ks_distance_matches_ecdf_scan() {
    let mut rng = SeededRng::new(3);
    for _ in 0..300 {
        let n1 = 1 + rng.below(50) as usize;
        let n2 = 1 + rng.below(50) as usize;
        // Coarse values so ties within and across samples are common.
        let mut draw = |n| {
            (0..n)
                .map(|_| rng.below(12) as f64 / 4.0)
                .collect::<Vec<_>>()
        };
        let a = draw(n1);
        let b = draw(n2);
        assert_eq!(ks_statistic(&a, &b).unwrap(), brute_ks(&a, &b));
    }
}

#[test]
fn stationary_matches_power_iteration() {
    let mut rng = SeededRng::new(17);
    for _ in 0..50 {
        let mut m = [[0.0; 3]; 3];
        for row in &mut m {
            let w: Vec<f64> = (0..3).map(|_| rng.range(0.05, 1.0)).collect();
            let s: f64 = w.iter().sum();
            row[0] = w[0] / s;
            row[1] = w[1] / s;
            row[2] = 1.0 - row[0] - row[1];
        }
        let e = expected_features(&GeneratorSpec::new(0, 1.0, 1.0, m)).unwrap();
        let pi = power_iteration(&m, 10_000);
        for x in 0..3 {
            assert!(
                (e.stationary[x] - pi[x]).abs() < 1e-9,
                "{:?} vs {:?}",
                e.stationary,
                pi
            );
        }
    }
}
