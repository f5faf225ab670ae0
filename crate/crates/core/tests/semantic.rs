use std::sync::Arc;

use ipt_core::bvh::parse_bvh;
use ipt_core::render::{focal_for_height_fraction, render, RenderStyle, SceneSpec};
use ipt_core::semantic::{filter_undetected, split_fg_bg, SemanticError, DEFAULT_DROP_THRESHOLD};
use ipt_core::{FactorVector, Frame, Mask, MaskSequence, Video};
use proptest::prelude::*;

const MOCAPBANK: &str = include_str!("data/mocapbank.bvh");

fn rendered(bg: &str, az: f64) -> (Video, MaskSequence) {
    let clip = Arc::new(parse_bvh(MOCAPBANK).unwrap().truncated(8));
    let focal = focal_for_height_fraction(&clip, 64, 100.0, 0.5).unwrap();
    let spec = SceneSpec {
        clip,
        factors: FactorVector::new(az, 5.0, 100.0, "teal", bg, 1.0).unwrap(),
        image_size: (64, 64),
        focal_length: focal,
        seed: 3,
        style: RenderStyle::StickFigure,
    };
    render(&spec).unwrap()
}

#[test]
fn rendered_ground_truth_reconstructs_exactly() {
    for (bg, az) in [("checker", 0.0), ("noise", 90.0), ("gradient", 200.0)] {
        let (video, masks) = rendered(bg, az);
        let split = split_fg_bg(&video, &masks).unwrap();
        assert!(split.dropped_frames.is_empty());
        assert_eq!(split.foreground.frame_count(), video.frame_count());
        assert_eq!(split.background.frame_count(), video.frame_count());
        for ((o, f), b) in video
            .frames()
            .iter()
            .zip(split.foreground.frames())
            .zip(split.background.frames())
        {
            for ((&po, &pf), &pb) in o.pixels().iter().zip(f.pixels()).zip(b.pixels()) {
                // one side is always zero, so the sum cannot overflow
                assert!(pf == 0 || pb == 0);
                assert_eq!(pf + pb, po);
            }
        }
    }
}

fn fixture(n: usize, empty: &[usize]) -> (Video, MaskSequence) {
    let frames: Vec<Frame> = (0..n)
        .map(|k| Frame::new(5, 3, (0..45).map(|i| (i * 7 + k * 11 + 1) as u8).collect()).unwrap())
        .collect();
    let masks = (0..n)
        .map(|k| {
            let bits = if empty.contains(&k) {
                vec![0; 15]
            } else {
                (0..15).map(|i| ((i + k) % 2) as u8).collect()
            };
            Mask::new(5, 3, bits).unwrap()
        })
        .collect();
    (Video::new("v", 1, 25.0, frames).unwrap(), MaskSequence::new(masks))
}

#[test]
fn drop_rule_fires_exactly_at_threshold() {
    let cases: [(usize, &[usize], bool); 5] = [
        (10, &[], true),
        (10, &[4], true),
        (10, &[0, 9], true),
        (5, &[2], true),
        (10, &[1, 2, 3], false),
    ];
    let mut pairs = Vec::new();
    for (i, (n, empty, keep)) in cases.iter().enumerate() {
        let (video, masks) = fixture(*n, empty);
        let split = split_fg_bg(&video, &masks).unwrap();
        assert_eq!(split.dropped_frames, empty.to_vec());
        assert_eq!(split.foreground.frame_count(), n - empty.len());
        assert_eq!(split.background.frame_count(), n - empty.len());
        let frac = split.dropped_fraction(*n);
        assert_eq!(frac <= DEFAULT_DROP_THRESHOLD, *keep, "case {i}: {frac}");
        pairs.push((format!("v{i}"), frac));
    }
    let kept = filter_undetected(pairs.iter().map(|(id, f)| (id.as_str(), *f)), DEFAULT_DROP_THRESHOLD);
    assert_eq!(kept, ["v0", "v1", "v2", "v3"]);
}

#[test]
fn indices_are_compacted() {
    let (video, masks) = fixture(4, &[1]);
    let split = split_fg_bg(&video, &masks).unwrap();
    let m = &masks.masks()[2];
    for (p, &bit) in m.bits().iter().enumerate() {
        let want = &video.frames()[2].pixels()[p * 3..p * 3 + 3];
        let got = if bit == 1 {
            &split.foreground.frames()[1].pixels()[p * 3..p * 3 + 3]
        } else {
            &split.background.frames()[1].pixels()[p * 3..p * 3 + 3]
        };
        assert_eq!(got, want);
    }
    assert_eq!(split.foreground.video_id(), "v_fg");
    assert_eq!(split.background.video_id(), "v_bg");
}

#[test]
fn all_ones_and_all_dropped() {
    let (video, _) = fixture(2, &[]);
    let ones = MaskSequence::new(vec![Mask::new(5, 3, vec![1; 15]).unwrap(); 2]);
    let split = split_fg_bg(&video, &ones).unwrap();
    assert_eq!(split.foreground.frames(), video.frames());
    assert!(split.background.frames().iter().all(|f| f.pixels().iter().all(|&v| v == 0)));
    let (video, masks) = fixture(3, &[0, 1, 2]);
    assert_eq!(split_fg_bg(&video, &masks), Err(SemanticError::AllDropped("v".into())));
    let (short, _) = fixture(2, &[]);
    assert!(matches!(split_fg_bg(&short, &masks), Err(SemanticError::Mismatch(_))));
}

proptest! {
    #[test]
    fn filter_matches_direct_comparison(
        fracs in proptest::collection::vec(0.0f64..=1.0, 100),
        threshold in 0.0f64..=1.0,
    ) {
        let ids: Vec<String> = (0..100).map(|i| format!("id{i:03}")).collect();
        let kept = filter_undetected(ids.iter().map(String::as_str).zip(fracs.iter().copied()), threshold);
        let mut oracle = std::collections::BTreeSet::new();
        for (id, f) in ids.iter().zip(&fracs) {
            if !(*f > threshold) {
                oracle.insert(id.clone());
            }
        }
        prop_assert_eq!(kept.iter().cloned().collect::<std::collections::BTreeSet<_>>(), oracle);
        prop_assert_eq!(filter_undetected(ids.iter().map(String::as_str).zip(fracs.iter().copied()), 1.0).len(), 100);
    }

    #[test]
    fn random_masks_partition_frames(bits in proptest::collection::vec(0u8..2, 6 * 4 * 3)) {
        let frames: Vec<Frame> = (0..3)
            .map(|k| Frame::new(6, 4, (0..72).map(|i| (i * 3 + k * 50) as u8).collect()).unwrap())
            .collect();
        let video = Video::new("p", 0, 10.0, frames).unwrap();
        let masks = MaskSequence::new(bits.chunks(24).map(|c| Mask::new(6, 4, c.to_vec()).unwrap()).collect());
        match split_fg_bg(&video, &masks) {
            Ok(split) => {
                let kept: Vec<usize> = (0..3).filter(|i| !split.dropped_frames.contains(i)).collect();
                for (j, &i) in kept.iter().enumerate() {
                    let o = video.frames()[i].pixels();
                    let f = split.foreground.frames()[j].pixels();
                    let b = split.background.frames()[j].pixels();
                    for p in 0..o.len() {
                        prop_assert_eq!(u16::from(f[p]) + u16::from(b[p]), u16::from(o[p]));
                    }
                }
            }
            Err(e) => prop_assert_eq!(e, SemanticError::AllDropped("p".into())),
        }
    }
}
