use ipt_core::bvh::{clip_duration, forward_kinematics, parse_bvh, Channel, MotionClip};
use ipt_core::geom::Vec3;
use nalgebra::{Matrix4, Rotation3, Vector3, Vector4};
use proptest::prelude::*;

const FIVE_JOINT: &str = include_str!("data/five_joint.bvh");
const MOCAPBANK: &str = include_str!("data/mocapbank.bvh");

/// The fixture hierarchy, written out by hand: (name, parent, offset, channel order).
const TABLE: [(&str, Option<usize>, [f64; 3], &str); 5] = [
    ("Pelvis", None, [1.5, 2.0, -0.5], "XYZ ZXY"),
    ("Spine", Some(0), [0.0, 12.5, 0.3], "ZXY"),
    ("Head", Some(1), [0.2, 9.0, -0.4], "XYZ"),
    ("Thigh", Some(0), [-3.0, -1.0, 0.0], "YZX"),
    ("Shin", Some(3), [0.0, -15.0, 0.5], "ZYX"),
];
const END_SITES: [(usize, [f64; 3]); 2] = [(2, [0.0, 4.0, 0.0]), (4, [0.0, -14.0, 2.0])];

fn translation(v: [f64; 3]) -> Matrix4<f64> {
    Matrix4::new_translation(&Vector3::new(v[0], v[1], v[2]))
}

fn rotation(axis: char, deg: f64) -> Matrix4<f64> {
    let axis = match axis {
        'X' => Vector3::x_axis(),
        'Y' => Vector3::y_axis(),
        _ => Vector3::z_axis(),
    };
    Rotation3::from_axis_angle(&axis, deg.to_radians()).to_homogeneous()
}

/// Brute-force homogeneous-matrix forward kinematics over the literal table.
fn oracle(row: &[f64]) -> Vec<[f64; 3]> {
    let mut world: Vec<Matrix4<f64>> = Vec::new();
    let mut cursor = 0;
    for (_, parent, offset, order) in TABLE {
        let mut local = translation(offset);
        let groups: Vec<&str> = order.split(' ').collect();
        if groups.len() == 2 {
            let t = [row[cursor], row[cursor + 1], row[cursor + 2]];
            cursor += 3;
            local = translation(t) * local;
        }
        for axis in groups.last().unwrap().chars() {
            local *= rotation(axis, row[cursor]);
            cursor += 1;
        }
        let w = match parent {
            Some(p) => world[p] * local,
            None => local,
        };
        world.push(w);
    }
    let mut out: Vec<[f64; 3]> = world.iter().map(|m| [m[(0, 3)], m[(1, 3)], m[(2, 3)]]).collect();
    for (parent, off) in END_SITES {
        let p = world[parent] * Vector4::new(off[0], off[1], off[2], 1.0);
        out.push([p[0], p[1], p[2]]);
    }
    out
}

#[test]
fn five_joint_fixture_literals() {
    let clip = parse_bvh(FIVE_JOINT).unwrap();
    let joints = clip.skeleton().joints();
    assert_eq!(joints.len(), 5);
    for (j, (name, parent, offset, _)) in joints.iter().zip(TABLE) {
        assert_eq!(j.name, name);
        assert_eq!(j.parent, parent);
        assert_eq!(j.offset.to_array(), offset);
    }
    assert_eq!(
        joints[0].channels,
        vec![
            Channel::Xposition,
            Channel::Yposition,
            Channel::Zposition,
            Channel::Zrotation,
            Channel::Xrotation,
            Channel::Yrotation
        ]
    );
    assert_eq!(clip.skeleton().end_sites().len(), 2);
    assert_eq!(clip.skeleton().channel_count(), 18);
    assert_eq!(clip.frame_count(), 3);
}

#[test]
fn five_joint_matches_matrix_oracle() {
    let clip = parse_bvh(FIVE_JOINT).unwrap();
    for f in 0..clip.frame_count() {
        let got = forward_kinematics(&clip, f).unwrap().joint_positions;
        let want = oracle(clip.frame(f).unwrap());
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            for k in 0..3 {
                assert!((g.to_array()[k] - w[k]).abs() < 1e-9, "frame {f}: {g:?} vs {w:?}");
            }
        }
    }
}

fn bone_lengths_conserved(clip: &MotionClip) -> f64 {
    let sk = clip.skeleton();
    assert!(sk
        .joints()
        .iter()
        .skip(1)
        .all(|j| j.channels.iter().all(|c| !c.is_position())));
    let n = sk.joints().len();
    let rest: Vec<f64> = sk
        .bones()
        .iter()
        .map(|&(_, child)| {
            if child < n {
                sk.joints()[child].offset.norm()
            } else {
                sk.end_sites()[child - n].offset.norm()
            }
        })
        .collect();
    let mut worst: f64 = 0.0;
    for f in 0..clip.frame_count() {
        let pose = forward_kinematics(clip, f).unwrap();
        for (&(p, c), &len) in sk.bones().iter().zip(&rest) {
            let d = (pose.joint_positions[c] - pose.joint_positions[p]).norm();
            if len > 0.0 {
                worst = worst.max((d - len).abs() / len);
            }
        }
    }
    worst
}

#[test]
fn real_clip_conserves_bone_lengths() {
    let clip = parse_bvh(MOCAPBANK).unwrap();
    assert_eq!(clip.frame_count(), 455);
    assert!(bone_lengths_conserved(&clip) < 1e-6);
}

#[test]
fn durations() {
    let clip = parse_bvh(MOCAPBANK).unwrap();
    assert!((clip_duration(&clip) - 455.0 * 0.033333).abs() < 1e-12);
    // 120 frames at 0.00833 s
    let rows = "0 0 0\n".repeat(120);
    let text = format!(
        "HIERARCHY\nROOT R\n{{\nOFFSET 0 0 0\nCHANNELS 3 Xrotation Yrotation Zrotation\n}}\nMOTION\nFrames: 120\nFrame Time: 0.00833\n{rows}"
    );
    let clip = parse_bvh(&text).unwrap();
    assert!((clip_duration(&clip) - 0.9996).abs() < 1e-12);
}

fn chain(order: &str, angles: [f64; 3]) -> Vec<Vec3> {
    let chans: Vec<String> = order.chars().map(|c| format!("{c}rotation")).collect();
    let text = format!(
        "HIERARCHY\nROOT R\n{{\nOFFSET 0 0 0\nCHANNELS 3 {}\nJOINT C\n{{\nOFFSET 1 2 3\nCHANNELS 0\nEnd Site\n{{\nOFFSET 0 1 0\n}}\n}}\n}}\nMOTION\nFrames: 1\nFrame Time: 0.1\n{} {} {}\n",
        chans.join(" "),
        angles[0],
        angles[1],
        angles[2]
    );
    forward_kinematics(&parse_bvh(&text).unwrap(), 0).unwrap().joint_positions
}

proptest! {
    #[test]
    fn rotation_order_matters_unless_zero(a in 5.0f64..80.0, b in 5.0f64..80.0, c in 5.0f64..80.0) {
        // same per-axis angles, channels declared in two different orders
        let zxy = chain("ZXY", [c, a, b]);
        let xyz = chain("XYZ", [a, b, c]);
        let diff: f64 = zxy.iter().zip(&xyz).map(|(p, q)| (*p - *q).norm()).sum();
        prop_assert!(diff > 1e-6);
        prop_assert_eq!(chain("ZXY", [0.0; 3]), chain("XYZ", [0.0; 3]));
    }

    #[test]
    fn parsing_is_total_on_mutated_fixtures(cut in 0usize..1500, drop_line in 0usize..45, which in 0usize..2) {
        let src = if which == 0 { FIVE_JOINT } else { &MOCAPBANK[..3000] };
        let cut = cut.min(src.len());
        let _ = parse_bvh(&src[..cut]);
        let dropped: String = src
            .lines()
            .enumerate()
            .filter(|(i, _)| *i != drop_line)
            .map(|(_, l)| format!("{l}\n"))
            .collect();
        let _ = parse_bvh(&dropped);
    }

    #[test]
    fn bone_lengths_hold_for_random_poses(angles in proptest::collection::vec(-180.0f64..180.0, 18)) {
        let clip = parse_bvh(FIVE_JOINT).unwrap();
        let mut rows = vec![clip.frame(0).unwrap().to_vec(), angles];
        rows[1][0..3].copy_from_slice(&[1.0, 2.0, 3.0]);
        let clip = MotionClip::new(clip.skeleton().clone(), 0.1, rows, "x").unwrap();
        prop_assert!(bone_lengths_conserved(&clip) < 1e-9);
    }
}
