use std::convert::Infallible;
use std::path::PathBuf;

use ipt_core::framing::{
    decode_message, decode_slice, encode_message, encode_raw, f32s_to_le, le_to_f32s, ByteSource, DecodeError,
    EncodeError, Section, MAX_HEADER_LEN,
};
use proptest::prelude::*;
use serde_json::{json, Value};

fn conformance_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../conformance")
}

/// The frozen vectors: file name and the (header, payload) it encodes.
fn golden_cases() -> Vec<(&'static str, Value, Vec<u8>)> {
    vec![
        ("empty.bin", json!({}), vec![]),
        ("hello_minimal.bin", json!({"msg": "hello"}), vec![]),
        ("hello_request.bin", json!({"msg": "hello", "v": 1}), vec![]),
        (
            "hello_response.bin",
            json!({"msg": "hello", "v": 1, "labels": ["class_a", "class_b"], "features": ["pooled", "consensus"]}),
            vec![],
        ),
        (
            "infer_request.bin",
            json!({"msg": "infer", "v": 1, "id": "toy_0000", "w": 2, "h": 1, "n": 2, "fps": 25.0, "want": ["consensus"]}),
            vec![255, 0, 0, 0, 0, 255, 255, 0, 0, 0, 0, 255],
        ),
        (
            "scores_response.bin",
            json!({"msg": "scores", "v": 1, "id": "toy_0000", "k": 2}),
            f32s_to_le(&[0.75, 0.25]),
        ),
        (
            "feature_response.bin",
            json!({"msg": "feature", "v": 1, "id": "toy_0000", "tag": "consensus", "shape": [2]}),
            f32s_to_le(&[0.75, 0.25]),
        ),
        (
            "error_response.bin",
            json!({"msg": "error", "v": 1, "detail": "bad magic"}),
            vec![],
        ),
    ]
}

#[test]
fn empty_header_frame_is_eighteen_bytes() {
    let bytes = encode_message(&json!({}), &[]).unwrap();
    assert_eq!(bytes.len(), 18);
    assert_eq!(&bytes[..4], b"IPT1");
    assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
    assert_eq!(&bytes[8..10], b"{}");
    assert_eq!(&bytes[10..], &[0u8; 8]);
}

#[test]
fn hello_golden_bytes() {
    let mut want = b"IPT1\x0f\x00\x00\x00{\"msg\":\"hello\"}".to_vec();
    want.extend_from_slice(&[0; 8]);
    assert_eq!(encode_message(&json!({"msg": "hello"}), &[]).unwrap(), want);
}

#[test]
fn golden_files_are_stable() {
    let dir = conformance_dir().join("golden");
    let bless = std::env::var_os("IPT_BLESS").is_some();
    for (name, header, payload) in golden_cases() {
        let bytes = encode_message(&header, &payload).unwrap();
        let path = dir.join(name);
        if bless {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&path, &bytes).unwrap();
        }
        let frozen = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(bytes, frozen, "{name} drifted");
        let (msg, used) = decode_slice(&frozen).unwrap();
        assert_eq!(used, frozen.len());
        assert_eq!((msg.header, msg.payload), (header, payload));
    }
}

#[test]
fn fuzz_corpus_never_panics() {
    let dir = conformance_dir().join("fuzz");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let bytes = std::fs::read(&path).unwrap();
        let mut rest = bytes.as_slice();
        // keep reading frames until the stream ends or breaks
        loop {
            match decode_message(&mut rest) {
                Ok(_) => continue,
                Err(_) => break,
            }
        }
        seen += 1;
    }
    assert!(seen >= 8, "fuzz corpus missing ({seen} files)");
}

#[test]
fn distinct_decode_errors() {
    let good = encode_message(&json!({"msg": "x"}), b"abcdef").unwrap();
    assert_eq!(decode_slice(&[]).unwrap_err(), DecodeError::Eof);

    let mut bad = good.clone();
    bad[0] = b'X';
    assert_eq!(decode_slice(&bad).unwrap_err(), DecodeError::BadMagic(*b"XPT1"));

    assert_eq!(
        decode_slice(&good[..good.len() - 2]).unwrap_err(),
        DecodeError::Truncated {
            section: Section::Payload,
            expected: 6,
            received: 4
        }
    );
    assert_eq!(
        decode_slice(&good[..2]).unwrap_err(),
        DecodeError::Truncated {
            section: Section::Magic,
            expected: 4,
            received: 2
        }
    );
    assert!(matches!(
        decode_slice(&good[..10]).unwrap_err(),
        DecodeError::Truncated {
            section: Section::Header,
            ..
        }
    ));
    assert!(matches!(
        decode_slice(&good[..good.len() - 9]).unwrap_err(),
        DecodeError::Truncated {
            section: Section::PayloadLength,
            ..
        }
    ));

    let mut huge_header = b"IPT1".to_vec();
    huge_header.extend_from_slice(&u32::MAX.to_le_bytes());
    assert_eq!(decode_slice(&huge_header).unwrap_err(), DecodeError::HeaderTooLarge(u32::MAX));

    let mut huge_payload = encode_raw(b"{}", &[]).unwrap();
    let at = huge_payload.len() - 8;
    huge_payload[at..].copy_from_slice(&(u64::MAX / 2).to_le_bytes());
    assert_eq!(decode_slice(&huge_payload).unwrap_err(), DecodeError::PayloadTooLarge(u64::MAX / 2));

    // a lying but legal length does not allocate up front
    let mut lying = encode_raw(b"{}", &[]).unwrap();
    let at = lying.len() - 8;
    lying[at..].copy_from_slice(&(1u64 << 30).to_le_bytes());
    assert!(matches!(
        decode_slice(&lying).unwrap_err(),
        DecodeError::Truncated {
            section: Section::Payload,
            received: 0,
            ..
        }
    ));

    let bad_utf8 = encode_raw(&[b'"', 0xff, b'"'], &[]).unwrap();
    assert_eq!(decode_slice(&bad_utf8).unwrap_err(), DecodeError::InvalidUtf8(1));
    let bad_json = encode_raw(b"{\"msg\":", &[]).unwrap();
    assert!(matches!(decode_slice(&bad_json).unwrap_err(), DecodeError::InvalidJson(_)));
}

#[test]
fn encoder_limits() {
    let big = vec![b' '; MAX_HEADER_LEN + 1];
    assert_eq!(encode_raw(&big, &[]), Err(EncodeError::HeaderTooLarge(MAX_HEADER_LEN + 1)));
}

/// Hands out at most `step` bytes per read.
struct Trickle<'a> {
    data: &'a [u8],
    step: usize,
}

impl ByteSource for Trickle<'_> {
    type Error = Infallible;
    fn read_some(&mut self, buf: &mut [u8]) -> Result<usize, Infallible> {
        let n = buf.len().min(self.step).min(self.data.len());
        buf[..n].copy_from_slice(&self.data[..n]);
        self.data = &self.data[n..];
        Ok(n)
    }
}

fn arb_json() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        any::<i64>().prop_map(Value::from),
        (-1e9f64..1e9).prop_map(Value::from),
        "[ -~é漢\\n\"\\\\]{0,12}".prop_map(Value::from),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..4).prop_map(Value::from),
            proptest::collection::btree_map("[a-z_]{1,6}", inner, 0..4)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn round_trip(header in arb_json(), payload in proptest::collection::vec(any::<u8>(), 0..300), step in 1usize..50) {
        let bytes = encode_message(&header, &payload).unwrap();
        let (msg, used) = decode_slice(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(&msg.header, &header);
        prop_assert_eq!(&msg.payload, &payload);
        let mut src = Trickle { data: &bytes, step };
        let again = decode_message(&mut src).unwrap();
        prop_assert_eq!(again.header, header);
        prop_assert_eq!(src.data.len(), 0);
    }

    #[test]
    fn random_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode_slice(&bytes);
        let mut prefixed = b"IPT1".to_vec();
        prefixed.extend_from_slice(&bytes);
        let _ = decode_slice(&prefixed);
    }

    #[test]
    fn mutated_frames_never_panic(pos in any::<prop::sample::Index>(), byte in any::<u8>(), cut in any::<prop::sample::Index>()) {
        let mut frame = encode_message(&json!({"msg": "infer", "id": "a", "w": 1, "h": 1, "n": 1}), &[1, 2, 3]).unwrap();
        let i = pos.index(frame.len());
        frame[i] = byte;
        let c = cut.index(frame.len() + 1);
        let _ = decode_slice(&frame[..c]);
    }

    #[test]
    fn f32_payloads(values in proptest::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 0..40)) {
        prop_assert_eq!(le_to_f32s(&f32s_to_le(&values)).unwrap(), values);
    }
}

#[test]
fn ragged_f32_payload() {
    assert_eq!(le_to_f32s(&[0, 0, 0]), None);
}
