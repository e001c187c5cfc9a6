//! Byte-level container checks: golden layout, full round trips, and the
//! guarantee that arbitrary truncation yields an error, never a panic.

use gopnet_codec::{
    encode, raw_video_from_bytes, raw_video_to_bytes, read_stream, stream_from_bytes,
    stream_to_bytes, write_stream, CodecError, Frame, RawVideo,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture_stream() -> gopnet_codec::GopStream {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let frames = (0..4)
        .map(|_| Frame::from_fn(16, 32, |_, _, _| rng.gen()))
        .collect();
    let video = RawVideo::new(frames, 25.0).unwrap();
    encode(&video, 2, 3).unwrap()
}

#[test]
fn golden_header_layout() {
    let bytes = stream_to_bytes(&fixture_stream()).unwrap();
    assert_eq!(&bytes[..4], b"GOPS");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    assert_eq!(u16::from_le_bytes(bytes[8..10].try_into().unwrap()), 2); // gop size
    assert_eq!(u16::from_le_bytes(bytes[10..12].try_into().unwrap()), 3); // search range
    assert_eq!(u16::from_le_bytes(bytes[12..14].try_into().unwrap()), 16); // height
    assert_eq!(u16::from_le_bytes(bytes[14..16].try_into().unwrap()), 32); // width
    assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 2); // GOPs
    // Total size is fully determined by the header: per GOP one raw I-frame,
    // a P-count, and per P-frame 2 mv grids of 2 i16 plus 3 residual planes.
    let per_pframe = 2 * (16 / 16) * (32 / 16) * 2 + 2 * 3 * 16 * 32;
    assert_eq!(bytes.len(), 20 + 2 * (16 * 32 * 3 + 2 + per_pframe));
}

#[test]
fn stream_round_trips_through_bytes_and_files() {
    let stream = fixture_stream();
    let bytes = stream_to_bytes(&stream).unwrap();
    assert_eq!(stream_from_bytes(&bytes).unwrap(), stream);

    let path = std::env::temp_dir().join(format!("gopnet-container-{}.gops", std::process::id()));
    write_stream(&stream, &path).unwrap();
    let back = read_stream(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(back, stream);
}

#[test]
fn truncation_at_every_byte_is_a_clean_error() {
    let bytes = stream_to_bytes(&fixture_stream()).unwrap();
    for cut in 0..bytes.len() {
        match stream_from_bytes(&bytes[..cut]) {
            Err(CodecError::Format { offset, .. }) => {
                assert!(offset <= cut as u64, "offset {offset} beyond cut {cut}")
            }
            Err(other) => panic!("cut {cut}: unexpected error kind {other:?}"),
            Ok(_) => panic!("cut {cut}: truncated stream parsed successfully"),
        }
    }
}

#[test]
fn rawv_truncation_at_every_byte_is_a_clean_error() {
    let video = RawVideo::new(
        (0..2).map(|k| Frame::new(16, 16, k as u8)).collect(),
        25.0,
    )
    .unwrap();
    let bytes = raw_video_to_bytes(&video).unwrap();
    for cut in 0..bytes.len() {
        assert!(
            matches!(
                raw_video_from_bytes(&bytes[..cut]),
                Err(CodecError::Format { .. })
            ),
            "cut {cut}"
        );
    }
}

#[test]
fn corrupted_fields_report_sensible_offsets() {
    let stream = fixture_stream();
    let mut bytes = stream_to_bytes(&stream).unwrap();

    // Height not a multiple of 16.
    bytes[12] = 17;
    match stream_from_bytes(&bytes) {
        Err(CodecError::Format { offset, msg }) => {
            assert_eq!(offset, 12);
            assert!(msg.contains("height"), "{msg}");
        }
        other => panic!("unexpected {other:?}"),
    }
    bytes[12] = 16;

    // P-frame count beyond gop_size - 1. First GOP's count sits right after
    // the header and the first I-frame.
    let pcount_at = 20 + 16 * 32 * 3;
    bytes[pcount_at] = 9;
    match stream_from_bytes(&bytes) {
        Err(CodecError::Format { offset, msg }) => {
            assert_eq!(offset, pcount_at as u64);
            assert!(msg.contains("P-frames"), "{msg}");
        }
        other => panic!("unexpected {other:?}"),
    }
}
