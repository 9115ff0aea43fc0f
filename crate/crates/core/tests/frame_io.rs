use std::io::Cursor;

use actionseg::frame_io::{
    load_labels, load_sequence, read_labels, read_y4m, write_pgm_dir, write_segments_csv,
    write_y4m, Frame, FrameSequence, LabelTrack, SequenceFormat,
};
use proptest::prelude::*;

fn noise_plane(w: usize, h: usize, seed: u32) -> Vec<u8> {
    let mut state = seed.wrapping_mul(2_654_435_761).max(1);
    (0..w * h)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 17;
            state ^= state << 5;
            (state >> 24) as u8
        })
        .collect()
}

#[test]
fn y4m_matches_reference_encoder() {
    let (w, h) = (160, 120);
    let planes: Vec<Vec<u8>> = (0..10).map(|i| noise_plane(w, h, i + 1)).collect();
    let chroma = vec![128u8; (w / 2) * (h / 2)];

    let mut bytes = Vec::new();
    {
        let mut enc = y4m::encode(w, h, y4m::Ratio::new(25, 1))
            .with_colorspace(y4m::Colorspace::C420jpeg)
            .write_header(&mut bytes)
            .unwrap();
        for p in &planes {
            enc.write_frame(&y4m::Frame::new([p, &chroma, &chroma], None))
                .unwrap();
        }
    }
    let seq = read_y4m(Cursor::new(&bytes)).unwrap();
    assert_eq!(seq.len(), 10);
    assert_eq!(seq.dims(), Some((w, h)));
    assert_eq!(seq.fps(), 25.0);
    for (f, p) in seq.frames().iter().zip(&planes) {
        assert_eq!(&f.to_u8(), p);
    }

    // and back out through the reference decoder
    let mut ours = Vec::new();
    write_y4m(&seq, &mut ours).unwrap();
    let mut dec = y4m::decode(Cursor::new(&ours)).unwrap();
    assert_eq!((dec.get_width(), dec.get_height()), (w, h));
    for p in &planes {
        let frame = dec.read_frame().unwrap();
        assert_eq!(frame.get_y_plane(), &p[..]);
    }
    assert!(dec.read_frame().is_err());
}

#[test]
fn y4m_mono_reference_stream() {
    let (w, h) = (7, 5);
    let plane = noise_plane(w, h, 99);
    let mut bytes = Vec::new();
    y4m::encode(w, h, y4m::Ratio::new(30000, 1001))
        .with_colorspace(y4m::Colorspace::Cmono)
        .write_header(&mut bytes)
        .unwrap()
        .write_frame(&y4m::Frame::new([&plane, &[], &[]], None))
        .unwrap();
    let seq = read_y4m(Cursor::new(&bytes)).unwrap();
    assert_eq!(seq.frames()[0].to_u8(), plane);
    assert!((seq.fps() - 29.97).abs() < 1e-3);
}

#[test]
fn truncated_y4m_is_an_error() {
    let plane = noise_plane(8, 8, 3);
    let mut bytes = Vec::new();
    y4m::encode(8, 8, y4m::Ratio::new(25, 1))
        .with_colorspace(y4m::Colorspace::Cmono)
        .write_header(&mut bytes)
        .unwrap()
        .write_frame(&y4m::Frame::new([&plane, &[], &[]], None))
        .unwrap();
    bytes.truncate(bytes.len() - 10);
    assert!(read_y4m(Cursor::new(&bytes)).is_err());
}

#[test]
fn labels_expand_to_frames() {
    let csv = "start_frame,end_frame,action\n0,24,walking\n25,49,boxing\n50,74,walking\n";
    let track = read_labels(csv.as_bytes(), None).unwrap();
    let mut expected = Vec::new();
    for (start, end, name) in [(0, 24, "walking"), (25, 49, "boxing"), (50, 74, "walking")] {
        for _ in start..=end {
            expected.push(name);
        }
    }
    assert_eq!(track.len(), 75);
    let names: Vec<&str> = track
        .labels()
        .iter()
        .map(|&l| track.action_name(l).unwrap())
        .collect();
    assert_eq!(names, expected);
    assert_eq!(track.action_names(), ["walking", "boxing"]);
}

#[test]
fn label_rows_may_come_unordered() {
    let csv = "start_frame,end_frame,action\n5,9,b\n0,4,a\n";
    let track = read_labels(csv.as_bytes(), None).unwrap();
    assert_eq!(track.labels()[0], track.labels()[4]);
    assert_ne!(track.labels()[4], track.labels()[5]);
}

#[test]
fn malformed_label_files() {
    for csv in [
        "start_frame,end_frame,action\n0,4,a\n3,8,b\n",
        "start_frame,end_frame,action\n0,4,a\n6,8,b\n",
        "start_frame,end_frame,action\n1,4,a\n",
        "start,end,action\n0,4,a\n",
        "start_frame,end_frame,action\n4,2,a\n",
        "start_frame,end_frame,action\nx,2,a\n",
    ] {
        assert!(read_labels(csv.as_bytes(), None).is_err(), "{csv:?}");
    }
    let known = vec!["a".to_string()];
    let csv = "start_frame,end_frame,action\n0,4,zzz\n";
    assert!(read_labels(csv.as_bytes(), Some(&known)).is_err());
}

#[test]
fn label_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.csv");
    let track = LabelTrack::new(
        vec![2, 2, 1, 1, 1, 3],
        vec!["walk".into(), "run".into(), "box".into()],
    )
    .unwrap();
    track.save(&path).unwrap();
    let back = load_labels(&path).unwrap();
    assert_eq!(back.remap(track.action_names()).unwrap(), track);
    assert!(load_labels(&dir.path().join("missing.csv")).is_err());
}

#[test]
fn segment_writer_reproduces_input_text() {
    let csv = "start_frame,end_frame,action\n0,9,jog\n10,12,wave\n13,20,jog\n";
    let track = read_labels(csv.as_bytes(), None).unwrap();
    let mut out = Vec::new();
    write_segments_csv(&track.segments(), track.action_names(), &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), csv);
}

#[test]
fn missing_directory_and_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_sequence(&dir.path().join("nope"), SequenceFormat::PgmDir).is_err());
    assert!(load_sequence(dir.path(), SequenceFormat::PgmDir).is_err());
}

fn sequence_strategy() -> impl Strategy<Value = FrameSequence> {
    (1usize..12, 1usize..10, 1usize..5).prop_flat_map(|(w, h, n)| {
        prop::collection::vec(prop::collection::vec(0u8..=255, w * h), n).prop_map(move |frames| {
            let frames = frames
                .into_iter()
                .enumerate()
                .map(|(i, px)| {
                    Frame::new(w, h, i, px.into_iter().map(f64::from).collect()).unwrap()
                })
                .collect();
            FrameSequence::new(frames, 25.0).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pgm_directory_round_trip(seq in sequence_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        write_pgm_dir(&seq, dir.path()).unwrap();
        let back = load_sequence(dir.path(), SequenceFormat::PgmDir).unwrap();
        prop_assert_eq!(back.frames(), seq.frames());
        prop_assert_eq!(back.content_hash(), seq.content_hash());
    }

    #[test]
    fn y4m_round_trip(seq in sequence_strategy()) {
        let mut bytes = Vec::new();
        write_y4m(&seq, &mut bytes).unwrap();
        let back = read_y4m(Cursor::new(&bytes)).unwrap();
        prop_assert_eq!(back.frames(), seq.frames());
    }

    #[test]
    fn label_track_round_trip(runs in prop::collection::vec((1usize..4, 1usize..10), 1..10)) {
        let labels: Vec<usize> = runs.iter().flat_map(|&(a, n)| std::iter::repeat_n(a, n)).collect();
        let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let track = LabelTrack::new(labels, names.clone()).unwrap();
        let mut out = Vec::new();
        track.write_csv(&mut out).unwrap();
        let back = read_labels(out.as_slice(), Some(&names)).unwrap();
        prop_assert_eq!(back, track);
    }
}
