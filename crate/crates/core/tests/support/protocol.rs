use mrhost_core::math::{Pose, Quat, Vec3};
use mrhost_core::protocol::{decode, decode_control, encode, ClientMessage, EventKind, FrameFormat, LineDecoder};
use mrhost_core::telemetry::{DeviceMetrics, HandFrame, Role, HAND_JOINTS};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e4..1e4f64, Just(0.0), Just(-0.0), Just(1e-300), -1.0..1.0f64]
}

pub fn vec3() -> impl Strategy<Value = Vec3> {
    (finite(), finite(), finite()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

pub fn quat() -> impl Strategy<Value = Quat> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.1..1.0f64).prop_map(|(x, y, z, w)| Quat::new(x, y, z, w).normalize())
}

pub fn pose() -> impl Strategy<Value = Pose> {
    (vec3(), quat()).prop_map(|(p, q)| Pose::new(p, q))
}

fn hand() -> impl Strategy<Value = HandFrame> {
    prop_oneof![
        Just(HandFrame::untracked()),
        proptest::collection::vec(pose(), HAND_JOINTS).prop_map(|joints| HandFrame { tracked: true, joints }),
    ]
}

fn id() -> impl Strategy<Value = String> {
    "[a-z0-9_\\-\u{e9}\u{4e2d}\"\\\\]{1,12}"
}

fn frac() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn metrics() -> impl Strategy<Value = DeviceMetrics> {
    (0.0..240.0f64, frac(), frac(), frac(), 0.0..1e9f64, 0.0..1e9f64, 0.0..2000.0f64).prop_map(
        |(fps, battery, cpu, gpu, net_in_bps, net_out_bps, latency_ms)| DeviceMetrics {
            fps,
            battery,
            cpu,
            gpu,
            net_in_bps,
            net_out_bps,
            latency_ms,
        },
    )
}

pub fn message() -> impl Strategy<Value = ClientMessage> {
    let t = any::<u64>();
    prop_oneof![
        (id(), prop_oneof![Just(Role::Visitor), Just(Role::Host)], ".{0,16}")
            .prop_map(|(id, role, model)| ClientMessage::Hello { id, role, model }),
        (t, id()).prop_map(|(t, id)| ClientMessage::Heartbeat { t, id }),
        (t, id(), pose(), proptest::option::of(hand()), proptest::option::of(hand()))
            .prop_map(|(t, id, head, left, right)| ClientMessage::Pose { t, id, head, left, right }),
        (t, id(), metrics()).prop_map(|(t, id, metrics)| ClientMessage::Metrics { t, id, metrics }),
        (t, id(), "[a-z0-9]{1,6}").prop_map(|(t, id, s)| ClientMessage::Event {
            t,
            id,
            kind: EventKind::Calibration,
            station: Some(s),
        }),
        (t, id(), prop_oneof![Just(EventKind::TrackingLost), Just(EventKind::TrackingRecovered)])
            .prop_map(|(t, id, kind)| ClientMessage::Event { t, id, kind, station: None }),
        (t, id(), 0u32..8, 0u32..8).prop_flat_map(|(t, id, w, h)| {
            proptest::collection::vec(any::<u8>(), (w * h * 3) as usize).prop_map(move |data| ClientMessage::View {
                t,
                id: id.clone(),
                w,
                h,
                fmt: FrameFormat::Rgb8,
                data,
            })
        }),
        (t, id(), proptest::collection::vec(any::<u8>(), 0..64)).prop_map(|(t, id, data)| ClientMessage::View {
            t,
            id,
            w: 4,
            h: 4,
            fmt: FrameFormat::Stub,
            data,
        }),
    ]
}

/// One line, newline-terminated, decoding back to the same message.
pub fn roundtrips(m: &ClientMessage) -> Result<(), TestCaseError> {
    let line = encode(m);
    prop_assert_eq!(*line.last().unwrap(), b'\n');
    prop_assert_eq!(line.iter().filter(|&&b| b == b'\n').count(), 1);
    prop_assert_eq!(&decode(&line).unwrap(), m);
    Ok(())
}

/// Runs [`roundtrips`] over `cases` generated messages.
pub fn roundtrip_cases(cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&message(), |m| roundtrips(&m)).map_err(|e| e.to_string())
}

/// Feeds 1 MiB of seeded random bytes through the stream decoder and both
/// line decoders. Returns the number of frames the stream decoder produced.
pub fn fuzz_random_mebibyte(seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bytes = vec![0u8; 1 << 20];
    rng.fill(&mut bytes[..]);
    // sprinkle newlines and JSON punctuation so lines are short and the
    // parser gets past the first byte
    for b in bytes.iter_mut() {
        match rng.random_range(0..64) {
            0 => *b = b'\n',
            1 => *b = b'{',
            2 => *b = b'"',
            _ => {}
        }
    }
    let mut dec = LineDecoder::new();
    let mut frames = 0;
    for chunk in bytes.chunks(4096) {
        frames += dec.push(chunk).len();
        for line in chunk.split(|&b| b == b'\n') {
            let _ = decode(line);
            let _ = decode_control(&String::from_utf8_lossy(line));
        }
    }
    frames + dec.finish().into_iter().count()
}
