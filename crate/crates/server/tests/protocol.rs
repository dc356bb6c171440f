use amoeba_core::engine::{Command, Param};
use amoeba_core::lattice::{Budget, Cell, Rect};
use amoeba_server::protocol::{
    parse_command, rle_encode, Encoding, FrameMessage, ServerMessage, SessionCommand, StimuliInfo,
    WireRect,
};
use proptest::prelude::*;
use serde_json::json;

#[test]
fn documented_command_shapes_parse() {
    let cases = [
        (json!({"type": "Pause"}), SessionCommand::Pause),
        (json!({"type": "Resume"}), SessionCommand::Resume),
        (
            json!({"type": "StepN", "n": 5}),
            SessionCommand::StepN { n: 5 },
        ),
        (
            json!({"type": "Reset", "seed": 3, "scenarioName": "fuse"}),
            SessionCommand::Reset {
                seed: Some(3),
                scenario_name: Some("fuse".into()),
            },
        ),
        (
            json!({"type": "Reset"}),
            SessionCommand::Reset {
                seed: None,
                scenario_name: None,
            },
        ),
        (
            json!({"type": "PlaceAttractant", "x": 4, "y": 5, "magnitude": 10.0, "budget": 500.0}),
            SessionCommand::PlaceAttractant {
                x: 4,
                y: 5,
                magnitude: 10.0,
                budget: Some(500.0),
                consumption_rate: None,
            },
        ),
        (
            json!({"type": "RemoveAttractant", "id": 2}),
            SessionCommand::RemoveAttractant { id: 2 },
        ),
        (
            json!({"type": "SetIrradiation", "rect": {"x0": 0, "y0": 1, "x1": 9, "y1": 10}, "weight": 0.1}),
            SessionCommand::SetIrradiation {
                rect: WireRect {
                    x0: 0,
                    y0: 1,
                    x1: 9,
                    y1: 10,
                },
                weight: 0.1,
            },
        ),
        (
            json!({"type": "ClearIrradiation", "id": 0}),
            SessionCommand::ClearIrradiation { id: 0 },
        ),
        (
            json!({"type": "SetParam", "name": "pID", "value": 0.01}),
            SessionCommand::SetParam {
                name: "pID".into(),
                value: 0.01,
            },
        ),
        (
            json!({"type": "SetFrameCadence", "n": 10}),
            SessionCommand::SetFrameCadence { n: 10 },
        ),
        (json!({"type": "Export"}), SessionCommand::Export),
    ];
    for (value, expected) in cases {
        let parsed = parse_command(&value.to_string()).unwrap();
        assert_eq!(parsed, expected);
        assert_eq!(parsed.kind(), value["type"]);
        let back: serde_json::Value = serde_json::to_value(&parsed).unwrap();
        assert_eq!(parse_command(&back.to_string()).unwrap(), expected);
    }
}

#[test]
fn malformed_messages_name_the_fault() {
    let cases = [
        ("not json", "malformed"),
        (r#"{"n": 3}"#, "type"),
        (r#"{"type": "Teleport"}"#, "Teleport"),
        (r#"{"type": "StepN"}"#, "n"),
        (r#"{"type": "StepN", "n": -1}"#, "-1"),
        (r#"{"type": "StepN", "n": 1, "count": 2}"#, "count"),
    ];
    for (text, fault) in cases {
        let err = parse_command(text).unwrap_err().to_string();
        assert!(err.contains(fault), "{text} -> {err}");
    }
}

#[test]
fn commands_map_onto_engine_commands() {
    let place = SessionCommand::PlaceAttractant {
        x: 1,
        y: 2,
        magnitude: 8.0,
        budget: None,
        consumption_rate: None,
    };
    assert_eq!(
        place.to_engine().unwrap(),
        Some(Command::AddAttractant {
            position: Cell::new(1, 2),
            magnitude: 8.0,
            budget: Budget::Unlimited,
            consumption_rate: 8.0,
        })
    );
    let irr = SessionCommand::SetIrradiation {
        rect: WireRect {
            x0: 1,
            y0: 2,
            x1: 3,
            y1: 4,
        },
        weight: 0.5,
    };
    assert_eq!(
        irr.to_engine().unwrap(),
        Some(Command::AddIrradiation {
            rect: Rect::new(1, 2, 3, 4),
            weight: 0.5
        })
    );
    for (name, param) in [
        ("pID", Param::Pid),
        ("SA", Param::SensorAngle),
        ("RA", Param::RotationAngle),
        ("SO", Param::SensorOffset),
        ("damping", Param::Damping),
        ("oscillatory", Param::Oscillatory),
    ] {
        let cmd = SessionCommand::SetParam {
            name: name.into(),
            value: 1.0,
        };
        assert_eq!(
            cmd.to_engine().unwrap(),
            Some(Command::SetParam(param, 1.0))
        );
    }
    for bad in ["deposit", "pid", "speed"] {
        let cmd = SessionCommand::SetParam {
            name: bad.into(),
            value: 1.0,
        };
        assert!(cmd.to_engine().is_err(), "{bad}");
    }
    assert_eq!(SessionCommand::Pause.to_engine().unwrap(), None);
}

#[test]
fn frame_json_has_documented_fields() {
    let frame = FrameMessage::new(
        7,
        4,
        2,
        &[0, 0, 0, 0, 9, 9, 9, 9],
        None,
        StimuliInfo::default(),
    );
    assert_eq!(frame.encoding, Encoding::Rle);
    let v: serde_json::Value =
        serde_json::from_str(&ServerMessage::Frame(frame).to_json()).unwrap();
    assert_eq!(v["type"], "Frame");
    assert_eq!(v["stepIndex"], 7);
    assert_eq!(v["width"], 4);
    assert_eq!(v["height"], 2);
    assert_eq!(v["encoding"], "rle");
    assert!(v["payload"].is_string());
    assert!(v["stats"].is_null());
    assert_eq!(v["stimuli"], json!({"attractants": [], "irradiation": []}));
}

#[test]
fn incompressible_frames_stay_raw() {
    let pixels: Vec<u8> = (0..64).collect();
    let frame = FrameMessage::new(0, 8, 8, &pixels, None, StimuliInfo::default());
    assert_eq!(frame.encoding, Encoding::Raw);
    assert_eq!(frame.pixels().unwrap(), pixels);
}

#[test]
fn wrong_sized_payload_is_rejected() {
    let mut frame = FrameMessage::new(0, 4, 4, &[1; 16], None, StimuliInfo::default());
    frame.width = 5;
    assert!(frame.pixels().is_err());
}

proptest! {
    #[test]
    fn payload_round_trips(w in 1..40usize, h in 1..40usize, seed in any::<u64>()) {
        // long runs mixed with noise exercise both encodings and the 255 run cap
        let pixels: Vec<u8> = (0..w * h)
            .map(|i| if (i as u64 ^ seed).is_multiple_of(7) { (i % 251) as u8 } else { (seed % 3) as u8 })
            .collect();
        let frame = FrameMessage::new(1, w, h, &pixels, None, StimuliInfo::default());
        prop_assert_eq!(frame.pixels().unwrap(), pixels);
    }

    #[test]
    fn rle_counts_are_never_zero(bytes in prop::collection::vec(0..3u8, 0..2000)) {
        let rle = rle_encode(&bytes);
        prop_assert!(rle.chunks(2).all(|c| c[0] > 0));
        prop_assert_eq!(rle.chunks(2).map(|c| c[0] as usize).sum::<usize>(), bytes.len());
    }
}
