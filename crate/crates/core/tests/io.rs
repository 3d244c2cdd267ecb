mod common;

use std::f64::consts::PI;

use bhf_core::flow::{FlowOptions, Stepper};
use bhf_core::grid::Field;
use bhf_core::io::config::{parse_config, Experiment, InitKind, RunConfig, TargetChoice, KEYS};
use bhf_core::io::output::{OutputDir, CSV_HEADER, DIAGNOSTICS_FILE, LOCK_FILE};
use bhf_core::io::random::{coefficients, generate_random_field, wavevectors, RandomFieldSpec};
use bhf_core::io::snapshot::{read_snapshot, write_snapshot, SnapshotData};
use bhf_core::manifold::TargetManifold;
use bhf_core::Error;
use common::*;
use rand::{Rng, SeedableRng};

const MINIMAL: &str = "target.kind = sphere\ntarget.L = 3\ngrid.d = 2\ngrid.n = 16\n";

#[test]
fn empty_config_lists_mandatory_keys() {
    match parse_config("") {
        Err(Error::ConstraintViolation { fields, .. }) => {
            for k in ["target.kind", "target.L", "grid.d", "grid.n"] {
                assert!(fields.iter().any(|f| f == k), "{fields:?}");
            }
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn epsilon_ordering_is_enforced() {
    let text = format!("{MINIMAL}analysis.epsilon0 = 0.1\nanalysis.epsilon1 = 0.05\n");
    match parse_config(&text) {
        Err(Error::ConstraintViolation { fields, .. }) => {
            assert!(fields.contains(&"analysis.epsilon0".to_string()));
        }
        other => panic!("{other:?}"),
    }
    // the bare keys are not part of the grammar
    assert!(
        matches!(parse_config("epsilon0 = 0.1\nepsilon1 = 0.05"), Err(Error::UnknownKey(k)) if k == "epsilon0")
    );
}

#[test]
fn parse_errors_carry_line_numbers() {
    let text = format!("# comment\n{MINIMAL}\nflow.c_cfl = fast\n");
    assert!(matches!(
        parse_config(&text),
        Err(Error::Parse { line: 7, .. })
    ));
    assert!(matches!(
        parse_config("grid.d 2"),
        Err(Error::Parse { line: 1, .. })
    ));
    let dup = format!("{MINIMAL}grid.n = 20\n");
    assert!(matches!(
        parse_config(&dup),
        Err(Error::Parse { line: 5, .. })
    ));
    assert!(matches!(
        parse_config(&format!("{MINIMAL}grid.topology = klein\n")),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn defaults_fill_optional_keys() {
    let c = parse_config(&format!("{MINIMAL}# trailing comment\nseed = 9 # inline\n")).unwrap();
    assert_eq!(c.experiment, Experiment::Run);
    assert_eq!(c.target_kind, TargetChoice::Sphere);
    assert_eq!(
        (c.epsilon1, c.epsilon0, c.c0, c.probe_count),
        (0.05, 0.02, 16, 100)
    );
    assert_eq!(c.r_detect, None);
    assert_eq!(c.seed, 9);
    assert_eq!(c.init_kind, InitKind::Random);
    assert_eq!(c.flow_options().dt_init, f64::INFINITY);
}

#[test]
fn invalid_values_are_reported_together() {
    let text = "target.kind = sphere\ntarget.L = 1\ngrid.d = 5\ngrid.n = 4\nanalysis.C0 = 0\n";
    match parse_config(text) {
        Err(Error::ConstraintViolation { fields, .. }) => {
            for k in ["target.L", "grid.d", "grid.n", "analysis.C0"] {
                assert!(fields.iter().any(|f| f == k), "{fields:?}");
            }
        }
        other => panic!("{other:?}"),
    }
    let small_r = format!("{MINIMAL}analysis.R_detect = 0.01\n");
    assert!(matches!(
        parse_config(&small_r),
        Err(Error::ConstraintViolation { .. })
    ));
}

#[test]
fn serialization_round_trips() {
    let text = format!(
        "{MINIMAL}experiment = stability\nflow.dt_init = 1.234e-7\nflow.max_steps = 17\n\
         analysis.R_detect = 0.3\nio.out_dir = some/where\ninit.offset_free = 1\n"
    );
    assert!(matches!(parse_config(&text), Err(Error::UnknownKey(_))));
    let text = text.replace("init.offset_free = 1\n", "");
    let c = parse_config(&text).unwrap();
    let again = parse_config(&c.serialize()).unwrap();
    assert_eq!(c, again);
    assert_eq!(again.serialize(), c.serialize());
    for line in c.serialize().lines() {
        let key = line.split('=').next().unwrap().trim();
        assert!(KEYS.contains(&key));
    }
}

fn random_state(seed: u64) -> (Stepper, bhf_core::flow::FlowState) {
    let g = boxed(2, 12);
    let (u, bc) = random_sphere_map(g, seed, 0.2, 2);
    let opts = FlowOptions {
        t_final: 1.0,
        ..FlowOptions::default()
    };
    let stepper = Stepper::new(sphere(), bc, g, opts).unwrap();
    let mut s = stepper.initial_state(&u).unwrap();
    for _ in 0..3 {
        s = stepper.step(&s).unwrap().0;
    }
    (stepper, s)
}

#[test]
fn snapshot_round_trip_is_bit_exact() {
    let (stepper, state) = random_state(2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.bin");
    write_snapshot(&path, &state).unwrap();
    let back = read_snapshot(&path).unwrap();
    assert_eq!(back.encode(), SnapshotData::of_state(&state).encode());
    let bits = |f: &Field| {
        f.node_values()
            .iter()
            .map(|x| x.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&back.u), bits(&state.u));
    let restored = back.into_state(&stepper).unwrap();
    assert_eq!(restored.u, state.u);
    assert_eq!(
        (restored.t, restored.dt, restored.step_index),
        (state.t, state.dt, state.step_index)
    );
    assert_eq!(restored.ledger.f2_current(), state.ledger.f2_current());
    assert_eq!(restored.ledger.dissipation, state.ledger.dissipation);
}

#[test]
fn damaged_snapshots_are_rejected() {
    let (_, state) = random_state(3);
    let bytes = SnapshotData::of_state(&state).encode();
    let short = &bytes[..bytes.len() - 1];
    assert!(matches!(
        SnapshotData::decode(short),
        Err(Error::TruncatedPayload { .. })
    ));
    let text = String::from_utf8_lossy(&bytes[..40]).to_string();
    assert!(text.starts_with("version = 1\n"));
    let mut v2 = bytes.clone();
    v2[10] = b'2';
    assert!(matches!(
        SnapshotData::decode(&v2),
        Err(Error::VersionMismatch { .. })
    ));
    assert!(matches!(
        SnapshotData::decode(b"version = 1\nd = 2\n"),
        Err(Error::CorruptHeader(_))
    ));
    assert!(matches!(
        SnapshotData::decode(b"version = 1\nd = x\n\n"),
        Err(Error::CorruptHeader(_))
    ));
}

#[test]
fn split_run_equals_straight_run() {
    let g = boxed(2, 12);
    let (u, bc) = random_sphere_map(g, 6, 0.3, 2);
    let opts = FlowOptions {
        t_final: 1.0,
        ..FlowOptions::default()
    };
    let stepper = Stepper::new(sphere(), bc, g, opts).unwrap();
    let mut a = stepper.initial_state(&u).unwrap();
    for _ in 0..100 {
        a = stepper.step(&a).unwrap().0;
    }
    let mut b = stepper.initial_state(&u).unwrap();
    for _ in 0..50 {
        b = stepper.step(&b).unwrap().0;
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.bin");
    write_snapshot(&path, &b).unwrap();
    let mut b = read_snapshot(&path).unwrap().into_state(&stepper).unwrap();
    for _ in 0..50 {
        b = stepper.step(&b).unwrap().0;
    }
    assert_eq!(
        SnapshotData::of_state(&a).encode(),
        SnapshotData::of_state(&b).encode(),
        "final snapshots differ"
    );
}

#[test]
fn zero_amplitude_gives_the_projected_offset() {
    let g = boxed(2, 10);
    let m = sphere();
    let spec = RandomFieldSpec {
        amplitude: 0.0,
        offset: Some(vec![0.0, 3.0, 4.0]),
        ..RandomFieldSpec::default()
    };
    let u = generate_random_field(&spec, &g, &m).unwrap();
    for idx in g.node_indices() {
        assert_eq!(u.at(idx), &[0.0, 0.6, 0.8]);
    }
}

#[test]
fn same_seed_same_field() {
    let g = periodic(3, 8);
    let m = sphere();
    let spec = RandomFieldSpec {
        seed: 77,
        amplitude: 0.4,
        ..RandomFieldSpec::default()
    };
    let a = generate_random_field(&spec, &g, &m).unwrap();
    let b = generate_random_field(&spec, &g, &m).unwrap();
    assert_eq!(a, b);
    let c = generate_random_field(&RandomFieldSpec { seed: 78, ..spec }, &g, &m).unwrap();
    assert_ne!(a, c);
}

#[test]
fn single_mode_field_matches_hand_evaluation() {
    let g = boxed(1, 11);
    let m = TargetManifold::flat_subspace(1, 1);
    let spec = RandomFieldSpec {
        seed: 5,
        band_limit: 1,
        amplitude: 0.7,
        ..RandomFieldSpec::default()
    };
    assert_eq!(wavevectors(1, 1).len(), 1);
    // independent draw of the two coefficients, damped by 1/(1 + |m|²)
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let a = rng.gen_range(-1.0..1.0) * 0.5;
    let b = rng.gen_range(-1.0..1.0) * 0.5;
    assert_eq!(coefficients(&spec, 1, 1), vec![vec![(a, b)]]);
    let u = generate_random_field(&spec, &g, &m).unwrap();
    for i in 0..11 {
        let x = i as f64 / 10.0;
        let window = (4.0 * x * (1.0 - x)).powi(2);
        let want = 0.7 * window * (a * (2.0 * PI * x).cos() + b * (2.0 * PI * x).sin());
        assert!((u.value(&[i])[0] - want).abs() < 1e-15);
    }
}

#[test]
fn random_fields_lie_on_the_target() {
    let g = boxed(2, 12);
    let m = sphere();
    let u = generate_random_field(
        &RandomFieldSpec {
            amplitude: 2.0,
            ..RandomFieldSpec::default()
        },
        &g,
        &m,
    )
    .unwrap();
    assert!(u.max_distance_to(&m) < 1e-14);
    assert!(matches!(
        generate_random_field(
            &RandomFieldSpec {
                band_limit: 0,
                ..RandomFieldSpec::default()
            },
            &g,
            &m
        ),
        Err(Error::ConstraintViolation { .. })
    ));
}

#[test]
fn output_directory_is_exclusive() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("run");
    {
        let _held = OutputDir::open(&root, false).unwrap();
        assert!(root.join(LOCK_FILE).exists());
        assert!(matches!(
            OutputDir::open(&root, false),
            Err(Error::Locked(_))
        ));
    }
    assert!(!root.join(LOCK_FILE).exists());
    let csv = std::fs::read_to_string(root.join(DIAGNOSTICS_FILE)).unwrap();
    assert_eq!(csv.trim_end(), CSV_HEADER);
    // appending keeps the single header
    drop(OutputDir::open(&root, true).unwrap());
    let csv = std::fs::read_to_string(root.join(DIAGNOSTICS_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn config_builds_consistent_objects() {
    let c: RunConfig = parse_config(&format!(
        "{MINIMAL}analysis.R_detect = 0.25\nflow.tol_cg = 1e-9\n"
    ))
    .unwrap();
    let g = c.grid().unwrap();
    assert_eq!((g.dim(), g.n()), (2, 16));
    assert_eq!(c.target(), TargetManifold::unit_sphere(3));
    assert_eq!(c.analysis().detection_radius(&g), 0.25);
    assert_eq!(c.flow_options().solver.tol, 1e-9);
}
