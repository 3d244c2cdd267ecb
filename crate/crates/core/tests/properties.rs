//! Randomised invariants across the public surface.

mod common;

use bhf_core::analysis::EnergyDensity;
use bhf_core::flow::{FlowOptions, Stepper};
use bhf_core::io::config::parse_config;
use bhf_core::io::snapshot::SnapshotData;
use common::*;
use proptest::prelude::*;

fn density(periodic_grid: bool, d: usize, n: usize, seed: u64, amp: f64) -> EnergyDensity {
    let g = if periodic_grid {
        periodic(d, n)
    } else {
        boxed(d, n)
    };
    let (u, _) = random_sphere_map(g, seed, amp, 3);
    EnergyDensity::new(&u).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn local_energy_grows_with_the_radius(
        seed in 0u64..1000,
        per in any::<bool>(),
        cx in 0.0f64..1.0,
        cy in 0.0f64..1.0,
        r1 in 0.1f64..0.6,
        extra in 0.0f64..0.4,
    ) {
        let e = density(per, 2, 12, seed, 0.5);
        let small = e.local_energy(&[cx, cy], r1).unwrap();
        let large = e.local_energy(&[cx, cy], r1 + extra).unwrap();
        prop_assert!(small <= large * (1.0 + 1e-12));
        prop_assert!(large <= e.global_energy() * (1.0 + 1e-12));
    }

    #[test]
    fn scan_agrees_with_ball_evaluation(
        seed in 0u64..1000,
        per in any::<bool>(),
        d in 1usize..=3,
        radius in 0.05f64..0.7,
    ) {
        let n = if d == 3 { 8 } else { 12 };
        let e = density(per, d, n, seed, 0.4);
        let g = *e.grid();
        let scanned = e.scan(radius);
        for (k, idx) in g.node_indices().into_iter().enumerate() {
            let x = g.position(&g.coords(idx));
            let direct = e.local_energy(&x, radius).unwrap();
            prop_assert!((scanned[k] - direct).abs() <= 1e-10 * (1.0 + direct));
        }
    }

    #[test]
    fn valid_configs_round_trip(
        d in 1usize..=4,
        n in 8usize..64,
        ambient in 2usize..6,
        per in any::<bool>(),
        t in 1e-6f64..1.0,
        cfl in 0.01f64..1.0,
        eps0 in 1e-3f64..1.0,
        ratio in 1.0f64..10.0,
        c0 in 1u32..100,
        seed in any::<u64>(),
        max_steps in proptest::option::of(1u64..10_000),
    ) {
        let mut text = format!(
            "target.kind = sphere\ntarget.L = {ambient}\ngrid.d = {d}\ngrid.n = {n}\n\
             grid.topology = {}\nflow.T_final = {t:?}\nflow.c_cfl = {cfl:?}\n\
             analysis.epsilon0 = {eps0:?}\nanalysis.epsilon1 = {:?}\nanalysis.C0 = {c0}\nseed = {seed}\n",
            if per { "periodic" } else { "box" },
            eps0 * ratio,
        );
        if let Some(m) = max_steps {
            text.push_str(&format!("flow.max_steps = {m}\n"));
        }
        let c = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&c.serialize()).unwrap(), c);
    }

    #[test]
    fn snapshots_survive_encoding(seed in 0u64..1000, steps in 0usize..4) {
        let g = periodic(2, 8);
        let (u, _) = random_sphere_map(g, seed, 0.3, 2);
        let stepper = Stepper::new(sphere(), None, g, FlowOptions { t_final: 1.0, ..FlowOptions::default() }).unwrap();
        let mut s = stepper.initial_state(&u).unwrap();
        for _ in 0..steps {
            s = stepper.step(&s).unwrap().0;
        }
        let bytes = SnapshotData::of_state(&s).encode();
        let back = SnapshotData::decode(&bytes).unwrap();
        prop_assert_eq!(back.encode(), bytes);
        let restored = back.into_state(&stepper).unwrap();
        prop_assert_eq!(restored.u, s.u);
    }
}
