#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsc_core::model::{ComplexPower, Track, TrainLoad, TscSpec, ZsoId};
use tsc_core::scenario::Scenario;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Train power ranges for random snapshots.
#[derive(Debug, Clone, Copy)]
pub struct Draw {
    pub max_trains: usize,
    pub p_mw: (f64, f64),
    pub q_mvar: (f64, f64),
}

impl Default for Draw {
    fn default() -> Self {
        Draw { max_trains: 4, p_mw: (-4.8, 4.8), q_mvar: (0.0, 0.5) }
    }
}

impl Draw {
    pub fn traction() -> Self {
        Draw { p_mw: (0.5, 4.8), ..Draw::default() }
    }
}

/// Default 40 km cluster with 1..=`max_trains` trains spread over both
/// zones and tracks.
pub fn random_tsc(rng: &mut ChaCha8Rng, draw: Draw) -> TscSpec {
    let mut tsc = TscSpec::default();
    let n = rng.gen_range(1..=draw.max_trains);
    for i in 0..n {
        let zso = if rng.gen_bool(0.5) { ZsoId::One } else { ZsoId::Two };
        let track = if rng.gen_bool(0.5) { Track::Up } else { Track::Down };
        let len = tsc.zso(zso).up.length_km;
        let l1 = rng.gen_range(0.2..len - 0.2);
        let p = rng.gen_range(draw.p_mw.0..=draw.p_mw.1);
        let q = rng.gen_range(draw.q_mvar.0..=draw.q_mvar.1);
        tsc.zso_mut(zso).push_train(TrainLoad::new(format!("t{i}"), l1, ComplexPower::new(p, q), track));
    }
    tsc
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn load_fixture(name: &str) -> Scenario {
    Scenario::load(&fixture(name)).expect("fixture parses")
}
