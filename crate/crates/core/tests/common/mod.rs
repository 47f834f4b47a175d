#![allow(dead_code)]

use hvarx::{build_compact, generate, CompactForm, SimDesign, VarxDataset, VarxSpec};
use hvarx_oracles::Dims;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random small VARX problem: k, p, s ≤ 2 and N ≤ 100.
pub fn small_instance(seed: u64) -> (VarxDataset<f64>, CompactForm<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=2);
    let m = rng.random_range(0..=2);
    let p = rng.random_range(1..=2);
    let s = if m == 0 { 0 } else { rng.random_range(1..=2) };
    let n = rng.random_range(30..=100);
    let t_len = n + p.max(s);
    let design = SimDesign::random_low_lag(k, m, p, s, 2, 0.5, t_len, seed);
    let (ds, _) = generate(&design).unwrap();
    let data = build_compact(&ds, VarxSpec::new(p, s)).unwrap();
    (ds, data)
}

pub fn dims(data: &CompactForm<f64>) -> Dims {
    Dims {
        k: data.k,
        m: data.m,
        p: data.spec.p,
        s: data.spec.s,
    }
}
