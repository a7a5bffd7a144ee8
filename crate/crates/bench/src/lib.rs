//! Fixed workloads shared by the solver benchmarks.

use piconet_core::{generate_instance, GenParams, Instance};

/// `n` nodes on the default 10 x 20 m field, all with Wi-Fi and batteries
/// between 30 and 100.
pub fn field(n: usize, seed: u64) -> Instance {
    generate_instance(&GenParams {
        n,
        seed,
        battery_low: 30.0,
        ..GenParams::default()
    })
    .expect("valid parameters")
}
