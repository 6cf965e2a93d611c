//! Shared fixtures for the benchmark targets.

use adjsurv::{simulate_dgp, DgpSpec, SurvDataset};

/// Simulated dataset of the given size with moderate censoring.
pub fn bench_dataset(n: usize) -> SurvDataset {
    let spec = DgpSpec { n, ..DgpSpec::default() };
    simulate_dgp(&spec, 1234).expect("benchmark data generation")
}
