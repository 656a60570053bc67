//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use sojourn_core::field::{FieldSimulator, PowerSpectrum, SpectrumEntry};
use sojourn_core::manifold::{Family, ManifoldSpec};
use sojourn_core::seeding::substream;
use sojourn_core::temporal::TimeGrid;

/// Two-degree spectrum on the 2-sphere; `beta1 < 1/2` gives long memory.
pub fn reference_spectrum(beta1: f64, beta2: f64) -> PowerSpectrum {
    let space = ManifoldSpec::new(Family::Sphere, 2).expect("sphere");
    PowerSpectrum::new(
        space,
        vec![
            SpectrumEntry { degree: 1, c0: 1.0 / 6.0, beta: beta1 },
            SpectrumEntry { degree: 2, c0: 0.1, beta: beta2 },
        ],
    )
    .expect("unit variance")
}

pub fn reference_simulator(horizon: f64, n_points: usize) -> FieldSimulator {
    let spectrum = reference_spectrum(0.3, 0.8);
    let points = spectrum.space().sample_points(n_points, &mut substream(1, 0)).expect("sphere points");
    let grid = TimeGrid::with_step(horizon, 0.5).expect("grid");
    FieldSimulator::new(&spectrum, Arc::new(points), grid, 2).expect("factorizations")
}
