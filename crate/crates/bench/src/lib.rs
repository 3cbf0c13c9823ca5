//! Shared fixtures for the benchmarks.

use scengen_core::oracle::{
    generate_synthetic_panel, SyntheticKind, SyntheticSigma, SyntheticSpec,
};
use scengen_core::{FactorLayout, HistoricalPanel};

/// Two currencies on an eight-point grid: 17 factors.
pub fn layout() -> FactorLayout {
    FactorLayout::new(
        vec!["EUR".into(), "USD".into()],
        vec![0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0],
    )
    .unwrap()
}

/// Square-root-sigma synthetic history of `n_obs` days.
pub fn panel(n_obs: usize) -> HistoricalPanel {
    let layout = layout();
    let j = layout.n_factors();
    let directions = (0..3)
        .map(|i| {
            (0..j)
                .map(|k| 0.02 * (((i * 5 + k * 3) % 7) as f64 - 3.0) / 3.0)
                .collect()
        })
        .collect();
    let mut initial = vec![0.03; j];
    initial[j - 1] = 0.1;
    generate_synthetic_panel(&SyntheticSpec {
        layout,
        kind: SyntheticKind::ConstantDirection {
            directions,
            sigma: SyntheticSigma::SqrtLevel { floor: 1e-4 },
        },
        n_obs,
        delta: 1.0 / 250.0,
        seed: 1,
        initial,
        substeps: 1,
    })
    .unwrap()
}
