//! Diagnostic: how often does the degree-8 cycle pattern actually fire?
//!
//! Simulates a path model and reports, for each ordered pair, the number of
//! nonzero Z windows together with the resulting mean and standard error.
//! Useful for sizing tau_bulk calibration runs.

use spinflip_core::dynamics::{simulate, InitialState, Kernel, SimConfig};
use spinflip_core::model::{random_model, CouplingScheme, Family, GeneratorSpec};
use spinflip_core::structure::{find_bulk_edges, CycleWindowConfig, StructureConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let horizon: f64 = args.next().map(|a| a.parse().unwrap()).unwrap_or(400_000.0);
    let eps: f64 = args.next().map(|a| a.parse().unwrap()).unwrap_or(0.05);
    let seed: u64 = args.next().map(|a| a.parse().unwrap()).unwrap_or(1);

    let model = random_model(
        &GeneratorSpec {
            family: Family::Path { n: 4 },
            coupling: CouplingScheme::fixed(0.4),
            field_mag: 0.0,
        },
        0,
    )
    .unwrap();
    let trace = simulate(
        &model,
        &Kernel::Glauber,
        &SimConfig {
            horizon,
            seed,
            initial: InitialState::AllPlus,
        },
    )
    .unwrap();
    println!("flips: {}", trace.events().len());
    let cfg = StructureConfig {
        cycle: CycleWindowConfig { eps, spacing: 2.0 },
        tau_bulk: 1.0, // not under study here
        tau_match: 0.2,
        t_bulk: horizon,
        t_match: 1.0,
        reuse_trace: true,
        min_occupancy: 0.0,
    };
    let bulk = find_bulk_edges(&trace, &cfg).unwrap();
    let acc = &bulk.accumulator;
    println!("windows: {}", acc.windows);
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                continue;
            }
            println!(
                "pair ({i},{j}): sum Z = {:+}, mean = {:.3e}, se = {:.3e}",
                acc.sum(i, j),
                acc.mean(i, j),
                acc.std_error(i, j)
            );
        }
    }
}
