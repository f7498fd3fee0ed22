//! Checks the limit numerically on the reduced two-vector system: random
//! control schedules and a gradient ascent over 64-segment schedules must
//! both stay below eta.
//!
//! cargo run --release --example verify_bound

use crop::oracle::{ascent_search, ceiling_check_against, random_ceiling_check, AscentOptions, CeilingOptions};
use crop::RateSet;

fn main() -> crop::Result<()> {
    let ceiling = CeilingOptions { trials: 20_000, ..Default::default() };
    for (ka, ratio) in [(0.25, 0.0), (1.0, 0.75), (2.0, 0.95)] {
        let rates = RateSet::from_ratios(ka, ratio)?;
        let random = random_ceiling_check(&rates, &ceiling);
        let ascent = ascent_search(&rates, &AscentOptions { iterations: 1000, ..Default::default() })?;
        println!(
            "ka/J {ka:<5} kc/ka {ratio:<5} eta {:.6}  random max {:.6}  ascent max {:.6}  falsified {}",
            random.eta_bound, random.max_found, ascent.best_r2, random.falsified
        );
    }

    let rates = RateSet::from_ratios(1.0, 0.75)?;
    let wrong = ceiling_check_against(&rates, 0.5 * crop::bounds::bound_for(&rates).eta, &ceiling);
    println!("halved claim: max {:.6} against {:.6}, falsified {}", wrong.max_found, wrong.eta_bound, wrong.falsified);
    Ok(())
}
