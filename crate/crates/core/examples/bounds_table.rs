//! Efficiency limits over a grid of relaxation rates, plus the composite
//! limits of a two-step Iz -> Sz transfer.
//!
//! cargo run --example bounds_table

use crop::bounds::{bound_for, verify_stationarity};
use crop::{compute_composite_bounds, RateSet, SystemParams};

fn main() -> crop::Result<()> {
    let ratios = [0.0, 0.5, 0.75, 0.9, 0.95, 1.0];
    print!("{:>8}", "ka/J");
    for r in ratios {
        print!("{:>10}", format!("kc/ka={r}"));
    }
    println!();
    for ka in [0.1, 0.25, 0.5, 1.0, 2.0, 4.0] {
        print!("{ka:>8}");
        for r in ratios {
            print!("{:>10.5}", bound_for(&RateSet::from_ratios(ka, r)?).eta);
        }
        println!();
    }

    let b = bound_for(&RateSet::new(1.0, 1.0, 0.75)?);
    let (r1, r2) = verify_stationarity(&b);
    println!(
        "\nka = J, kc = 0.75 ka: eta = {:.6}, gamma* = {:.4} rad, theta = {:.4} rad, residuals ({r1:.1e}, {r2:.1e})",
        b.eta, b.gamma_star, b.theta
    );

    let params = SystemParams::from_net_rates(1.0, 1.0, 0.75, 0.5, 0.375)?;
    let c = compute_composite_bounds(&params)?;
    println!("Iz -> 2IzSz      {:.6}", c.eta_iz_to_izsz);
    println!("2IzSz -> Sz      {:.6}", c.eta_izsz_to_sz);
    println!("Iz -> Sz         {:.6}", c.eta_iz_to_sz);
    println!("single transition {:.6}", c.eta_single_transition);
    Ok(())
}
