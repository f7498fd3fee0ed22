//! Free evolution of in-phase I coherence: with cross-correlated relaxation
//! the two multiplet lines have widths ka + kc and ka - kc.
//!
//! cargo run --example multiplet_decay

use std::f64::consts::PI;

use crop::spin::{free_evolution_generator, multiplet_components};
use crop::{Operator, ProductOperatorState, SystemParams};

fn main() -> crop::Result<()> {
    let params = SystemParams::symmetric(1.0, 1.0, 0.9)?;
    let g = free_evolution_generator(&params)?;
    let x0 = ProductOperatorState::basis(Operator::Ix);
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "t", "|alpha|", "expected", "|beta|", "expected");
    for k in 0..=10 {
        let t = 0.2 * k as f64;
        let m = multiplet_components(&g.propagator(t).apply(&x0));
        let fast = 0.5 * (-PI * (params.ka() + params.kc()) * t).exp();
        let slow = 0.5 * (-PI * (params.ka() - params.kc()) * t).exp();
        println!("{t:>6.2} {:>10.6} {fast:>10.6} {:>10.6} {slow:>10.6}", m.alpha_magnitude(), m.beta_magnitude());
    }
    Ok(())
}
