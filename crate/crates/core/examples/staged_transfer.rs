//! Two-step Iz -> 2IzSz -> Sz transfer with a CROP pulse on each spin,
//! simulated in the full 15-dimensional basis.
//!
//! cargo run --release --example staged_transfer

use crop::baselines::staged_crop_program;
use crop::propagate::{run, transfer_efficiency, RunOptions};
use crop::synth::SynthOptions;
use crop::{compute_composite_bounds, Operator, ProductOperatorState, SystemParams};

fn main() -> crop::Result<()> {
    let params = SystemParams::from_net_rates(1.0, 1.0, 0.75, 0.5, 0.375)?;
    let program = staged_crop_program(&params, &SynthOptions::default())?;
    let traj = run(&program, &params, &ProductOperatorState::basis(Operator::Iz), &RunOptions::default())?;
    let (eff, t) = transfer_efficiency(&traj, Operator::Sz)?;
    let c = compute_composite_bounds(&params)?;
    println!("program: {} elements, {:.3} s", program.elements.len(), program.duration_s());
    println!("Sz reached {eff:.6} at t = {t:.3} s; limit {:.6}", c.eta_iz_to_sz);
    println!("{}", serde_json::to_string(&c).map_err(crop::Error::from)?);
    Ok(())
}
