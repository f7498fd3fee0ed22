//! Follows the optimal trajectory in the reduced coordinates: the full
//! simulation of the CROP pulse keeps l2/l1 at eta and the angle between the
//! transverse vectors at gamma*.
//!
//! cargo run --example optimal_trajectory

use crop::propagate::{reduced_projection_for, run, Element, PulseProgram, RunOptions};
use crop::synth::{SynthOptions, TransferStep};
use crop::SystemParams;

fn main() -> crop::Result<()> {
    let params = SystemParams::symmetric(1.0, 1.0, 0.75)?;
    let step = TransferStep::IzToIzSz;
    let rates = step.rates(&params);
    let pulse = crop::synth::CropPulse::new(&rates, &SynthOptions::default())?;
    let program = PulseProgram::new(vec![Element::Shape { spin: step.spin(), waveform: pulse.window(None)? }]);
    let opts = RunOptions { dt_max_s: Some(1e-4), max_samples: Some(40) };
    let traj = run(&program, &params, &pulse.bootstrap_state(step), &opts)?;

    println!("eta = {:.6}, gamma* = {:.6}", pulse.bound.eta, pulse.bound.gamma_star);
    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "t", "r1", "r2", "l2/l1", "gamma");
    for s in reduced_projection_for(&traj, step) {
        let gamma = s.gamma.map_or("-".into(), |g| format!("{g:.6}"));
        println!("{:>8.3} {:>10.6} {:>10.6} {:>10.6} {gamma:>10}", s.t_s, s.r1, s.r2, s.l2 / s.l1);
    }
    Ok(())
}
