//! Builds an INEPT-style pulse program by hand, runs it and prints the
//! program as the JSON accepted by `crop simulate --program`.
//!
//! cargo run --example custom_program

use std::f64::consts::FRAC_PI_2;

use crop::propagate::{run, transfer_efficiency, Element, PulseProgram, RunOptions};
use crop::{Operator, ProductOperatorState, Spin, SystemParams};

fn main() -> crop::Result<()> {
    let params = SystemParams::symmetric(1.0, 0.2, 0.1)?;
    let program = PulseProgram::new(vec![
        Element::HardRotation { spin: Spin::I, phase_rad: FRAC_PI_2, angle_rad: FRAC_PI_2 },
        Element::Delay { duration_s: 0.25 },
        Element::HardRotation { spin: Spin::I, phase_rad: 0.0, angle_rad: 2.0 * FRAC_PI_2 },
        Element::HardRotation { spin: Spin::S, phase_rad: 0.0, angle_rad: 2.0 * FRAC_PI_2 },
        Element::Delay { duration_s: 0.25 },
    ]);
    println!("{}", serde_json::to_string_pretty(&program).map_err(crop::Error::from)?);
    let traj = run(&program, &params, &ProductOperatorState::basis(Operator::Iz), &RunOptions::default())?;
    let last = traj.final_state().expect("non-empty trajectory");
    for op in [Operator::Ix, Operator::Iy, Operator::IxSz, Operator::IySz] {
        println!("{:>6} {:+.6}", op.name(), last[op]);
    }
    let (eff, t) = transfer_efficiency(&traj, Operator::IySz)?;
    println!("best 2IySz {eff:.6} at {t:.3} s");
    Ok(())
}
