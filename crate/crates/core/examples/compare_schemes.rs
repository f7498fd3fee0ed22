//! Best efficiency of each transfer scheme over its mixing time, next to the
//! analytic limit. The search runs over (0, 10/J] so that slow CROP pulses
//! are not truncated.
//!
//! cargo run --release --example compare_schemes

use crop::baselines::{optimize_mixing_time, MixingOptions, Scheme};
use crop::{compute_bound, SystemParams};

fn main() -> crop::Result<()> {
    let opts = MixingOptions { bracket_s: Some((0.0, 10.0)), samples: 501, ..Default::default() };
    println!("{:>6} {:>6} {:>9} {}", "ka/J", "kc/ka", "bound", Scheme::ALL.map(|s| format!("{:>17}", s.name())).join(""));
    for (ka, ratio) in [(0.25, 0.5), (1.0, 0.75), (1.0, 0.95), (2.0, 0.9), (4.0, 0.95)] {
        let params = SystemParams::symmetric(1.0, ka, ratio * ka)?;
        let eta = compute_bound(ka, ratio * ka, 1.0)?.eta;
        print!("{ka:>6} {ratio:>6} {eta:>9.5} ");
        for scheme in Scheme::ALL {
            let r = optimize_mixing_time(scheme, &params, &opts)?;
            print!("{:>17}", format!("{:.5} @{:.3}s", r.efficiency, r.tau_s));
        }
        println!();
    }
    Ok(())
}
