//! Synthesizes the CROP pulse for one transfer step, truncates it to a window
//! around the transfer peak and writes it in phase and frequency form.
//!
//! cargo run --example synthesize_waveform -- [out_dir]

use std::path::PathBuf;

use crop::report::{to_json, waveform_csv, write_atomic};
use crop::synth::{CropPulse, SynthOptions};
use crop::RateSet;

fn main() -> crop::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/examples/waveform".into()));
    let rates = RateSet::new(1.0, 1.0, 0.75)?;
    let pulse = CropPulse::new(&rates, &SynthOptions::default())?;
    println!(
        "full pulse: {} samples over {:.3} s, peak at {:.3} s, eta {:.6} (bound {:.6})",
        pulse.segments.len(),
        pulse.duration_s(),
        pulse.peak_time_s,
        pulse.eta_predicted(),
        pulse.bound.eta
    );

    for window in [1.0, 2.0, 3.0, 5.0] {
        let w = pulse.window(Some(window))?;
        let peak = w.segments.iter().map(|s| s.amplitude_hz).fold(0.0, f64::max);
        println!("window {window:>4} s: eta {:.6}, peak amplitude {peak:.3} Hz", w.metadata.eta_truncated);
    }

    let w = pulse.window(Some(3.0))?;
    write_atomic(&out.join("waveform.csv"), &waveform_csv(&w)?)?;
    write_atomic(&out.join("waveform.json"), &to_json(&w.metadata)?)?;
    write_atomic(&out.join("waveform_frequency.csv"), &waveform_csv(&w.to_frequency_form())?)?;
    println!("wrote {}", out.display());
    Ok(())
}
