//! Feed a pinch metric trace through the click state machine.

use deixis::hand::{pinch_step, PinchConfig, PinchState};

fn main() {
    let cfg = PinchConfig::default();
    let trace = [
        Some(0.60), Some(0.40), Some(0.20), Some(0.18), Some(0.15), Some(0.15), Some(0.30),
        Some(0.20), None, Some(0.50), Some(0.22), Some(0.21), Some(0.20), None, None, None, Some(0.6),
    ];
    let mut state = PinchState::default();
    println!("engage < {}, release > {}, dwell {} frames", cfg.engage, cfg.release, cfg.dwell_frames);
    for (i, m) in trace.iter().enumerate() {
        let (next, click) = pinch_step(state, *m, &cfg);
        state = next;
        let m = m.map_or_else(|| "  -- ".to_string(), |v| format!("{v:.2}"));
        println!("{i:>2}  {m}  {:?}{}", state.phase, if click { "  CLICK" } else { "" });
    }
}
