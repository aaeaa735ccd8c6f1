//! Record a simulated session to disk, replay it through a fresh engine and
//! check the event log is reproduced byte for byte.
//!
//! cargo run -p deixis --example record_replay -- [output-dir]

use std::path::PathBuf;

use deixis::hand::PointingMode;
use deixis::io::{events_path, frames_path, replay, Frame, Recorder, StreamHeader};
use deixis::scene::DepthFrame;
use deixis::selector::{event_log_string, run_stream, SelectionEvent, SelectorConfig};
use deixis::sim::{PopulationModel, SceneRenderer, SceneSpec, Simulator};
use deixis::stats::Condition;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, PathBuf::from);
    let base = dir.join("deixis-example");
    let renderer = SceneRenderer::new(SceneSpec::desk())?;
    let cfg = SelectorConfig::with_mode(PointingMode::WristLine);
    let mut header = StreamHeader::new(*renderer.intrinsics(), renderer.spec().fps, "record_replay example");
    header.selector = Some(cfg);

    let mut recorder = Recorder::create(&base, header)?;
    let mut live = Vec::new();
    let mut failure = None;
    {
        let mut sink = |f: &Frame, d: &DepthFrame, e: &[SelectionEvent]| {
            if let Err(err) = recorder.push(f, Some(d)) {
                failure.get_or_insert(err);
            }
            live.extend_from_slice(e);
        };
        let mut sim = Simulator::new(&renderer, cfg).with_sink(&mut sink);
        let pm = PopulationModel::default().typical();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        sim.block(0, Condition::new(cfg.mode, false), &renderer.spec().ids(), &pm, &mut rng)?;
    }
    if let Some(err) = failure {
        return Err(err.into());
    }
    recorder.finish()?;
    std::fs::write(events_path(&base), event_log_string(&live))?;

    let rp = replay(frames_path(&base))?;
    let stored = rp.header().selector.unwrap_or_default();
    let intr = rp.header().intrinsics;
    let pairs = rp.collect::<Result<Vec<_>, _>>()?;
    let n = pairs.len();
    let out = run_stream(pairs, &stored, &intr)?;
    let recorded = std::fs::read_to_string(events_path(&base))?;
    let replayed = event_log_string(&out.events);
    println!("{} frames, {} events, wrote {}", n, out.events.len(), frames_path(&base).display());
    println!("replay identical: {}", recorded == replayed);
    Ok(())
}
