//! One simulated participant selects each desk object in turn; the engine's
//! event stream is printed as JSON lines.

use deixis::hand::PointingMode;
use deixis::io::Frame;
use deixis::scene::DepthFrame;
use deixis::selector::{SelectionEvent, SelectorConfig};
use deixis::sim::{PopulationModel, SceneRenderer, SceneSpec, Simulator};
use deixis::stats::Condition;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let renderer = SceneRenderer::new(SceneSpec::desk())?;
    let pm = PopulationModel::default().typical();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut frames = 0u64;
    let mut print = |_: &Frame, _: &DepthFrame, events: &[SelectionEvent]| {
        frames += 1;
        for e in events {
            println!("{}", e.to_json());
        }
    };
    let mut sim = Simulator::new(&renderer, SelectorConfig::default()).with_sink(&mut print);
    let targets = renderer.spec().ids();
    let recs = sim.block(0, Condition::new(PointingMode::FingerLine, true), &targets, &pm, &mut rng)?;
    drop(sim);
    let hits = recs.iter().filter(|r| r.correct()).count();
    println!("{hits}/{} correct over {frames} frames", recs.len());
    Ok(())
}
