//! Run one 12-trial block against a headless live session and print the
//! client-facing transcript summary.
//!
//!     cargo run -p deixis-service --example scripted_block -- [--feedback off]

use deixis::hand::PointingMode;
use deixis::sim::SceneSpec;
use deixis::stats::Condition;
use deixis_service::protocol::{BlockSpec, SessionMsg};
use deixis_service::script::{run_block, ScriptConfig};
use deixis_service::session::{LiveSession, SessionConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let feedback = !std::env::args().any(|a| a == "off");
    let mut cfg = SessionConfig::live(SceneSpec::desk(), 7);
    cfg.condition = Condition::new(PointingMode::FingerLine, feedback);
    let mut session = LiveSession::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut views = 0;
    let records = run_block(&mut session, BlockSpec { participant: 1, repetitions: 2 }, &ScriptConfig::default(), &mut rng, |st| {
        views += usize::from(st.view.is_some());
        for m in &st.messages {
            if let SessionMsg::TrialResult(_) | SessionMsg::BlockDone(_) = m {
                println!("{}", m.to_json());
            }
        }
    })?;
    let correct = records.iter().filter(|r| r.correct()).count();
    println!("{correct}/{} correct over {views} frames", records.len());
    Ok(())
}
