//! A scripted participant that works through a trial block by sending the
//! same control messages a browser client would.

use deixis::stats::TrialRecord;
use rand::Rng;

use crate::protocol::{BlockSpec, ControlMsg, SessionMsg};
use crate::session::{LiveSession, LogItem, SessionError, Step};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptConfig {
    /// Frames between aiming and pinching.
    pub settle_frames: u32,
    /// Open-hand frames after each trial.
    pub release_frames: u32,
    /// Uniform aim jitter around the target pixel, ± pixels.
    pub jitter_px: f64,
    /// Give up after this many frames without a block result.
    pub max_frames: u64,
}

impl Default for ScriptConfig {
    fn default() -> Self {
        Self { settle_frames: 6, release_frames: 3, jitter_px: 2.0, max_frames: 100_000 }
    }
}

/// Send `msg` and hand its replies to `sink` as a frameless step.
fn send(session: &mut LiveSession, msg: ControlMsg, sink: &mut impl FnMut(&Step)) -> Vec<SessionMsg> {
    let replies = session.handle(msg);
    sink(&Step { messages: replies.clone(), ..Step::default() });
    replies
}

/// Run one block. Every step, including the replies to control messages, is
/// passed to `sink`. Returns the block's trial records.
pub fn run_block(
    session: &mut LiveSession,
    spec: BlockSpec,
    cfg: &ScriptConfig,
    rng: &mut impl Rng,
    mut sink: impl FnMut(&Step),
) -> Result<Vec<TrialRecord>, SessionError> {
    let mut pending = send(session, ControlMsg::StartTrialBlock { spec }, &mut sink);
    let mut frames = 0u64;
    loop {
        let mut instruction = None;
        for m in &pending {
            if let SessionMsg::Instruction(i) = m {
                instruction = Some(i.target);
            }
        }
        let Some(target) = instruction else {
            let why = pending.iter().find_map(|m| match m {
                SessionMsg::Warning { message } => Some(message.clone()),
                _ => None,
            });
            return Err(SessionError::Script(why.unwrap_or_else(|| "no instruction received".into())));
        };
        let px = session.object_pixel(target).expect("instructed object exists");
        let j = cfg.jitter_px;
        let (dx, dy) = if j > 0.0 { (rng.random_range(-j..=j), rng.random_range(-j..=j)) } else { (0.0, 0.0) };
        send(session, ControlMsg::Aim { x: px.u + dx, y: px.v + dy }, &mut sink);

        let step = |session: &mut LiveSession, sink: &mut dyn FnMut(&Step)| -> Result<Step, SessionError> {
            let s = session.step()?;
            sink(&s);
            Ok(s)
        };
        for _ in 0..cfg.settle_frames {
            step(session, &mut sink)?;
        }
        send(session, ControlMsg::PinchDown, &mut sink);
        let mut after = Vec::new();
        let mut done = None;
        while after.is_empty() {
            let s = step(session, &mut sink)?;
            frames += 1;
            if frames > cfg.max_frames {
                return Err(SessionError::Script(format!("no trial result after {frames} frames")));
            }
            if s.messages.iter().any(|m| matches!(m, SessionMsg::TrialResult(_))) {
                after.extend(s.messages.iter().cloned());
                for item in s.log {
                    if let LogItem::Block { records, .. } = item {
                        done = Some(records);
                    }
                }
            }
        }
        send(session, ControlMsg::PinchUp, &mut sink);
        for _ in 0..cfg.release_frames {
            step(session, &mut sink)?;
        }
        if let Some(records) = done {
            return Ok(records);
        }
        pending = after;
    }
}
