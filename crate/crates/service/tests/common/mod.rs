#![allow(dead_code)]

use std::path::Path;
use std::time::Duration;

use deixis::hand::PointingMode;
use deixis::scene::ObjectId;
use deixis::selector::{EventKind, SelectionEvent};
use deixis::sim::SceneSpec;
use deixis_service::protocol::{BlockSpec, ControlMsg, SessionMsg};
use deixis_service::server::{start, RunningServer, ServeConfig};
use deixis_service::session::SessionConfig;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

/// Live-sim server writing into `dir`, stepping every 2 ms.
pub async fn server(dir: &Path, seed: u64) -> RunningServer {
    let mut session = SessionConfig::live(SceneSpec::desk(), seed);
    session.out_dir = Some(dir.to_path_buf());
    let cfg = ServeConfig {
        events_path: Some(dir.join("session.events.jsonl")),
        frame_period: Some(Duration::from_millis(2)),
        ..ServeConfig::new(0, session)
    };
    start(cfg).await.expect("server starts")
}

pub async fn connect(server: &RunningServer) -> Ws {
    connect_async(format!("ws://{}/ws", server.addr)).await.expect("connects").0
}

pub async fn send(ws: &mut Ws, msg: &ControlMsg) {
    ws.send(Message::text(msg.to_json())).await.expect("send");
}

/// Next session message, with its raw text.
pub async fn recv(ws: &mut Ws) -> (SessionMsg, String) {
    loop {
        let m = tokio::time::timeout(Duration::from_secs(20), ws.next())
            .await
            .expect("server went quiet")
            .expect("stream open")
            .expect("frame");
        if let Message::Text(t) = m {
            let text = t.to_string();
            let msg: SessionMsg = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"));
            return (msg, text);
        }
    }
}

/// What a scripted client saw during one block: everything from the first
/// instruction on, minus views of frames older than it.
#[derive(Debug, Default)]
pub struct Transcript {
    pub lines: Vec<String>,
    pub messages: Vec<SessionMsg>,
    pub csv: Option<String>,
    pub trials: u32,
}

/// Center of an outline, good enough to aim at.
fn outline_center(outline: &[[f64; 2]]) -> (f64, f64) {
    let n = outline.len() as f64;
    let (x, y) = outline.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    (x / n, y / n)
}

/// Set the condition, run one block and collect the transcript.
pub async fn run_block(ws: &mut Ws, mode: PointingMode, feedback: bool, repetitions: u32) -> Transcript {
    let mut tr = Transcript::default();
    let mut centers = std::collections::BTreeMap::new();
    let mut block_t = None;
    let mut push = |tr: &mut Transcript, (m, t): (SessionMsg, String)| {
        if let (SessionMsg::Instruction(i), None) = (&m, block_t) {
            block_t = Some(i.t);
        }
        let stale = matches!(&m, SessionMsg::FrameView(v) if block_t.is_some_and(|b| v.t < b));
        if block_t.is_some() && !stale {
            tr.lines.push(t);
            tr.messages.push(m.clone());
        }
        m
    };
    loop {
        if let SessionMsg::Scene(s) = recv(ws).await.0 {
            for o in &s.objects {
                centers.insert(o.id, outline_center(&o.outline));
            }
            break;
        }
    }
    send(ws, &ControlMsg::SetCondition { mode, feedback }).await;
    send(ws, &ControlMsg::StartTrialBlock { spec: BlockSpec { participant: 1, repetitions } }).await;
    let mut target: Option<ObjectId> = None;
    let mut settle = 0;
    let mut pinched = false;
    loop {
        match push(&mut tr, recv(ws).await) {
            SessionMsg::Instruction(i) => {
                target = Some(i.target);
                let (x, y) = centers[&i.target];
                send(ws, &ControlMsg::Aim { x, y }).await;
                settle = 0;
            }
            SessionMsg::FrameView(_) if target.is_some() && !pinched => {
                settle += 1;
                if settle >= 6 {
                    send(ws, &ControlMsg::PinchDown).await;
                    pinched = true;
                }
            }
            SessionMsg::TrialResult(_) => {
                tr.trials += 1;
                target = None;
                send(ws, &ControlMsg::PinchUp).await;
                pinched = false;
            }
            SessionMsg::BlockDone(b) => {
                tr.csv = b.csv;
                return tr;
            }
            SessionMsg::Warning { message } => panic!("server warned: {message}"),
            _ => {}
        }
    }
}

/// Preselection implied by the event log at time `t`.
pub fn preselection_at(events: &[SelectionEvent], t: u64) -> Option<ObjectId> {
    let mut cur = None;
    for e in events.iter().take_while(|e| e.t <= t) {
        match e.kind {
            EventKind::PreselectionChanged(p) => cur = p,
            EventKind::HandsLost => cur = None,
            _ => {}
        }
    }
    cur
}

/// Frame views whose highlight disagrees with the event log.
pub fn highlight_mismatches(tr: &Transcript, events: &[SelectionEvent]) -> Vec<(u64, Option<ObjectId>, Option<ObjectId>)> {
    tr.messages
        .iter()
        .filter_map(|m| match m {
            SessionMsg::FrameView(v) => v.preselected.map(|p| (v.t, p)),
            _ => None,
        })
        .filter_map(|(t, shown)| {
            let logged = preselection_at(events, t);
            (shown != logged).then_some((t, shown, logged))
        })
        .collect()
}
