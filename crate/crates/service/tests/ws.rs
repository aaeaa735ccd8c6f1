mod common;

use common::{connect, highlight_mismatches, recv, run_block, send, server};
use deixis::hand::PointingMode;
use deixis::selector::SelectionEvent;
use deixis::stats::read_trials_path;
use deixis_service::protocol::{ControlMsg, SessionMsg};
use futures::SinkExt;
use tokio_tungstenite::tungstenite::{Error, Message};

fn read_events(path: &std::path::Path) -> Vec<SelectionEvent> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str::<SelectionEvent>(l).unwrap()).collect()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn scripted_client_completes_a_block() {
    let dir = tempfile::tempdir().unwrap();
    let srv = server(dir.path(), 3).await;
    let mut ws = connect(&srv).await;
    let tr = run_block(&mut ws, PointingMode::FingerLine, true, 2).await;
    assert_eq!(tr.trials, 12);
    let results: Vec<_> = tr
        .messages
        .iter()
        .filter_map(|m| match m {
            SessionMsg::TrialResult(r) => Some(r),
            _ => None,
        })
        .collect();
    assert!(results.iter().all(|r| r.correct), "{results:?}");
    assert!(matches!(&tr.messages[0], SessionMsg::Instruction(i) if i.trial == 1 && i.trials == 12));
    let csv = tr.csv.clone().expect("block CSV path");
    ws.close(None).await.unwrap();

    let log = srv.shutdown().await.unwrap();
    assert_eq!(log.trials.len(), 12);
    assert_eq!(read_trials_path(&csv).unwrap().len(), 12);
    let events = read_events(&dir.path().join("session.events.jsonl"));
    assert_eq!(events, log.events);
    assert!(highlight_mismatches(&tr, &events).is_empty());
    assert!(tr.lines.iter().any(|l| l.contains("\"preselected\":")));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn feedback_off_stream_carries_no_preselection() {
    let dir = tempfile::tempdir().unwrap();
    let srv = server(dir.path(), 4).await;
    let mut ws = connect(&srv).await;
    let tr = run_block(&mut ws, PointingMode::WristLine, false, 1).await;
    assert_eq!(tr.trials, 6);
    assert!(tr.lines.iter().all(|l| !l.contains("preselect")));
    assert!(tr.lines.iter().any(|l| l.contains("\"type\":\"frame_view\"")));
    drop(ws);
    let log = srv.shutdown().await.unwrap();
    assert!(log.trials.iter().all(|r| r.condition.mode == PointingMode::WristLine && !r.condition.feedback));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn one_client_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    let srv = server(dir.path(), 5).await;
    let mut first = connect(&srv).await;
    assert!(matches!(recv(&mut first).await.0, SessionMsg::Scene(_)));
    match tokio_tungstenite::connect_async(format!("ws://{}/ws", srv.addr)).await {
        Err(Error::Http(resp)) => assert_eq!(resp.status().as_u16(), 409),
        other => panic!("second client was not refused: {:?}", other.map(|_| ())),
    }
    first.close(None).await.unwrap();
    drop(first);

    // The slot frees up once the first client is gone.
    let mut second = None;
    for _ in 0..50 {
        if let Ok((ws, _)) = tokio_tungstenite::connect_async(format!("ws://{}/ws", srv.addr)).await {
            second = Some(ws);
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(20)).await;
    }
    let mut second = second.expect("reconnect");
    assert!(matches!(recv(&mut second).await.0, SessionMsg::Scene(_)));
    drop(second);
    srv.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn malformed_and_misplaced_messages_get_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let srv = server(dir.path(), 6).await;
    let mut ws = connect(&srv).await;
    assert!(matches!(recv(&mut ws).await.0, SessionMsg::Scene(_)));
    ws.send(Message::text("{\"type\":\"jump\"}")).await.unwrap();
    ws.send(Message::text("not json")).await.unwrap();
    send(&mut ws, &ControlMsg::LoadReplay { path: "x.frames.jsonl".into() }).await;
    let mut warnings = Vec::new();
    while warnings.len() < 3 {
        if let SessionMsg::Warning { message } = recv(&mut ws).await.0 {
            warnings.push(message);
        }
    }
    assert!(warnings[0].starts_with("malformed message"));
    assert!(warnings[1].starts_with("malformed message"));
    assert!(warnings[2].contains("load_replay") && warnings[2].contains("live-sim"));
    drop(ws);
    srv.shutdown().await.unwrap();
}
