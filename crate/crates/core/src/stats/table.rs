//! Trial table CSV: `participant,mode,feedback,target,selected,time_s`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Condition, TrialRecord};
use crate::hand::PointingMode;
use crate::scene::ObjectId;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Invalid { line: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OnOff {
    On,
    Off,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    participant: u32,
    mode: PointingMode,
    feedback: OnOff,
    target: u32,
    selected: Option<u32>,
    time_s: f64,
}

pub fn write_trials<W: Write>(w: W, records: &[TrialRecord]) -> Result<(), CsvError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(Row {
            participant: r.participant,
            mode: r.condition.mode,
            feedback: if r.condition.feedback { OnOff::On } else { OnOff::Off },
            target: r.target.0,
            selected: r.selected.map(|s| s.0),
            time_s: r.selection_time,
        })?;
    }
    if records.is_empty() {
        wr.write_record(["participant", "mode", "feedback", "target", "selected", "time_s"])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_trials<R: Read>(r: R) -> Result<Vec<TrialRecord>, CsvError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    let expected = ["participant", "mode", "feedback", "target", "selected", "time_s"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CsvError::Invalid { line: 1, reason: format!("expected header `{}`", expected.join(",")) });
    }
    let mut out = Vec::new();
    for row in rd.deserialize::<Row>() {
        let row = row?;
        let line = out.len() as u64 + 2;
        if !(row.time_s > 0.0 && row.time_s.is_finite()) {
            return Err(CsvError::Invalid { line, reason: format!("time_s must be positive, got {}", row.time_s) });
        }
        out.push(TrialRecord {
            participant: row.participant,
            condition: Condition::new(row.mode, row.feedback == OnOff::On),
            target: ObjectId(row.target),
            selected: row.selected.map(ObjectId),
            selection_time: row.time_s,
        });
    }
    Ok(out)
}

pub fn write_trials_path(path: impl AsRef<Path>, records: &[TrialRecord]) -> Result<(), CsvError> {
    write_trials(std::fs::File::create(path)?, records)
}

pub fn read_trials_path(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>, CsvError> {
    read_trials(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_empty_selection() {
        let recs = vec![
            TrialRecord {
                participant: 3,
                condition: Condition::new(PointingMode::WristLine, false),
                target: ObjectId(4),
                selected: None,
                selection_time: 3.1415926535,
            },
            TrialRecord {
                participant: 3,
                condition: Condition::new(PointingMode::FingerLine, true),
                target: ObjectId(1),
                selected: Some(ObjectId(2)),
                selection_time: 0.1 + 0.2,
            },
        ];
        let mut buf = Vec::new();
        write_trials(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "participant,mode,feedback,target,selected,time_s\n3,wrist,off,4,,3.1415926535\n3,finger,on,1,2,0.30000000000000004\n"
        );
        assert_eq!(read_trials(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn bad_header_and_values() {
        assert!(read_trials("a,b\n1,2\n".as_bytes()).is_err());
        let bad = "participant,mode,feedback,target,selected,time_s\n1,thumb,on,1,1,2.0\n";
        assert!(read_trials(bad.as_bytes()).is_err());
        let neg = "participant,mode,feedback,target,selected,time_s\n1,finger,on,1,1,-2.0\n";
        assert!(matches!(read_trials(neg.as_bytes()), Err(CsvError::Invalid { line: 2, .. })));
    }
}
