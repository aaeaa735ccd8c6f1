//! Persists what a session produces: the event log as JSON lines and one
//! trial CSV per completed block.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use deixis::selector::SelectionEvent;
use deixis::stats::{write_trials_path, CsvError, TrialRecord};
use thiserror::Error;

use crate::session::LogItem;

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] CsvError),
}

#[derive(Default)]
pub struct SessionLog {
    events_file: Option<BufWriter<File>>,
    pub events: Vec<SelectionEvent>,
    pub trials: Vec<TrialRecord>,
    pub written: Vec<PathBuf>,
}

impl SessionLog {
    /// Keep everything in memory.
    pub fn memory() -> Self {
        Self::default()
    }

    /// Also append events to `events_path`.
    pub fn to_file(events_path: &Path) -> Result<Self, LogError> {
        Ok(Self { events_file: Some(BufWriter::new(File::create(events_path)?)), ..Self::default() })
    }

    pub fn apply(&mut self, item: &LogItem) -> Result<(), LogError> {
        match item {
            LogItem::Event(e) => {
                if let Some(f) = self.events_file.as_mut() {
                    writeln!(f, "{}", e.to_json())?;
                }
                self.events.push(*e);
            }
            LogItem::Trial(r) => self.trials.push(*r),
            LogItem::Block { path: Some(p), records } => {
                write_trials_path(p, records)?;
                self.written.push(p.clone());
            }
            LogItem::Block { path: None, .. } => {}
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), LogError> {
        if let Some(f) = self.events_file.as_mut() {
            f.flush()?;
        }
        Ok(())
    }
}
