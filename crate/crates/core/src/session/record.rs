use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{SystemEvent, TraceSample};

/// Session recording: one JSONL file of kept trajectory samples per visitor
/// plus `events.jsonl`.
///
/// Write failures are logged once per file and otherwise ignored so a full
/// disk never takes the session down.
#[derive(Debug)]
pub struct Recorder {
    dir: PathBuf,
    events: Option<BufWriter<File>>,
    samples: HashMap<String, Option<BufWriter<File>>>,
}

impl Recorder {
    pub fn create(dir: impl AsRef<Path>) -> io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let events = File::create(dir.join("events.jsonl"))?;
        Ok(Self { dir, events: Some(BufWriter::new(events)), samples: HashMap::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn sample(&mut self, visitor_id: &str, sample: &TraceSample) {
        let dir = &self.dir;
        let slot = self.samples.entry(visitor_id.to_string()).or_insert_with(|| {
            let path = dir.join(format!("{}.jsonl", file_stem(visitor_id)));
            match File::create(&path) {
                Ok(f) => Some(BufWriter::new(f)),
                Err(e) => {
                    eprintln!("recorder: cannot create {}: {e}", path.display());
                    None
                }
            }
        });
        write_line(slot, sample);
    }

    pub fn event(&mut self, event: &SystemEvent) {
        write_line(&mut self.events, event);
    }

    pub fn flush(&mut self) {
        if let Some(w) = self.events.as_mut() {
            let _ = w.flush();
        }
        for w in self.samples.values_mut().flatten() {
            let _ = w.flush();
        }
    }
}

impl Drop for Recorder {
    fn drop(&mut self) {
        self.flush();
    }
}

fn write_line<T: serde::Serialize>(slot: &mut Option<BufWriter<File>>, value: &T) {
    if let Some(w) = slot.as_mut() {
        let ok = serde_json::to_writer(&mut *w, value).is_ok() && w.write_all(b"\n").is_ok();
        if !ok {
            eprintln!("recorder: write failed, disabling this file");
            *slot = None;
        }
    }
}

/// Visitor ids are client-chosen; keep only filename-safe characters.
fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
