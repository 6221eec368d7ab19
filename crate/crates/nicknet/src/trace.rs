//! Reading and writing event traces on disk.

use std::fs;
use std::path::Path;

use nicknet_core::fluidics::{self, Event, TraceSummary};

use crate::error::{Error, Result};

pub fn write_trace(path: &Path, events: &[Event]) -> Result<()> {
    fs::write(path, fluidics::render_trace(events)).map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<Event>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    fluidics::parse_trace(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Checks a trace file; a broken rule becomes [`Error::Trace`].
pub fn validate_file(path: &Path, partial: bool) -> Result<TraceSummary> {
    let events = read_trace(path)?;
    let checked = if partial {
        fluidics::validate_partial(&events)
    } else {
        fluidics::validate(&events)
    };
    checked.map_err(|v| Error::Trace {
        rule: v.rule.name(),
        message: v.to_string(),
    })
}
