use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::TrainedModel;
use super::PipelineError;

pub const CHECKPOINT_FORMAT: &str = "slicecast-model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a> {
    format: &'a str,
    version: u32,
    model: &'a TrainedModel,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Owned {
    #[allow(dead_code)]
    format: String,
    #[allow(dead_code)]
    version: u32,
    model: TrainedModel,
}

/// JSON container `{"format", "version", "model"}`. Floats are written in
/// shortest round-trip form, so reading back is lossless.
pub fn write_checkpoint<W: Write>(writer: W, model: &TrainedModel) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(writer);
    serde_json::to_writer(&mut w, &Envelope { format: CHECKPOINT_FORMAT, version: CHECKPOINT_VERSION, model })
        .map_err(|e| PipelineError::Io(e.to_string()))?;
    w.flush().map_err(|e| PipelineError::Io(e.to_string()))
}

pub fn read_checkpoint<R: Read>(mut reader: R) -> Result<TrainedModel, PipelineError> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|e| PipelineError::Io(e.to_string()))?;
    let header: Header = serde_json::from_str(&text).map_err(|e| PipelineError::Checkpoint(format!("unreadable: {e}")))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(PipelineError::Checkpoint(format!("format {:?}, expected {CHECKPOINT_FORMAT:?}", header.format)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(PipelineError::Checkpoint(format!("version {}, expected {CHECKPOINT_VERSION}", header.version)));
    }
    let owned: Owned = serde_json::from_str(&text).map_err(|e| PipelineError::Checkpoint(format!("unreadable: {e}")))?;
    owned.model.validate().map_err(|e| PipelineError::Checkpoint(e.to_string()))?;
    Ok(owned.model)
}

pub fn save_checkpoint(path: &Path, model: &TrainedModel) -> Result<(), PipelineError> {
    let f = File::create(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    write_checkpoint(f, model)
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel, PipelineError> {
    let f = File::open(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    read_checkpoint(BufReader::new(f))
}
