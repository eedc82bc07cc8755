use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::flo::{flow_file_name, read_flow_file};
use super::lk::{estimate_flow, GrayFrame, LkParams};
use crate::error::{Error, Result};
use crate::model::{FlowDirection, FlowField};

/// Anything that can hand out the flow field leaving a frame in a direction.
pub trait FlowSource: Sync {
    fn flow(&self, frame: usize, direction: FlowDirection) -> Result<Arc<FlowField>>;
}

type FlowKey = (usize, FlowDirection);

fn missing(frame: usize, direction: FlowDirection) -> Error {
    Error::MissingFlow {
        frame,
        direction: direction.as_str(),
    }
}

/// In-memory flow fields.
#[derive(Default, Clone)]
pub struct FlowStore {
    fields: HashMap<FlowKey, Arc<FlowField>>,
}

impl FlowStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, field: FlowField) {
        self.fields
            .insert((field.source_frame, field.direction), Arc::new(field));
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FlowField> {
        self.fields.values().map(|f| f.as_ref())
    }
}

impl FromIterator<FlowField> for FlowStore {
    fn from_iter<I: IntoIterator<Item = FlowField>>(iter: I) -> Self {
        let mut store = FlowStore::new();
        for f in iter {
            store.insert(f);
        }
        store
    }
}

impl FlowSource for FlowStore {
    fn flow(&self, frame: usize, direction: FlowDirection) -> Result<Arc<FlowField>> {
        self.fields
            .get(&(frame, direction))
            .cloned()
            .ok_or_else(|| missing(frame, direction))
    }
}

/// A directory of `NNNNNN_{fwd,bwd}.flo` files, read lazily and cached.
pub struct FlowDir {
    dir: PathBuf,
    cache: Mutex<HashMap<FlowKey, Arc<FlowField>>>,
}

impl FlowDir {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }
}

impl FlowSource for FlowDir {
    fn flow(&self, frame: usize, direction: FlowDirection) -> Result<Arc<FlowField>> {
        if let Some(f) = self.cache.lock().unwrap().get(&(frame, direction)) {
            return Ok(f.clone());
        }
        let path = self.dir.join(flow_file_name(frame, direction));
        if !path.is_file() {
            return Err(missing(frame, direction));
        }
        let mut field = read_flow_file(&path)?;
        field.source_frame = frame;
        field.direction = direction;
        let field = Arc::new(field);
        self.cache.lock().unwrap().insert((frame, direction), field.clone());
        Ok(field)
    }
}

/// Flow estimated on demand from grayscale frames with the pyramidal
/// Lucas-Kanade estimator, cached per (frame, direction).
pub struct EstimatedFlow {
    frames: Vec<Arc<GrayFrame>>,
    params: LkParams,
    cache: Mutex<HashMap<FlowKey, Arc<FlowField>>>,
}

impl EstimatedFlow {
    pub fn new(frames: Vec<GrayFrame>, params: LkParams) -> Self {
        Self {
            frames: frames.into_iter().map(Arc::new).collect(),
            params,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl FlowSource for EstimatedFlow {
    fn flow(&self, frame: usize, direction: FlowDirection) -> Result<Arc<FlowField>> {
        if let Some(f) = self.cache.lock().unwrap().get(&(frame, direction)) {
            return Ok(f.clone());
        }
        let target = direction
            .target(frame)
            .filter(|&t| t < self.frames.len() && frame < self.frames.len())
            .ok_or_else(|| missing(frame, direction))?;
        let mut field = estimate_flow(&self.frames[frame], &self.frames[target], &self.params)?;
        field.source_frame = frame;
        field.direction = direction;
        let field = Arc::new(field);
        self.cache.lock().unwrap().insert((frame, direction), field.clone());
        Ok(field)
    }
}
