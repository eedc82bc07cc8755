//! Background propagation jobs.
//!
//! A fixed pool of worker threads takes queued jobs in submission order,
//! skipping any job whose sequence already has one running, so at most one
//! job per sequence runs at a time.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use segprop_core::dataset::{frame_file_name, write_label_image, Video, DEFAULT_COLOR_TOLERANCE};
use segprop_core::flow::{EstimatedFlow, FlowSource, GrayFrame, LkParams};
use segprop_core::segprop::{PropagationConfig, Propagator};
use segprop_core::Palette;

use crate::store::Store;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct Job {
    pub id: u64,
    pub sequence: String,
    pub config: PropagationConfig,
    pub state: JobState,
    pub progress: f64,
    /// Keyframes the job consumed.
    pub keyframes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Default)]
struct Queue {
    jobs: BTreeMap<u64, Job>,
    running: HashSet<String>,
    next_id: u64,
    shutdown: bool,
}

struct Shared {
    queue: Mutex<Queue>,
    wake: Condvar,
    store: Arc<Store>,
}

impl Shared {
    fn update(&self, id: u64, f: impl FnOnce(&mut Job)) {
        let mut q = self.queue.lock().unwrap();
        if let Some(job) = q.jobs.get_mut(&id) {
            f(job);
        }
    }

    fn set_progress(&self, id: u64, p: f64) {
        self.update(id, |j| j.progress = j.progress.max(p));
    }
}

pub struct JobManager {
    shared: Arc<Shared>,
    workers: Vec<JoinHandle<()>>,
}

impl JobManager {
    pub fn new(store: Arc<Store>, workers: usize) -> Self {
        let shared = Arc::new(Shared {
            queue: Mutex::new(Queue {
                next_id: 1,
                ..Default::default()
            }),
            wake: Condvar::new(),
            store,
        });
        let workers = (0..workers.max(1))
            .map(|_| {
                let shared = shared.clone();
                std::thread::spawn(move || worker(&shared))
            })
            .collect();
        Self { shared, workers }
    }

    pub fn submit(&self, sequence: &str, config: PropagationConfig, keyframes: Vec<usize>) -> Job {
        let mut q = self.shared.queue.lock().unwrap();
        let id = q.next_id;
        q.next_id += 1;
        let job = Job {
            id,
            sequence: sequence.to_string(),
            config,
            state: JobState::Queued,
            progress: 0.0,
            keyframes,
            labels_dir: None,
            report: None,
            error: None,
        };
        q.jobs.insert(id, job.clone());
        self.shared.wake.notify_all();
        job
    }

    pub fn get(&self, id: u64) -> Option<Job> {
        self.shared.queue.lock().unwrap().jobs.get(&id).cloned()
    }

    /// Most recent finished job of a sequence.
    pub fn latest_done(&self, sequence: &str) -> Option<Job> {
        let q = self.shared.queue.lock().unwrap();
        q.jobs
            .values()
            .rev()
            .find(|j| j.sequence == sequence && j.state == JobState::Done)
            .cloned()
    }

    pub fn jobs_for(&self, sequence: &str) -> Vec<Job> {
        let q = self.shared.queue.lock().unwrap();
        q.jobs.values().filter(|j| j.sequence == sequence).cloned().collect()
    }
}

impl Drop for JobManager {
    fn drop(&mut self) {
        self.shared.queue.lock().unwrap().shutdown = true;
        self.shared.wake.notify_all();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn worker(shared: &Shared) {
    loop {
        let job = {
            let mut q = shared.queue.lock().unwrap();
            loop {
                if q.shutdown {
                    return;
                }
                let next = q
                    .jobs
                    .values()
                    .find(|j| j.state == JobState::Queued && !q.running.contains(&j.sequence))
                    .map(|j| j.id);
                if let Some(id) = next {
                    let job = q.jobs.get_mut(&id).unwrap();
                    job.state = JobState::Running;
                    let job = job.clone();
                    q.running.insert(job.sequence.clone());
                    break job;
                }
                q = shared.wake.wait(q).unwrap();
            }
        };
        log::info!("job {} started on {}", job.id, job.sequence);
        let result = run_job(shared, &job);
        {
            let mut q = shared.queue.lock().unwrap();
            q.running.remove(&job.sequence);
            if let Some(j) = q.jobs.get_mut(&job.id) {
                match result {
                    Ok((labels_dir, report)) => {
                        j.state = JobState::Done;
                        j.progress = 1.0;
                        j.labels_dir = Some(labels_dir);
                        j.report = Some(report);
                    }
                    Err(e) => {
                        log::warn!("job {} failed: {e}", job.id);
                        j.state = JobState::Failed;
                        j.error = Some(e);
                    }
                }
            }
        }
        shared.wake.notify_all();
    }
}

/// Flow from the sequence's flow directory when it has files, otherwise
/// estimated from the frames.
pub fn sequence_flow(video: &Video) -> Result<Box<dyn FlowSource>, segprop_core::Error> {
    let dir = video.flow_dir();
    let has_files = std::fs::read_dir(&dir).map(|mut d| d.next().is_some()).unwrap_or(false);
    if has_files {
        return Ok(Box::new(video.flow_source()));
    }
    log::info!("{}: no flow files, estimating flow from frames", video.name);
    let frames = (0..video.frame_count())
        .map(|i| GrayFrame::open(&video.manifest.frame_path(i).expect("in range")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Box::new(EstimatedFlow::new(frames, LkParams::default())))
}

fn run_job(shared: &Shared, job: &Job) -> Result<(PathBuf, PathBuf), String> {
    let seq = shared.store.get(&job.sequence).map_err(|e| e.to_string())?;
    let video = Video::open(&seq.dir).map_err(|e| e.to_string())?;
    let palette = Palette::standard();
    let keyframes = video
        .keyframe_labels(&palette, DEFAULT_COLOR_TOLERANCE)
        .map_err(|e| e.to_string())?;
    let used: Vec<usize> = keyframes.iter().map(|l| l.frame_index).collect();
    shared.update(job.id, |j| j.keyframes = used);
    shared.set_progress(job.id, 0.05);
    let flows = sequence_flow(&video).map_err(|e| e.to_string())?;
    let propagator = Propagator::new(job.config.clone()).map_err(|e| e.to_string())?;
    shared.set_progress(job.id, 0.1);
    let out = propagator
        .propagate_sequence(&keyframes, video.frame_count(), flows.as_ref())
        .map_err(|e| e.to_string())?;
    shared.set_progress(job.id, 0.9);

    let dir = seq.job_dir(job.id);
    let labels_dir = dir.join("labels");
    std::fs::create_dir_all(&labels_dir).map_err(|e| format!("{}: {e}", labels_dir.display()))?;
    for l in &out.labels {
        write_label_image(&labels_dir.join(frame_file_name(l.frame_index)), l, &palette).map_err(|e| e.to_string())?;
    }
    let report = dir.join("report.json");
    let text = serde_json::to_string_pretty(&out.report).map_err(|e| e.to_string())?;
    std::fs::write(&report, text).map_err(|e| format!("{}: {e}", report.display()))?;
    Ok((labels_dir, report))
}
