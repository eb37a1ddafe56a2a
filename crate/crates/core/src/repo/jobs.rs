use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, ParamError, Result};
use crate::guidance::Registry;
use crate::metadata::OpContext;

use super::config::OpConfig;
use super::keys::KeyStore;
use super::Repository;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    /// An operation name, or a technique id that has exactly one operation.
    pub technique_id: String,
    pub inputs: Vec<String>,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub worker_count: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub technique_id: String,
    pub operation: String,
    pub inputs: Vec<String>,
    pub seed: u64,
    pub worker_count: usize,
    pub status: JobState,
    pub outputs: Vec<String>,
    pub error: Option<String>,
    /// Structured side result, e.g. the mined role set.
    pub report: Option<Value>,
}

impl JobStatus {
    pub fn is_finished(&self) -> bool {
        matches!(self.status, JobState::Done | JobState::Failed)
    }
}

struct Queued {
    job_id: String,
    config: OpConfig,
    spec: JobSpec,
    operation: String,
}

struct Shared {
    repo: Arc<Repository>,
    statuses: Mutex<BTreeMap<String, JobStatus>>,
    changed: Condvar,
}

/// Bounded pool running jobs asynchronously. Each job runs isolated: a
/// failure or panic marks only that job as failed.
pub struct JobRunner {
    shared: Arc<Shared>,
    registry: Arc<Registry>,
    keys: Arc<dyn KeyStore>,
    sender: Mutex<Option<Sender<Queued>>>,
    workers: Vec<JoinHandle<()>>,
    next_id: AtomicU64,
}

fn output_name(input: &str, operation: &str, kind: super::EntryKind) -> String {
    let stem = input.rsplit_once('.').map_or(input, |(s, _)| s);
    format!("{stem}-{operation}.{}", kind.as_str())
}

fn execute(shared: &Shared, job: &Queued) -> Result<(Vec<String>, Option<Value>)> {
    let input_id = &job.spec.inputs[0];
    let input = shared.repo.entry(input_id)?;
    let log = shared.repo.load_log(input_id)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job.spec.worker_count)
        .build()
        .map_err(|e| Error::InvalidOperation(format!("cannot start workers: {e}")))?;
    let output = pool.install(|| job.config.apply(&log, job.spec.seed, &OpContext::latest_event(&log)))?;
    let entry = shared.repo.store_canonical(
        output.bytes,
        output.kind,
        &output_name(&input.name, &job.operation, output.kind),
        &job.spec.inputs,
        Some(&job.operation),
    )?;
    Ok((vec![entry.entry_id], output.report))
}

fn update(shared: &Shared, job_id: &str, f: impl FnOnce(&mut JobStatus)) {
    let mut statuses = shared.statuses.lock().unwrap_or_else(|p| p.into_inner());
    if let Some(status) = statuses.get_mut(job_id) {
        f(status);
    }
    shared.changed.notify_all();
}

fn worker(shared: Arc<Shared>, queue: Arc<Mutex<Receiver<Queued>>>) {
    loop {
        let job = {
            let rx = queue.lock().unwrap_or_else(|p| p.into_inner());
            match rx.recv() {
                Ok(job) => job,
                Err(_) => return,
            }
        };
        update(&shared, &job.job_id, |s| s.status = JobState::Running);
        let result = catch_unwind(AssertUnwindSafe(|| execute(&shared, &job)));
        update(&shared, &job.job_id, |s| match result {
            Ok(Ok((outputs, report))) => {
                s.status = JobState::Done;
                s.outputs = outputs;
                s.report = report;
            }
            Ok(Err(e)) => {
                s.status = JobState::Failed;
                s.error = Some(e.to_string());
            }
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "job panicked".into());
                s.status = JobState::Failed;
                s.error = Some(format!("internal error: {msg}"));
            }
        });
    }
}

impl JobRunner {
    pub fn new(repo: Arc<Repository>, registry: Arc<Registry>, keys: Arc<dyn KeyStore>, pool_size: usize) -> JobRunner {
        let shared = Arc::new(Shared {
            repo,
            statuses: Mutex::new(BTreeMap::new()),
            changed: Condvar::new(),
        });
        let (tx, rx) = channel();
        let rx = Arc::new(Mutex::new(rx));
        let workers = (0..pool_size.max(1))
            .map(|i| {
                let (shared, rx) = (shared.clone(), rx.clone());
                std::thread::Builder::new()
                    .name(format!("pc4pm-job-{i}"))
                    .spawn(move || worker(shared, rx))
                    .expect("spawn job worker")
            })
            .collect();
        JobRunner {
            shared,
            registry,
            keys,
            sender: Mutex::new(Some(tx)),
            workers,
            next_id: AtomicU64::new(1),
        }
    }

    pub fn repository(&self) -> &Arc<Repository> {
        &self.shared.repo
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    fn operation_for(&self, technique_id: &str) -> Result<String> {
        if self.registry.operation(technique_id).is_some() {
            return Ok(technique_id.to_owned());
        }
        match self.registry.techniques.iter().find(|t| t.technique_id == technique_id) {
            Some(t) if t.operations.len() == 1 => Ok(t.operations[0].clone()),
            _ => Err(Error::UnknownTechnique(technique_id.to_owned())),
        }
    }

    /// Validates the spec and queues it. Validation errors are returned here,
    /// not as a failed job.
    pub fn submit(&self, spec: JobSpec) -> Result<String> {
        let operation = self.operation_for(&spec.technique_id)?;
        for input in &spec.inputs {
            self.shared.repo.entry(input)?;
        }
        let mut errors = Vec::new();
        if spec.inputs.len() != 1 {
            errors.push(ParamError::new("inputs", "expected exactly one input entry"));
        }
        if spec.worker_count < 1 {
            errors.push(ParamError::new("worker_count", "must be at least 1"));
        }
        let config = match OpConfig::parse(&self.registry, &operation, &spec.params, spec.seed, self.keys.as_ref()) {
            Ok(config) => Some(config),
            Err(Error::ParameterValidation(mut more)) => {
                errors.append(&mut more);
                None
            }
            Err(e) => return Err(e),
        };
        if !errors.is_empty() {
            return Err(Error::ParameterValidation(errors));
        }
        let job_id = format!("job-{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let status = JobStatus {
            job_id: job_id.clone(),
            technique_id: spec.technique_id.clone(),
            operation: operation.clone(),
            inputs: spec.inputs.clone(),
            seed: spec.seed,
            worker_count: spec.worker_count,
            status: JobState::Queued,
            outputs: Vec::new(),
            error: None,
            report: None,
        };
        self.shared
            .statuses
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(job_id.clone(), status);
        let job = Queued {
            job_id: job_id.clone(),
            config: config.expect("no validation errors"),
            spec,
            operation,
        };
        let sender = self.sender.lock().unwrap_or_else(|p| p.into_inner());
        sender
            .as_ref()
            .ok_or_else(|| Error::InvalidOperation("job runner is shut down".into()))?
            .send(job)
            .map_err(|_| Error::InvalidOperation("job runner is shut down".into()))?;
        Ok(job_id)
    }

    pub fn status(&self, job_id: &str) -> Result<JobStatus> {
        self.shared
            .statuses
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .get(job_id)
            .cloned()
            .ok_or_else(|| Error::UnknownJob(job_id.to_owned()))
    }

    /// Blocks until the job finishes or the timeout passes, then returns its status.
    pub fn wait(&self, job_id: &str, timeout: Duration) -> Result<JobStatus> {
        let deadline = Instant::now() + timeout;
        let mut statuses = self.shared.statuses.lock().unwrap_or_else(|p| p.into_inner());
        loop {
            let status = statuses.get(job_id).ok_or_else(|| Error::UnknownJob(job_id.to_owned()))?;
            let now = Instant::now();
            if status.is_finished() || now >= deadline {
                return Ok(status.clone());
            }
            statuses = self
                .shared
                .changed
                .wait_timeout(statuses, deadline - now)
                .unwrap_or_else(|p| p.into_inner())
                .0;
        }
    }
}

impl Drop for JobRunner {
    fn drop(&mut self) {
        self.sender.lock().unwrap_or_else(|p| p.into_inner()).take();
        for handle in self.workers.drain(..) {
            let _ = handle.join();
        }
    }
}
