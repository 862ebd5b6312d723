//! Background jobs and their observable state.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use missingpath_core::projection::{JobControl, ProjectionConfig};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Ingest,
    Projection,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed { reason: String },
    Cancelled { reason: String },
}

impl JobState {
    pub fn is_finished(&self) -> bool {
        matches!(self, JobState::Done | JobState::Failed { .. } | JobState::Cancelled { .. })
    }
}

pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub collection_id: String,
    pub created_at: DateTime<Utc>,
    pub control: JobControl,
    state: Mutex<JobState>,
}

#[derive(Clone, Debug, Serialize)]
pub struct JobView {
    pub job_id: String,
    pub kind: JobKind,
    pub collection_id: String,
    pub created_at: DateTime<Utc>,
    #[serde(flatten)]
    pub state: JobState,
    pub progress: f64,
}

impl Job {
    pub fn state(&self) -> JobState {
        self.state.lock().expect("job lock poisoned").clone()
    }

    pub fn set_state(&self, state: JobState) {
        *self.state.lock().expect("job lock poisoned") = state;
    }

    pub fn view(&self) -> JobView {
        let state = self.state();
        let progress = if state == JobState::Done { 1.0 } else { self.control.progress() };
        JobView {
            job_id: self.id.clone(),
            kind: self.kind,
            collection_id: self.collection_id.clone(),
            created_at: self.created_at,
            state,
            progress,
        }
    }
}

#[derive(Default)]
pub struct JobRegistry {
    jobs: Mutex<HashMap<String, Arc<Job>>>,
}

impl JobRegistry {
    pub fn create(&self, kind: JobKind, collection_id: &str) -> Arc<Job> {
        let job = Arc::new(Job {
            id: uuid::Uuid::new_v4().to_string(),
            kind,
            collection_id: collection_id.to_string(),
            created_at: Utc::now(),
            control: JobControl::new(),
            state: Mutex::new(JobState::Queued),
        });
        self.jobs.lock().expect("registry lock poisoned").insert(job.id.clone(), job.clone());
        job
    }

    pub fn get(&self, id: &str) -> Option<Arc<Job>> {
        self.jobs.lock().expect("registry lock poisoned").get(id).cloned()
    }
}

/// Projection jobs of one collection: at most one running and one waiting.
#[derive(Default)]
pub struct ProjectionSlot {
    pub running: Option<Arc<Job>>,
    pub queued: Option<(Arc<Job>, ProjectionConfig)>,
}

impl ProjectionSlot {
    /// Queues `job` behind the running one, cancelling any job already waiting.
    /// Returns true when nothing is running and the job should start now.
    pub fn submit(&mut self, job: Arc<Job>, cfg: ProjectionConfig) -> bool {
        if self.running.is_none() {
            job.set_state(JobState::Running);
            self.running = Some(job);
            return true;
        }
        if let Some((old, _)) = self.queued.take() {
            old.control.cancel();
            old.set_state(JobState::Cancelled { reason: format!("superseded by job {}", job.id) });
        }
        self.queued = Some((job, cfg));
        false
    }

    /// Marks the running job finished and promotes the waiting one, if any.
    pub fn finish(&mut self) -> Option<(Arc<Job>, ProjectionConfig)> {
        self.running = None;
        let next = self.queued.take()?;
        next.0.set_state(JobState::Running);
        self.running = Some(next.0.clone());
        Some(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newer_requests_supersede_waiting_ones() {
        let reg = JobRegistry::default();
        let mut slot = ProjectionSlot::default();
        let cfg = ProjectionConfig::all_paths(3);
        let a = reg.create(JobKind::Projection, "c");
        let b = reg.create(JobKind::Projection, "c");
        let c = reg.create(JobKind::Projection, "c");
        assert!(slot.submit(a.clone(), cfg.clone()));
        assert!(!slot.submit(b.clone(), cfg.clone()));
        assert!(!slot.submit(c.clone(), cfg.clone()));
        assert_eq!(a.state(), JobState::Running);
        assert!(matches!(b.state(), JobState::Cancelled { .. }));
        assert_eq!(c.state(), JobState::Queued);
        let (next, _) = slot.finish().unwrap();
        assert_eq!(next.id, c.id);
        assert_eq!(c.state(), JobState::Running);
        assert!(slot.finish().is_none());
        assert!(slot.running.is_none());
    }
}
