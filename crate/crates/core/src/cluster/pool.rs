use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("worker pool needs at least one worker")]
    NoWorkers,
    #[error("could not start worker threads: {0}")]
    Spawn(String),
}

/// The first failing task of a phase, by task index.
#[derive(Debug, Error)]
#[error("task {task} failed: {source}")]
pub struct PhaseError<E: std::error::Error + 'static> {
    pub task: usize,
    #[source]
    pub source: E,
}

/// Fixed set of worker threads executing fork-join phases.
///
/// A phase returns only after every task has finished, so the return of
/// [`run_phase`](Self::run_phase) is the barrier. Logical workers share at
/// most one thread per available core: tasks are independent, and more
/// threads than cores only adds contention.
pub struct WorkerPool {
    pool: rayon::ThreadPool,
    num_workers: usize,
    threads: usize,
    generation: AtomicU64,
}

impl WorkerPool {
    pub fn new(num_workers: usize) -> Result<Self, PoolError> {
        if num_workers == 0 {
            return Err(PoolError::NoWorkers);
        }
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        let threads = num_workers.min(cores);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("worker-{i}"))
            .build()
            .map_err(|e| PoolError::Spawn(e.to_string()))?;
        Ok(Self {
            pool,
            num_workers,
            threads,
            generation: AtomicU64::new(0),
        })
    }

    pub fn num_workers(&self) -> usize {
        self.num_workers
    }

    /// OS threads backing the workers.
    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Number of barriers passed so far.
    pub fn generation(&self) -> u64 {
        self.generation.load(Ordering::Acquire)
    }

    /// Runs every task exactly once and returns results in task order.
    ///
    /// All tasks run to completion even when one fails; the error reported
    /// is the failing task with the lowest index.
    pub fn run_phase<T, R, E, F>(&self, tasks: Vec<T>, task_fn: F) -> Result<Vec<R>, PhaseError<E>>
    where
        T: Send,
        R: Send,
        E: std::error::Error + Send + 'static,
        F: Fn(usize, T) -> Result<R, E> + Sync,
    {
        let results: Vec<Result<R, E>> = if tasks.is_empty() {
            Vec::new()
        } else {
            self.pool.install(|| {
                tasks
                    .into_par_iter()
                    .enumerate()
                    .with_max_len(1)
                    .map(|(i, t)| task_fn(i, t))
                    .collect()
            })
        };
        self.generation.fetch_add(1, Ordering::AcqRel);
        let mut out = Vec::with_capacity(results.len());
        for (task, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) => out.push(v),
                Err(source) => return Err(PhaseError { task, source }),
            }
        }
        Ok(out)
    }
}

impl std::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerPool")
            .field("num_workers", &self.num_workers)
            .field("threads", &self.threads)
            .field("generation", &self.generation())
            .finish()
    }
}
