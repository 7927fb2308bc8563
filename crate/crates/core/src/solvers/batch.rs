use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::ising::{IsingInstance, TrialRecord};
use crate::schedule::Schedule;

use super::{run_seeded_trial, trial_seed, SolverConfig};

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "worker panicked".to_string()
    }
}

/// Evaluates `task(0..n_tasks)` on up to `workers` threads pulling indices from
/// a shared atomic cursor. Output is in task order. The first error (or panic,
/// reported as [`Error::Worker`]) stops the remaining workers and is returned.
pub fn parallel_map<T, F>(n_tasks: usize, workers: usize, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if workers == 0 {
        return Err(Error::config("workers must be at least 1"));
    }
    if n_tasks == 0 {
        return Ok(Vec::new());
    }
    let cursor = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let first_error: Mutex<Option<(usize, Error)>> = Mutex::new(None);
    let slots: Vec<Mutex<Option<T>>> = (0..n_tasks).map(|_| Mutex::new(None)).collect();

    let worker = || loop {
        if abort.load(Ordering::Relaxed) {
            break;
        }
        let idx = cursor.fetch_add(1, Ordering::Relaxed);
        if idx >= n_tasks {
            break;
        }
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| task(idx)))
            .unwrap_or_else(|p| Err(Error::Worker(panic_message(p))));
        match outcome {
            Ok(v) => *slots[idx].lock().unwrap_or_else(|e| e.into_inner()) = Some(v),
            Err(e) => {
                abort.store(true, Ordering::Relaxed);
                let mut guard = first_error.lock().unwrap_or_else(|e| e.into_inner());
                // keep the lowest failing index so the surfaced error is reproducible
                if guard.as_ref().is_none_or(|(i, _)| idx < *i) {
                    *guard = Some((idx, e));
                }
                break;
            }
        }
    };

    let threads = workers.min(n_tasks);
    if threads == 1 {
        worker();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(worker);
            }
        });
    }

    if let Some((_, e)) = first_error.into_inner().unwrap_or_else(|e| e.into_inner()) {
        return Err(e);
    }
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .ok_or_else(|| Error::Worker("task produced no result".into()))
        })
        .collect()
}

/// Runs `n_trials` trials on every instance. `result[i][k]` is trial `k` of
/// instance `i`, seeded by `(base_seed, i, k)` independently of scheduling.
pub fn run_batch(
    instances: &[IsingInstance],
    config: &SolverConfig,
    sched: &Schedule,
    n_trials: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<Vec<TrialRecord>>> {
    if workers == 0 {
        return Err(Error::config("workers must be at least 1"));
    }
    let total = instances.len() * n_trials;
    let flat = parallel_map(total, workers, |idx| {
        let (i, k) = (idx / n_trials, idx % n_trials);
        run_seeded_trial(&instances[i], config, sched, trial_seed(base_seed, i, k))
    })?;
    let mut out: Vec<Vec<TrialRecord>> = Vec::with_capacity(instances.len());
    let mut it = flat.into_iter();
    for _ in instances {
        out.push(it.by_ref().take(n_trials).collect());
    }
    Ok(out)
}
