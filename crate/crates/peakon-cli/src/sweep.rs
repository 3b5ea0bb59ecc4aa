//! Parameter sweep grammar (`k=0.5,1,2;lam=1,2`) and a bounded worker
//! pool that runs jobs concurrently while keeping results in job order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

/// One axis of the sweep: a parameter name and its values, in source order.
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Parses `name=v1,v2,...;name2=w1,...`. Axis order and value order are
/// preserved; the cross product enumerates the last axis fastest.
pub fn parse_sweep(src: &str) -> Result<Vec<Axis>, String> {
    let mut axes = Vec::new();
    for part in src.split(';') {
        let part = part.trim();
        if part.is_empty() {
            return Err("empty sweep axis".to_string());
        }
        let (name, list) = part
            .split_once('=')
            .ok_or_else(|| format!("sweep axis `{part}` is missing `=`"))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(format!("sweep axis `{part}` has no parameter name"));
        }
        let mut values = Vec::new();
        for v in list.split(',') {
            let v = v.trim();
            values.push(
                v.parse::<f64>()
                    .map_err(|_| format!("sweep value `{v}` for `{name}` is not a number"))?,
            );
        }
        if axes.iter().any(|a: &Axis| a.name == name) {
            return Err(format!("sweep names `{name}` twice"));
        }
        axes.push(Axis { name: name.to_string(), values });
    }
    Ok(axes)
}

/// One point of the cross product: `(name, value)` per axis, in axis order.
pub type Job = Vec<(String, f64)>;

pub fn jobs(axes: &[Axis]) -> Vec<Job> {
    let mut out: Vec<Job> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.values.len());
        for stem in &out {
            for &v in &axis.values {
                let mut job = stem.clone();
                job.push((axis.name.clone(), v));
                next.push(job);
            }
        }
        out = next;
    }
    out
}

/// Stable per-job label, e.g. `k=0.5,lam=1`. Doubles as the output stem.
pub fn label(job: &Job) -> String {
    job.iter()
        .map(|(name, v)| format!("{name}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Runs `work` over the jobs on a bounded pool and returns the results in
/// job order. Worker count is capped by the job count and by 8.
pub fn run_parallel<T, F>(jobs: &[Job], work: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &Job) -> T + Sync,
{
    if jobs.is_empty() {
        return Vec::new();
    }
    let slots: Vec<Mutex<Option<T>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).clamp(1, 8).min(jobs.len());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let result = work(i, &jobs[i]);
                *slots[i].lock().expect("no poisoned slots") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("no poisoned slots").expect("every job ran"))
        .collect()
}
