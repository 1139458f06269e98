//! Data-parallel map over independent work items. Without the `parallel`
//! feature everything runs on the calling thread.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    Sequential,
    #[default]
    Parallel,
}

pub fn map<T, R, F>(schedule: Schedule, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match schedule {
        #[cfg(feature = "parallel")]
        Schedule::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}
