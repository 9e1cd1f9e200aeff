//! Execution policy for the per-point loops.
//!
//! Every data-parallel loop in the crate goes through these helpers so that
//! the serial and the rayon paths compute bit-identical results: each output
//! element depends only on its own index, and the only reductions are `max`
//! and `min`, which are order independent.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Serial,
    /// Falls back to `Serial` when the crate is built without `parallel`.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

pub fn map_indexed<T, F>(exec: Exec, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// NaN-ignoring maximum of `f(i)` over `0..len`; `None` when every term is NaN or `len == 0`.
pub fn max_indexed<F>(exec: Exec, len: usize, f: F) -> Option<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    fold_max(map_indexed(exec, len, f))
}

pub(crate) fn fold_max(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    values
        .into_iter()
        .filter(|v| !v.is_nan())
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

pub(crate) fn fold_min(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    values
        .into_iter()
        .filter(|v| !v.is_nan())
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree() {
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let a = map_indexed(Exec::Serial, 1000, f);
        let b = map_indexed(Exec::Parallel, 1000, f);
        assert_eq!(a, b);
        assert_eq!(
            max_indexed(Exec::Serial, 1000, f),
            max_indexed(Exec::Parallel, 1000, f)
        );
    }

    #[test]
    fn max_skips_nan() {
        assert_eq!(fold_max([f64::NAN, 1.0, 3.0]), Some(3.0));
        assert_eq!(fold_max([f64::NAN]), None);
        assert_eq!(fold_min([2.0, f64::NAN, -1.0]), Some(-1.0));
    }
}
