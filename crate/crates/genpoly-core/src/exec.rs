//! Window iteration, parallel when the `parallel` feature is on.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fallible variant; the first error wins.
pub(crate) fn try_map_window<R, F>(
    lo: i64,
    hi: i64,
    sequential: bool,
    f: F,
) -> crate::error::Result<Vec<R>>
where
    R: Send,
    F: Fn(i64) -> crate::error::Result<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !sequential {
            return (lo..=hi).into_par_iter().map(f).collect();
        }
    }
    let _ = sequential;
    (lo..=hi).map(f).collect()
}
