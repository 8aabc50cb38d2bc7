//! Order-preserving parallel helpers; sequential when the `parallel` feature is off.

use ndarray::{Array2, ArrayViewMut1, Zip};
#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Fill matching rows of two equally-shaped matrices, row index first.
pub(crate) fn fill_row_pairs<F>(a: &mut Array2<f64>, b: &mut Array2<f64>, f: F)
where
    F: Fn(usize, ArrayViewMut1<f64>, ArrayViewMut1<f64>) + Sync + Send,
{
    let zip = Zip::indexed(a.rows_mut()).and(b.rows_mut());
    #[cfg(feature = "parallel")]
    zip.par_for_each(f);
    #[cfg(not(feature = "parallel"))]
    zip.for_each(f);
}
