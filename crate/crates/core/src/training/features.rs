use crate::error::{HedgeError, Result};
use crate::instruments::InstrumentSet;

/// Policy input at one decision date:
/// `[log P^(0), .., log P^(D), log Z, V / V0]`.
///
/// `begin_prices` lists the underlying first, then the options of the menu.
pub fn build_features(
    set: InstrumentSet,
    begin_prices: &[f64],
    running_max: f64,
    value: f64,
    v0: f64,
) -> Result<Vec<f64>> {
    if begin_prices.len() != set.n_assets() {
        return Err(HedgeError::Contract(format!(
            "{} prices for {} assets of {set}",
            begin_prices.len(),
            set.n_assets()
        )));
    }
    if !(v0 > 0.0) {
        return Err(HedgeError::Contract(format!("initial capital {v0} must be > 0")));
    }
    let mut row = vec![0.0; set.feature_dim()];
    fill_features(&mut row, begin_prices, None, running_max, value, v0)?;
    Ok(row)
}

/// Write features into `row`; with `base` the log prices and the log running
/// maximum are taken relative to their first-date values.
#[inline]
pub(crate) fn fill_features(
    row: &mut [f64],
    begin_prices: &[f64],
    base: Option<&[f64]>,
    running_max: f64,
    value: f64,
    v0: f64,
) -> Result<()> {
    let a = begin_prices.len();
    for (k, &p) in begin_prices.iter().enumerate() {
        if !(p > 0.0) {
            return Err(HedgeError::Contract(format!("price {p} of asset {k} is not positive")));
        }
        row[k] = p.ln();
    }
    if !(running_max > 0.0) {
        return Err(HedgeError::Contract(format!("running maximum {running_max} is not positive")));
    }
    row[a] = running_max.ln();
    if let Some(base) = base {
        row[..=a].iter_mut().zip(base).for_each(|(x, b)| *x -= b);
    }
    row[a + 1] = value / v0;
    Ok(())
}
