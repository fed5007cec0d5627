//! Observed convergence rates of refinement studies.

use serde::{Deserialize, Serialize};

/// Relative error change below which a row counts as plateau.
pub const PLATEAU_CHANGE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub h: f64,
    pub error: f64,
    /// ln(e_prev/e)/ln(N/N_prev), log₂ of the error ratio for doubled N.
    pub rate: Option<f64>,
    /// Error changed by less than [`PLATEAU_CHANGE`] from the previous row.
    pub plateau: bool,
}

/// Rows of a study with increasing N.
pub fn rate_table(runs: &[(usize, f64, f64)]) -> Vec<RateRow> {
    let mut rows: Vec<RateRow> = Vec::with_capacity(runs.len());
    for (i, &(n, h, error)) in runs.iter().enumerate() {
        let (rate, plateau) = match i.checked_sub(1).map(|p| runs[p]) {
            Some((np, _, ep)) => {
                let rate = (ep / error).ln() / (n as f64 / np as f64).ln();
                (Some(rate), (ep - error).abs() < PLATEAU_CHANGE * ep)
            }
            None => (None, false),
        };
        rows.push(RateRow {
            n,
            h,
            error,
            rate,
            plateau,
        });
    }
    rows
}

/// Median of the last three rates outside the plateau.
pub fn asymptotic_rate(rows: &[RateRow]) -> Option<f64> {
    let rates: Vec<f64> = rows.iter().filter(|r| !r.plateau).filter_map(|r| r.rate).collect();
    let mut tail = rates[rates.len().saturating_sub(3)..].to_vec();
    if tail.is_empty() {
        return None;
    }
    tail.sort_by(f64::total_cmp);
    Some(tail[tail.len() / 2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_order_rows() {
        let runs: Vec<_> = [10, 20, 40, 80].iter().map(|&n| (n, 1.0 / n as f64, (n as f64).powi(-2))).collect();
        let rows = rate_table(&runs);
        assert_eq!(rows[0].rate, None);
        for r in &rows[1..] {
            assert!((r.rate.unwrap() - 2.0).abs() < 1e-12);
            assert!(!r.plateau);
        }
        assert!((asymptotic_rate(&rows).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn plateau_rows_are_skipped() {
        let errs = [1e-2, 1.25e-3, 1.5625e-4, 1.5e-4, 1.48e-4];
        let runs: Vec<_> = errs.iter().enumerate().map(|(i, &e)| (10 << i, 0.1, e)).collect();
        let rows = rate_table(&runs);
        assert!(rows[3].plateau && rows[4].plateau && !rows[2].plateau);
        assert!((asymptotic_rate(&rows).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_row_has_no_rate() {
        assert_eq!(asymptotic_rate(&rate_table(&[(10, 0.1, 1.0)])), None);
    }
}
