//! Sample points on the positive real axis handed to AAA.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::BigReal;

/// Finite increasing sequence of positive sample points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportSet {
    points: Vec<f64>,
}

impl Default for SupportSet {
    /// {10^(j/25)} ∪ {10⁸ − 10^(j/25)} for j = 0..=200, deduplicated.
    ///
    /// The point 10⁸ − 10⁸ = 0 lies outside the half plane where the Laplace
    /// transform is defined and is dropped.
    fn default() -> Self {
        let bits = 256;
        let ln10 = BigReal::from_f64(10.0, bits).ln();
        let e8 = BigReal::from_f64(1e8, bits);
        let mut pts = Vec::with_capacity(402);
        for j in 0..=200 {
            let p = (ln10 * BigReal::from_ratio(j, 25, bits)).exp();
            pts.push(p.to_f64());
            if j < 200 {
                pts.push((e8 - p).to_f64());
            }
        }
        Self::from_points(pts).expect("default support set is valid")
    }
}

impl SupportSet {
    /// Sort, deduplicate and drop non-positive points.
    pub fn from_points(mut pts: Vec<f64>) -> Result<Self> {
        if pts.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("support points must be finite"));
        }
        pts.retain(|&p| p > 0.0);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        if pts.len() < 2 {
            return Err(Error::config("support set needs at least two positive points"));
        }
        Ok(SupportSet { points: pts })
    }

    /// Log-spaced points 10^(a + (b−a) k/(n−1)).
    pub fn log_spaced(lo_exp: f64, hi_exp: f64, n: usize) -> Result<Self> {
        let pts = (0..n)
            .map(|k| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / (n.max(2) - 1) as f64))
            .collect();
        Self::from_points(pts)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points at the given precision (exact conversions).
    pub fn to_big(&self, bits: u32) -> Vec<BigReal> {
        self.points.iter().map(|&p| BigReal::from_f64(p, bits)).collect()
    }

    /// Stable textual fingerprint used in cache keys.
    pub fn fingerprint(&self) -> String {
        let mut s = String::with_capacity(self.points.len() * 17);
        for p in &self.points {
            s.push_str(&format!("{:016x}", p.to_bits()));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_set_shape() {
        let s = SupportSet::default();
        // 201 + 201 candidates, minus the duplicate 1e8 and the dropped zero
        assert_eq!(s.len(), 401);
        assert_eq!(s.points()[0], 1.0);
        assert_eq!(*s.points().last().unwrap(), 1e8);
        assert!(s.points().windows(2).all(|w| w[0] < w[1]));
        assert!(s.points().contains(&(1e8 - 1.0)));
        assert!((s.points()[1] - 10f64.powf(0.04)).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_sets() {
        assert!(SupportSet::from_points(vec![1.0]).is_err());
        assert!(SupportSet::from_points(vec![1.0, f64::NAN]).is_err());
        assert_eq!(SupportSet::from_points(vec![3.0, 1.0, 3.0, -1.0]).unwrap().points(), &[1.0, 3.0]);
    }

    #[test]
    fn fingerprint_distinguishes_sets() {
        let a = SupportSet::log_spaced(0.0, 8.0, 50).unwrap();
        let b = SupportSet::log_spaced(0.0, 8.0, 51).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
