//! Staggered differentiating filters.
//!
//! A filter of order `n` reads the `2n` neighbours at odd offsets
//! `±1, ±3, …, ±(2n−1)` and returns an estimate of the first derivative at
//! the centre. The weights are
//!
//! ```text
//! α_n(m) = 1 / ( 2(2m−1) · ∏_{k≠m} [1 − (2m−1)²/(2k−1)²] )
//! ```
//!
//! and are computed in exact rational arithmetic before being rounded once to
//! `f64`. The [`FilterBand::Central`] filter uses the magnitudes of the same
//! weights with a symmetric (sum) stencil.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported filter order.
pub const MAX_ORDER: usize = 32;

/// Spectral band a filter (and a scheme) is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterBand {
    /// Zones around frequency 0 and N/2.
    ZeroMax,
    /// Band around N/4.
    Central,
}

impl FilterBand {
    pub const ALL: [FilterBand; 2] = [FilterBand::ZeroMax, FilterBand::Central];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterBand::ZeroMax => "zeromax",
            FilterBand::Central => "central",
        }
    }

    /// Stencil sign between the forward and backward tap: `−1` for the
    /// difference stencil, `+1` for the sum stencil.
    pub fn tap_sign(self) -> f64 {
        match self {
            FilterBand::ZeroMax => -1.0,
            FilterBand::Central => 1.0,
        }
    }
}

impl fmt::Display for FilterBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterBand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zeromax" | "zero-max" | "zero_max" => Ok(FilterBand::ZeroMax),
            "central" => Ok(FilterBand::Central),
            other => Err(Error::domain(format!(
                "unknown band '{other}', expected zeromax or central"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffFilter {
    order: usize,
    band: FilterBand,
    coeffs: Vec<f64>,
    exact: Vec<BigRational>,
}

/// Exact ZeroMax weights for order `n`.
fn zeromax_rationals(n: usize) -> Vec<BigRational> {
    (1..=n)
        .map(|m| {
            let om = BigInt::from(2 * m - 1);
            let om2 = &om * &om;
            let mut num = BigInt::one();
            let mut den = BigInt::from(2) * &om;
            for k in (1..=n).filter(|&k| k != m) {
                let ok = BigInt::from(2 * k - 1);
                let ok2 = &ok * &ok;
                den *= &ok2 - &om2;
                num *= ok2;
            }
            BigRational::new(num, den)
        })
        .collect()
}

/// Builds the order-`n` filter for `band`.
pub fn design_filter(n: usize, band: FilterBand) -> Result<DiffFilter> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::domain(format!(
            "filter order must lie in 1..={MAX_ORDER}, got {n}"
        )));
    }
    let mut exact = zeromax_rationals(n);
    if band == FilterBand::Central {
        for r in &mut exact {
            *r = r.abs();
        }
    }
    let coeffs = exact
        .iter()
        .map(|r| r.to_f64().expect("filter weights are finite"))
        .collect();
    Ok(DiffFilter {
        order: n,
        band,
        coeffs,
        exact,
    })
}

impl DiffFilter {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn band(&self) -> FilterBand {
        self.band
    }

    /// Weights `α_n(1..=n)` as floats.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Weights as reduced fractions.
    pub fn exact_coeffs(&self) -> &[BigRational] {
        &self.exact
    }

    /// Tap offsets `2m−1` paired with their weights.
    pub fn taps(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coeffs.iter().enumerate().map(|(i, &a)| (2 * i + 1, a))
    }

    /// Integer weights over a common denominator: `α_m = ints[m] / den`.
    pub fn integer_weights(&self) -> (Vec<BigInt>, BigInt) {
        let den = self
            .exact
            .iter()
            .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
        let ints = self
            .exact
            .iter()
            .map(|r| r.numer() * (&den / r.denom()))
            .collect();
        (ints, den)
    }

    /// Sum of absolute weights.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a.abs()).sum()
    }

    /// Response of the stencil to `e^{iθx}`, i.e. the multiplier picked up by
    /// a plane wave: `2iΣα sin(kθ)` for the difference stencil and
    /// `2Σα cos(kθ)` for the sum stencil.
    pub fn stencil_gain(&self, theta: f64) -> Complex64 {
        match self.band {
            FilterBand::ZeroMax => {
                let s: f64 = self.taps().map(|(k, a)| a * (k as f64 * theta).sin()).sum();
                Complex64::new(0.0, 2.0 * s)
            }
            FilterBand::Central => {
                let c: f64 = self.taps().map(|(k, a)| a * (k as f64 * theta).cos()).sum();
                Complex64::new(2.0 * c, 0.0)
            }
        }
    }
}

/// DFT of a filter's tap pattern on a periodic line of `N` sites.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralResponse {
    n_grid: usize,
    band: FilterBand,
    values: Vec<Complex64>,
}

impl SpectralResponse {
    pub fn grid_len(&self) -> usize {
        self.n_grid
    }

    pub fn band(&self) -> FilterBand {
        self.band
    }

    pub fn min_freq(&self) -> i64 {
        1 - (self.n_grid as i64) / 2
    }

    pub fn max_freq(&self) -> i64 {
        (self.n_grid as i64) / 2
    }

    /// Value at centred frequency `f`, `−N/2 < f ≤ N/2`.
    pub fn at(&self, f: i64) -> Complex64 {
        assert!(f >= self.min_freq() && f <= self.max_freq(), "frequency {f} out of range");
        self.values[(f - self.min_freq()) as usize]
    }

    /// `(f, value)` pairs in increasing frequency.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let lo = self.min_freq();
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (lo + i as i64, v))
    }

    /// Derivative gain seen by a plane wave: `−Im F` for ZeroMax, `Re F` for
    /// Central.
    pub fn gain(&self, f: i64) -> f64 {
        let v = self.at(f);
        match self.band {
            FilterBand::ZeroMax => -v.im,
            FilterBand::Central => v.re,
        }
    }
}

/// `e^{−2πi·r/N}` with `r` already reduced into `0..N`.
pub(crate) fn unit_root(r: u64, n: u64) -> Complex64 {
    let ang = -2.0 * PI * (r as f64) / (n as f64);
    Complex64::new(ang.cos(), ang.sin())
}

/// Spectrum of the taps `h(±(2m−1))` under `F(f) = Σ h(x) e^{−2πi f x/N}`.
pub fn filter_spectrum(filter: &DiffFilter, n_grid: usize) -> Result<SpectralResponse> {
    if n_grid < 4 || n_grid % 2 != 0 {
        return Err(Error::domain(format!(
            "grid length must be even and at least 4, got {n_grid}"
        )));
    }
    let reach = 2 * filter.order() - 1;
    if 2 * reach >= n_grid {
        return Err(Error::domain(format!(
            "order {} filter does not fit on a grid of {n_grid} sites",
            filter.order()
        )));
    }
    let n = n_grid as i64;
    let back = filter.band().tap_sign();
    let values = (1 - n / 2..=n / 2)
        .map(|f| {
            filter
                .taps()
                .map(|(k, a)| {
                    let k = k as i64;
                    let fwd = unit_root((f * k).rem_euclid(n) as u64, n as u64);
                    let bwd = unit_root((-f * k).rem_euclid(n) as u64, n as u64);
                    (fwd + bwd * back) * a
                })
                .sum()
        })
        .collect();
    Ok(SpectralResponse {
        n_grid,
        band: filter.band(),
        values,
    })
}

/// Ideal response the filter approximates at centred frequency `f`.
pub fn limiting_response(band: FilterBand, f: i64, n_grid: usize) -> f64 {
    let n = n_grid as f64;
    let theta = 2.0 * PI * f as f64 / n;
    match band {
        FilterBand::ZeroMax => {
            if 4 * f.unsigned_abs() as usize <= n_grid {
                theta
            } else {
                theta.signum() * (PI - theta.abs())
            }
        }
        FilterBand::Central => PI / 2.0 - theta.abs(),
    }
}

/// Deviation of the filter's derivative gain from the limiting response.
///
/// The ZeroMax gain is taken with the sign of a derivative (`sin θ` for
/// `n = 1`), so the error near zero is `sin θ − θ`.
pub fn filter_error_curve(filter: &DiffFilter, n_grid: usize) -> Result<Vec<(i64, f64)>> {
    let resp = filter_spectrum(filter, n_grid)?;
    Ok(resp
        .iter()
        .map(|(f, _)| {
            (
                f,
                resp.gain(f) - limiting_response(filter.band(), f, n_grid),
            )
        })
        .collect())
}

/// Largest |error| over `|f| ≤ half_width`.
pub fn max_error_near_zero(filter: &DiffFilter, n_grid: usize, half_width: i64) -> Result<f64> {
    Ok(filter_error_curve(filter, n_grid)?
        .into_iter()
        .filter(|(f, _)| f.abs() <= half_width)
        .map(|(_, e)| e.abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use num_rational::Ratio;

    /// Lagrange weights for the derivative at 0 of the interpolant through
    /// the odd points ±1, ±3, …; the weight of `+(2m−1)` is returned.
    fn lagrange_weights(n: usize) -> Vec<BigRational> {
        let pts: Vec<BigInt> = (1..=n)
            .flat_map(|m| {
                let k = 2 * m as i64 - 1;
                [BigInt::from(k), BigInt::from(-k)]
            })
            .collect();
        // L_j'(0) = Σ_{i≠j} (1/(x_j−x_i)) ∏_{l≠i,j} (0−x_l)/(x_j−x_l)
        let weight = |j: usize| -> BigRational {
            let mut total = BigRational::zero();
            for i in 0..pts.len() {
                if i == j {
                    continue;
                }
                let mut term = Ratio::new(BigInt::one(), &pts[j] - &pts[i]);
                for l in 0..pts.len() {
                    if l == i || l == j {
                        continue;
                    }
                    term *= Ratio::new(-pts[l].clone(), &pts[j] - &pts[l]);
                }
                total += term;
            }
            total
        };
        (0..n).map(|m| weight(2 * m)).collect()
    }

    #[test]
    fn matches_lagrange_oracle() {
        for n in 1..=10 {
            let f = design_filter(n, FilterBand::ZeroMax).unwrap();
            // The stencil is Σ α (S(+k) − S(−k)), so each weight is the
            // Lagrange weight of the positive point.
            assert_eq!(f.exact_coeffs(), lagrange_weights(n).as_slice(), "n={n}");
        }
    }

    #[test]
    fn table_values() {
        let f = design_filter(3, FilterBand::ZeroMax).unwrap();
        let want = [0.5859, -0.0326, 0.0023];
        for (a, b) in f.coeffs().iter().zip(want) {
            assert!((a - b).abs() < 1e-4);
        }
        let c = design_filter(2, FilterBand::Central).unwrap();
        assert!((c.coeffs()[0] - 0.5625).abs() < 1e-12);
        assert!((c.coeffs()[1] - 1.0 / 48.0).abs() < 1e-12);
        assert_eq!(design_filter(1, FilterBand::ZeroMax).unwrap().coeffs(), &[0.5]);
    }

    #[test]
    fn order_bounds() {
        assert!(matches!(design_filter(0, FilterBand::ZeroMax), Err(Error::Domain(_))));
        assert!(design_filter(33, FilterBand::Central).is_err());
        let f = design_filter(32, FilterBand::ZeroMax).unwrap();
        assert!(f.coeffs().iter().all(|a| a.is_finite()));
    }

    #[test]
    fn central_is_magnitude_and_decreasing() {
        for n in 1..=MAX_ORDER {
            let z = design_filter(n, FilterBand::ZeroMax).unwrap();
            let c = design_filter(n, FilterBand::Central).unwrap();
            for (i, (a, b)) in z.coeffs().iter().zip(c.coeffs()).enumerate() {
                assert_eq!(a.abs(), *b);
                assert!(*b > 0.0);
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                assert_eq!(a.signum(), sign);
            }
            for w in c.coeffs().windows(2) {
                assert!(w[0] > w[1], "n={n}");
            }
        }
    }

    #[test]
    fn spectrum_examples() {
        let f = design_filter(1, FilterBand::ZeroMax).unwrap();
        let s = filter_spectrum(&f, 8).unwrap();
        assert!((s.at(2) - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(s.at(0).norm(), 0.0);
        assert!(filter_spectrum(&f, 7).is_err());
        assert!(filter_spectrum(&f, 2).is_err());
    }

    #[test]
    fn high_order_close_to_limit() {
        let f = design_filter(7, FilterBand::ZeroMax).unwrap();
        let n = 2048;
        let s = filter_spectrum(&f, n).unwrap();
        for fr in -(n as i64) / 16..=(n as i64) / 16 {
            let y = 2.0 * PI * fr as f64 / n as f64;
            assert!((s.gain(fr) - y).abs() < 1e-3);
            assert!(s.at(fr).re.abs() < 1e-12);
        }
    }

    #[test]
    fn error_curve_examples() {
        let f1 = design_filter(1, FilterBand::ZeroMax).unwrap();
        let e = filter_error_curve(&f1, 1024).unwrap();
        let at = |f: i64| e.iter().find(|p| p.0 == f).unwrap().1;
        assert_eq!(at(0), 0.0);
        let th = 2.0 * PI * 16.0 / 1024.0;
        assert!((at(16) - (th.sin() - th)).abs() < 1e-15);
        assert!((at(16) + 1.58e-4).abs() < 1e-6);

        let f2 = design_filter(2, FilterBand::ZeroMax).unwrap();
        let m1 = max_error_near_zero(&f1, 1024, 32).unwrap();
        let m2 = max_error_near_zero(&f2, 1024, 32).unwrap();
        assert!(m2 < m1);
    }

    #[test]
    fn central_error_vanishes_at_quarter() {
        let c = design_filter(3, FilterBand::Central).unwrap();
        let e = filter_error_curve(&c, 256).unwrap();
        let v = e.iter().find(|p| p.0 == 64).unwrap().1;
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn error_decay_order() {
        // Halving the window shrinks the max error by about 2^(2n+1).
        let n_grid = 4096;
        for n in 1..=3usize {
            let f = design_filter(n, FilterBand::ZeroMax).unwrap();
            let a = max_error_near_zero(&f, n_grid, 64).unwrap();
            let b = max_error_near_zero(&f, n_grid, 32).unwrap();
            let ratio = a / b;
            let expect = 2f64.powi(2 * n as i32);
            assert!(ratio >= expect / 2.0, "n={n} ratio={ratio}");
        }
    }

    #[test]
    fn integer_weights_reassemble() {
        let f = design_filter(5, FilterBand::ZeroMax).unwrap();
        let (ints, den) = f.integer_weights();
        for (i, r) in ints.iter().zip(f.exact_coeffs()) {
            assert_eq!(&BigRational::new(i.clone(), den.clone()), r);
        }
    }
}
