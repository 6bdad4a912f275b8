//! Initial conditions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::filter::FilterBand;
use crate::grid::{GridField, GridShape};
use crate::spectral::{inverse_dft_with, natural, SpectrumArray};

/// Half-width `Δ` of a band in frequency bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandSpec {
    pub band: FilterBand,
    pub half_width: usize,
}

impl BandSpec {
    pub fn new(band: FilterBand, half_width: usize) -> Self {
        BandSpec { band, half_width }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.half_width == 0 || self.half_width > n / 8 {
            return Err(Error::domain(format!(
                "band half-width must lie in 1..={} for N={n}, got {}",
                n / 8,
                self.half_width
            )));
        }
        Ok(())
    }

    /// True when centred frequency `f` lies in the band along one axis.
    pub fn contains_1d(&self, f: i64, n: usize) -> bool {
        let n = n as i64;
        let dw = self.half_width as i64;
        match self.band {
            FilterBand::ZeroMax => f.abs() <= dw || f.abs() >= n / 2 - dw,
            FilterBand::Central => (f.abs() - n / 4).abs() <= dw,
        }
    }

    /// True when every component of `f` lies in the band.
    pub fn contains(&self, f: &[i64], n: usize) -> bool {
        f.iter().all(|&x| self.contains_1d(x, n))
    }
}

/// Unit impulse at `site`.
pub fn shock(shape: GridShape, site: &[usize]) -> Result<GridField> {
    if site.len() != shape.dim() || site.iter().any(|&c| c >= shape.extent()) {
        return Err(Error::domain("shock site outside the lattice"));
    }
    let mut values = vec![0.0; shape.sites()];
    values[shape.index(site)] = 1.0;
    GridField::new(shape, values, 0)
}

/// Unit impulse at the lattice centre.
pub fn shock_center(shape: GridShape) -> GridField {
    shock(shape, &shape.center()).expect("centre is on the lattice")
}

/// `cos(2π f·x/N + phase)`.
pub fn harmonic(shape: GridShape, f: &[i64], phase: f64) -> Result<GridField> {
    let n = shape.extent() as i64;
    if f.len() != shape.dim() || f.iter().any(|k| k.abs() > n / 2) {
        return Err(Error::domain("harmonic frequency out of range"));
    }
    GridField::from_fn(shape, |c| {
        let r: i64 = c.iter().zip(f).map(|(&x, &k)| x as i64 * k).sum::<i64>().rem_euclid(n);
        (2.0 * PI * r as f64 / n as f64 + phase).cos()
    })
}

/// Harmonic under a Gaussian envelope of width `width` sites centred at
/// `center` (periodic distance).
pub fn wave_packet(shape: GridShape, f: &[i64], phase: f64, center: &[f64], width: f64) -> Result<GridField> {
    if center.len() != shape.dim() || !(width > 0.0) {
        return Err(Error::domain("packet centre or width invalid"));
    }
    let carrier = harmonic(shape, f, phase)?;
    let n = shape.extent() as f64;
    let values = carrier
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = shape.coords(i);
            let r2: f64 = (0..shape.dim())
                .map(|a| {
                    let d = (c[a] as f64 - center[a] + n / 2.0).rem_euclid(n) - n / 2.0;
                    d * d
                })
                .sum();
            v * (-0.5 * r2 / (width * width)).exp()
        })
        .collect();
    GridField::new(shape, values, 0)
}

/// Real field whose spectrum is unit magnitude with random phases on the
/// band's bins and zero elsewhere. Phases come from SplitMix64 seeded with
/// `seed`, drawn in natural index order.
pub fn band_noise(shape: GridShape, spec: BandSpec, seed: u64) -> Result<GridField> {
    let n = shape.extent();
    spec.validate(n)?;
    let dims = vec![n; shape.dim()];
    let total = shape.sites();
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); total];
    let mut freq = vec![0i64; shape.dim()];
    for (i, c) in coeffs.iter_mut().enumerate() {
        let mut r = i;
        for f in freq.iter_mut() {
            *f = crate::spectral::centered(r % n, n);
            r /= n;
        }
        if spec.contains(&freq, n) {
            let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            *c = Complex64::from_polar(1.0, 2.0 * PI * u);
        }
    }
    // Hermitian symmetrization: F(−f) = conj F(f), self-conjugate bins real.
    let neg_index = |i: usize| -> usize {
        let mut r = i;
        let mut out = 0;
        let mut mul = 1;
        for _ in 0..shape.dim() {
            let f = crate::spectral::centered(r % n, n);
            out += natural(-f, n) * mul;
            mul *= n;
            r /= n;
        }
        out
    };
    for i in 0..total {
        let j = neg_index(i);
        if j == i {
            let v = coeffs[i];
            if v.norm() > 0.0 {
                coeffs[i] = Complex64::new(if v.re >= 0.0 { 1.0 } else { -1.0 }, 0.0);
            }
        } else if j > i {
            coeffs[j] = coeffs[i].conj();
        }
    }
    let spectrum = SpectrumArray::new(dims, coeffs)?;
    let data = inverse_dft_with(&spectrum, Exec::default());
    let imag = data.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    let peak = data.iter().fold(0.0f64, |m, v| m.max(v.re.abs()));
    assert!(imag <= 1e-12 * peak.max(1.0), "synthesized field has imaginary residue {imag}");
    // Normalize to unit RMS so runs start at a comparable scale.
    let rms = (data.iter().map(|v| v.re * v.re).sum::<f64>() / total as f64).sqrt();
    let scale = if rms > 0.0 { 1.0 / rms } else { 1.0 };
    GridField::new(shape, data.iter().map(|v| v.re * scale).collect(), 0)
}
