//! Fourier symbol of a scheme and the multiplier search.
//!
//! A step commutes with shifts by two sites, so in Fourier space it couples
//! only the `2^d` frequencies `θ + π μ`, `μ ∈ {0,1}^d`. Multiplying by
//! `(−1)^(e_a·x)` moves mode `μ` to `μ ⊕ e_a`, so one step acts on each
//! block as `I + A(θ)` with
//!
//! ```text
//! A[μ ⊕ e_a][μ] += g(θ_a + π μ_a)
//! ```
//!
//! where `g` is the stencil gain of the filter. A rule realizes a wave
//! system when `A(θ₀ + δ)² ≈ −|δ|² I` near the band apex `θ₀`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::filter::{design_filter, DiffFilter, FilterBand};
use crate::grid::{GridField, GridShape, MAX_DIM};
use crate::scheme::{run_with, MultiplierRule, RunOptions, SchemeConfig, UpdateMode};
use crate::spectral::{afc_with, dft_with, ridge, SpatialSpectra, TemporalSearch};
use crate::synth::harmonic;

/// Dense row-major square matrix of size `2^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    size: usize,
    data: Vec<Complex64>,
}

impl BlockMatrix {
    pub fn zeros(size: usize) -> Self {
        BlockMatrix {
            size,
            data: vec![Complex64::new(0.0, 0.0); size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.size + col]
    }

    fn add(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.size + col] += v;
    }

    pub fn mul(&self, other: &BlockMatrix) -> BlockMatrix {
        let n = self.size;
        let mut out = BlockMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// Generator `A(θ)` for a filter and rule.
pub fn generator(filter: &DiffFilter, rule: &MultiplierRule, theta: &[f64]) -> BlockMatrix {
    let d = rule.dim();
    assert_eq!(theta.len(), d);
    let size = 1 << d;
    let mut a = BlockMatrix::zeros(size);
    for mu in 0..size {
        for (axis, &th) in theta.iter().enumerate() {
            let shifted = th + if mu >> axis & 1 == 1 { std::f64::consts::PI } else { 0.0 };
            let g = filter.stencil_gain(shifted);
            a.add(mu ^ rule.masks()[axis] as usize, mu, g);
        }
    }
    a
}

/// One-step amplification `I + A(θ)`.
pub fn amplification(cfg: &SchemeConfig, theta: &[f64]) -> BlockMatrix {
    let mut a = generator(cfg.filter(), cfg.rule(), theta);
    for i in 0..a.size {
        a.add(i, i, Complex64::new(1.0, 0.0));
    }
    a
}

/// Apex of a band in radians per axis.
pub fn band_apex(band: FilterBand) -> f64 {
    match band {
        FilterBand::ZeroMax => 0.0,
        FilterBand::Central => std::f64::consts::FRAC_PI_2,
    }
}

/// Unit directions used to probe the dispersion property: the axes, all
/// sign patterns of the main diagonals, and a few generic directions.
pub fn probe_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for a in 0..dim {
        let mut v = vec![0.0; dim];
        v[a] = 1.0;
        dirs.push(v);
    }
    for signs in 0..(1usize << dim) {
        if dim == 1 {
            break;
        }
        let v: Vec<f64> = (0..dim).map(|a| if signs >> a & 1 == 1 { -1.0 } else { 1.0 }).collect();
        dirs.push(v);
    }
    let generic = [0.37, -0.81, 0.59, 0.23];
    dirs.push(generic[..dim].to_vec());
    let generic2 = [-0.66, 0.15, 0.91, -0.44];
    dirs.push(generic2[..dim].to_vec());
    for v in &mut dirs {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    dirs
}

/// Step size used by [`dispersion_residual`].
pub const PROBE_EPS: f64 = 1e-3;
/// Residual below which a rule counts as realizing a wave system.
pub const SEARCH_THRESHOLD: f64 = 1e-3;

/// Worst `‖A(θ₀+δ)² + |δ|² I‖_max / |δ|²` over the probe directions with
/// `|δ| = eps`.
pub fn dispersion_residual(filter: &DiffFilter, rule: &MultiplierRule, eps: f64) -> f64 {
    let d = rule.dim();
    let apex = band_apex(rule.band());
    probe_directions(d)
        .iter()
        .map(|dir| {
            let theta: Vec<f64> = dir.iter().map(|u| apex + eps * u).collect();
            let a = generator(filter, rule, &theta);
            let mut sq = a.mul(&a);
            for i in 0..sq.size {
                sq.add(i, i, Complex64::new(eps * eps, 0.0));
            }
            sq.max_abs() / (eps * eps)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub dim: usize,
    pub band: FilterBand,
    /// Candidates evaluated after pruning.
    pub evaluated: usize,
    /// Every rule under the threshold with its residual, in lexicographic
    /// order of the exponent masks.
    pub passing: Vec<(MultiplierRule, f64)>,
    /// Rule with the smallest residual (first in order on ties).
    pub best: (MultiplierRule, f64),
    pub threshold: f64,
}

impl SearchOutcome {
    /// Lexicographically first passing rule.
    pub fn best_passing(&self) -> Option<MultiplierRule> {
        self.passing.first().map(|(r, _)| r.clone())
    }

    pub fn found(&self) -> bool {
        !self.passing.is_empty()
    }
}

/// Searches all per-axis exponent masks for rules realizing a wave system,
/// using the order-1 filter of `band`.
pub fn find_multipliers(dim: usize, band: FilterBand, exec: Exec) -> Result<SearchOutcome> {
    find_multipliers_with(dim, &design_filter(1, band)?, exec)
}

pub fn find_multipliers_with(dim: usize, filter: &DiffFilter, exec: Exec) -> Result<SearchOutcome> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::domain(format!("dimension must lie in 1..=4, got {dim}")));
    }
    let band = filter.band();
    // On a single axis the apex mode must map to itself for ZeroMax and to
    // its partner for Central; other masks fail the axis probe outright.
    let allowed: Vec<Vec<u8>> = (0..dim)
        .map(|a| {
            (0..(1u8 << dim))
                .filter(|m| {
                    let has = m >> a & 1 == 1;
                    match band {
                        FilterBand::ZeroMax => !has,
                        FilterBand::Central => has,
                    }
                })
                .collect()
        })
        .collect();
    let total: usize = allowed.iter().map(|v| v.len()).product();
    let candidate = |mut id: usize| -> Vec<u8> {
        // first axis most significant so that ids follow lexicographic order
        let mut masks = vec![0u8; dim];
        for a in (0..dim).rev() {
            let opts = &allowed[a];
            masks[a] = opts[id % opts.len()];
            id /= opts.len();
        }
        masks
    };
    let results = exec::map_indices(exec, total, |id| {
        let rule = MultiplierRule::new(band, candidate(id)).expect("masks are in range");
        let r = dispersion_residual(filter, &rule, PROBE_EPS);
        (rule, r)
    });
    let best = results
        .iter()
        .fold(None::<&(MultiplierRule, f64)>, |acc, x| match acc {
            Some(b) if b.1 <= x.1 => Some(b),
            _ => Some(x),
        })
        .cloned()
        .expect("at least one candidate");
    let passing = results.into_iter().filter(|(_, r)| *r < SEARCH_THRESHOLD).collect();
    Ok(SearchOutcome {
        dim,
        band,
        evaluated: total,
        passing,
        best,
        threshold: SEARCH_THRESHOLD,
    })
}

/// The four-dimensional search.
pub fn find_multipliers_4d(band: FilterBand) -> Result<SearchOutcome> {
    find_multipliers(4, band, Exec::default())
}

/// Per-frame spatial spectra of a run computed block by block in Fourier
/// space. Each block evolves independently, so its accuracy does not depend
/// on how much the other blocks have grown.
pub fn block_spectra(initial: &GridField, cfg: &SchemeConfig, steps: usize, exec: Exec) -> Result<SpatialSpectra> {
    let shape = initial.shape();
    if shape.dim() != cfg.dim() {
        return Err(Error::config("field and rule dimensions differ"));
    }
    let d = shape.dim();
    let n = shape.extent();
    let h = n / 2;
    let spec0 = dft_with(initial, exec);
    let blocks = h.pow(d as u32);
    let size = 1 << d;
    let sites = shape.sites();
    let index_of = |base: &[usize], mu: usize| -> usize {
        (0..d).rev().fold(0, |acc, a| acc * n + base[a] + if mu >> a & 1 == 1 { h } else { 0 })
    };
    let per_block = exec::map_indices(exec, blocks, |b| {
        let mut base = [0usize; MAX_DIM];
        let mut r = b;
        for v in base.iter_mut().take(d) {
            *v = r % h;
            r /= h;
        }
        let base = &base[..d];
        let theta: Vec<f64> = base.iter().map(|&f| 2.0 * std::f64::consts::PI * f as f64 / n as f64).collect();
        let g = amplification(cfg, &theta);
        let mut v: Vec<Complex64> = (0..size).map(|mu| spec0.values()[index_of(base, mu)]).collect();
        let mut frames = Vec::with_capacity((steps + 1) * size);
        frames.extend_from_slice(&v);
        for _ in 0..steps {
            v = g.apply(&v);
            frames.extend_from_slice(&v);
        }
        frames
    });
    let mut data = vec![Complex64::new(0.0, 0.0); sites * (steps + 1)];
    for (b, frames) in per_block.iter().enumerate() {
        let mut base = [0usize; MAX_DIM];
        let mut r = b;
        for v in base.iter_mut().take(d) {
            *v = r % h;
            r /= h;
        }
        for k in 0..=steps {
            for mu in 0..size {
                data[k * sites + index_of(&base[..d], mu)] = frames[k * size + mu];
            }
        }
    }
    SpatialSpectra::new(shape, Some(cfg.band()), steps + 1, data)
}

/// Outcome of running a rule on one axis-aligned wave per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveCheck {
    /// Per-step phase expected from the continuum system under a forward
    /// update, `atan(2π/N)`.
    pub expected_phase: f64,
    /// Measured per-step phase for each axis.
    pub measured_phase: Vec<f64>,
    /// Relative phase error for each axis.
    pub residuals: Vec<f64>,
}

impl WaveCheck {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs `frames − 1` steps on `N^d` for a unit wave along each axis and
/// reads its per-step phase off the space-time spectrum. ZeroMax waves sit
/// at `e_a`, Central waves at `(N/4, …, N/4) + e_a`.
pub fn axis_wave_check(rule: &MultiplierRule, order: usize, n: usize, frames: usize, exec: Exec) -> Result<WaveCheck> {
    if frames < 4 {
        return Err(Error::domain("need at least four frames"));
    }
    let d = rule.dim();
    let shape = GridShape::new(d, n)?;
    let cfg = SchemeConfig::new(design_filter(order, rule.band())?, rule.clone(), UpdateMode::Synchronous)?;
    let base = match rule.band() {
        FilterBand::ZeroMax => 0,
        FilterBand::Central => (n / 4) as i64,
    };
    let expected_phase = (2.0 * std::f64::consts::PI / n as f64).atan();
    let mut measured_phase = Vec::with_capacity(d);
    for a in 0..d {
        let mut f = vec![base; d];
        f[a] += 1;
        let initial = harmonic(shape, &f, 0.0)?;
        let history = run_with(&initial, &cfg, frames - 1, RunOptions { exec, ..RunOptions::default() })?;
        let spec = afc_with(&history, exec)?;
        let p = ridge(&spec, &f, TemporalSearch::Full)
            .ok_or_else(|| Error::InsufficientData(format!("no ridge for the wave along axis {a}")))?;
        measured_phase.push(2.0 * std::f64::consts::PI * p.f_tau.abs() / frames as f64);
    }
    let residuals = measured_phase.iter().map(|m| (m - expected_phase).abs() / expected_phase).collect();
    Ok(WaveCheck {
        expected_phase,
        measured_phase,
        residuals,
    })
}
