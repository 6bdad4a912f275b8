//! Spectra, amplitude-frequency characteristics and their analysis.
//!
//! Arrays are kept in natural DFT order (index `i` holds frequency `i`, or
//! `i − N` above `N/2`); accessors take centred frequencies `−N/2 < f ≤ N/2`.
//! The AFC of a run is the (d+1)-dimensional DFT of its history with time as
//! the last (slowest) axis; its magnitude is what gets plotted and analysed.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::fft;
use crate::filter::FilterBand;
use crate::grid::{GridField, GridShape, History};

/// Centred frequency of natural index `i` on a length-`n` axis.
pub fn centered(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Natural index of centred frequency `f`.
pub fn natural(f: i64, n: usize) -> usize {
    f.rem_euclid(n as i64) as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumArray {
    dims: Vec<usize>,
    values: Vec<Complex64>,
}

impl SpectrumArray {
    pub fn new(dims: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d < 2) {
            return Err(Error::domain("every extent must be at least 2"));
        }
        if values.len() != dims.iter().product::<usize>() {
            return Err(Error::domain("value count does not match the extents"));
        }
        Ok(SpectrumArray { dims, values })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Flat index of a centred frequency vector.
    pub fn index(&self, freq: &[i64]) -> usize {
        assert_eq!(freq.len(), self.dims.len());
        freq.iter()
            .zip(&self.dims)
            .rev()
            .fold(0, |acc, (&f, &n)| acc * n + natural(f, n))
    }

    /// Centred frequency vector of a flat index.
    pub fn freq(&self, mut index: usize) -> Vec<i64> {
        self.dims
            .iter()
            .map(|&n| {
                let f = centered(index % n, n);
                index /= n;
                f
            })
            .collect()
    }

    pub fn at(&self, freq: &[i64]) -> Complex64 {
        self.values[self.index(freq)]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Magnitudes of a 2-D array rearranged so that frequency runs from
    /// `−N/2+1` to `N/2` along each axis; rows are the second axis.
    pub fn centered_image(&self) -> Option<(Vec<f64>, usize, usize)> {
        if self.dims.len() != 2 {
            return None;
        }
        let (w, h) = (self.dims[0], self.dims[1]);
        let mut img = Vec::with_capacity(w * h);
        for row in 0..h {
            // top row shows the highest temporal frequency
            let fy = h as i64 / 2 - row as i64;
            for col in 0..w {
                let fx = col as i64 - (w as i64 / 2 - 1);
                img.push(self.at(&[fx, fy]).norm());
            }
        }
        Some((img, w, h))
    }
}

/// Forward DFT of a field.
pub fn dft(field: &GridField) -> SpectrumArray {
    dft_with(field, Exec::default())
}

pub fn dft_with(field: &GridField, exec: Exec) -> SpectrumArray {
    let shape = field.shape();
    let dims = vec![shape.extent(); shape.dim()];
    let mut data: Vec<Complex64> = field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::transform_all(&mut data, &dims, false, exec);
    SpectrumArray { dims, values: data }
}

/// Forward DFT of arbitrary complex data with extents `dims`.
pub fn dft_complex(dims: &[usize], data: Vec<Complex64>, exec: Exec) -> Result<SpectrumArray> {
    let mut s = SpectrumArray::new(dims.to_vec(), data)?;
    fft::transform_all(&mut s.values, dims, false, exec);
    Ok(s)
}

/// Inverse DFT including the `1/∏dims` factor.
pub fn inverse_dft(spec: &SpectrumArray) -> Vec<Complex64> {
    inverse_dft_with(spec, Exec::default())
}

pub fn inverse_dft_with(spec: &SpectrumArray, exec: Exec) -> Vec<Complex64> {
    let mut data = spec.values.clone();
    fft::transform_all(&mut data, &spec.dims, true, exec);
    let scale = 1.0 / data.len() as f64;
    for v in &mut data {
        *v *= scale;
    }
    data
}

/// Spatial DFT of every frame of a run, frame-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialSpectra {
    shape: GridShape,
    band: Option<FilterBand>,
    frames: usize,
    data: Vec<Complex64>,
}

impl SpatialSpectra {
    pub fn new(shape: GridShape, band: Option<FilterBand>, frames: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != frames * shape.sites() {
            return Err(Error::domain("spectra length does not match the frame count"));
        }
        Ok(SpatialSpectra {
            shape,
            band,
            frames,
            data,
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn band(&self) -> Option<FilterBand> {
        self.band
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn frame(&self, k: usize) -> &[Complex64] {
        let s = self.shape.sites();
        &self.data[k * s..(k + 1) * s]
    }
}

/// Spatial spectra of each frame of a history.
pub fn spatial_spectra(history: &History, exec: Exec) -> SpatialSpectra {
    let shape = history.shape();
    let dims = vec![shape.extent(); shape.dim()];
    let mut data: Vec<Complex64> = history.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let sites = shape.sites();
    let plan_dims = dims.clone();
    exec::for_each_chunk(exec, &mut data, sites, |_, frame| {
        fft::transform_all(frame, &plan_dims, false, Exec::Sequential);
    });
    SpatialSpectra {
        shape,
        band: history.band(),
        frames: history.len(),
        data,
    }
}

/// Space-time DFT of a history (time is the last axis).
pub fn afc(history: &History) -> Result<SpectrumArray> {
    afc_with(history, Exec::default())
}

pub fn afc_with(history: &History, exec: Exec) -> Result<SpectrumArray> {
    afc_from_spatial(&spatial_spectra(history, exec), exec)
}

/// Completes an AFC from per-frame spatial spectra by transforming along
/// time.
pub fn afc_from_spatial(sp: &SpatialSpectra, exec: Exec) -> Result<SpectrumArray> {
    let shape = sp.shape();
    let mut dims = vec![shape.extent(); shape.dim()];
    dims.push(sp.frames());
    let mut s = SpectrumArray::new(dims, sp.data.clone())?;
    let axis = shape.dim();
    let dims = s.dims.clone();
    fft::transform_axis(&mut s.values, &dims, axis, false, exec);
    Ok(s)
}

/// Which temporal frequencies a ridge search may return.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TemporalSearch {
    #[default]
    Full,
    /// Only `f_τ ≥ 0`. Used where a column holds two mirror-image peaks.
    NonNegative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RidgePoint {
    /// Temporal frequency in bins of the time axis, refined below one bin.
    pub f_tau: f64,
    pub magnitude: f64,
}

/// Peak offset and height of the parabola through three samples.
fn parabolic(l: f64, c: f64, r: f64) -> (f64, f64) {
    let den = l - 2.0 * c + r;
    if den >= 0.0 {
        return (0.0, c);
    }
    let d = (0.5 * (l - r) / den).clamp(-0.5, 0.5);
    (d, c - 0.25 * (l - r) * d)
}

fn column_magnitudes(spec: &SpectrumArray, f_spatial: &[i64]) -> Vec<f64> {
    let rank = spec.rank();
    let k_len = spec.dims[rank - 1];
    let mut freq = f_spatial.to_vec();
    freq.push(0);
    let base = spec.index(&freq);
    let stride: usize = spec.dims[..rank - 1].iter().product();
    (0..k_len).map(|k| spec.values[base + k * stride].norm()).collect()
}

/// Temporal frequency of the largest magnitude in one spatial column.
/// Returns `None` for an all-zero column.
pub fn ridge(spec: &SpectrumArray, f_spatial: &[i64], search: TemporalSearch) -> Option<RidgePoint> {
    assert_eq!(f_spatial.len() + 1, spec.rank(), "spatial frequency rank mismatch");
    let col = column_magnitudes(spec, f_spatial);
    let k_len = col.len();
    let allowed = |k: usize| match search {
        TemporalSearch::Full => true,
        TemporalSearch::NonNegative => centered(k, k_len) >= 0,
    };
    let (best, &peak) = col
        .iter()
        .enumerate()
        .filter(|(k, _)| allowed(*k))
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if peak <= 0.0 {
        return None;
    }
    let l = col[(best + k_len - 1) % k_len];
    let r = col[(best + 1) % k_len];
    let (d, mag) = parabolic(l, peak, r);
    Some(RidgePoint {
        f_tau: centered(best, k_len) as f64 + d,
        magnitude: mag,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityEstimate {
    /// Group velocity in sites per step.
    pub value: f64,
    /// Standard error of the fitted slope.
    pub stderr: f64,
    pub points: usize,
}

/// Least-squares slope `y = a + b x`, returning `(b, stderr(b))`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 3 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let stderr = (sse / (n as f64 - 2.0) / sxx).sqrt();
    Some((b, stderr))
}

/// Ridge slope over spatial frequencies `lo..=hi` of a 1-D AFC, scaled to
/// sites per step.
pub fn ridge_slope(spec: &SpectrumArray, lo: i64, hi: i64, search: TemporalSearch) -> Result<VelocityEstimate> {
    if spec.rank() != 2 {
        return Err(Error::domain("ridge slopes need a one-dimensional AFC"));
    }
    let (n, k) = (spec.dims[0] as f64, spec.dims[1] as f64);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for f in lo..=hi {
        if let Some(p) = ridge(spec, &[f], search) {
            xs.push(f as f64);
            ys.push(p.f_tau * n / k);
        }
    }
    let points = xs.len();
    let (value, stderr) = linear_fit(&xs, &ys)
        .ok_or_else(|| Error::InsufficientData(format!("{points} usable ridge points in {lo}..={hi}")))?;
    Ok(VelocityEstimate { value, stderr, points })
}

/// Group velocity around `center` with window half-width `half_width`.
///
/// For d = 1 this is the ridge slope over `center ± half_width`. For d ≥ 2
/// it is the radial speed of the cone peaks found within `half_width` of
/// `center`: the slope of `|f_τ|` against distance from `center`.
pub fn group_velocity(spec: &SpectrumArray, center: &[i64], half_width: i64) -> Result<VelocityEstimate> {
    if half_width < 2 {
        return Err(Error::domain("window half-width must be at least 2 bins"));
    }
    if center.len() + 1 != spec.rank() {
        return Err(Error::domain("centre rank does not match the spectrum"));
    }
    if spec.rank() == 2 {
        let c = center[0];
        return ridge_slope(spec, c - half_width, c + half_width, TemporalSearch::Full);
    }
    let opts = ConeOptions {
        threshold_fraction: 0.3,
        threshold: ThresholdMode::PerColumn,
        radius: Some(half_width as f64),
        apexes: ApexSet::Single(center.iter().map(|&c| c as f64).collect()),
    };
    let fit = cone_extract(spec, &opts)?;
    fit.overall_speed()
        .ok_or_else(|| Error::InsufficientData(format!("{} cone peaks near the centre", fit.peaks.len())))
}

/// Where cone apexes sit.
#[derive(Clone, Debug, PartialEq)]
pub enum ApexSet {
    /// Zone corners `{0, N/2}^d` (ZeroMax) or `{±N/4}^d` (Central).
    Band(FilterBand),
    /// One explicit apex.
    Single(Vec<f64>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ThresholdMode {
    /// Keep local maxima above a fraction of the global maximum.
    Global,
    /// Keep local maxima above a fraction of their own column's maximum.
    #[default]
    PerColumn,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeOptions {
    pub threshold_fraction: f64,
    pub threshold: ThresholdMode,
    /// Keep only peaks with `0 < r ≤ radius` from their apex.
    pub radius: Option<f64>,
    pub apexes: ApexSet,
}

impl ConeOptions {
    pub fn for_band(band: FilterBand) -> Self {
        ConeOptions {
            threshold_fraction: 0.3,
            threshold: ThresholdMode::PerColumn,
            radius: None,
            apexes: ApexSet::Band(band),
        }
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = Some(r);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConePeak {
    pub f_spatial: Vec<i64>,
    /// Temporal frequency scaled to spatial bins (`f_τ · N/K`).
    pub f_tau: f64,
    pub magnitude: f64,
    /// Index into [`DispersionFit::apexes`].
    pub apex: usize,
    /// Distance from the apex in spatial bins.
    pub radius: f64,
    /// `| |f_τ| − r | / r`.
    pub relative_residual: f64,
    /// `f_τ² − r²`.
    pub squared_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApexSummary {
    pub apex: Vec<f64>,
    pub peaks: usize,
    pub median_relative_residual: Option<f64>,
    pub speed: Option<VelocityEstimate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionFit {
    pub peaks: Vec<ConePeak>,
    pub apexes: Vec<ApexSummary>,
    pub median_relative_residual: Option<f64>,
}

impl DispersionFit {
    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// Radial speed fitted over all peaks.
    pub fn overall_speed(&self) -> Option<VelocityEstimate> {
        radial_speed(self.peaks.iter())
    }
}

/// Envelope `|S + iH[S]|` of a periodic 1-D signal, from its analytic
/// signal (negative frequencies removed, positive ones doubled).
pub fn envelope_1d(values: &[f64], exec: Exec) -> Result<Vec<f64>> {
    let n = values.len();
    let data = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut spec = dft_complex(&[n], data, exec)?;
    for (i, v) in spec.values.iter_mut().enumerate() {
        let f = centered(i, n);
        if f < 0 || (n % 2 == 0 && f as usize == n / 2 && f != 0) {
            *v = Complex64::new(0.0, 0.0);
        } else if f > 0 {
            *v *= 2.0;
        }
    }
    Ok(inverse_dft_with(&spec, exec).iter().map(|v| v.norm()).collect())
}

/// Circular shift `s` (centred) that best aligns `b(x)` with `a(x − s)`,
/// by cross-correlation.
pub fn envelope_lag(a: &[f64], b: &[f64]) -> Result<i64> {
    let n = a.len();
    if n != b.len() || n == 0 {
        return Err(Error::domain("envelopes must have equal non-zero length"));
    }
    let (best, _) = (0..n)
        .map(|s| {
            let c: f64 = (0..n).map(|x| a[x] * b[(x + s) % n]).sum();
            (s, c)
        })
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    Ok(centered(best, n))
}


pub fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn radial_speed<'a>(peaks: impl Iterator<Item = &'a ConePeak>) -> Option<VelocityEstimate> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = peaks.map(|p| (p.radius, p.f_tau.abs())).unzip();
    let (value, stderr) = linear_fit(&xs, &ys)?;
    Some(VelocityEstimate {
        value,
        stderr,
        points: xs.len(),
    })
}

/// Per-axis apex coordinate nearest to `f` and the signed offset from it.
fn nearest_axis_apex(apexes: &ApexSet, axis: usize, f: f64, n: f64) -> (f64, f64) {
    match apexes {
        ApexSet::Band(band) => {
            // Apex candidates repeat every N/2 starting at c.
            let c = match band {
                FilterBand::ZeroMax => 0.0,
                FilterBand::Central => n / 4.0,
            };
            let half = n / 2.0;
            let d = (f - c + half / 2.0).rem_euclid(half) - half / 2.0;
            let mut a = f - d;
            // fold into (−N/2, N/2]
            if a <= -half {
                a += n;
            } else if a > half {
                a -= n;
            }
            (a, d)
        }
        ApexSet::Single(c) => {
            let d = (f - c[axis] + n / 2.0).rem_euclid(n) - n / 2.0;
            (c[axis], d)
        }
    }
}

/// Collects local maxima along time in every spatial column and measures
/// each against the nearest cone apex.
pub fn cone_extract(spec: &SpectrumArray, opts: &ConeOptions) -> Result<DispersionFit> {
    if !(opts.threshold_fraction > 0.0 && opts.threshold_fraction < 1.0) {
        return Err(Error::domain("threshold fraction must lie in (0, 1)"));
    }
    let rank = spec.rank();
    let dim = rank - 1;
    let n = spec.dims[0];
    if spec.dims[..dim].iter().any(|&e| e != n) {
        return Err(Error::domain("spatial extents must be equal"));
    }
    if let ApexSet::Single(c) = &opts.apexes {
        if c.len() != dim {
            return Err(Error::domain("apex rank does not match the spectrum"));
        }
    }
    let k_len = spec.dims[dim];
    let columns: usize = spec.dims[..dim].iter().product();
    let scale = n as f64 / k_len as f64;
    let global = spec.max_magnitude();

    let per_column = exec::map_indices(Exec::default(), columns, |col| {
        let mut f_spatial = spec.freq(col);
        f_spatial.truncate(dim);
        let mags: Vec<f64> = (0..k_len).map(|k| spec.values[col + k * columns].norm()).collect();
        let col_max = mags.iter().cloned().fold(0.0, f64::max);
        let thr = match opts.threshold {
            ThresholdMode::Global => opts.threshold_fraction * global,
            ThresholdMode::PerColumn => opts.threshold_fraction * col_max,
        };
        let mut out = Vec::new();
        if col_max <= 0.0 {
            return out;
        }
        let mut apex = Vec::with_capacity(dim);
        let mut r2 = 0.0;
        for (a, &f) in f_spatial.iter().enumerate() {
            let (c, d) = nearest_axis_apex(&opts.apexes, a, f as f64, n as f64);
            apex.push(c);
            r2 += d * d;
        }
        let r = r2.sqrt();
        if r == 0.0 || opts.radius.is_some_and(|lim| r > lim) {
            return out;
        }
        for k in 0..k_len {
            let c = mags[k];
            let l = mags[(k + k_len - 1) % k_len];
            let rr = mags[(k + 1) % k_len];
            if c < thr || c <= 0.0 || c < l || c <= rr {
                continue;
            }
            let (d, mag) = parabolic(l, c, rr);
            let f_tau = (centered(k, k_len) as f64 + d) * scale;
            out.push((
                apex.clone(),
                ConePeak {
                    f_spatial: f_spatial.clone(),
                    f_tau,
                    magnitude: mag,
                    apex: 0,
                    radius: r,
                    relative_residual: (f_tau.abs() - r).abs() / r,
                    squared_residual: f_tau * f_tau - r * r,
                },
            ));
        }
        out
    });

    let mut apex_list: Vec<Vec<f64>> = Vec::new();
    let mut peaks = Vec::new();
    for (apex, mut p) in per_column.into_iter().flatten() {
        let id = match apex_list.iter().position(|a| *a == apex) {
            Some(i) => i,
            None => {
                apex_list.push(apex);
                apex_list.len() - 1
            }
        };
        p.apex = id;
        peaks.push(p);
    }
    let mut order: Vec<usize> = (0..apex_list.len()).collect();
    order.sort_by(|&a, &b| {
        apex_list[a]
            .iter()
            .zip(&apex_list[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut remap = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    for p in &mut peaks {
        p.apex = remap[p.apex];
    }
    let apexes = order
        .iter()
        .enumerate()
        .map(|(new, &old)| {
            let sel: Vec<&ConePeak> = peaks.iter().filter(|p| p.apex == new).collect();
            ApexSummary {
                apex: apex_list[old].clone(),
                peaks: sel.len(),
                median_relative_residual: median(sel.iter().map(|p| p.relative_residual).collect()),
                speed: radial_speed(sel.into_iter()),
            }
        })
        .collect();
    let median_relative_residual = median(peaks.iter().map(|p| p.relative_residual).collect());
    Ok(DispersionFit {
        peaks,
        apexes,
        median_relative_residual,
    })
}
