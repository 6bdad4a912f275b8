//! Wide fixed-point runs.
//!
//! The schemes amplify some frequencies by up to `√2` per step (more for
//! higher orders and dimensions), so after a few hundred steps a frame spans
//! far more than the 53 bits of an `f64`. Frequencies near the band apexes
//! barely grow and are lost when a frame is rounded to `f64` and then
//! transformed. This module keeps every value as an integer multiple of
//! `2^−P`, steps with exact integer filter weights and one rounding per site,
//! and takes each frame's spatial DFT in wide arithmetic before converting
//! the coefficients to `f64`. The temporal transform afterwards is harmless
//! in `f64` because each spatial column has its own scale.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::grid::{GridField, GridShape, History};
use crate::scheme::{check_budget, SchemeConfig, UpdateMode};
use crate::spectral::SpatialSpectra;

/// Exact fixed-point encoding of a finite `f64` with `frac` fractional bits,
/// rounded to nearest.
pub fn to_fixed(v: f64, frac: u32) -> BigInt {
    if v == 0.0 {
        return BigInt::zero();
    }
    let bits = v.to_bits();
    let neg = bits >> 63 == 1;
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let man = bits & ((1u64 << 52) - 1);
    let (m, e) = if exp == 0 { (man, -1074) } else { (man | 1 << 52, exp - 1075) };
    let shift = e + frac as i64;
    let mag = BigInt::from(m);
    let mag = if shift >= 0 {
        mag << shift as usize
    } else {
        round_shift(&mag, (-shift) as u32)
    };
    if neg {
        -mag
    } else {
        mag
    }
}

/// `x · 2^e` without intermediate overflow or underflow.
fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// Nearest `f64` to `v · 2^−frac`.
pub fn from_fixed(v: &BigInt, frac: u32) -> f64 {
    let bits = v.bits();
    if bits <= 63 {
        return ldexp(v.to_i64().expect("fits") as f64, -(frac as i64));
    }
    let drop = bits - 63;
    let top = (v >> drop as usize).to_i64().expect("fits");
    ldexp(top as f64, drop as i64 - frac as i64)
}

/// `round(x / 2^s)`, ties upward.
fn round_shift(x: &BigInt, s: u32) -> BigInt {
    if s == 0 {
        return x.clone();
    }
    (x + (BigInt::one() << (s - 1) as usize)) >> s as usize
}

/// `round(a / b)` for positive `b`, ties upward.
fn round_div(a: &BigInt, b: &BigInt) -> BigInt {
    let num: BigInt = a * 2 + b;
    let den: BigInt = b * 2;
    num.div_floor(&den)
}

#[derive(Clone, Debug, PartialEq)]
struct Cx {
    re: BigInt,
    im: BigInt,
}

impl Cx {
    fn real(re: BigInt) -> Self {
        Cx { re, im: BigInt::zero() }
    }

    /// Product with a twiddle holding `t` fractional bits.
    fn mul_twiddle(&self, w: &Cx, t: u32) -> Cx {
        let re = &self.re * &w.re - &self.im * &w.im;
        let im = &self.re * &w.im + &self.im * &w.re;
        Cx {
            re: round_shift(&re, t),
            im: round_shift(&im, t),
        }
    }
}

/// `e^{−2πij/N}` for `j < N/2` with `t` fractional bits, `N` a power of two.
fn twiddles(n: usize, t: u32) -> Vec<Cx> {
    let half = n / 2;
    if half == 0 {
        return vec![];
    }
    let w = t + 48;
    let one = BigInt::one() << w as usize;
    // Start from angle π/2 (cos 0, sin 1) and halve until 2π/N.
    let (mut c, mut s) = (BigInt::zero(), one.clone());
    let mut steps = 0;
    while (4usize << steps) < n {
        // cos(θ/2) = √((1 + cos θ)/2), sin(θ/2) = sin θ / (2 cos(θ/2))
        let c2: BigInt = ((&one + &c) << w as usize) / 2;
        let nc = c2.sqrt();
        let ns = (&s << w as usize) / (&nc * 2);
        c = nc;
        s = ns;
        steps += 1;
    }
    let base = if n == 2 {
        Cx { re: -one.clone(), im: BigInt::zero() }
    } else {
        Cx { re: c, im: -s }
    };
    let mut out = Vec::with_capacity(half);
    let mut cur = Cx::real(one.clone());
    for j in 0..half {
        out.push(Cx {
            re: round_shift(&cur.re, 48),
            im: round_shift(&cur.im, 48),
        });
        if j + 1 < half {
            cur = cur.mul_twiddle(&base, w);
        }
    }
    // Exact values at the quarter point keep symmetric inputs symmetric.
    if n >= 4 {
        out[n / 4] = Cx { re: BigInt::zero(), im: -(BigInt::one() << t as usize) };
    }
    out[0] = Cx::real(BigInt::one() << t as usize);
    out
}

/// In-place radix-2 transform of one line.
fn fft_line(buf: &mut [Cx], roots: &[Cx], t: u32) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let r = if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) };
        if i < r {
            buf.swap(i, r);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for j in 0..half {
                let k = j * step;
                let v = &buf[start + j + half];
                let tv = if k == 0 {
                    v.clone()
                } else if 4 * k == n {
                    // multiply by −i
                    Cx { re: v.im.clone(), im: -&v.re }
                } else {
                    v.mul_twiddle(&roots[k], t)
                };
                let u = buf[start + j].clone();
                buf[start + j] = Cx {
                    re: &u.re + &tv.re,
                    im: &u.im + &tv.im,
                };
                buf[start + j + half] = Cx {
                    re: u.re - tv.re,
                    im: u.im - tv.im,
                };
            }
        }
        len *= 2;
    }
}

/// Forward spatial DFT of a wide frame.
fn fft_frame(frame: &[BigInt], shape: GridShape, roots: &[Cx], t: u32) -> Vec<Cx> {
    let n = shape.extent();
    let mut data: Vec<Cx> = frame.iter().map(|v| Cx::real(v.clone())).collect();
    let mut line: Vec<Cx> = Vec::with_capacity(n);
    for axis in 0..shape.dim() {
        let stride = shape.stride(axis);
        let block = stride * n;
        for b in (0..data.len()).step_by(block) {
            for s in 0..stride {
                line.clear();
                line.extend((0..n).map(|j| std::mem::replace(&mut data[b + s + j * stride], Cx::real(BigInt::zero()))));
                fft_line(&mut line, roots, t);
                for (j, v) in line.drain(..).enumerate() {
                    data[b + s + j * stride] = v;
                }
            }
        }
    }
    data
}

/// Output of a wide run.
#[derive(Clone, Debug)]
pub struct WideRun {
    /// Spatial spectra of every frame, `steps + 1` frames.
    pub spectra: SpatialSpectra,
    /// Frames rounded to `f64`, when every value fits.
    pub history: Option<History>,
    /// Largest |S| per frame (may be infinite when beyond `f64` range).
    pub growth: Vec<f64>,
    /// Fractional bits of the stepped values.
    pub frac_bits: u32,
    /// Fractional bits of the transform twiddles.
    pub twiddle_bits: u32,
}

/// Bits of headroom the run needs per step, from the max-norm growth bound.
pub fn growth_bits_per_step(cfg: &SchemeConfig) -> f64 {
    cfg.growth_bound().log2()
}

/// Rough memory use of a wide run in bytes.
pub fn wide_bytes(shape: GridShape, steps: usize, cfg: &SchemeConfig) -> u64 {
    let bits = 96.0 + steps as f64 * growth_bits_per_step(cfg);
    let per_value = 32.0 + bits / 8.0;
    // stepped values plus complex spectra during the transform
    ((steps + 1) as f64 * shape.sites() as f64 * per_value * 3.0) as u64
}

/// Runs `steps` steps in fixed point and returns per-frame spatial spectra.
pub fn wide_run(initial: &GridField, cfg: &SchemeConfig, steps: usize, exec: Exec, memory_budget: u64) -> Result<WideRun> {
    let shape = initial.shape();
    if shape.dim() != cfg.dim() {
        return Err(Error::config("field and rule dimensions differ"));
    }
    if steps == 0 {
        return Err(Error::domain("a run needs at least one step"));
    }
    if !shape.extent().is_power_of_two() {
        return Err(Error::domain("the wide path needs a power-of-two extent"));
    }
    check_budget(wide_bytes(shape, steps, cfg), memory_budget, shape)?;

    let sites = shape.sites();
    let frac = 64 + ((steps as f64 * sites as f64).log2().ceil() as u32);
    let (ints, den) = cfg.filter().integer_weights();
    let taps: Vec<(i64, BigInt)> = ints
        .into_iter()
        .enumerate()
        .map(|(m, c)| (2 * m as i64 + 1, c))
        .collect();
    let diff = cfg.band().tap_sign() < 0.0;
    let rule = cfg.rule().clone();

    let update = |src: &[BigInt], i: usize| -> BigInt {
        let parity = shape.parity_mask(i);
        let mut acc = BigInt::zero();
        for a in 0..shape.dim() {
            let mut s = BigInt::zero();
            for (k, c) in &taps {
                let f = &src[shape.neighbor(i, a, *k)];
                let b = &src[shape.neighbor(i, a, -*k)];
                let pair = if diff { f - b } else { f + b };
                s += c * pair;
            }
            if rule.sign(a, parity) > 0.0 {
                acc += s;
            } else {
                acc -= s;
            }
        }
        &src[i] + round_div(&acc, &den)
    };

    let mut frames: Vec<Vec<BigInt>> = Vec::with_capacity(steps + 1);
    frames.push(initial.values().iter().map(|&v| to_fixed(v, frac)).collect());
    for _ in 0..steps {
        let src = frames.last().expect("non-empty");
        let next = match cfg.mode() {
            UpdateMode::Synchronous => exec::map_indices(exec, sites, |i| update(src, i)),
            UpdateMode::SweepInPlace => {
                let mut buf = src.clone();
                for i in 0..sites {
                    buf[i] = update(&buf, i);
                }
                buf
            }
        };
        frames.push(next);
    }

    let max_bits = frames
        .iter()
        .flat_map(|f| f.iter().map(|v| v.bits()))
        .max()
        .unwrap_or(0) as u32;
    let t = max_bits + (sites as f64).log2().ceil() as u32 + 16;
    let roots = twiddles(shape.extent(), t);

    let growth: Vec<f64> = frames
        .iter()
        .map(|f| {
            f.iter()
                .map(|v| v.abs())
                .max()
                .map(|m| from_fixed(&m, frac))
                .unwrap_or(0.0)
        })
        .collect();

    let history = if growth.iter().all(|g| g.is_finite()) {
        let data: Vec<f64> = frames.iter().flat_map(|f| f.iter().map(|v| from_fixed(v, frac))).collect();
        Some(History::from_data(shape, Some(cfg.band()), data, steps + 1)?)
    } else {
        None
    };

    let spectra: Vec<Vec<Complex64>> = exec::map_indices(exec, frames.len(), |k| {
        fft_frame(&frames[k], shape, &roots, t)
            .into_iter()
            .map(|c| Complex64::new(from_fixed(&c.re, frac), from_fixed(&c.im, frac)))
            .collect()
    });
    let data: Vec<Complex64> = spectra.into_iter().flatten().collect();
    if data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::domain("spectra exceed the f64 range; use fewer steps"));
    }
    Ok(WideRun {
        spectra: SpatialSpectra::new(shape, Some(cfg.band()), steps + 1, data)?,
        history,
        growth,
        frac_bits: frac,
        twiddle_bits: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::FilterBand;
    use crate::scheme::run;
    use crate::spectral::spatial_spectra;
    use crate::symbol::block_spectra;
    use crate::synth::shock_center;

    #[test]
    fn fixed_round_trip() {
        for v in [0.0, 1.0, -2.5, 1e-30, 3.0e200, -7.25e-3, f64::MIN_POSITIVE] {
            let x = to_fixed(v, 1200);
            assert_eq!(from_fixed(&x, 1200), v);
        }
        assert_eq!(to_fixed(0.75, 1), BigInt::from(2));
        // Magnitudes are rounded, so negative ties move away from zero.
        assert_eq!(to_fixed(-0.75, 1), BigInt::from(-2));
    }

    #[test]
    fn twiddles_accurate() {
        let n = 64;
        let t = 200;
        let r = twiddles(n, t);
        for (j, w) in r.iter().enumerate() {
            let a = -2.0 * std::f64::consts::PI * j as f64 / n as f64;
            assert!((from_fixed(&w.re, t) - a.cos()).abs() < 1e-15);
            assert!((from_fixed(&w.im, t) - a.sin()).abs() < 1e-15);
            // |w|² = 1 to the working precision
            let norm = &w.re * &w.re + &w.im * &w.im - (BigInt::one() << (2 * t) as usize);
            assert!(norm.bits() < t as u64 + 8);
        }
    }

    #[test]
    fn matches_f64_on_short_runs() {
        let shape = GridShape::new(2, 8).unwrap();
        let cfg = SchemeConfig::standard(2, FilterBand::ZeroMax, 2).unwrap();
        let init = shock_center(shape);
        let w = wide_run(&init, &cfg, 6, Exec::default(), u64::MAX).unwrap();
        let h = run(&init, &cfg, 6).unwrap();
        let wh = w.history.unwrap();
        for (a, b) in wh.data().iter().zip(h.data()) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
        let sp = spatial_spectra(&h, Exec::default());
        for (a, b) in w.spectra.data().iter().zip(sp.data()) {
            assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()));
        }
    }

    /// On long runs the wide path agrees with the block-symbol route even
    /// in columns that are tiny compared with the frame maximum.
    #[test]
    fn long_run_matches_block_route() {
        let shape = GridShape::new(1, 64).unwrap();
        let cfg = SchemeConfig::standard(1, FilterBand::ZeroMax, 1).unwrap();
        let init = shock_center(shape);
        let steps = 128;
        let w = wide_run(&init, &cfg, steps, Exec::default(), u64::MAX).unwrap();
        let b = block_spectra(&init, &cfg, steps, Exec::default()).unwrap();
        for k in [0, 1, 64, steps] {
            for (x, y) in w.spectra.frame(k).iter().zip(b.frame(k)) {
                assert!((x - y).norm() <= 1e-9 * y.norm().max(1.0), "frame {k}: {x} vs {y}");
            }
        }
        // The f64 run cannot resolve the f = 0 column after many steps.
        assert!(w.growth[steps] > 1e15);
    }

    #[test]
    fn rejects_bad_input() {
        let shape = GridShape::new(1, 12).unwrap();
        let cfg = SchemeConfig::standard(1, FilterBand::ZeroMax, 1).unwrap();
        assert!(wide_run(&shock_center(shape), &cfg, 4, Exec::default(), u64::MAX).is_err());
        let shape = GridShape::new(1, 16).unwrap();
        assert!(matches!(
            wide_run(&shock_center(shape), &cfg, 4, Exec::default(), 10),
            Err(Error::Resource { .. })
        ));
    }
}
