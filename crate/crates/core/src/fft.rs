//! Discrete Fourier transforms in `f64`.
//!
//! Forward transforms use `e^{−2πi f x/N}` and are unnormalized; inverse
//! transforms use the conjugate kernel and are also unnormalized here (the
//! `1/N` factor is applied by callers). Power-of-two lengths take an
//! iterative radix-2 path; other lengths fall back to a direct O(N²) sum.

use num_complex::Complex64;

use crate::exec::{self, Exec};
use crate::filter::unit_root;

/// Precomputed twiddles for one transform length.
#[derive(Clone, Debug)]
pub struct Plan {
    n: usize,
    roots: Vec<Complex64>,
    bitrev: Option<Vec<usize>>,
}

impl Plan {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let roots = (0..n).map(|j| unit_root(j as u64, n as u64)).collect();
        let bitrev = n.is_power_of_two().then(|| {
            let bits = n.trailing_zeros();
            (0..n)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
                .collect()
        });
        Plan { n, roots, bitrev }
    }

    /// Same plan but forcing the direct path.
    pub fn direct(n: usize) -> Self {
        let mut p = Plan::new(n);
        p.bitrev = None;
        p
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn root(&self, k: usize, inverse: bool) -> Complex64 {
        let w = self.roots[k];
        if inverse {
            w.conj()
        } else {
            w
        }
    }

    /// Transforms `buf` in place; `scratch` must have the same length.
    pub fn run(&self, buf: &mut [Complex64], scratch: &mut [Complex64], inverse: bool) {
        assert_eq!(buf.len(), self.n);
        match &self.bitrev {
            Some(rev) => {
                for (i, &r) in rev.iter().enumerate() {
                    if i < r {
                        buf.swap(i, r);
                    }
                }
                let mut len = 2;
                while len <= self.n {
                    let half = len / 2;
                    let step = self.n / len;
                    for start in (0..self.n).step_by(len) {
                        for j in 0..half {
                            let w = self.root(j * step, inverse);
                            let u = buf[start + j];
                            let v = buf[start + j + half] * w;
                            buf[start + j] = u + v;
                            buf[start + j + half] = u - v;
                        }
                    }
                    len *= 2;
                }
            }
            None => {
                let n = self.n;
                for (f, out) in scratch.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut k = 0usize;
                    for &x in buf.iter() {
                        acc += x * self.root(k, inverse);
                        k += f;
                        if k >= n {
                            k -= n;
                        }
                    }
                    *out = acc;
                }
                buf.copy_from_slice(scratch);
            }
        }
    }
}

/// Transforms every line along `axis` of an array with extents `dims`
/// (first axis fastest).
pub fn transform_axis(data: &mut [Complex64], dims: &[usize], axis: usize, inverse: bool, exec: Exec) {
    let plan = Plan::new(dims[axis]);
    transform_axis_with(data, dims, axis, inverse, exec, &plan);
}

pub fn transform_axis_with(
    data: &mut [Complex64],
    dims: &[usize],
    axis: usize,
    inverse: bool,
    exec: Exec,
    plan: &Plan,
) {
    let len = dims[axis];
    assert_eq!(plan.len(), len);
    assert_eq!(data.len(), dims.iter().product::<usize>());
    if len == 1 {
        return;
    }
    let stride: usize = dims[..axis].iter().product();
    if stride == 1 {
        exec::for_each_chunk(exec, data, len, |_, line| {
            let mut scratch = vec![Complex64::new(0.0, 0.0); len];
            plan.run(line, &mut scratch, inverse);
        });
        return;
    }
    // Strided lines: each block of `stride * len` values holds `stride`
    // interleaved lines and blocks are independent.
    let block = stride * len;
    let outer = data.len() / block;
    if outer >= 4 || !exec.is_parallel() {
        exec::for_each_chunk(exec, data, block, |_, blk| {
            let mut line = vec![Complex64::new(0.0, 0.0); len];
            let mut scratch = line.clone();
            for s in 0..stride {
                for (j, v) in line.iter_mut().enumerate() {
                    *v = blk[s + j * stride];
                }
                plan.run(&mut line, &mut scratch, inverse);
                for (j, v) in line.iter().enumerate() {
                    blk[s + j * stride] = *v;
                }
            }
        });
    } else {
        let src: &[Complex64] = data;
        let lines = exec::map_indices(exec, outer * stride, |id| {
            let (o, s) = (id / stride, id % stride);
            let base = o * block + s;
            let mut line: Vec<Complex64> = (0..len).map(|j| src[base + j * stride]).collect();
            let mut scratch = vec![Complex64::new(0.0, 0.0); len];
            plan.run(&mut line, &mut scratch, inverse);
            line
        });
        for (id, line) in lines.into_iter().enumerate() {
            let (o, s) = (id / stride, id % stride);
            let base = o * block + s;
            for (j, v) in line.into_iter().enumerate() {
                data[base + j * stride] = v;
            }
        }
    }
}

/// Transforms along every axis.
pub fn transform_all(data: &mut [Complex64], dims: &[usize], inverse: bool, exec: Exec) {
    for axis in 0..dims.len() {
        transform_axis(data, dims, axis, inverse, exec);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|f| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let a = -2.0 * std::f64::consts::PI * (f * j) as f64 / n as f64;
                        v * Complex64::new(a.cos(), a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::new(((i * 37 + 11) % 17) as f64 - 8.0, ((i * 13) % 7) as f64))
            .collect()
    }

    #[test]
    fn radix2_and_direct_agree() {
        for n in [1usize, 2, 4, 8, 64, 256] {
            let x = signal(n);
            let mut a = x.clone();
            let mut b = x.clone();
            let mut s = vec![Complex64::new(0.0, 0.0); n];
            Plan::new(n).run(&mut a, &mut s, false);
            Plan::direct(n).run(&mut b, &mut s, false);
            let want = naive(&x);
            for i in 0..n {
                assert!((a[i] - want[i]).norm() < 1e-8, "n={n}");
                assert!((a[i] - b[i]).norm() < 1e-8, "n={n}");
            }
        }
    }

    #[test]
    fn odd_and_even_non_power_lengths() {
        for n in [6usize, 10, 12] {
            let x = signal(n);
            let mut a = x.clone();
            let mut s = vec![Complex64::new(0.0, 0.0); n];
            Plan::new(n).run(&mut a, &mut s, false);
            let want = naive(&x);
            for i in 0..n {
                assert!((a[i] - want[i]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn multi_axis_matches_sequential() {
        let dims = [8usize, 6, 4];
        let x = signal(dims.iter().product());
        let mut a = x.clone();
        let mut b = x;
        transform_all(&mut a, &dims, false, Exec::Sequential);
        transform_all(&mut b, &dims, false, Exec::Parallel);
        assert_eq!(a, b);
        // Spot-check one coefficient against the defining triple sum.
        let mut want = Complex64::new(0.0, 0.0);
        let x = signal(192);
        let (f0, f1, f2) = (3usize, 2usize, 1usize);
        for k in 0..4 {
            for j in 0..6 {
                for i in 0..8 {
                    let ph = f0 as f64 * i as f64 / 8.0 + f1 as f64 * j as f64 / 6.0 + f2 as f64 * k as f64 / 4.0;
                    let a = -2.0 * std::f64::consts::PI * ph;
                    want += x[i + 8 * j + 48 * k] * Complex64::new(a.cos(), a.sin());
                }
            }
        }
        assert!((a[f0 + 8 * f1 + 48 * f2] - want).norm() < 1e-9);
    }
}
