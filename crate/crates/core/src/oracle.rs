//! Continuum checks: quaternions, plane-wave residuals of the complex and
//! quaternion wave systems, and the finite-difference residual of the
//! virtual-function systems realized by a run.
//!
//! Every virtual-function system here has the shape
//!
//! ```text
//! ∂v_μ/∂τ = Σ_a t[μ][a] ∂v_{μ⊕a}/∂x_a
//! ```
//!
//! because the odd-offset neighbours of a parity-`μ` site along axis `a`
//! have parity `μ` with bit `a` flipped. A system is therefore a sign table
//! `t`, stored in [`SystemTable`].

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::filter::{design_filter, FilterBand};
use crate::grid::{central_sign, virtual_name, History};
use crate::scheme::MultiplierRule;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub fn conj(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Pure quaternion `i a + j b + k c`.
    pub fn pure(v: [f64; 3]) -> Self {
        Quaternion::new(0.0, v[0], v[1], v[2])
    }
}

/// Hamilton product.
pub fn qmul(a: Quaternion, b: Quaternion) -> Quaternion {
    Quaternion::new(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, o: Quaternion) -> Quaternion {
        qmul(self, o)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, s: f64) -> Quaternion {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, o: Quaternion) -> Quaternion {
        self + (-o)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        self * -1.0
    }
}

/// Constant amplitudes of a plane-wave solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Amplitudes {
    Complex(Complex64, Complex64),
    Quaternion(Quaternion, Quaternion),
}

/// `Z_{1,2} = Z⁰_{1,2} · exp[2πi(f_τ τ + f·x)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneWaveParams {
    pub amplitudes: Amplitudes,
    pub freq: Vec<f64>,
    pub f_tau: f64,
}

impl PlaneWaveParams {
    /// On-shell 2-D wave with the given `Z₂⁰`; `Z₁⁰` follows from the first
    /// equation.
    pub fn on_shell_2d(freq: [f64; 2], z2: Complex64) -> Result<Self> {
        let f_tau = freq[0].hypot(freq[1]);
        if f_tau == 0.0 {
            return Err(Error::domain("zero frequency has no propagating wave"));
        }
        let z1 = Complex64::new(freq[0], freq[1]) * z2 / f_tau;
        Ok(PlaneWaveParams {
            amplitudes: Amplitudes::Complex(z1, z2),
            freq: freq.to_vec(),
            f_tau,
        })
    }

    /// On-shell 3-D wave with the given `Z₂⁰`.
    pub fn on_shell_3d(freq: [f64; 3], z2: Quaternion) -> Result<Self> {
        let f_tau = (freq[0] * freq[0] + freq[1] * freq[1] + freq[2] * freq[2]).sqrt();
        if f_tau == 0.0 {
            return Err(Error::domain("zero frequency has no propagating wave"));
        }
        let z1 = Quaternion::pure(freq) * z2 * (1.0 / f_tau);
        Ok(PlaneWaveParams {
            amplitudes: Amplitudes::Quaternion(z1, z2),
            freq: freq.to_vec(),
            f_tau,
        })
    }
}

/// Largest residual of `∂Z₁/∂τ = D₂Z₂`, `∂Z₂/∂τ = D₂*Z₁` under the
/// exponential ansatz, with `D₂ = ∂x + i∂y`.
pub fn residual_complex_2d(p: &PlaneWaveParams) -> Result<f64> {
    let (z1, z2) = match p.amplitudes {
        Amplitudes::Complex(a, b) if p.freq.len() == 2 => (a, b),
        _ => return Err(Error::domain("need complex amplitudes and two frequencies")),
    };
    // Every derivative brings down 2πi; the common factor i is divided out.
    let d = Complex64::new(p.freq[0], p.freq[1]);
    let r1 = z1 * p.f_tau - d * z2;
    let r2 = z2 * p.f_tau - d.conj() * z1;
    Ok(2.0 * PI * r1.norm().max(r2.norm()))
}

/// Largest residual of `∂Z₁/∂τ = D₃Z₂`, `∂Z₂/∂τ = D₃*Z₁` with
/// `D₃ = i∂x + j∂y + k∂z`. The exponential's imaginary unit commutes with
/// the quaternion units and is divided out.
pub fn residual_quaternion_3d(p: &PlaneWaveParams) -> Result<f64> {
    let (z1, z2) = match p.amplitudes {
        Amplitudes::Quaternion(a, b) if p.freq.len() == 3 => (a, b),
        _ => return Err(Error::domain("need quaternion amplitudes and three frequencies")),
    };
    let d = Quaternion::pure([p.freq[0], p.freq[1], p.freq[2]]);
    let r1 = z1 * p.f_tau - d * z2;
    let r2 = z2 * p.f_tau - d.conj() * z1;
    Ok(2.0 * PI * r1.norm().max(r2.norm()))
}

/// Sign table of a virtual-function system: `signs[μ][a]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemTable {
    dim: usize,
    signs: Vec<Vec<i8>>,
}

/// One right-hand-side term: `sign · ∂v_source/∂x_axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Term {
    pub sign: i8,
    pub source: usize,
    pub axis: usize,
}

impl SystemTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sign(&self, mask: usize, axis: usize) -> i8 {
        self.signs[mask][axis]
    }

    /// Builds a table from explicit equations, checking that each term
    /// couples a function to its neighbour across the differentiated axis.
    pub fn from_terms(dim: usize, equations: &[(usize, Vec<Term>)]) -> Result<Self> {
        let size = 1 << dim;
        let mut signs = vec![vec![0i8; dim]; size];
        for (target, terms) in equations {
            for t in terms {
                if t.source != target ^ (1 << t.axis) {
                    return Err(Error::config(format!(
                        "term couples {} to {} across axis {}",
                        virtual_name(dim, *target),
                        virtual_name(dim, t.source),
                        t.axis
                    )));
                }
                if signs[*target][t.axis] != 0 {
                    return Err(Error::config("duplicate term"));
                }
                signs[*target][t.axis] = t.sign;
            }
        }
        if signs.iter().flatten().any(|&s| s == 0) {
            return Err(Error::config("system is missing terms"));
        }
        Ok(SystemTable { dim, signs })
    }

    /// Equations as published (d ≤ 3).
    pub fn reference(dim: usize) -> Result<Self> {
        let t = |sign: i8, source: usize, axis: usize| Term { sign, source, axis };
        let eqs: Vec<(usize, Vec<Term>)> = match dim {
            // ṗ = q_x, q̇ = p_x
            1 => vec![(0, vec![t(1, 1, 0)]), (1, vec![t(1, 0, 0)])],
            // masks: p 0, r 1, s 2, q 3
            2 => vec![
                (0, vec![t(1, 1, 0), t(-1, 2, 1)]),
                (3, vec![t(1, 2, 0), t(1, 1, 1)]),
                (1, vec![t(1, 0, 0), t(1, 3, 1)]),
                (2, vec![t(1, 3, 0), t(-1, 0, 1)]),
            ],
            // masks: p0 0, q1 1, q2 2, p3 3, q3 4, p2 5, p1 6, q0 7
            3 => vec![
                (0, vec![t(-1, 1, 0), t(-1, 2, 1), t(-1, 4, 2)]),
                (6, vec![t(1, 7, 0), t(1, 4, 1), t(-1, 2, 2)]),
                (5, vec![t(-1, 4, 0), t(1, 7, 1), t(1, 1, 2)]),
                (3, vec![t(1, 2, 0), t(-1, 1, 1), t(1, 7, 2)]),
                (7, vec![t(1, 6, 0), t(1, 5, 1), t(1, 3, 2)]),
                (1, vec![t(-1, 0, 0), t(-1, 3, 1), t(1, 5, 2)]),
                (2, vec![t(1, 3, 0), t(-1, 0, 1), t(-1, 6, 2)]),
                (4, vec![t(-1, 5, 0), t(1, 6, 1), t(-1, 0, 2)]),
            ],
            _ => return Err(Error::domain(format!("no published system for d={dim}"))),
        };
        SystemTable::from_terms(dim, &eqs)
    }

    /// System a scheme with `rule` actually realizes on its virtual
    /// functions. For the Central band the sign weights contribute an extra
    /// `(−1)^{μ_a}`.
    pub fn realized(rule: &MultiplierRule) -> Self {
        let dim = rule.dim();
        let signs = (0..1usize << dim)
            .map(|mu| {
                (0..dim)
                    .map(|a| {
                        let mut s = rule.sign(a, mu);
                        if rule.band() == FilterBand::Central && mu >> a & 1 == 1 {
                            s = -s;
                        }
                        s as i8
                    })
                    .collect()
            })
            .collect();
        SystemTable { dim, signs }
    }

    pub fn terms(&self, mask: usize) -> Vec<Term> {
        (0..self.dim)
            .map(|a| Term {
                sign: self.signs[mask][a],
                source: mask ^ (1 << a),
                axis: a,
            })
            .collect()
    }

    /// Sign flips `σ` (with `σ_0 = +1`) such that rescaling `v_μ → σ_μ v_μ`
    /// turns `self` into `target`.
    pub fn gauge_to(&self, target: &SystemTable) -> Option<Vec<i8>> {
        if self.dim != target.dim {
            return None;
        }
        let size = 1usize << self.dim;
        (0..1u32 << (size - 1)).find_map(|bits| {
            let sigma: Vec<i8> = (0..size)
                .map(|m| if m > 0 && bits >> (m - 1) & 1 == 1 { -1 } else { 1 })
                .collect();
            let ok = (0..size).all(|mu| {
                (0..self.dim).all(|a| {
                    let nu = mu ^ (1 << a);
                    sigma[mu] * sigma[nu] * self.signs[mu][a] == target.signs[mu][a]
                })
            });
            ok.then_some(sigma)
        })
    }
}

impl fmt::Display for SystemTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const AXES: [&str; 4] = ["x", "y", "z", "w"];
        for mu in 0..1usize << self.dim {
            write!(f, "d{}/dt =", virtual_name(self.dim, mu))?;
            for t in self.terms(mu) {
                let s = if t.sign > 0 { '+' } else { '-' };
                write!(f, " {s} d{}/d{}", virtual_name(self.dim, t.source), AXES[t.axis])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Multiplication of algebra units: `e_a · e_b = sign · e_c`.
type UnitMul = fn(usize, usize) -> (i8, usize);

fn complex_units(a: usize, b: usize) -> (i8, usize) {
    match (a, b) {
        (1, 1) => (-1, 0),
        _ => (1, a + b),
    }
}

fn quaternion_units(a: usize, b: usize) -> (i8, usize) {
    // 0 = 1, 1 = i, 2 = j, 3 = k
    const TABLE: [[(i8, usize); 4]; 4] = [
        [(1, 0), (1, 1), (1, 2), (1, 3)],
        [(1, 1), (-1, 0), (1, 3), (-1, 2)],
        [(1, 2), (-1, 3), (-1, 0), (1, 1)],
        [(1, 3), (1, 2), (-1, 1), (-1, 0)],
    ];
    TABLE[a][b]
}

/// Expands `∂Z_target/∂τ = D Z_source` into component equations. `target`
/// and `source` list the virtual-function mask held by each algebra unit;
/// `op[a]` is the signed unit multiplying `∂/∂x_a` in `D`.
fn expand(mul: UnitMul, target: &[usize], source: &[usize], op: &[(i8, usize)]) -> Vec<(usize, Vec<Term>)> {
    let mut eqs: Vec<(usize, Vec<Term>)> = target.iter().map(|&m| (m, Vec::new())).collect();
    for (axis, &(osign, ounit)) in op.iter().enumerate() {
        for (unit, &mask) in source.iter().enumerate() {
            let (s, out) = mul(ounit, unit);
            eqs[out].1.push(Term {
                sign: osign * s,
                source: mask,
                axis,
            });
        }
    }
    eqs
}

/// Component form of `∂Z₁/∂τ = D₂Z₂, ∂Z₂/∂τ = D₂*Z₁` with `Z₁ = p + iq`,
/// `Z₂ = r + is`, `D₂ = ∂x + i∂y`.
pub fn expand_complex_2d() -> Result<SystemTable> {
    let z1 = [0, 3];
    let z2 = [1, 2];
    let d = [(1, 0), (1, 1)];
    let d_conj = [(1, 0), (-1, 1)];
    let mut eqs = expand(complex_units, &z1, &z2, &d);
    eqs.extend(expand(complex_units, &z2, &z1, &d_conj));
    SystemTable::from_terms(2, &eqs)
}

/// Component form of `∂Z₁/∂τ = D₃Z₂, ∂Z₂/∂τ = D₃*Z₁` with
/// `Z₁ = p₀ + ip₁ + jp₂ + kp₃`, `Z₂ = q₀ + iq₁ + jq₂ + kq₃`,
/// `D₃ = i∂x + j∂y + k∂z`.
pub fn expand_quaternion_3d() -> Result<SystemTable> {
    let z1 = [0, 6, 5, 3];
    let z2 = [7, 1, 2, 4];
    let d = [(1, 1), (1, 2), (1, 3)];
    let d_conj = [(-1, 1), (-1, 2), (-1, 3)];
    let mut eqs = expand(quaternion_units, &z1, &z2, &d);
    eqs.extend(expand(quaternion_units, &z2, &z1, &d_conj));
    SystemTable::from_terms(3, &eqs)
}

/// Residual of one virtual function.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionResidual {
    pub name: String,
    pub rms_lhs: f64,
    pub rms_residual: f64,
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeResidual {
    pub functions: Vec<FunctionResidual>,
    /// `RMS(LHS − RHS) / RMS(LHS)` over all functions and frame pairs.
    pub relative: f64,
    /// Gauge signs applied to the realized system.
    pub gauge: Vec<i8>,
}

/// Order of the reference derivative filter.
pub const REFERENCE_ORDER: usize = 4;

/// Compares the per-step change of each virtual function with the
/// published system evaluated by order-4 staggered derivatives, for a run
/// made with the published multipliers of `band`.
pub fn pde_residual(history: &History, band: FilterBand) -> Result<PdeResidual> {
    let d = history.shape().dim();
    let rule = MultiplierRule::published(d, band)?;
    pde_residual_with_rule(history, &rule)
}

/// Same with an explicit rule. For d ≤ 3 the realized system must be
/// gauge-equivalent to the published one; for d = 4 the realized system
/// is the reference.
pub fn pde_residual_with_rule(history: &History, rule: &MultiplierRule) -> Result<PdeResidual> {
    let shape = history.shape();
    let d = shape.dim();
    if rule.dim() != d {
        return Err(Error::config("rule and history dimensions differ"));
    }
    if history.len() < 2 {
        return Err(Error::InsufficientData("need at least two frames".into()));
    }
    let realized = SystemTable::realized(rule);
    let (reference, gauge) = if d <= 3 {
        let reference = SystemTable::reference(d)?;
        let gauge = realized.gauge_to(&reference).ok_or_else(|| {
            Error::config(format!("rule {rule} does not realize the published system"))
        })?;
        (reference, gauge)
    } else {
        (realized.clone(), vec![1; 1 << d])
    };
    let filter = design_filter(REFERENCE_ORDER, FilterBand::ZeroMax)?;
    let taps: Vec<(i64, f64)> = filter.taps().map(|(k, a)| (k as i64, a)).collect();
    let sites = shape.sites();
    let size = 1usize << d;

    // Site sign: weight-sign removal times gauge, so w holds σ_μ v_μ.
    let site_sign: Vec<f64> = (0..sites)
        .map(|i| {
            let c = shape.coords(i);
            let mask = shape.parity_mask(i);
            let w = match rule.band() {
                FilterBand::ZeroMax => 1.0,
                FilterBand::Central => central_sign(&c[..d]),
            };
            w * gauge[mask] as f64
        })
        .collect();

    let mut lhs_sq = vec![0.0; size];
    let mut res_sq = vec![0.0; size];
    let mut count = vec![0usize; size];
    for k in 0..history.len() - 1 {
        let a = history.frame(k);
        let b = history.frame(k + 1);
        let w: Vec<f64> = a.iter().zip(&site_sign).map(|(v, s)| v * s).collect();
        for i in 0..sites {
            let mu = shape.parity_mask(i);
            let lhs = (b[i] - a[i]) * site_sign[i];
            let mut rhs = 0.0;
            for axis in 0..d {
                let mut der = 0.0;
                for &(off, alpha) in &taps {
                    der += alpha * (w[shape.neighbor(i, axis, off)] - w[shape.neighbor(i, axis, -off)]);
                }
                rhs += reference.sign(mu, axis) as f64 * der;
            }
            lhs_sq[mu] += lhs * lhs;
            res_sq[mu] += (lhs - rhs) * (lhs - rhs);
            count[mu] += 1;
        }
    }
    let functions = (0..size)
        .map(|mu| {
            let rms_lhs = (lhs_sq[mu] / count[mu] as f64).sqrt();
            let rms_residual = (res_sq[mu] / count[mu] as f64).sqrt();
            FunctionResidual {
                name: virtual_name(d, mu),
                rms_lhs,
                rms_residual,
                relative: if rms_lhs > 0.0 { rms_residual / rms_lhs } else { f64::NAN },
            }
        })
        .collect();
    let total_lhs: f64 = lhs_sq.iter().sum();
    if total_lhs == 0.0 {
        return Err(Error::InsufficientData("virtual functions do not change".into()));
    }
    Ok(PdeResidual {
        functions,
        relative: (res_sq.iter().sum::<f64>() / total_lhs).sqrt(),
        gauge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quaternion_units() {
        assert_eq!(Quaternion::I * Quaternion::J, Quaternion::K);
        assert_eq!(Quaternion::J * Quaternion::K, Quaternion::I);
        assert_eq!(Quaternion::K * Quaternion::I, Quaternion::J);
        for u in [Quaternion::I, Quaternion::J, Quaternion::K] {
            assert_eq!(u * u, -Quaternion::ONE);
        }
        let q = Quaternion::new(0.5, -1.0, 2.0, 3.0);
        assert_eq!(q * Quaternion::ONE, q);
        let a = Quaternion::ONE + Quaternion::I;
        let b = Quaternion::ONE + Quaternion::J;
        assert_eq!(qmul(a, b), Quaternion::new(1.0, 1.0, 1.0, 1.0));
        assert_eq!(q.conj(), Quaternion::new(0.5, 1.0, -2.0, -3.0));
    }

    #[test]
    fn complex_examples() {
        let p = PlaneWaveParams::on_shell_2d([3.0, 4.0], Complex64::new(1.0, 0.0)).unwrap();
        match p.amplitudes {
            Amplitudes::Complex(z1, _) => assert!((z1 - Complex64::new(0.6, 0.8)).norm() < 1e-15),
            _ => unreachable!(),
        }
        assert!(residual_complex_2d(&p).unwrap() < 1e-10);
        let off = PlaneWaveParams { f_tau: 6.0, ..p.clone() };
        assert!(residual_complex_2d(&off).unwrap() > 0.1);
        let zero = PlaneWaveParams {
            amplitudes: Amplitudes::Complex(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
            ..p
        };
        assert_eq!(residual_complex_2d(&zero).unwrap(), 0.0);
    }

    #[test]
    fn quaternion_examples() {
        let p = PlaneWaveParams::on_shell_3d([1.0, 2.0, 2.0], Quaternion::ONE).unwrap();
        assert_eq!(p.f_tau, 3.0);
        match p.amplitudes {
            Amplitudes::Quaternion(z1, _) => {
                assert!((z1 - Quaternion::new(0.0, 1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0)).norm() < 1e-15)
            }
            _ => unreachable!(),
        }
        assert!(residual_quaternion_3d(&p).unwrap() < 1e-10);
        let off = PlaneWaveParams { f_tau: 4.0, ..p };
        assert!(residual_quaternion_3d(&off).unwrap() > 0.1);
        let still = PlaneWaveParams {
            amplitudes: Amplitudes::Quaternion(Quaternion::new(1.0, 2.0, 0.0, 0.0), Quaternion::new(0.0, 0.0, 3.0, 1.0)),
            freq: vec![0.0; 3],
            f_tau: 0.0,
        };
        assert_eq!(residual_quaternion_3d(&still).unwrap(), 0.0);
        assert!(residual_complex_2d(&still).is_err());
    }

    #[test]
    fn expansions_match_published() {
        assert_eq!(expand_complex_2d().unwrap(), SystemTable::reference(2).unwrap());
        assert_eq!(expand_quaternion_3d().unwrap(), SystemTable::reference(3).unwrap());
    }

    #[test]
    fn published_rules_are_gauge_equivalent() {
        for d in 1..=3 {
            let reference = SystemTable::reference(d).unwrap();
            for band in FilterBand::ALL {
                let rule = MultiplierRule::published(d, band).unwrap();
                let g = SystemTable::realized(&rule).gauge_to(&reference);
                assert!(g.is_some(), "d={d} {band}");
            }
        }
        let bad = MultiplierRule::new(FilterBand::ZeroMax, vec![0, 0]).unwrap();
        assert!(SystemTable::realized(&bad).gauge_to(&SystemTable::reference(2).unwrap()).is_none());
    }

    #[test]
    fn display_lists_equations() {
        let s = SystemTable::reference(2).unwrap().to_string();
        assert!(s.contains("dp/dt = + dr/dx - ds/dy"));
        assert!(s.contains("ds/dt = + dq/dx - dp/dy"));
    }
}
