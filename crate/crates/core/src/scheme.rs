//! Iterative propagation schemes.
//!
//! One step reads
//!
//! ```text
//! S'(x) = S(x) + Σ_a M_a(x) Σ_m α(m) [S(x + (2m−1)e_a) ∓ S(x − (2m−1)e_a)]
//! ```
//!
//! with `−` for ZeroMax and `+` for Central. The multiplier `M_a(x)` is
//! `(−1)^(e_a·x)` for a per-axis exponent vector `e_a ∈ {0,1}^d`, stored as a
//! bitmask (bit `i` set when coordinate `i` enters the exponent).

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::filter::{design_filter, DiffFilter, FilterBand};
use crate::grid::{GridField, GridShape, History, MAX_DIM};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiplierRule {
    band: FilterBand,
    masks: Vec<u8>,
}

impl MultiplierRule {
    /// One exponent mask per axis; the dimension is `masks.len()`.
    pub fn new(band: FilterBand, masks: Vec<u8>) -> Result<Self> {
        let d = masks.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::domain(format!("rule dimension must lie in 1..=4, got {d}")));
        }
        if masks.iter().any(|&m| (m as usize) >> d != 0) {
            return Err(Error::domain("exponent mask refers to a missing axis"));
        }
        Ok(MultiplierRule { band, masks })
    }

    /// Multipliers as published for d ≤ 3.
    pub fn published(dim: usize, band: FilterBand) -> Result<Self> {
        use FilterBand::*;
        let masks: Vec<u8> = match (dim, band) {
            (1, ZeroMax) => vec![0],
            (1, Central) => vec![0b1],
            // X ≡ 1, Y = (−1)^x
            (2, ZeroMax) => vec![0, 0b01],
            // X = (−1)^x, Y = (−1)^(x+y)
            (2, Central) => vec![0b01, 0b11],
            // X = (−1)^y, Y = (−1)^z, Z = (−1)^x
            (3, ZeroMax) => vec![0b010, 0b100, 0b001],
            // X = (−1)^(x+y), Y = (−1)^(y+z), Z = (−1)^(x+z)
            (3, Central) => vec![0b011, 0b110, 0b101],
            _ => {
                return Err(Error::domain(format!(
                    "no published multipliers for d={dim}"
                )))
            }
        };
        MultiplierRule::new(band, masks)
    }

    /// Published rule for d ≤ 3, search result for d = 4.
    pub fn standard(dim: usize, band: FilterBand) -> Result<Self> {
        if dim < 4 {
            return Self::published(dim, band);
        }
        if dim > 4 {
            return Err(Error::domain(format!("dimension {dim} is not supported")));
        }
        static CACHE: OnceLock<[Option<MultiplierRule>; 2]> = OnceLock::new();
        let found = CACHE.get_or_init(|| {
            FilterBand::ALL.map(|b| crate::symbol::find_multipliers(4, b, Exec::default()).ok().and_then(|o| o.best_passing()))
        });
        let slot = match band {
            FilterBand::ZeroMax => &found[0],
            FilterBand::Central => &found[1],
        };
        slot.clone()
            .ok_or_else(|| Error::config("the 4D multiplier search found no passing rule"))
    }

    pub fn dim(&self) -> usize {
        self.masks.len()
    }

    pub fn band(&self) -> FilterBand {
        self.band
    }

    pub fn masks(&self) -> &[u8] {
        &self.masks
    }

    /// `M_axis` at a site with the given parity mask.
    pub fn sign(&self, axis: usize, parity: usize) -> f64 {
        if (self.masks[axis] as usize & parity).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl fmt::Display for MultiplierRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const AXES: [&str; 4] = ["x", "y", "z", "w"];
        const NAMES: [&str; 4] = ["X", "Y", "Z", "W"];
        let d = self.dim();
        let parts: Vec<String> = self
            .masks
            .iter()
            .enumerate()
            .map(|(a, &m)| {
                let terms: Vec<&str> = (0..d).filter(|i| m >> i & 1 == 1).map(|i| AXES[i]).collect();
                if terms.is_empty() {
                    format!("{}=1", NAMES[a])
                } else {
                    format!("{}=(-1)^({})", NAMES[a], terms.join("+"))
                }
            })
            .collect();
        f.write_str(&parts.join(", "))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// Every read comes from the previous frame.
    #[default]
    Synchronous,
    /// Sites are updated in ascending index order, reading values already
    /// overwritten in the current sweep.
    SweepInPlace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    filter: DiffFilter,
    rule: MultiplierRule,
    mode: UpdateMode,
}

impl SchemeConfig {
    pub fn new(filter: DiffFilter, rule: MultiplierRule, mode: UpdateMode) -> Result<Self> {
        if filter.band() != rule.band() {
            return Err(Error::config(format!(
                "filter band {} does not match rule band {}",
                filter.band(),
                rule.band()
            )));
        }
        Ok(SchemeConfig { filter, rule, mode })
    }

    /// Order-`order` filter with the standard rule, synchronous updates.
    pub fn standard(dim: usize, band: FilterBand, order: usize) -> Result<Self> {
        Self::new(
            design_filter(order, band)?,
            MultiplierRule::standard(dim, band)?,
            UpdateMode::Synchronous,
        )
    }

    pub fn filter(&self) -> &DiffFilter {
        &self.filter
    }

    pub fn rule(&self) -> &MultiplierRule {
        &self.rule
    }

    pub fn mode(&self) -> UpdateMode {
        self.mode
    }

    pub fn band(&self) -> FilterBand {
        self.filter.band()
    }

    pub fn dim(&self) -> usize {
        self.rule.dim()
    }

    pub fn with_mode(mut self, mode: UpdateMode) -> Self {
        self.mode = mode;
        self
    }

    /// Upper bound on the per-step growth factor of max|S|.
    pub fn growth_bound(&self) -> f64 {
        1.0 + 2.0 * self.dim() as f64 * self.filter.l1_norm()
    }
}

/// Flattened neighbour table: for each axis and tap, signed weight and the
/// offsets to read.
struct Stencil {
    taps: Vec<(usize, f64)>,
    back: f64,
}

impl Stencil {
    fn new(cfg: &SchemeConfig) -> Self {
        Stencil {
            taps: cfg.filter.taps().collect(),
            back: cfg.band().tap_sign(),
        }
    }

    #[inline]
    fn update(&self, shape: &GridShape, rule: &MultiplierRule, src: &[f64], i: usize) -> f64 {
        let parity = shape.parity_mask(i);
        let mut acc = 0.0;
        for a in 0..shape.dim() {
            let mut s = 0.0;
            for &(k, w) in &self.taps {
                let fwd = src[shape.neighbor(i, a, k as i64)];
                let bwd = src[shape.neighbor(i, a, -(k as i64))];
                s += w * (fwd + self.back * bwd);
            }
            acc += rule.sign(a, parity) * s;
        }
        src[i] + acc
    }
}

fn check(field: &GridField, cfg: &SchemeConfig) -> Result<()> {
    if field.shape().dim() != cfg.dim() {
        return Err(Error::config(format!(
            "field has dimension {} but the rule is for {}",
            field.shape().dim(),
            cfg.dim()
        )));
    }
    Ok(())
}

/// Advances one time step.
pub fn step(field: &GridField, cfg: &SchemeConfig) -> Result<GridField> {
    step_with(field, cfg, Exec::default())
}

pub fn step_with(field: &GridField, cfg: &SchemeConfig, exec: Exec) -> Result<GridField> {
    check(field, cfg)?;
    let mut out = vec![0.0; field.values().len()];
    step_into(field.shape(), field.values(), &mut out, cfg, exec);
    Ok(GridField::from_parts(field.shape(), out, field.tau() + 1))
}

/// Writes the next frame of `src` into `dst`.
pub(crate) fn step_into(shape: GridShape, src: &[f64], dst: &mut [f64], cfg: &SchemeConfig, exec: Exec) {
    let st = Stencil::new(cfg);
    match cfg.mode {
        UpdateMode::Synchronous => {
            exec::fill_indexed(exec, dst, |i| st.update(&shape, &cfg.rule, src, i));
        }
        UpdateMode::SweepInPlace => {
            dst.copy_from_slice(src);
            for i in 0..dst.len() {
                dst[i] = st.update(&shape, &cfg.rule, dst, i);
            }
        }
    }
}

/// [`step`] restricted to four-dimensional fields.
pub fn step_4d(field: &GridField, cfg: &SchemeConfig) -> Result<GridField> {
    if field.shape().dim() != 4 || cfg.dim() != 4 {
        return Err(Error::config("step_4d needs a 4D field and a 4-axis rule"));
    }
    step(field, cfg)
}

/// Default memory budget for [`run`], 4 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub exec: Exec,
    pub memory_budget: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            exec: Exec::default(),
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

/// Bytes needed to hold `frames` frames of `shape`.
pub fn history_bytes(shape: GridShape, frames: usize) -> u64 {
    shape.sites() as u64 * frames as u64 * 8
}

pub(crate) fn check_budget(required: u64, budget: u64, shape: GridShape) -> Result<()> {
    if required > budget {
        return Err(Error::Resource {
            required,
            available: budget,
            hint: format!(
                "reduce the grid (N={}) or the number of steps",
                shape.extent()
            ),
        });
    }
    Ok(())
}

/// Runs `steps` steps and records `steps + 1` frames, starting with `initial`.
pub fn run(initial: &GridField, cfg: &SchemeConfig, steps: usize) -> Result<History> {
    run_with(initial, cfg, steps, RunOptions::default())
}

pub fn run_with(initial: &GridField, cfg: &SchemeConfig, steps: usize, opts: RunOptions) -> Result<History> {
    if steps == 0 {
        return Err(Error::domain("a run needs at least one step"));
    }
    check(initial, cfg)?;
    let shape = initial.shape();
    check_budget(history_bytes(shape, steps + 1), opts.memory_budget, shape)?;
    let sites = shape.sites();
    let mut data = vec![0.0; sites * (steps + 1)];
    data[..sites].copy_from_slice(initial.values());
    for k in 0..steps {
        let (done, rest) = data.split_at_mut((k + 1) * sites);
        step_into(shape, &done[k * sites..], &mut rest[..sites], cfg, opts.exec);
    }
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!(
            "values overflowed at frame {}; use fewer steps or the wide-precision path",
            i / sites
        )));
    }
    History::from_data(shape, Some(cfg.band()), data, steps + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dim: usize, band: FilterBand, n: usize) -> SchemeConfig {
        SchemeConfig::standard(dim, band, n).unwrap()
    }

    fn delta(n: usize, at: usize) -> GridField {
        let s = GridShape::new(1, n).unwrap();
        GridField::from_fn(s, |c| if c[0] == at { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn constant_is_fixed() {
        let s = GridShape::new(2, 8).unwrap();
        let f = GridField::from_fn(s, |_| 2.5).unwrap();
        let g = step(&f, &cfg(2, FilterBand::ZeroMax, 3)).unwrap();
        assert_eq!(g.values(), f.values());
        assert_eq!(g.tau(), 1);
    }

    #[test]
    fn impulse_zeromax() {
        let g = step(&delta(8, 3), &cfg(1, FilterBand::ZeroMax, 1)).unwrap();
        assert_eq!(g.values(), &[0., 0., 0.5, 1., -0.5, 0., 0., 0.]);
    }

    #[test]
    fn impulse_central() {
        let g = step(&delta(8, 2), &cfg(1, FilterBand::Central, 1)).unwrap();
        assert_eq!(g.values(), &[0., -0.5, 1., -0.5, 0., 0., 0., 0.]);
    }

    #[test]
    fn mismatches_rejected() {
        let f = delta(8, 0);
        assert!(matches!(step(&f, &cfg(2, FilterBand::ZeroMax, 1)), Err(Error::Config(_))));
        let bad = SchemeConfig::new(
            design_filter(1, FilterBand::Central).unwrap(),
            MultiplierRule::published(1, FilterBand::ZeroMax).unwrap(),
            UpdateMode::Synchronous,
        );
        assert!(matches!(bad, Err(Error::Config(_))));
        assert!(step_4d(&f, &cfg(1, FilterBand::ZeroMax, 1)).is_err());
    }

    #[test]
    fn run_records_frames() {
        let c = cfg(1, FilterBand::ZeroMax, 1);
        let f = delta(16, 8);
        let h = run(&f, &c, 1).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.field(1).values(), step(&f, &c).unwrap().values());
        assert!(run(&f, &c, 0).is_err());
    }

    #[test]
    fn budget_enforced() {
        let c = cfg(1, FilterBand::ZeroMax, 1);
        let opts = RunOptions {
            exec: Exec::Sequential,
            memory_budget: 1000,
        };
        match run_with(&delta(64, 0), &c, 10, opts) {
            Err(Error::Resource { required, available, .. }) => {
                assert_eq!(required, 64 * 11 * 8);
                assert_eq!(available, 1000);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sweep_differs_from_sync() {
        let c = cfg(1, FilterBand::ZeroMax, 1).with_mode(UpdateMode::SweepInPlace);
        let g = step(&delta(8, 3), &c).unwrap();
        // Site 2 is updated before site 3, so site 4 still sees the old
        // value of 3 but site 3 sees the new value of 2.
        assert_eq!(g.values()[2], 0.5);
        assert_eq!(g.values()[3], 1.0 + 0.5 * (0.0 - 0.5));
    }

    #[test]
    fn exec_modes_agree() {
        let s = GridShape::new(3, 8).unwrap();
        let f = GridField::from_fn(s, |c| ((c[0] * 7 + c[1] * 3 + c[2]) % 5) as f64 - 2.0).unwrap();
        let c = cfg(3, FilterBand::Central, 2);
        let a = step_with(&f, &c, Exec::Sequential).unwrap();
        let b = step_with(&f, &c, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn display_rule() {
        let r = MultiplierRule::published(2, FilterBand::Central).unwrap();
        assert_eq!(r.to_string(), "X=(-1)^(x), Y=(-1)^(x+y)");
    }
}
