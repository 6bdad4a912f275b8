//! Periodic lattices, fields, histories and the parity decomposition.
//!
//! Sites are stored with the first axis (x) fastest. A site's *parity mask*
//! has bit `a` set when coordinate `a` is odd; the 2^d virtual functions are
//! the restrictions of a field to each parity class, stored on compact
//! `(N/2)^d` sub-grids with `site = 2·subsite + parity`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterBand;

/// Largest supported dimension.
pub const MAX_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    dim: usize,
    n: usize,
}

impl GridShape {
    /// A `dim`-dimensional periodic lattice with `n` sites per axis.
    ///
    /// `n` must be even and at least 4.
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::domain(format!("dimension must lie in 1..=4, got {dim}")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::domain(format!("extent must be even and at least 4, got {n}")));
        }
        let sites = (n as u128).pow(dim as u32);
        if sites > usize::MAX as u128 / 16 {
            return Err(Error::domain("lattice too large to address"));
        }
        Ok(GridShape { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> usize {
        self.n
    }

    pub fn sites(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Index distance between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow(axis as u32)
    }

    /// Number of parity classes, `2^d`.
    pub fn parity_classes(&self) -> usize {
        1 << self.dim
    }

    /// Shape of one parity sub-grid, `(N/2)^d` sites.
    pub fn half_extent(&self) -> usize {
        self.n / 2
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        coords
            .iter()
            .rev()
            .fold(0, |acc, &c| acc * self.n + c % self.n)
    }

    /// Coordinates of `index`; entries past `dim` are zero.
    pub fn coords(&self, mut index: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        for v in c.iter_mut().take(self.dim) {
            *v = index % self.n;
            index /= self.n;
        }
        c
    }

    pub fn parity_mask(&self, index: usize) -> usize {
        let c = self.coords(index);
        (0..self.dim).fold(0, |m, a| m | ((c[a] & 1) << a))
    }

    /// Index of the site `offset` sites away from `index` along `axis`,
    /// wrapping periodically.
    pub fn neighbor(&self, index: usize, axis: usize, offset: i64) -> usize {
        let stride = self.stride(axis);
        let c = (index / stride) % self.n;
        let nc = (c as i64 + offset).rem_euclid(self.n as i64) as usize;
        index + nc * stride - c * stride
    }

    /// Centre site `(N/2, …, N/2)`.
    pub fn center(&self) -> Vec<usize> {
        vec![self.n / 2; self.dim]
    }

    fn check_site(&self, site: &[usize]) -> Result<()> {
        if site.len() != self.dim {
            return Err(Error::domain(format!(
                "site has {} coordinates, lattice has {}",
                site.len(),
                self.dim
            )));
        }
        if let Some(c) = site.iter().find(|&&c| c >= self.n) {
            return Err(Error::domain(format!("coordinate {c} outside 0..{}", self.n)));
        }
        Ok(())
    }
}

/// Real scalar field on a lattice at time index `tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    shape: GridShape,
    values: Vec<f64>,
    tau: u64,
}

impl GridField {
    pub fn new(shape: GridShape, values: Vec<f64>, tau: u64) -> Result<Self> {
        if values.len() != shape.sites() {
            return Err(Error::domain(format!(
                "expected {} values, got {}",
                shape.sites(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite value at site {i}")));
        }
        Ok(GridField { shape, values, tau })
    }

    pub fn zeros(shape: GridShape) -> Self {
        GridField {
            shape,
            values: vec![0.0; shape.sites()],
            tau: 0,
        }
    }

    /// Builds a field from `f(coords)`.
    pub fn from_fn(shape: GridShape, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let values = (0..shape.sites())
            .map(|i| f(&shape.coords(i)[..shape.dim()]))
            .collect();
        Self::new(shape, values, 0)
    }

    /// Skips validation; the caller guarantees length and finiteness.
    pub(crate) fn from_parts(shape: GridShape, values: Vec<f64>, tau: u64) -> Self {
        debug_assert_eq!(values.len(), shape.sites());
        GridField { shape, values, tau }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    pub fn with_tau(mut self, tau: u64) -> Self {
        self.tau = tau;
        self
    }

    pub fn get(&self, site: &[usize]) -> f64 {
        self.values[self.shape.index(site)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Value at `(site + offset) mod N` per axis.
pub fn shift_sample(field: &GridField, site: &[usize], offset: &[i64]) -> Result<f64> {
    let shape = field.shape();
    shape.check_site(site)?;
    if offset.len() != shape.dim() {
        return Err(Error::domain("offset dimension does not match the lattice"));
    }
    let n = shape.extent() as i64;
    if offset.iter().any(|o| o.abs() >= n) {
        return Err(Error::domain("offset components must be smaller than N in magnitude"));
    }
    let mut idx = shape.index(site);
    for (a, &o) in offset.iter().enumerate() {
        idx = shape.neighbor(idx, a, o);
    }
    Ok(field.values[idx])
}

/// Time-ordered frames of one run, stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    shape: GridShape,
    band: Option<FilterBand>,
    data: Vec<f64>,
    frames: usize,
}

impl History {
    pub fn new(shape: GridShape, band: Option<FilterBand>) -> Self {
        History {
            shape,
            band,
            data: Vec::new(),
            frames: 0,
        }
    }

    pub fn with_capacity(shape: GridShape, band: Option<FilterBand>, frames: usize) -> Self {
        History {
            shape,
            band,
            data: Vec::with_capacity(frames * shape.sites()),
            frames: 0,
        }
    }

    /// Builds a history from `frames` consecutive frames of raw data.
    pub fn from_data(
        shape: GridShape,
        band: Option<FilterBand>,
        data: Vec<f64>,
        frames: usize,
    ) -> Result<Self> {
        if data.len() != frames * shape.sites() {
            return Err(Error::domain(format!(
                "expected {} values for {frames} frames, got {}",
                frames * shape.sites(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("history contains non-finite values"));
        }
        Ok(History {
            shape,
            band,
            data,
            frames,
        })
    }

    /// Appends a frame; its tau must equal the current length.
    pub fn push(&mut self, field: &GridField) -> Result<()> {
        if field.shape() != self.shape {
            return Err(Error::config("frame shape does not match the history"));
        }
        if field.tau() != self.frames as u64 {
            return Err(Error::config(format!(
                "frame tau {} does not follow frame {}",
                field.tau(),
                self.frames
            )));
        }
        self.data.extend_from_slice(field.values());
        self.frames += 1;
        Ok(())
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn band(&self) -> Option<FilterBand> {
        self.band
    }

    pub fn len(&self) -> usize {
        self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.frames == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        let s = self.shape.sites();
        &self.data[k * s..(k + 1) * s]
    }

    pub fn field(&self, k: usize) -> GridField {
        GridField::from_parts(self.shape, self.frame(k).to_vec(), k as u64)
    }

    /// Largest |S| in each frame.
    pub fn growth(&self) -> Vec<f64> {
        (0..self.frames)
            .map(|k| self.frame(k).iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect()
    }
}

/// Sign of the trigonometric weight at coordinate `x` for the Central band:
/// `cos(πx/2)` at even x, `sin(πx/2)` at odd x.
pub fn central_sign_1d(x: usize) -> f64 {
    if x % 4 < 2 {
        1.0
    } else {
        -1.0
    }
}

/// Product of [`central_sign_1d`] over all coordinates of a site.
pub fn central_sign(coords: &[usize]) -> f64 {
    coords.iter().map(|&x| central_sign_1d(x)).product()
}

/// Name of the virtual function holding parity class `mask`.
pub fn virtual_name(dim: usize, mask: usize) -> String {
    const D1: [&str; 2] = ["p", "q"];
    const D2: [&str; 4] = ["p", "r", "s", "q"];
    const D3: [&str; 8] = ["p0", "q1", "q2", "p3", "q3", "p2", "p1", "q0"];
    match dim {
        1 => D1[mask].to_string(),
        2 => D2[mask].to_string(),
        3 => D3[mask].to_string(),
        _ => format!("v{mask}"),
    }
}

/// The 2^d parity sub-grids of a field.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualSet {
    shape: GridShape,
    band: FilterBand,
    functions: Vec<Vec<f64>>,
}

impl VirtualSet {
    pub fn new(shape: GridShape, band: FilterBand, functions: Vec<Vec<f64>>) -> Result<Self> {
        let sub = shape.half_extent().pow(shape.dim() as u32);
        if functions.len() != shape.parity_classes() || functions.iter().any(|f| f.len() != sub) {
            return Err(Error::domain(format!(
                "expected {} functions of {sub} values",
                shape.parity_classes()
            )));
        }
        Ok(VirtualSet {
            shape,
            band,
            functions,
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn band(&self) -> FilterBand {
        self.band
    }

    pub fn function(&self, mask: usize) -> &[f64] {
        &self.functions[mask]
    }

    pub fn functions(&self) -> &[Vec<f64>] {
        &self.functions
    }

    pub fn name(&self, mask: usize) -> String {
        virtual_name(self.shape.dim(), mask)
    }

    /// Mask of the function called `name`, if any.
    pub fn mask_of(&self, name: &str) -> Option<usize> {
        (0..self.shape.parity_classes()).find(|&m| self.name(m) == name)
    }

    /// Sign by which the field value at `site` was divided (always +1 for
    /// ZeroMax).
    pub fn weight_sign(&self, site: &[usize]) -> f64 {
        match self.band {
            FilterBand::ZeroMax => 1.0,
            FilterBand::Central => central_sign(site),
        }
    }

    /// Sub-grid index of full-grid `site`.
    pub fn subsite_index(&self, site: &[usize]) -> usize {
        let h = self.shape.half_extent();
        site.iter().rev().fold(0, |acc, &c| acc * h + (c % self.shape.extent()) / 2)
    }
}

/// Splits a field into its parity sub-grids.
pub fn decompose(field: &GridField, band: FilterBand) -> VirtualSet {
    let shape = field.shape();
    let sub = shape.half_extent().pow(shape.dim() as u32);
    let mut functions = vec![vec![0.0; sub]; shape.parity_classes()];
    let h = shape.half_extent();
    for (i, &v) in field.values().iter().enumerate() {
        let c = shape.coords(i);
        let c = &c[..shape.dim()];
        let mut mask = 0;
        let mut j = 0;
        for a in (0..shape.dim()).rev() {
            mask |= (c[a] & 1) << a;
            j = j * h + c[a] / 2;
        }
        let sign = match band {
            FilterBand::ZeroMax => 1.0,
            FilterBand::Central => central_sign(c),
        };
        functions[mask][j] = v * sign;
    }
    VirtualSet {
        shape,
        band,
        functions,
    }
}

/// Inverse of [`decompose`].
pub fn recompose(vs: &VirtualSet) -> GridField {
    let shape = vs.shape;
    let h = shape.half_extent();
    let values = (0..shape.sites())
        .map(|i| {
            let c = shape.coords(i);
            let c = &c[..shape.dim()];
            let mut mask = 0;
            let mut j = 0;
            for a in (0..shape.dim()).rev() {
                mask |= (c[a] & 1) << a;
                j = j * h + c[a] / 2;
            }
            vs.functions[mask][j] * vs.weight_sign(c)
        })
        .collect();
    GridField::from_parts(shape, values, 0)
}
