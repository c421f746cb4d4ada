//! Truncated orthogonal basis expansions and their prior precision.
//!
//! A [`BasisSpec`] describes one family (Fourier, linear or constant) over a
//! fixed number of input coordinates. Several specs can be stacked into a
//! [`BasisSet`], each block reading its own selection of coordinates; the
//! set's features are the concatenation of the block features. A plain
//! single-block set is the common case.
//!
//! The one-dimensional Fourier family with `m` functions on `[-L, L]` is
//! ordered as
//!
//! ```text
//! [1, cos(πx/L), sin(πx/L), cos(2πx/L), sin(2πx/L), ...]   (m entries)
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of coordinates a Fourier block may read.
pub const MAX_FOURIER_DIMS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Fourier,
    Linear,
    Constant,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    #[default]
    TensorProduct,
    Additive,
}

/// One basis family over `dims` input coordinates.
///
/// For Fourier kind `m` is the per-dimension count; the total feature count
/// is `m^dims` for tensor products and `m * dims` for additive composition.
/// Additive composition repeats the constant function once per dimension,
/// so its Gram matrix is singular unless a prior is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub m: usize,
    /// Domain half-width `L`; only meaningful for Fourier kind.
    #[serde(default)]
    pub half_width: f64,
    pub dims: usize,
    #[serde(default)]
    pub composition: Composition,
}

impl BasisSpec {
    pub fn fourier(m: usize, half_width: f64) -> Self {
        Self::fourier_nd(m, half_width, 1, Composition::TensorProduct)
    }

    pub fn fourier_nd(m: usize, half_width: f64, dims: usize, composition: Composition) -> Self {
        BasisSpec {
            kind: BasisKind::Fourier,
            m,
            half_width,
            dims,
            composition,
        }
    }

    pub fn linear(dims: usize) -> Self {
        BasisSpec {
            kind: BasisKind::Linear,
            m: dims,
            half_width: 0.0,
            dims,
            composition: Composition::Additive,
        }
    }

    pub fn constant() -> Self {
        BasisSpec {
            kind: BasisKind::Constant,
            m: 1,
            half_width: 0.0,
            dims: 1,
            composition: Composition::Additive,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("basis count m must be at least 1".into()));
        }
        if self.dims == 0 {
            return Err(Error::InvalidArgument("basis input dimension must be at least 1".into()));
        }
        match self.kind {
            BasisKind::Fourier => {
                if !(self.half_width.is_finite() && self.half_width > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "Fourier half-width L must be positive and finite, got {}",
                        self.half_width
                    )));
                }
                if self.dims > MAX_FOURIER_DIMS {
                    return Err(Error::InvalidArgument(format!(
                        "Fourier basis supports at most {MAX_FOURIER_DIMS} input dimensions"
                    )));
                }
            }
            BasisKind::Linear => {
                if self.m != self.dims {
                    return Err(Error::InvalidArgument(format!(
                        "linear basis requires m = dims, got m = {} and dims = {}",
                        self.m, self.dims
                    )));
                }
            }
            BasisKind::Constant => {
                if self.m != 1 {
                    return Err(Error::InvalidArgument("constant basis requires m = 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        match self.kind {
            BasisKind::Fourier => match self.composition {
                _ if self.dims == 1 => self.m,
                Composition::TensorProduct => self.m.pow(self.dims as u32),
                Composition::Additive => self.m * self.dims,
            },
            BasisKind::Linear => self.dims,
            BasisKind::Constant => 1,
        }
    }

    /// Evaluates `φ(x)`.
    pub fn eval_features(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.validate()?;
        if x.len() != self.dims {
            return Err(Error::Dimension {
                what: "basis input",
                expected: self.dims,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("basis input must be finite".into()));
        }
        let mut out = DVector::zeros(self.feature_count());
        self.eval_into(x, out.as_mut_slice());
        Ok(out)
    }

    /// Unchecked evaluation into a preallocated slice of length `feature_count()`.
    pub(crate) fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self.kind {
            BasisKind::Constant => out[0] = 1.0,
            BasisKind::Linear => out.copy_from_slice(x),
            BasisKind::Fourier => {
                if self.dims == 1 {
                    fourier_1d(x[0], self.m, self.half_width, out);
                    return;
                }
                let m = self.m;
                let mut per_dim = [0.0; 64];
                let mut heap: Vec<f64>;
                let table: &mut [f64] = if m * self.dims <= per_dim.len() {
                    &mut per_dim[..m * self.dims]
                } else {
                    heap = vec![0.0; m * self.dims];
                    &mut heap
                };
                for (d, &xd) in x.iter().enumerate() {
                    fourier_1d(xd, m, self.half_width, &mut table[d * m..(d + 1) * m]);
                }
                match self.composition {
                    Composition::Additive => out.copy_from_slice(table),
                    Composition::TensorProduct => {
                        let mut idx = [0usize; MAX_FOURIER_DIMS];
                        for slot in out.iter_mut() {
                            let mut v = 1.0;
                            for d in 0..self.dims {
                                v *= table[d * m + idx[d]];
                            }
                            *slot = v;
                            advance(&mut idx[..self.dims], m);
                        }
                    }
                }
            }
        }
    }

    /// Frequency order of every feature, as used by the frequency-squared prior.
    ///
    /// The constant term and first-order (linear) features have order 1.
    /// Tensor-product features take the Euclidean norm of their
    /// per-dimension frequencies, rounded up.
    pub fn frequency_orders(&self) -> Vec<u32> {
        match self.kind {
            BasisKind::Constant => vec![1],
            BasisKind::Linear => vec![1; self.dims],
            BasisKind::Fourier => {
                let freq = |j: usize| (j as u32 + 1) / 2;
                if self.dims == 1 || self.composition == Composition::Additive {
                    (0..self.feature_count())
                        .map(|f| freq(f % self.m).max(1))
                        .collect()
                } else {
                    let mut idx = [0usize; MAX_FOURIER_DIMS];
                    (0..self.feature_count())
                        .map(|_| {
                            let sq: u32 = idx[..self.dims].iter().map(|&j| freq(j).pow(2)).sum();
                            advance(&mut idx[..self.dims], self.m);
                            ceil_sqrt(sq).max(1)
                        })
                        .collect()
                }
            }
        }
    }
}

fn advance(idx: &mut [usize], m: usize) {
    for d in (0..idx.len()).rev() {
        idx[d] += 1;
        if idx[d] < m {
            return;
        }
        idx[d] = 0;
    }
}

fn ceil_sqrt(v: u32) -> u32 {
    let mut r = (v as f64).sqrt() as u32;
    while r * r < v {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= v {
        r -= 1;
    }
    r
}

/// `[1, cos(πx/L), sin(πx/L), cos(2πx/L), ...]` by the angle-addition recurrence.
fn fourier_1d(x: f64, m: usize, half_width: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if m == 1 {
        return;
    }
    let (s1, c1) = (PI * x / half_width).sin_cos();
    let (mut c, mut s) = (c1, s1);
    let mut j = 1;
    loop {
        out[j] = c;
        j += 1;
        if j == m {
            return;
        }
        out[j] = s;
        j += 1;
        if j == m {
            return;
        }
        let next_c = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = next_c;
    }
}

/// Clips every coordinate of `x` to `[-L, L]`. Non-Fourier kinds have an
/// unbounded domain and return `x` unchanged.
pub fn clamp_to_domain(spec: &BasisSpec, x: &[f64]) -> Vec<f64> {
    match spec.kind {
        BasisKind::Fourier => x
            .iter()
            .map(|v| v.clamp(-spec.half_width, spec.half_width))
            .collect(),
        _ => x.to_vec(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorScheme {
    #[default]
    None,
    Flat,
    FrequencySquared,
}

/// Gaussian prior on the basis weights, described by its precision.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub scheme: PriorScheme,
    #[serde(default)]
    pub lambda: f64,
}

impl PriorSpec {
    pub fn none() -> Self {
        PriorSpec::default()
    }

    pub fn flat(lambda: f64) -> Self {
        PriorSpec {
            scheme: PriorScheme::Flat,
            lambda,
        }
    }

    /// Precision `λ·k²` for a feature of frequency order `k`, i.e. a prior
    /// standard deviation inversely proportional to the order.
    pub fn frequency_squared(lambda: f64) -> Self {
        PriorSpec {
            scheme: PriorScheme::FrequencySquared,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior precision lambda must be nonnegative and finite, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    fn entry(&self, order: u32) -> f64 {
        match self.scheme {
            PriorScheme::None => 0.0,
            PriorScheme::Flat => self.lambda,
            PriorScheme::FrequencySquared => self.lambda * f64::from(order).powi(2),
        }
    }
}

/// Diagonal prior precision matrix `P`, stored as its diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalPrecision(pub DVector<f64>);

impl DiagonalPrecision {
    pub fn zeros(n: usize) -> Self {
        DiagonalPrecision(DVector::zeros(n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn diagonal(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.0)
    }

    pub fn concat(&self, other: &DiagonalPrecision) -> DiagonalPrecision {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend(self.0.iter());
        v.extend(other.0.iter());
        DiagonalPrecision(DVector::from_vec(v))
    }
}

pub fn build_precision(spec: &BasisSpec, prior: &PriorSpec) -> Result<DiagonalPrecision> {
    prior.validate()?;
    spec.validate()?;
    let entries: Vec<f64> = spec
        .frequency_orders()
        .into_iter()
        .map(|k| prior.entry(k))
        .collect();
    Ok(DiagonalPrecision(DVector::from_vec(entries)))
}

/// A [`BasisSpec`] applied to a selection of input coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisBlock {
    #[serde(flatten)]
    pub spec: BasisSpec,
    /// 0-based coordinates read by this block; `None` reads `0..dims`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<usize>>,
}

impl BasisBlock {
    fn coordinate(&self, d: usize) -> usize {
        self.inputs.as_ref().map_or(d, |sel| sel[d])
    }
}

/// Concatenation of basis blocks over one input vector.
///
/// An empty set has no features; it represents an absent input.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasisSet {
    pub blocks: Vec<BasisBlock>,
}

impl From<BasisSpec> for BasisSet {
    fn from(spec: BasisSpec) -> Self {
        BasisSet {
            blocks: vec![BasisBlock { spec, inputs: None }],
        }
    }
}

impl BasisSet {
    pub fn empty() -> Self {
        BasisSet::default()
    }

    pub fn new(blocks: Vec<BasisBlock>) -> Self {
        BasisSet { blocks }
    }

    /// Appends a block reading the given coordinates.
    pub fn with_block(mut self, spec: BasisSpec, inputs: Option<Vec<usize>>) -> Self {
        self.blocks.push(BasisBlock { spec, inputs });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.blocks.iter().map(|b| b.spec.feature_count()).sum()
    }

    /// Checks every block against an input vector of length `input_dim`.
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        for block in &self.blocks {
            block.spec.validate()?;
            match &block.inputs {
                None => {
                    if block.spec.dims != input_dim {
                        return Err(Error::Dimension {
                            what: "basis block input",
                            expected: input_dim,
                            got: block.spec.dims,
                        });
                    }
                }
                Some(sel) => {
                    if sel.len() != block.spec.dims {
                        return Err(Error::Dimension {
                            what: "basis block coordinate selection",
                            expected: block.spec.dims,
                            got: sel.len(),
                        });
                    }
                    if let Some(&bad) = sel.iter().find(|&&c| c >= input_dim) {
                        return Err(Error::InvalidArgument(format!(
                            "basis block reads coordinate {bad} of a {input_dim}-dimensional input"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Unchecked evaluation; Fourier blocks clamp their inputs to `[-L, L]`.
    pub(crate) fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let mut offset = 0;
        for block in &self.blocks {
            let n = block.spec.feature_count();
            let dst = &mut out[offset..offset + n];
            match block.spec.kind {
                BasisKind::Constant => dst[0] = 1.0,
                BasisKind::Linear => {
                    for (d, slot) in dst.iter_mut().enumerate() {
                        *slot = x[block.coordinate(d)];
                    }
                }
                BasisKind::Fourier => {
                    let l = block.spec.half_width;
                    let mut buf = [0.0; MAX_FOURIER_DIMS];
                    for (d, slot) in buf[..block.spec.dims].iter_mut().enumerate() {
                        *slot = x[block.coordinate(d)].clamp(-l, l);
                    }
                    block.spec.eval_into(&buf[..block.spec.dims], dst);
                }
            }
            offset += n;
        }
    }

    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.feature_count());
        self.eval_into(x, out.as_mut_slice());
        out
    }

    pub fn precision(&self, prior: &PriorSpec) -> Result<DiagonalPrecision> {
        let mut p = DiagonalPrecision::zeros(0);
        for block in &self.blocks {
            p = p.concat(&build_precision(&block.spec, prior)?);
        }
        Ok(p)
    }

    /// True when `x[coordinate]` lies inside every Fourier domain reading it.
    pub fn in_domain(&self, coordinate: usize, value: f64) -> bool {
        self.blocks.iter().all(|b| {
            b.spec.kind != BasisKind::Fourier
                || (0..b.spec.dims).all(|d| {
                    b.coordinate(d) != coordinate || value.abs() <= b.spec.half_width
                })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn trapezoid_gram(spec: &BasisSpec, nodes: usize) -> DMatrix<f64> {
        let l = spec.half_width;
        let m = spec.feature_count();
        let h = 2.0 * l / (nodes - 1) as f64;
        let mut gram = DMatrix::zeros(m, m);
        for n in 0..nodes {
            let x = -l + n as f64 * h;
            // independent of the recurrence: direct trig evaluation
            let phi: Vec<f64> = (0..m)
                .map(|j| {
                    let k = ((j + 1) / 2) as f64;
                    if j == 0 {
                        1.0
                    } else if j % 2 == 1 {
                        (k * PI * x / l).cos()
                    } else {
                        (k * PI * x / l).sin()
                    }
                })
                .collect();
            let w = if n == 0 || n == nodes - 1 { 0.5 * h } else { h };
            for i in 0..m {
                for j in 0..m {
                    gram[(i, j)] += w * phi[i] * phi[j];
                }
            }
        }
        gram
    }

    #[test]
    fn fourier_at_origin() {
        let phi = BasisSpec::fourier(3, 2.0).eval_features(&[0.0]).unwrap();
        assert_eq!(phi.as_slice(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn linear_is_identity() {
        let phi = BasisSpec::linear(1).eval_features(&[3.2]).unwrap();
        assert_eq!(phi.as_slice(), &[3.2]);
        let phi = BasisSpec::constant().eval_features(&[-7.0]).unwrap();
        assert_eq!(phi.as_slice(), &[1.0]);
    }

    #[test]
    fn fourier_recurrence_matches_direct_trig() {
        let spec = BasisSpec::fourier(101, 1.7);
        for &x in &[-1.7, -0.3, 0.0, 0.91, 1.7] {
            let phi = spec.eval_features(&[x]).unwrap();
            for j in 1..101 {
                let k = ((j + 1) / 2) as f64;
                let direct = if j % 2 == 1 {
                    (k * PI * x / 1.7).cos()
                } else {
                    (k * PI * x / 1.7).sin()
                };
                assert_abs_diff_eq!(phi[j], direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn fourier_orthogonal_under_quadrature() {
        let spec = BasisSpec::fourier(5, 2.0);
        let gram = trapezoid_gram(&spec, 100_000);
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert!(gram[(i, j)].abs() < 1e-8, "G[{i},{j}] = {}", gram[(i, j)]);
                }
            }
        }
        // diagonal: 2L for the constant, L for the rest
        assert_abs_diff_eq!(gram[(0, 0)], 4.0, epsilon = 1e-6);
        assert_abs_diff_eq!(gram[(3, 3)], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn errors() {
        let spec = BasisSpec::fourier(3, 2.0);
        assert!(matches!(
            spec.eval_features(&[f64::NAN]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            spec.eval_features(&[0.0, 1.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(BasisSpec::fourier(0, 2.0).validate().is_err());
        assert!(BasisSpec::fourier(3, 0.0).validate().is_err());
        let mut lin = BasisSpec::linear(2);
        lin.m = 3;
        assert!(lin.validate().is_err());
    }

    #[test]
    fn clamp() {
        let spec = BasisSpec::fourier(3, 2.0);
        assert_eq!(clamp_to_domain(&spec, &[2.5]), vec![2.0]);
        assert_eq!(clamp_to_domain(&spec, &[-3.0]), vec![-2.0]);
        assert_eq!(clamp_to_domain(&spec, &[1.1]), vec![1.1]);
    }

    #[test]
    fn tensor_product_at_origin() {
        let spec = BasisSpec::fourier_nd(3, 2.0, 2, Composition::TensorProduct);
        let phi = spec.eval_features(&[0.0, 0.0]).unwrap();
        // per-dimension [1, cos, sin]; any sine factor vanishes at the origin
        let expected: Vec<f64> = (0..9)
            .map(|f| if f / 3 == 2 || f % 3 == 2 { 0.0 } else { 1.0 })
            .collect();
        assert_eq!(phi.as_slice(), expected.as_slice());
    }

    #[test]
    fn tensor_product_is_product_of_factors() {
        let spec = BasisSpec::fourier_nd(4, 1.5, 2, Composition::TensorProduct);
        let (a, b) = (0.3, -1.1);
        let fa = BasisSpec::fourier(4, 1.5).eval_features(&[a]).unwrap();
        let fb = BasisSpec::fourier(4, 1.5).eval_features(&[b]).unwrap();
        let phi = spec.eval_features(&[a, b]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(phi[i * 4 + j], fa[i] * fb[j], epsilon = 1e-15);
            }
        }
        let add = BasisSpec::fourier_nd(4, 1.5, 2, Composition::Additive);
        assert_eq!(add.feature_count(), 8);
        assert_eq!(add.eval_features(&[a, b]).unwrap().rows(4, 4), fb.rows(0, 4));
    }

    #[test]
    fn precision_schemes() {
        let spec = BasisSpec::fourier(5, 2.0);
        let none = build_precision(&spec, &PriorSpec::none()).unwrap();
        assert_eq!(none.to_matrix(), DMatrix::zeros(5, 5));
        let none = build_precision(
            &spec,
            &PriorSpec {
                scheme: PriorScheme::None,
                lambda: 3.0,
            },
        )
        .unwrap();
        assert!(none.diagonal().iter().all(|&v| v == 0.0));
        let flat = build_precision(&spec, &PriorSpec::flat(0.1)).unwrap();
        assert_eq!(flat.diagonal().as_slice(), &[0.1; 5]);
        let fsq = build_precision(&spec, &PriorSpec::frequency_squared(1.0)).unwrap();
        assert_eq!(fsq.diagonal().as_slice(), &[1.0, 1.0, 1.0, 4.0, 4.0]);
        assert!(build_precision(&spec, &PriorSpec::flat(-1.0)).is_err());
    }

    #[test]
    fn tensor_orders_use_rounded_up_norm() {
        let spec = BasisSpec::fourier_nd(3, 1.0, 2, Composition::TensorProduct);
        // per-dimension frequencies [0, 1, 1]
        assert_eq!(spec.frequency_orders(), vec![1, 1, 1, 1, 2, 2, 1, 2, 2]);
        assert_eq!(ceil_sqrt(5), 3);
        assert_eq!(ceil_sqrt(4), 2);
        assert_eq!(ceil_sqrt(0), 0);
    }

    #[test]
    fn basis_set_concatenates_and_selects() {
        let set = BasisSet::from(BasisSpec::fourier(3, 2.0))
            .with_block(BasisSpec::linear(1), Some(vec![0]));
        set.validate(1).unwrap();
        let z = set.eval(&[5.0]);
        // Fourier block sees the clamped value, linear block the raw one
        let clamped = BasisSpec::fourier(3, 2.0).eval_features(&[2.0]).unwrap();
        assert_eq!(z.rows(0, 3), clamped.rows(0, 3));
        assert_eq!(z[3], 5.0);

        let sel = BasisSet::empty().with_block(BasisSpec::fourier(2, 1.0), Some(vec![2]));
        sel.validate(3).unwrap();
        assert!(sel.validate(2).is_err());
        assert!(sel.in_domain(2, 0.5) && !sel.in_domain(2, 1.5) && sel.in_domain(0, 9.0));
    }

    proptest! {
        #[test]
        fn feature_count_and_bounds(m in 1usize..40, l in 0.1f64..10.0, x in -50.0f64..50.0) {
            let spec = BasisSpec::fourier(m, l);
            let phi = spec.eval_features(&clamp_to_domain(&spec, &[x])).unwrap();
            prop_assert_eq!(phi.len(), m);
            prop_assert!(phi.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }

        #[test]
        fn frequency_squared_is_monotone(m in 1usize..60, dims in 1usize..3, lambda in 0.0f64..5.0) {
            let spec = BasisSpec::fourier_nd(m.min(12), 1.0, dims, Composition::TensorProduct);
            let orders = spec.frequency_orders();
            let p = build_precision(&spec, &PriorSpec::frequency_squared(lambda)).unwrap();
            let mut pairs: Vec<(u32, f64)> = orders.into_iter().zip(p.diagonal().iter().copied()).collect();
            pairs.sort_by_key(|&(k, _)| k);
            prop_assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
            prop_assert!(pairs.iter().all(|&(_, v)| v >= 0.0));
        }
    }
}
