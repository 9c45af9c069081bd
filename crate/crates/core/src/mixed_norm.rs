//! `ℓ_p` norms, the order-2 mixed norm and the recursive order-k mixed norm.
//!
//! `‖x‖_{p,q}` takes the `q`-norm along each row of an `m × n` matrix and
//! then the `p`-norm of the `m` row norms. Exponents below 1 give quasinorms
//! and are accepted.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::Exponent;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[inline]
pub(crate) fn pow_exp(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v * v
    } else {
        v.powf(p)
    }
}

#[inline]
pub(crate) fn root_exp(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v.sqrt()
    } else {
        v.powf(1.0 / p)
    }
}

/// `ℓ_p` quasinorm of a nonempty iterator of values; callers check emptiness.
pub(crate) fn lp_norm_iter<I>(values: I, p: Exponent) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let max = values.clone().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let p = match p {
        Exponent::Infinity => return max,
        Exponent::Finite(p) => p,
    };
    if max == 0.0 || !max.is_finite() {
        return max;
    }
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(pow_exp(v.abs() / max, p));
    }
    max * root_exp(acc.value(), p)
}

/// `‖x‖_p`; the maximum of `|x_i|` for `p = ∞`.
pub fn lp_norm(x: &[f64], p: Exponent) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::DimensionMismatch("lp_norm of an empty vector".into()));
    }
    Ok(lp_norm_iter(x.iter().copied(), p))
}

/// A dense row-major real matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!("empty {rows}x{cols} matrix")));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Matrix { rows: self.cols, cols: self.rows, data }
    }
}

/// Mixed norm of a row-major `rows × cols` slice; no shape validation.
pub(crate) fn mixed_norm_slice(data: &[f64], cols: usize, p: Exponent, q: Exponent) -> f64 {
    let rows = data.len() / cols;
    let row_norm = |row: &[f64]| lp_norm_iter(row.iter().copied(), q);
    if rows <= 32 {
        let mut buf = [0.0; 32];
        for (b, row) in buf.iter_mut().zip(data.chunks_exact(cols)) {
            *b = row_norm(row);
        }
        lp_norm_iter(buf[..rows].iter().copied(), p)
    } else {
        let norms: Vec<f64> = data.chunks_exact(cols).map(row_norm).collect();
        lp_norm_iter(norms.iter().copied(), p)
    }
}

/// `‖x‖_{p,q} = ‖(‖x_{i,·}‖_q)_{i ≤ m}‖_p`.
pub fn mixed_norm(x: &Matrix, p: Exponent, q: Exponent) -> f64 {
    mixed_norm_slice(&x.data, x.cols, p, q)
}

/// A dense real tensor in row-major layout (last index fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::DimensionMismatch(format!("invalid tensor dims {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for tensor dims {dims:?}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Tensor {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(|v| v * c).collect() }
    }
}

/// One level of an order-k mixed norm: an exponent and the dimension it runs over.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormLevel {
    pub exponent: Exponent,
    pub dim: usize,
}

/// Exponents and dimensions of an order-k mixed norm, innermost level first.
///
/// The order-2 norm `‖·‖_{p,q}` on `m × n` matrices is the spec
/// `[(q, n), (p, m)]` acting on the transposed `n × m` tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    levels: Vec<NormLevel>,
}

impl MixedNormSpec {
    pub fn new(levels: Vec<NormLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::DimensionMismatch("mixed norm spec needs at least one level".into()));
        }
        if let Some(l) = levels.iter().find(|l| l.dim == 0) {
            return Err(Error::DimensionMismatch(format!("level dimension must be >= 1, got {}", l.dim)));
        }
        Ok(MixedNormSpec { levels })
    }

    pub fn from_pairs(pairs: &[(Exponent, usize)]) -> Result<Self> {
        MixedNormSpec::new(pairs.iter().map(|&(exponent, dim)| NormLevel { exponent, dim }).collect())
    }

    /// The order-2 spec corresponding to `‖·‖_{p,q}` on `m × n` matrices.
    pub fn order_two(m: usize, n: usize, p: Exponent, q: Exponent) -> Result<Self> {
        MixedNormSpec::from_pairs(&[(q, n), (p, m)])
    }

    pub fn levels(&self) -> &[NormLevel] {
        &self.levels
    }

    pub fn order(&self) -> usize {
        self.levels.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.levels.iter().map(|l| l.dim).product()
    }
}

impl fmt::Display for MixedNormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.levels.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", l.exponent, l.dim)?;
        }
        Ok(())
    }
}

/// Parses `"p1:n1,p2:n2,…"`, innermost level first.
impl FromStr for MixedNormSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut levels = Vec::new();
        for part in s.split(',') {
            let (exp, dim) = part
                .split_once(':')
                .ok_or_else(|| Error::Domain(format!("spec level {part:?} is not exponent:dim")))?;
            let dim: usize = dim
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("bad dimension in spec level {part:?}")))?;
            levels.push(NormLevel { exponent: exp.parse()?, dim });
        }
        MixedNormSpec::new(levels)
    }
}

/// Recursive order-k mixed norm, innermost level first.
///
/// Level `j` reduces the leading tensor axis; after each reduction the
/// remaining values again form a row-major tensor over the outer axes.
pub fn mixed_norm_k(x: &Tensor, spec: &MixedNormSpec) -> Result<f64> {
    if x.dims != spec.dims() {
        return Err(Error::DimensionMismatch(format!(
            "tensor dims {:?} do not match spec dims {:?}",
            x.dims,
            spec.dims()
        )));
    }
    let mut current = x.data.clone();
    for level in &spec.levels {
        let stride = current.len() / level.dim;
        let reduced = (0..stride)
            .map(|r| lp_norm_iter((0..level.dim).map(|i| current[i * stride + r]), level.exponent))
            .collect();
        current = reduced;
    }
    debug_assert_eq!(current.len(), 1);
    Ok(current[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    const INF: Exponent = Exponent::Infinity;

    #[test]
    fn lp_norm_examples() {
        assert_eq!(lp_norm(&[3.0, 4.0], e(2.0)).unwrap(), 5.0);
        assert_eq!(lp_norm(&[1.0, -2.0, 3.0], INF).unwrap(), 3.0);
        assert!((lp_norm(&[1.0; 4], e(0.5)).unwrap() - 16.0).abs() < 1e-12);
        assert_eq!(lp_norm(&[0.0, 0.0], e(1.5)).unwrap(), 0.0);
        assert!(lp_norm(&[], e(2.0)).is_err());
    }

    #[test]
    fn lp_norm_survives_extreme_magnitudes() {
        let big = lp_norm(&[1e300, 1e300], e(2.0)).unwrap();
        assert!((big / (1e300 * 2f64.sqrt()) - 1.0).abs() < 1e-15);
        let tiny = lp_norm(&[1e-300, 1e-300], e(3.0)).unwrap();
        assert!((tiny / (1e-300 * 2f64.powf(1.0 / 3.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_norm_examples() {
        let x = Matrix::from_rows(&[vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap();
        assert!((mixed_norm(&x, e(1.0), e(2.0)) - 5.0).abs() < 1e-15);

        let row = Matrix::new(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        assert_eq!(mixed_norm(&row, e(0.7), e(3.0)), lp_norm(row.data(), e(3.0)).unwrap());

        let x = Matrix::new(2, 3, vec![0.3, -1.2, 2.0, 0.1, 0.0, -0.7]).unwrap();
        let flat = lp_norm(x.data(), e(1.5)).unwrap();
        assert!((mixed_norm(&x, e(1.5), e(1.5)) - flat).abs() < 1e-14 * flat);
    }

    #[test]
    fn matrix_shape_validation() {
        assert!(Matrix::new(0, 3, vec![]).is_err());
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn order_k_base_and_order_two() {
        let t = Tensor::new(vec![4], vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let spec = MixedNormSpec::from_pairs(&[(e(1.3), 4)]).unwrap();
        assert_eq!(mixed_norm_k(&t, &spec).unwrap(), lp_norm(t.data(), e(1.3)).unwrap());

        let x = Matrix::new(3, 4, (0..12).map(|i| ((i * 7) % 5) as f64 - 1.7).collect()).unwrap();
        let xt = x.transpose();
        let tensor = Tensor::new(vec![4, 3], xt.into_data()).unwrap();
        for (p, q) in [(e(1.0), e(2.0)), (INF, e(0.5)), (e(3.0), INF)] {
            let spec = MixedNormSpec::order_two(3, 4, p, q).unwrap();
            let a = mixed_norm_k(&tensor, &spec).unwrap();
            let b = mixed_norm(&x, p, q);
            assert!((a - b).abs() <= 1e-14 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn order_k_dimension_mismatch() {
        let t = Tensor::new(vec![2, 3], vec![1.0; 6]).unwrap();
        let spec = MixedNormSpec::from_pairs(&[(e(2.0), 3), (e(1.0), 2)]).unwrap();
        assert!(mixed_norm_k(&t, &spec).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(MixedNormSpec::new(vec![]).is_err());
    }

    #[test]
    fn spec_parsing() {
        let spec: MixedNormSpec = "2:2, inf:3,0.5:4".parse().unwrap();
        assert_eq!(spec.dims(), vec![2, 3, 4]);
        assert_eq!(spec.levels()[1].exponent, INF);
        assert_eq!(spec.to_string(), "2:2,inf:3,0.5:4");
        assert!("2:0".parse::<MixedNormSpec>().is_err());
        assert!("2".parse::<MixedNormSpec>().is_err());
        assert!("0:3".parse::<MixedNormSpec>().is_err());
    }

    fn exponent_strategy() -> impl Strategy<Value = Exponent> {
        prop_oneof![
            (0.2f64..8.0).prop_map(Exponent::Finite),
            Just(Exponent::Infinity),
        ]
    }

    proptest! {
        #[test]
        fn norm_decreases_in_exponent(
            x in prop::collection::vec(-10.0f64..10.0, 1..12),
            a in 0.2f64..8.0,
            b in 0.2f64..8.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let small = lp_norm(&x, e(lo)).unwrap();
            let large = lp_norm(&x, e(hi)).unwrap();
            let inf = lp_norm(&x, INF).unwrap();
            prop_assert!(small >= large * (1.0 - 1e-12));
            prop_assert!(large >= inf * (1.0 - 1e-12));
        }

        #[test]
        fn max_entry_bounds_mixed_norm(
            (m, n, data) in (1usize..5, 1usize..5).prop_flat_map(|(m, n)| {
                (Just(m), Just(n), prop::collection::vec(-3.0f64..3.0, m * n))
            }),
            p in exponent_strategy(),
            q in exponent_strategy(),
        ) {
            let x = Matrix::new(m, n, data).unwrap();
            let max = x.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            prop_assert!(max <= mixed_norm(&x, p, q) * (1.0 + 1e-12));
        }

        #[test]
        fn mixed_norm_is_homogeneous_and_permutation_invariant(
            (m, n, data) in (1usize..5, 1usize..6).prop_flat_map(|(m, n)| {
                (Just(m), Just(n), prop::collection::vec(-3.0f64..3.0, m * n))
            }),
            c in -5.0f64..5.0,
            p in exponent_strategy(),
            q in exponent_strategy(),
            shift in 0usize..7,
        ) {
            let x = Matrix::new(m, n, data).unwrap();
            let base = mixed_norm(&x, p, q);
            let scaled = mixed_norm(&x.scaled(c), p, q);
            prop_assert!((scaled - c.abs() * base).abs() <= 1e-14 * c.abs() * base + 1e-300);

            // rotate the rows, and rotate the entries inside each row
            let rows: Vec<Vec<f64>> = (0..m).map(|i| {
                let mut r = x.row((i + shift) % m).to_vec();
                r.rotate_left(shift % n);
                r
            }).collect();
            let permuted = mixed_norm(&Matrix::from_rows(&rows).unwrap(), p, q);
            prop_assert!((permuted - base).abs() <= 1e-14 * base);
        }

        #[test]
        fn order_k_scaling_and_flat_reduction(
            (dims, data) in prop::collection::vec(1usize..4, 1..5).prop_flat_map(|dims| {
                let len: usize = dims.iter().product();
                (Just(dims), prop::collection::vec(-2.0f64..2.0, len))
            }),
            exps in prop::collection::vec(exponent_strategy(), 4),
            common in exponent_strategy(),
            c in -4.0f64..4.0,
        ) {
            let t = Tensor::new(dims.clone(), data).unwrap();
            let spec = MixedNormSpec::from_pairs(
                &dims.iter().zip(&exps).map(|(&d, &p)| (p, d)).collect::<Vec<_>>()
            ).unwrap();
            let base = mixed_norm_k(&t, &spec).unwrap();
            let scaled = mixed_norm_k(&t.scaled(c), &spec).unwrap();
            prop_assert!((scaled - c.abs() * base).abs() <= 1e-14 * c.abs() * base + 1e-300);

            let uniform = MixedNormSpec::from_pairs(
                &dims.iter().map(|&d| (common, d)).collect::<Vec<_>>()
            ).unwrap();
            let flat = lp_norm(t.data(), common).unwrap();
            let nested = mixed_norm_k(&t, &uniform).unwrap();
            prop_assert!((nested - flat).abs() <= 1e-13 * flat);
        }
    }
}
