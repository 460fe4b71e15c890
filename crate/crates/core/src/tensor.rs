//! Dense complex tensors and the two primitives everything else is built
//! from: pairwise index contraction and SVD-based splitting.
//!
//! Data is stored row-major over the declared index order, so fusing a
//! contiguous group of indices is a metadata-only reshape. Contractions are
//! carried out by permuting the contracted indices to the matrix boundary and
//! delegating to a complex GEMM; splits go through LAPACK's singular value
//! decomposition.

use ndarray::prelude::*;
use ndarray_linalg::{JobSvd, SVDDC, SVD};
use num_complex::Complex64 as C64;

use crate::error::{TensorError, TensorResult};

/// Multi-index complex array. The shape is the ordered list of index extents;
/// every extent is at least one and the data length equals their product.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    data: ArrayD<C64>,
}

impl DenseTensor {
    /// Builds a tensor from a row-major value buffer.
    pub fn from_vec(shape: &[usize], data: Vec<C64>) -> TensorResult<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(TensorError::ShapeMismatch(
                "all extents must be at least 1".into(),
            ));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::ShapeMismatch(format!(
                "{} values for shape {:?} (expected {})",
                data.len(),
                shape,
                expected
            )));
        }
        let data = ArrayD::from_shape_vec(IxDyn(shape), data)
            .map_err(|e| TensorError::ShapeMismatch(e.to_string()))?;
        Ok(Self { data })
    }

    /// Wraps an existing array, normalizing it to standard (row-major) layout.
    pub fn from_array(arr: ArrayD<C64>) -> Self {
        let data = if arr.is_standard_layout() {
            arr
        } else {
            arr.as_standard_layout().into_owned()
        };
        Self { data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            data: ArrayD::zeros(IxDyn(shape)),
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        Self {
            data: ArrayD::from_shape_fn(IxDyn(shape), |idx| f(idx.slice())),
        }
    }

    /// Rank-0 tensor holding a single value.
    pub fn scalar(value: C64) -> Self {
        Self {
            data: ArrayD::from_elem(IxDyn(&[]), value),
        }
    }

    pub fn shape(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn rank(&self) -> usize {
        self.data.ndim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major value slice.
    pub fn values(&self) -> &[C64] {
        self.data.as_slice().expect("standard layout")
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        self.data.as_slice_mut().expect("standard layout")
    }

    pub fn array(&self) -> &ArrayD<C64> {
        &self.data
    }

    pub fn into_array(self) -> ArrayD<C64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        self.data[IxDyn(index)]
    }

    pub fn set(&mut self, index: &[usize], value: C64) {
        self.data[IxDyn(index)] = value;
    }

    /// Value of a rank-0 tensor.
    pub fn scalar_value(&self) -> TensorResult<C64> {
        if self.rank() != 0 {
            return Err(TensorError::ShapeMismatch(format!(
                "expected rank-0 tensor, got shape {:?}",
                self.shape()
            )));
        }
        Ok(self.data[IxDyn(&[])])
    }

    pub fn conj(&self) -> Self {
        Self {
            data: self.data.mapv(|v| v.conj()),
        }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            data: self.data.mapv(|v| v * factor),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Reorders indices; the result is materialized in row-major layout.
    pub fn permute(&self, perm: &[usize]) -> TensorResult<Self> {
        if perm.len() != self.rank() {
            return Err(TensorError::ShapeMismatch(format!(
                "permutation {:?} for rank-{} tensor",
                perm,
                self.rank()
            )));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() {
                return Err(TensorError::IndexOutOfRange {
                    index: p,
                    rank: self.rank(),
                });
            }
            if seen[p] {
                return Err(TensorError::DuplicateIndex(p));
            }
            seen[p] = true;
        }
        let view = self.data.view().permuted_axes(IxDyn(perm));
        Ok(Self {
            data: view.as_standard_layout().into_owned(),
        })
    }

    /// Reinterprets the index structure without moving data.
    pub fn reshape(&self, shape: &[usize]) -> TensorResult<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.len() {
            return Err(TensorError::ShapeMismatch(format!(
                "cannot reshape {:?} into {:?}",
                self.shape(),
                shape
            )));
        }
        let data = self
            .data
            .clone()
            .into_shape(IxDyn(shape))
            .map_err(|e| TensorError::ShapeMismatch(e.to_string()))?;
        Ok(Self { data })
    }

    /// Fuses indices `[0, split)` into rows and `[split, rank)` into columns.
    pub fn as_matrix(&self, split: usize) -> TensorResult<Array2<C64>> {
        if split > self.rank() {
            return Err(TensorError::IndexOutOfRange {
                index: split,
                rank: self.rank(),
            });
        }
        let rows: usize = self.shape()[..split].iter().product();
        let cols: usize = self.shape()[split..].iter().product();
        Ok(self
            .data
            .clone()
            .into_shape(IxDyn(&[rows, cols]))
            .map_err(|e| TensorError::ShapeMismatch(e.to_string()))?
            .into_dimensionality::<Ix2>()
            .map_err(|e| TensorError::ShapeMismatch(e.to_string()))?)
    }
}

impl std::ops::Add for &DenseTensor {
    type Output = DenseTensor;

    fn add(self, rhs: &DenseTensor) -> DenseTensor {
        assert_eq!(self.shape(), rhs.shape(), "tensor addition shape mismatch");
        DenseTensor {
            data: &self.data + &rhs.data,
        }
    }
}

/// Relative Schmidt-value truncation rule applied after each SVD: singular
/// values with `s / s_max < schmidt_cutoff` are dropped, and at most
/// `max_bond` values are kept when a cap is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub schmidt_cutoff: f64,
    pub max_bond: Option<usize>,
}

impl TruncationPolicy {
    pub fn new(schmidt_cutoff: f64, max_bond: Option<usize>) -> TensorResult<Self> {
        if !(0.0..1.0).contains(&schmidt_cutoff) {
            return Err(TensorError::InvalidPolicy(format!(
                "schmidt_cutoff {} outside [0, 1)",
                schmidt_cutoff
            )));
        }
        if let Some(b) = max_bond {
            if b == 0 {
                return Err(TensorError::InvalidPolicy("max_bond must be >= 1".into()));
            }
        }
        Ok(Self {
            schmidt_cutoff,
            max_bond,
        })
    }

    /// Keeps every nonzero singular value.
    pub fn exact() -> Self {
        Self {
            schmidt_cutoff: 0.0,
            max_bond: None,
        }
    }

    pub fn with_cutoff(schmidt_cutoff: f64) -> TensorResult<Self> {
        Self::new(schmidt_cutoff, None)
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            schmidt_cutoff: 1e-12,
            max_bond: None,
        }
    }
}

/// Result of [`svd_split`]: `t ≈ left · diag(singular_values) · right`, with
/// the squared Frobenius reconstruction error bounded by `discarded_weight`.
#[derive(Debug, Clone)]
pub struct SvdSplit {
    pub left: DenseTensor,
    pub singular_values: Vec<f64>,
    pub right: DenseTensor,
    pub discarded_weight: f64,
}

/// Contracts `a` with `b` over the given index pairs. The result carries the
/// uncontracted indices of `a` followed by those of `b`, each group in its
/// original order.
pub fn contract(
    a: &DenseTensor,
    b: &DenseTensor,
    pairs: &[(usize, usize)],
) -> TensorResult<DenseTensor> {
    let mut a_used = vec![false; a.rank()];
    let mut b_used = vec![false; b.rank()];
    for &(ia, ib) in pairs {
        if ia >= a.rank() {
            return Err(TensorError::IndexOutOfRange {
                index: ia,
                rank: a.rank(),
            });
        }
        if ib >= b.rank() {
            return Err(TensorError::IndexOutOfRange {
                index: ib,
                rank: b.rank(),
            });
        }
        if a_used[ia] {
            return Err(TensorError::DuplicateIndex(ia));
        }
        if b_used[ib] {
            return Err(TensorError::DuplicateIndex(ib));
        }
        if a.shape()[ia] != b.shape()[ib] {
            return Err(TensorError::ShapeMismatch(format!(
                "contracted extents differ: a[{}]={} vs b[{}]={}",
                ia,
                a.shape()[ia],
                ib,
                b.shape()[ib]
            )));
        }
        a_used[ia] = true;
        b_used[ib] = true;
    }

    let a_free: Vec<usize> = (0..a.rank()).filter(|&i| !a_used[i]).collect();
    let b_free: Vec<usize> = (0..b.rank()).filter(|&i| !b_used[i]).collect();

    let mut perm_a = a_free.clone();
    perm_a.extend(pairs.iter().map(|&(ia, _)| ia));
    let mut perm_b: Vec<usize> = pairs.iter().map(|&(_, ib)| ib).collect();
    perm_b.extend(b_free.iter().copied());

    let pa = a.permute(&perm_a)?;
    let pb = b.permute(&perm_b)?;
    let ma = pa.as_matrix(a_free.len())?;
    let mb = pb.as_matrix(pairs.len())?;
    let mc = ma.dot(&mb);

    let mut out_shape: Vec<usize> = a_free.iter().map(|&i| a.shape()[i]).collect();
    out_shape.extend(b_free.iter().map(|&i| b.shape()[i]));
    let data = mc
        .into_dyn()
        .into_shape(IxDyn(&out_shape))
        .map_err(|e| TensorError::ShapeMismatch(e.to_string()))?;
    Ok(DenseTensor { data })
}

fn svd_matrix(m: &Array2<C64>) -> TensorResult<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    // Divide-and-conquer SVD, with the slower QR-based routine as a fallback
    // for the rare inputs gesdd rejects.
    let dc = m.svddc(JobSvd::Some);
    let (u, s, vt) = match dc {
        Ok((Some(u), s, Some(vt))) => (u, s, vt),
        _ => {
            let (u, s, vt) = m
                .svd(true, true)
                .map_err(|e| TensorError::Backend(e.to_string()))?;
            (u.unwrap(), s, vt.unwrap())
        }
    };
    Ok((u, s, vt))
}

/// Splits a tensor across the bipartition selected by `left_indices`,
/// truncating the singular spectrum under `policy`.
///
/// A tensor of all zeros splits to bond extent one with a zero singular
/// value and zero discarded weight.
pub fn svd_split(
    t: &DenseTensor,
    left_indices: &[usize],
    policy: &TruncationPolicy,
) -> TensorResult<SvdSplit> {
    if left_indices.is_empty() || left_indices.len() >= t.rank() {
        return Err(TensorError::InvalidSplit);
    }
    let mut used = vec![false; t.rank()];
    for &i in left_indices {
        if i >= t.rank() {
            return Err(TensorError::IndexOutOfRange {
                index: i,
                rank: t.rank(),
            });
        }
        if used[i] {
            return Err(TensorError::DuplicateIndex(i));
        }
        used[i] = true;
    }
    let right_indices: Vec<usize> = (0..t.rank()).filter(|&i| !used[i]).collect();
    let mut perm = left_indices.to_vec();
    perm.extend(right_indices.iter().copied());
    let pt = t.permute(&perm)?;
    let m = pt.as_matrix(left_indices.len())?;

    let left_dims: Vec<usize> = left_indices.iter().map(|&i| t.shape()[i]).collect();
    let right_dims: Vec<usize> = right_indices.iter().map(|&i| t.shape()[i]).collect();

    let (u, s, vt) = svd_matrix(&m)?;
    let s_max = s.iter().cloned().fold(0.0f64, f64::max);

    if s_max == 0.0 {
        // Degenerate all-zero input.
        let mut lshape = left_dims.clone();
        lshape.push(1);
        let mut left = DenseTensor::zeros(&lshape);
        left.values_mut()[0] = C64::new(1.0, 0.0);
        let mut rshape = vec![1];
        rshape.extend(right_dims.iter());
        let mut right = DenseTensor::zeros(&rshape);
        right.values_mut()[0] = C64::new(1.0, 0.0);
        return Ok(SvdSplit {
            left,
            singular_values: vec![0.0],
            right,
            discarded_weight: 0.0,
        });
    }

    let threshold = policy.schmidt_cutoff * s_max;
    let mut keep = s.iter().take_while(|&&v| v >= threshold).count().max(1);
    if let Some(cap) = policy.max_bond {
        keep = keep.min(cap);
    }
    let discarded_weight: f64 = s.iter().skip(keep).map(|&v| v * v).sum();

    let u_kept = u.slice(s![.., ..keep]).to_owned();
    let vt_kept = vt.slice(s![..keep, ..]).to_owned();

    let mut lshape = left_dims;
    lshape.push(keep);
    let left = DenseTensor::from_array(u_kept.into_dyn()).reshape(&lshape)?;
    let mut rshape = vec![keep];
    rshape.extend(right_dims.iter());
    let right = DenseTensor::from_array(vt_kept.into_dyn()).reshape(&rshape)?;

    Ok(SvdSplit {
        left,
        singular_values: s.iter().take(keep).cloned().collect(),
        right,
        discarded_weight,
    })
}

/// Folds singular values into the right factor of a split.
pub fn fold_singulars_right(split: &SvdSplit) -> DenseTensor {
    let mut right = split.right.clone();
    let cols: usize = right.shape()[1..].iter().product();
    let vals = right.values_mut();
    for (k, &s) in split.singular_values.iter().enumerate() {
        for c in 0..cols {
            vals[k * cols + c] *= s;
        }
    }
    right
}

/// Folds singular values into the left factor of a split.
pub fn fold_singulars_left(split: &SvdSplit) -> DenseTensor {
    let mut left = split.left.clone();
    let bond = *left.shape().last().unwrap();
    let rows: usize = left.shape()[..left.rank() - 1].iter().product();
    let vals = left.values_mut();
    for r in 0..rows {
        for (k, &s) in split.singular_values.iter().enumerate() {
            vals[r * bond + k] *= s;
        }
    }
    left
}
