//! Matrix-product states and operators over an open chain.
//!
//! Sites are rank-3 tensors ordered (left bond, physical, right bond); MPO
//! sites are rank-4 (left bond, physical out, physical in, right bond).
//! Boundary bonds have extent one unless an external junction leg is
//! attached, which is how the combined two-reservoir network hangs a second
//! chain off the system tensor.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use crate::error::{TensorError, TensorResult};
use crate::tensor::{
    contract, fold_singulars_left, fold_singulars_right, svd_split, DenseTensor, TruncationPolicy,
};

/// Which neighbor absorbs the singular values after a two-site split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fold {
    Left,
    Right,
}

/// Open-boundary chain of rank-3 tensors with orthogonality-center
/// bookkeeping. Sites left of the center are left-orthonormal, sites right
/// of it right-orthonormal; `center == None` means the gauge is unknown.
#[derive(Debug, Clone)]
pub struct MatrixProductState {
    sites: Vec<DenseTensor>,
    center: Option<usize>,
}

/// Chain of rank-4 tensors applied site-wise to a state.
#[derive(Debug, Clone)]
pub struct MatrixProductOperator {
    sites: Vec<DenseTensor>,
}

impl MatrixProductOperator {
    pub fn from_sites(sites: Vec<DenseTensor>) -> TensorResult<Self> {
        for (i, s) in sites.iter().enumerate() {
            if s.rank() != 4 {
                return Err(TensorError::ShapeMismatch(format!(
                    "operator site {} has rank {}",
                    i,
                    s.rank()
                )));
            }
            if i + 1 < sites.len() && s.shape()[3] != sites[i + 1].shape()[0] {
                return Err(TensorError::ShapeMismatch(format!(
                    "operator bond mismatch between sites {} and {}",
                    i,
                    i + 1
                )));
            }
        }
        Ok(Self { sites })
    }

    /// Identity operator for the given physical extents.
    pub fn identity(phys_dims: &[usize]) -> Self {
        let sites = phys_dims
            .iter()
            .map(|&d| {
                DenseTensor::from_fn(&[1, d, d, 1], |idx| {
                    if idx[1] == idx[2] {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
            })
            .collect();
        Self { sites }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, i: usize) -> &DenseTensor {
        &self.sites[i]
    }

    pub fn sites(&self) -> &[DenseTensor] {
        &self.sites
    }
}

impl MatrixProductState {
    /// Builds a chain from explicit site tensors.
    pub fn from_sites(sites: Vec<DenseTensor>) -> TensorResult<Self> {
        if sites.is_empty() {
            return Err(TensorError::ShapeMismatch("empty chain".into()));
        }
        for (i, s) in sites.iter().enumerate() {
            if s.rank() != 3 {
                return Err(TensorError::ShapeMismatch(format!(
                    "site {} has rank {}",
                    i,
                    s.rank()
                )));
            }
            if i + 1 < sites.len() && s.shape()[2] != sites[i + 1].shape()[0] {
                return Err(TensorError::ShapeMismatch(format!(
                    "bond mismatch between sites {} and {}",
                    i,
                    i + 1
                )));
            }
        }
        Ok(Self {
            sites,
            center: None,
        })
    }

    /// Product state: one site per vector, all bonds of extent one.
    pub fn product(vectors: &[Array1<C64>]) -> TensorResult<Self> {
        let sites = vectors
            .iter()
            .map(|v| {
                DenseTensor::from_vec(&[1, v.len(), 1], v.to_vec())
            })
            .collect::<TensorResult<Vec<_>>>()?;
        let mut mps = Self::from_sites(sites)?;
        mps.center = Some(0);
        Ok(mps)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, i: usize) -> &DenseTensor {
        &self.sites[i]
    }

    pub fn sites(&self) -> &[DenseTensor] {
        &self.sites
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    /// Direct access for engine-internal restructuring; callers must leave
    /// the bond structure consistent and update the center hint.
    pub(crate) fn sites_vec_mut(&mut self) -> &mut Vec<DenseTensor> {
        &mut self.sites
    }

    pub(crate) fn set_center_hint(&mut self, center: Option<usize>) {
        self.center = center;
    }

    pub fn phys_dim(&self, i: usize) -> usize {
        self.sites[i].shape()[1]
    }

    /// Bond extents including the two boundary legs.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(self.sites[0].shape()[0]);
        for s in &self.sites {
            out.push(s.shape()[2]);
        }
        out
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn left_boundary(&self) -> usize {
        self.sites[0].shape()[0]
    }

    pub fn right_boundary(&self) -> usize {
        self.sites[self.len() - 1].shape()[2]
    }

    /// Replaces a site tensor directly; the caller is responsible for bond
    /// consistency, which is re-checked here.
    pub fn set_site(&mut self, i: usize, t: DenseTensor) -> TensorResult<()> {
        if t.rank() != 3 {
            return Err(TensorError::ShapeMismatch(format!(
                "site {} has rank {}",
                i,
                t.rank()
            )));
        }
        if i > 0 && self.sites[i - 1].shape()[2] != t.shape()[0] {
            return Err(TensorError::ShapeMismatch(format!(
                "left bond mismatch at site {}",
                i
            )));
        }
        if i + 1 < self.len() && t.shape()[2] != self.sites[i + 1].shape()[0] {
            return Err(TensorError::ShapeMismatch(format!(
                "right bond mismatch at site {}",
                i
            )));
        }
        self.sites[i] = t;
        self.center = None;
        Ok(())
    }

    /// Appends a site at the right end.
    pub fn push_site(&mut self, t: DenseTensor) -> TensorResult<()> {
        if t.rank() != 3 {
            return Err(TensorError::ShapeMismatch("appended site must be rank 3".into()));
        }
        if t.shape()[0] != self.right_boundary() {
            return Err(TensorError::ShapeMismatch(
                "appended site does not match the right boundary bond".into(),
            ));
        }
        self.sites.push(t);
        Ok(())
    }

    /// Contracts the full chain into a dense tensor with shape
    /// (left boundary, physical..., right boundary).
    pub fn to_dense(&self) -> TensorResult<DenseTensor> {
        let mut acc = self.sites[0].clone();
        for s in &self.sites[1..] {
            let r = acc.rank();
            acc = contract(&acc, s, &[(r - 1, 0)])?;
        }
        Ok(acc)
    }

    /// Euclidean norm of the chain viewed as a vector (boundary legs must
    /// have extent one).
    pub fn norm(&self) -> TensorResult<f64> {
        if self.left_boundary() != 1 || self.right_boundary() != 1 {
            return Err(TensorError::ShapeMismatch(
                "norm requires trivial boundary bonds".into(),
            ));
        }
        // env(l, l') accumulates <psi|psi> from the left.
        let mut env = Array2::<C64>::eye(1);
        for s in &self.sites {
            let envt = DenseTensor::from_array(env.into_dyn());
            let half = contract(&envt, s, &[(0, 0)])?; // (l', p, r)
            let full = contract(&s.conj(), &half, &[(0, 0), (1, 1)])?; // (r*, r)
            env = full.as_matrix(1)?;
        }
        Ok(env[[0, 0]].re.max(0.0).sqrt())
    }

    /// Contracts every physical leg with the matching covector, leaving a
    /// rank-2 result over the boundary legs. With `keep_open = Some(i)` the
    /// physical leg of site `i` stays open: result (left, phys_i, right).
    pub fn functional(
        &self,
        covectors: &[Array1<C64>],
        keep_open: Option<usize>,
    ) -> TensorResult<DenseTensor> {
        if covectors.len() != self.len() {
            return Err(TensorError::LengthMismatch(covectors.len(), self.len()));
        }
        let mut acc: Option<DenseTensor> = None;
        for (i, s) in self.sites.iter().enumerate() {
            let reduced = if keep_open == Some(i) {
                s.clone()
            } else {
                if covectors[i].len() != s.shape()[1] {
                    return Err(TensorError::ShapeMismatch(format!(
                        "covector length {} vs physical extent {} at site {}",
                        covectors[i].len(),
                        s.shape()[1],
                        i
                    )));
                }
                let cov =
                    DenseTensor::from_vec(&[covectors[i].len()], covectors[i].to_vec())?;
                contract(&s, &cov, &[(1, 0)])?.permute(&[0, 1])? // (l, r)
            };
            acc = Some(match acc {
                None => reduced,
                Some(prev) => {
                    let r = prev.rank();
                    contract(&prev, &reduced, &[(r - 1, 0)])?
                }
            });
        }
        Ok(acc.unwrap())
    }

    fn split_site(
        &mut self,
        i: usize,
        toward_right: bool,
        policy: &TruncationPolicy,
    ) -> TensorResult<f64> {
        // Pushes orthogonality across the bond at site i in the given
        // direction, truncating under the policy.
        let s = &self.sites[i];
        if toward_right {
            let split = svd_split(s, &[0, 1], policy)?;
            let carry = fold_singulars_right(&split);
            self.sites[i] = split.left;
            let next = contract(&carry, &self.sites[i + 1], &[(1, 0)])?;
            self.sites[i + 1] = next;
            Ok(split.discarded_weight)
        } else {
            let split = svd_split(s, &[0], policy)?;
            let carry = fold_singulars_left(&split);
            self.sites[i] = split.right;
            let prev = &self.sites[i - 1];
            let merged = contract(prev, &carry, &[(2, 0)])?;
            self.sites[i - 1] = merged;
            Ok(split.discarded_weight)
        }
    }

    /// Brings the chain into mixed-canonical form with the orthogonality
    /// center at `center`. No truncation is performed.
    pub fn canonicalize(&mut self, center: usize) -> TensorResult<()> {
        if center >= self.len() {
            return Err(TensorError::SiteOutOfRange {
                site: center,
                len: self.len(),
            });
        }
        let exact = TruncationPolicy::exact();
        for i in 0..center {
            self.split_site(i, true, &exact)?;
        }
        for i in (center + 1..self.len()).rev() {
            self.split_site(i, false, &exact)?;
        }
        self.center = Some(center);
        Ok(())
    }

    /// Moves an existing orthogonality center without truncation; the chain
    /// is canonicalized from scratch when the gauge is unknown.
    pub fn move_center(&mut self, to: usize) -> TensorResult<()> {
        let from = match self.center {
            Some(c) => c,
            None => return self.canonicalize(to),
        };
        let exact = TruncationPolicy::exact();
        if to >= self.len() {
            return Err(TensorError::SiteOutOfRange {
                site: to,
                len: self.len(),
            });
        }
        if from < to {
            for i in from..to {
                self.split_site(i, true, &exact)?;
            }
        } else {
            for i in ((to + 1)..=from).rev() {
                self.split_site(i, false, &exact)?;
            }
        }
        self.center = Some(to);
        Ok(())
    }

    /// Truncating sweep across the whole chain. `Fold::Right` sweeps left to
    /// right (requires the center at site 0), leaving the center at the far
    /// end; `Fold::Left` mirrors it. Returns the accumulated discarded
    /// weight.
    pub fn truncate_sweep(&mut self, dir: Fold, policy: &TruncationPolicy) -> TensorResult<f64> {
        let mut discarded = 0.0;
        match dir {
            Fold::Right => {
                self.move_center(0)?;
                for i in 0..self.len() - 1 {
                    discarded += self.split_site(i, true, policy)?;
                }
                self.center = Some(self.len() - 1);
            }
            Fold::Left => {
                self.move_center(self.len() - 1)?;
                for i in (1..self.len()).rev() {
                    discarded += self.split_site(i, false, policy)?;
                }
                self.center = Some(0);
            }
        }
        Ok(discarded)
    }

    /// Full recompression: canonicalize toward one end, then truncate
    /// sweeping back. `dir` names the truncating sweep direction.
    pub fn recompress(&mut self, dir: Fold, policy: &TruncationPolicy) -> TensorResult<f64> {
        match dir {
            Fold::Right => self.move_center(0)?,
            Fold::Left => self.move_center(self.len() - 1)?,
        }
        self.truncate_sweep(dir, policy)
    }

    /// Exchanges the physical legs of `site` and `site + 1` in place,
    /// folding the singular values into the chosen neighbor. Returns the
    /// discarded weight.
    pub fn swap_in_place(
        &mut self,
        site: usize,
        fold: Fold,
        policy: &TruncationPolicy,
    ) -> TensorResult<f64> {
        if site + 1 >= self.len() {
            return Err(TensorError::SiteOutOfRange {
                site: site + 1,
                len: self.len(),
            });
        }
        let theta = contract(&self.sites[site], &self.sites[site + 1], &[(2, 0)])?;
        // (l, p_i, p_{i+1}, r) -> (l, p_{i+1}, p_i, r)
        let swapped = theta.permute(&[0, 2, 1, 3])?;
        let split = svd_split(&swapped, &[0, 1], policy)?;
        match fold {
            Fold::Right => {
                self.sites[site] = split.left.clone();
                self.sites[site + 1] = fold_singulars_right(&split);
                if self.center == Some(site) || self.center == Some(site + 1) {
                    self.center = Some(site + 1);
                } else if self.center.is_some() && self.center != Some(site + 1) {
                    // A swap away from the center leaves the gauge intact
                    // only on the untouched side.
                    let c = self.center.unwrap();
                    if c > site && c < site + 1 {
                        self.center = None;
                    }
                }
            }
            Fold::Left => {
                self.sites[site] = fold_singulars_left(&split);
                self.sites[site + 1] = split.right.clone();
                if self.center == Some(site) || self.center == Some(site + 1) {
                    self.center = Some(site);
                }
            }
        }
        Ok(split.discarded_weight)
    }

    /// Checks the orthogonality conditions around the recorded center,
    /// returning the largest deviation from isometry.
    pub fn orthogonality_defect(&self) -> TensorResult<f64> {
        let center = match self.center {
            Some(c) => c,
            None => return Ok(f64::INFINITY),
        };
        let mut worst = 0.0f64;
        for (i, s) in self.sites.iter().enumerate() {
            if i == center {
                continue;
            }
            let defect = if i < center {
                // Left-orthonormal: sum over (l, p) gives the identity on r.
                let g = contract(&s.conj(), s, &[(0, 0), (1, 1)])?;
                identity_defect(&g.as_matrix(1)?)
            } else {
                // Right-orthonormal: sum over (p, r) gives the identity on l.
                let g = contract(&s.conj(), s, &[(1, 1), (2, 2)])?;
                identity_defect(&g.as_matrix(1)?)
            };
            worst = worst.max(defect);
        }
        Ok(worst)
    }
}

fn identity_defect(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[[i, j]] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Applies an operator chain site-wise and recompresses left to right under
/// the policy. Physical extents must match site by site (operator sites may
/// carry extent-one dummy legs). Returns the new state and the cumulative
/// discarded weight.
pub fn apply_mpo(
    psi: &MatrixProductState,
    op: &MatrixProductOperator,
    policy: &TruncationPolicy,
) -> TensorResult<(MatrixProductState, f64)> {
    if psi.len() != op.len() {
        return Err(TensorError::LengthMismatch(psi.len(), op.len()));
    }
    let mut sites = Vec::with_capacity(psi.len());
    for (i, (s, w)) in psi.sites.iter().zip(op.sites.iter()).enumerate() {
        if s.shape()[1] != w.shape()[2] {
            return Err(TensorError::ShapeMismatch(format!(
                "physical extent mismatch at site {}: state {} vs operator {}",
                i,
                s.shape()[1],
                w.shape()[2]
            )));
        }
        // (l, p, r) x (wl, po, pi, wr) over p = pi -> (l, r, wl, po, wr)
        let t = contract(s, w, &[(1, 2)])?;
        // -> (l, wl, po, r, wr), then fuse bond pairs.
        let t = t.permute(&[0, 2, 3, 1, 4])?;
        let (l, wl, po, r, wr) = (
            t.shape()[0],
            t.shape()[1],
            t.shape()[2],
            t.shape()[3],
            t.shape()[4],
        );
        sites.push(t.reshape(&[l * wl, po, r * wr])?);
    }
    let mut out = MatrixProductState::from_sites(sites)?;
    let discarded = out.recompress(Fold::Right, policy)?;
    Ok((out, discarded))
}

/// Pure-function counterpart of [`MatrixProductState::swap_in_place`].
pub fn swap_adjacent(
    psi: &MatrixProductState,
    site: usize,
    policy: &TruncationPolicy,
) -> TensorResult<(MatrixProductState, f64)> {
    let mut out = psi.clone();
    let discarded = out.swap_in_place(site, Fold::Right, policy)?;
    Ok((out, discarded))
}

/// Pure-function counterpart of [`MatrixProductState::canonicalize`].
pub fn canonicalize(
    psi: &MatrixProductState,
    center: usize,
) -> TensorResult<MatrixProductState> {
    let mut out = psi.clone();
    out.canonicalize(center)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_mps(phys: &[usize], bond: usize, rng: &mut impl Rng) -> MatrixProductState {
        let n = phys.len();
        let mut sites = Vec::new();
        for (i, &p) in phys.iter().enumerate() {
            let l = if i == 0 { 1 } else { bond };
            let r = if i == n - 1 { 1 } else { bond };
            sites.push(DenseTensor::from_fn(&[l, p, r], |_| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }));
        }
        MatrixProductState::from_sites(sites).unwrap()
    }

    fn random_mpo(phys: &[usize], bond: usize, rng: &mut impl Rng) -> MatrixProductOperator {
        let n = phys.len();
        let mut sites = Vec::new();
        for (i, &p) in phys.iter().enumerate() {
            let l = if i == 0 { 1 } else { bond };
            let r = if i == n - 1 { 1 } else { bond };
            sites.push(DenseTensor::from_fn(&[l, p, p, r], |_| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }));
        }
        MatrixProductOperator::from_sites(sites).unwrap()
    }

    fn dense_vector(psi: &MatrixProductState) -> Vec<C64> {
        let d = psi.to_dense().unwrap();
        d.values().to_vec()
    }

    fn mpo_dense_matrix(op: &MatrixProductOperator, phys: &[usize]) -> Vec<Vec<C64>> {
        // Row-major (out, in) matrix of the full operator, built by brute
        // force from the site tensors.
        let dim: usize = phys.iter().product();
        let mut mat = vec![vec![C64::new(0.0, 0.0); dim]; dim];
        let n = phys.len();
        let mut idx_out = vec![0usize; n];
        for row in 0..dim {
            let mut rr = row;
            for k in (0..n).rev() {
                idx_out[k] = rr % phys[k];
                rr /= phys[k];
            }
            let mut idx_in = vec![0usize; n];
            for col in 0..dim {
                let mut cc = col;
                for k in (0..n).rev() {
                    idx_in[k] = cc % phys[k];
                    cc /= phys[k];
                }
                // Chain the bond contractions.
                let mut vecacc: Vec<C64> = vec![C64::new(1.0, 0.0)];
                for k in 0..n {
                    let w = op.site(k);
                    let (wl, _, _, wr) = (
                        w.shape()[0],
                        w.shape()[1],
                        w.shape()[2],
                        w.shape()[3],
                    );
                    let mut next = vec![C64::new(0.0, 0.0); wr];
                    for a in 0..wl {
                        for b in 0..wr {
                            next[b] += vecacc[a] * w.get(&[a, idx_out[k], idx_in[k], b]);
                        }
                    }
                    vecacc = next;
                }
                mat[row][col] = vecacc[0];
            }
        }
        mat
    }

    #[test]
    fn identity_mpo_preserves_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let psi = random_mps(&[2, 3, 2], 3, &mut rng);
        let op = MatrixProductOperator::identity(&[2, 3, 2]);
        let policy = TruncationPolicy::with_cutoff(1e-12).unwrap();
        let (out, _) = apply_mpo(&psi, &op, &policy).unwrap();
        let a = dense_vector(&psi);
        let b = dense_vector(&out);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn mpo_application_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let phys = [4usize, 4, 4];
        let psi = random_mps(&phys, 3, &mut rng);
        let op = random_mpo(&phys, 2, &mut rng);
        let (out, _) = apply_mpo(&psi, &op, &TruncationPolicy::exact()).unwrap();

        let mat = mpo_dense_matrix(&op, &phys);
        let vin = dense_vector(&psi);
        let vout = dense_vector(&out);
        let dim = vin.len();
        for r in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..dim {
                acc += mat[r][c] * vin[c];
            }
            assert!(
                (acc - vout[r]).norm() < 1e-11,
                "row {}: {} vs {}",
                r,
                acc,
                vout[r]
            );
        }
    }

    #[test]
    fn zero_mpo_annihilates() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let psi = random_mps(&[2, 2, 2], 2, &mut rng);
        let zero_sites = psi
            .sites()
            .iter()
            .map(|s| DenseTensor::zeros(&[1, s.shape()[1], s.shape()[1], 1]))
            .collect();
        let op = MatrixProductOperator::from_sites(zero_sites).unwrap();
        let (out, _) = apply_mpo(&psi, &op, &TruncationPolicy::default()).unwrap();
        assert!(out.norm().unwrap() < 1e-14);
    }

    #[test]
    fn product_state_swap_is_exact() {
        let v0 = array![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let v1 = array![C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let psi = MatrixProductState::product(&[v0, v1]).unwrap();
        let (out, discarded) = swap_adjacent(&psi, 0, &TruncationPolicy::default()).unwrap();
        assert!(discarded < 1e-28);
        let v = dense_vector(&out);
        // |01> becomes |10>: index 2 in row-major (p0, p1) order.
        assert!((v[2].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn double_swap_restores_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let psi = random_mps(&[2, 3, 2], 3, &mut rng);
        let exact = TruncationPolicy::exact();
        let (once, _) = swap_adjacent(&psi, 1, &exact).unwrap();
        let (twice, _) = swap_adjacent(&once, 1, &exact).unwrap();
        let a = dense_vector(&psi);
        let b = dense_vector(&twice);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn swap_preserves_single_site_reduced_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let psi = random_mps(&[2, 2, 2], 4, &mut rng);
        let policy = TruncationPolicy::with_cutoff(1e-12).unwrap();
        let (out, _) = swap_adjacent(&psi, 0, &policy).unwrap();

        let a = dense_vector(&psi);
        let b = dense_vector(&out);
        // Site 0 of the swapped state corresponds to site 1 of the original.
        let rdm = |v: &[C64], site: usize| {
            let mut m = [[C64::new(0.0, 0.0); 2]; 2];
            for i in 0..8 {
                for j in 0..8 {
                    let (i0, i1, i2) = (i / 4, (i / 2) % 2, i % 2);
                    let (j0, j1, j2) = (j / 4, (j / 2) % 2, j % 2);
                    let (si, sj) = match site {
                        0 => (i0, j0),
                        1 => (i1, j1),
                        _ => (i2, j2),
                    };
                    let rest_match = match site {
                        0 => i1 == j1 && i2 == j2,
                        1 => i0 == j0 && i2 == j2,
                        _ => i0 == j0 && i1 == j1,
                    };
                    if rest_match {
                        m[si][sj] += v[i] * v[j].conj();
                    }
                }
            }
            m
        };
        let pairs = [(0usize, 1usize), (1, 0), (2, 2)];
        for &(snew, sold) in &pairs {
            let ma = rdm(&b, snew);
            let mb = rdm(&a, sold);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((ma[i][j] - mb[i][j]).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn canonicalize_single_site_is_noop() {
        let v = array![C64::new(0.3, 0.1), C64::new(-0.2, 0.9)];
        let psi = MatrixProductState::product(&[v.clone()]).unwrap();
        let out = canonicalize(&psi, 0).unwrap();
        for (x, y) in out.site(0).values().iter().zip(psi.site(0).values()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn canonicalize_is_idempotent_and_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let psi = random_mps(&[2, 3, 2, 2], 3, &mut rng);
        let once = canonicalize(&psi, 2).unwrap();
        assert!(once.orthogonality_defect().unwrap() < 1e-12);
        let twice = canonicalize(&once, 2).unwrap();
        assert!(twice.orthogonality_defect().unwrap() < 1e-12);
        let a = dense_vector(&once);
        let b = dense_vector(&twice);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn canonicalize_preserves_vector_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let psi = random_mps(&[2, 2, 3], 4, &mut rng);
        let before = dense_vector(&psi);
        let norm2: f64 = before.iter().map(|v| v.norm_sqr()).sum();
        let out = canonicalize(&psi, 1).unwrap();
        let after = dense_vector(&out);
        let mut overlap = C64::new(0.0, 0.0);
        for (x, y) in before.iter().zip(after.iter()) {
            overlap += x.conj() * y;
        }
        assert!((overlap.re - norm2).abs() < 1e-12 * norm2.max(1.0));
        assert!(overlap.im.abs() < 1e-12 * norm2.max(1.0));
    }

    #[test]
    fn double_swap_preserves_two_site_reduced_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let psi = random_mps(&[2, 2, 2], 4, &mut rng);
        let exact = TruncationPolicy::exact();
        let (once, _) = swap_adjacent(&psi, 1, &exact).unwrap();
        let (twice, _) = swap_adjacent(&once, 1, &exact).unwrap();
        let a = dense_vector(&psi);
        let b = dense_vector(&twice);
        // All two-site reduced matrices agree when the full vectors do.
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}
