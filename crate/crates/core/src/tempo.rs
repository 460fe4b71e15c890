//! Matrix-product evolution of the augmented density tensor under a
//! continuous structured reservoir.
//!
//! The chain stores the Liouville path indices of the last `n_c` steps with
//! the oldest entry at the left end and the current system index at the
//! right end. One evolution step applies a growth operator that emits the
//! next index, multiplies every retained history leg by its influence
//! factor, and, once the window is full, retires the oldest leg by summing
//! it out. All history beyond the window is folded into the boundary
//! coefficient, which is refreshed from the memory-table tail each step.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use crate::bath::{
    eta_coefficients, influence_factor, liouville_propagator, CorrelationKernel, EtaTable,
    SystemModel,
};
use crate::error::{SimError, SimResult};
use crate::mps::{Fold, MatrixProductOperator, MatrixProductState};
use crate::series::{TimeSeries, TimeSeriesRow};
use crate::tensor::{contract, fold_singulars_right, svd_split, DenseTensor, TruncationPolicy};

/// Evolution parameters for the continuous-reservoir engine.
#[derive(Debug, Clone)]
pub struct TempoConfig {
    /// Step size, ps.
    pub dt: f64,
    /// Memory depth in steps.
    pub n_c: usize,
    pub policy: TruncationPolicy,
    pub total_steps: usize,
}

impl TempoConfig {
    pub fn validate(&self) -> SimResult<()> {
        if self.dt <= 0.0 {
            return Err(SimError::InvalidParameter("dt must be positive".into()));
        }
        if self.n_c == 0 || self.total_steps == 0 {
            return Err(SimError::InvalidParameter(
                "n_c and total_steps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Cumulative truncation diagnostics, split by sweep direction.
#[derive(Debug, Clone, Copy, Default)]
pub struct TruncationDiagnostics {
    pub discarded_left_to_right: f64,
    pub discarded_right_to_left: f64,
}

impl TruncationDiagnostics {
    pub fn total(&self) -> f64 {
        self.discarded_left_to_right + self.discarded_right_to_left
    }
}

/// The augmented density tensor as a matrix-product chain. The right
/// boundary bond of the current-site tensor is the junction leg; it has
/// extent one in standalone use.
#[derive(Debug, Clone)]
pub struct AugmentedDensityMps {
    mps: MatrixProductState,
    step: usize,
    dim: usize,
    pub diagnostics: TruncationDiagnostics,
}

impl AugmentedDensityMps {
    pub fn chain(&self) -> &MatrixProductState {
        &self.mps
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn len(&self) -> usize {
        self.mps.len()
    }

    /// Extent of the junction leg on the current-site tensor.
    pub fn link_dim(&self) -> usize {
        self.mps.right_boundary()
    }

    pub fn max_bond(&self) -> usize {
        self.mps.max_bond()
    }

    /// The current-site tensor (left bond, physical, junction leg).
    pub(crate) fn current(&self) -> DenseTensor {
        self.mps
            .sites()
            .last()
            .cloned()
            .expect("chain is never empty")
    }

    pub(crate) fn set_current(&mut self, t: DenseTensor) -> SimResult<()> {
        let last = self.mps.len() - 1;
        self.mps.set_site(last, t).map_err(SimError::from)
    }
}

pub(crate) fn vectorize(rho: ArrayView2<C64>) -> Vec<C64> {
    let d = rho.nrows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        for ip in 0..d {
            v.push(rho[[i, ip]]);
        }
    }
    v
}

pub(crate) fn check_density_matrix(rho: ArrayView2<C64>) -> SimResult<()> {
    let d = rho.nrows();
    if rho.ncols() != d || d < 2 {
        return Err(SimError::InvalidDensityMatrix(format!(
            "shape {:?}",
            rho.shape()
        )));
    }
    let mut trace = C64::new(0.0, 0.0);
    for i in 0..d {
        trace += rho[[i, i]];
    }
    if (trace - C64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(SimError::InvalidDensityMatrix(format!(
            "trace defect {:.3e}",
            (trace - C64::new(1.0, 0.0)).norm()
        )));
    }
    let mut herm = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            herm = herm.max((rho[[i, j]] - rho[[j, i]].conj()).norm());
        }
    }
    if herm > 1e-10 {
        return Err(SimError::InvalidDensityMatrix(format!(
            "hermiticity defect {herm:.3e}"
        )));
    }
    use ndarray_linalg::Eigh;
    let (eigs, _) = rho
        .to_owned()
        .eigh(ndarray_linalg::UPLO::Lower)
        .map_err(|e| SimError::InvalidDensityMatrix(e.to_string()))?;
    if eigs.iter().any(|&v| v < -1e-10) {
        return Err(SimError::InvalidDensityMatrix(format!(
            "negative eigenvalue {:.3e}",
            eigs.iter().cloned().fold(f64::INFINITY, f64::min)
        )));
    }
    Ok(())
}

/// Starts an evolution from a vectorized density matrix in a single-site
/// chain.
pub fn init(rho0: ArrayView2<C64>) -> SimResult<AugmentedDensityMps> {
    check_density_matrix(rho0)?;
    let d = rho0.nrows();
    let site = DenseTensor::from_vec(&[1, d * d, 1], vectorize(rho0))?;
    let mps = MatrixProductState::from_sites(vec![site])?;
    Ok(AugmentedDensityMps {
        mps,
        step: 0,
        dim: d,
        diagnostics: TruncationDiagnostics::default(),
    })
}

/// Builds the growth operator for step `n` (1-based). Its length is
/// min(n, n_c) + 1: one site per retained history leg, aligned left to
/// right with the (already retired) chain, plus the emitter site that
/// creates the new physical leg.
///
/// The internal bond carries the value of the new Liouville index. Each
/// history site copies its physical index through and multiplies the
/// influence factor at its lag; the current site additionally applies the
/// Liouville-space free propagator, and the emitter applies the lag-0
/// self-interaction. The initial-state leg never couples to the influence
/// functional, so legs whose partner time index would be zero are plain
/// copies.
pub fn build_step_mpo(
    table: &EtaTable,
    model: &SystemModel,
    n: usize,
) -> SimResult<MatrixProductOperator> {
    if n == 0 {
        return Err(SimError::InvalidParameter("steps are 1-based".into()));
    }
    let d2 = model.liouville_dim();
    let n_c = table.n_c;
    let chain_len = n.min(n_c);
    let mtilde = liouville_propagator(model, table.dt);

    let mut sites = Vec::with_capacity(chain_len + 1);
    for i in 0..chain_len {
        let lag = chain_len - i;
        let partner = n as isize - lag as isize;
        let factor_applies = partner >= 1;
        let current = i + 1 == chain_len;
        let bond_left = if i == 0 { 1 } else { d2 };
        let mut t = DenseTensor::zeros(&[bond_left, d2, d2, d2]);
        for b in 0..d2 {
            for p in 0..d2 {
                let mut f = C64::new(1.0, 0.0);
                if factor_applies {
                    f *= influence_factor(table, model, lag, b, p, n)?;
                }
                if current {
                    f *= mtilde[[b, p]];
                }
                let bl = if i == 0 { 0 } else { b };
                t.set(&[bl, p, p, b], f);
            }
        }
        sites.push(t);
    }

    // Emitter: fixes the bond value to the new physical index and applies
    // the self-interaction factor.
    let mut emitter = DenseTensor::zeros(&[if chain_len == 0 { 1 } else { d2 }, d2, 1, 1]);
    for b in 0..d2 {
        let f = influence_factor(table, model, 0, b, b, n)?;
        let bl = if chain_len == 0 { 0 } else { b };
        emitter.set(&[bl, b, 0, 0], f);
    }
    sites.push(emitter);

    MatrixProductOperator::from_sites(sites).map_err(SimError::from)
}

/// Sums the oldest leg out of the chain (the delta-tensor closure) once its
/// interactions are exhausted.
fn retire_oldest(adt: &mut AugmentedDensityMps) -> SimResult<()> {
    let d2 = adt.dim * adt.dim;
    let ones = DenseTensor::from_vec(&[d2], vec![C64::new(1.0, 0.0); d2])?;
    let oldest = adt.mps.site(0).clone();
    let closed = contract(&oldest, &ones, &[(1, 0)])?; // (l, r)
    let next = contract(&closed, adt.mps.site(1), &[(1, 0)])?; // (l, p, r)
    let mut sites: Vec<DenseTensor> = adt.mps.sites()[2..].to_vec();
    sites.insert(0, next);
    adt.mps = MatrixProductState::from_sites(sites)?;
    Ok(())
}

/// Advances the chain by one step under the growth operator, recompressing
/// with a sweep direction that alternates between steps.
pub fn step(
    adt: &mut AugmentedDensityMps,
    table: &EtaTable,
    model: &SystemModel,
    policy: &TruncationPolicy,
) -> SimResult<()> {
    let n = adt.step + 1;
    if n > table.max_step() {
        return Err(SimError::InvalidParameter(format!(
            "step {n} beyond the memory table built for {} steps",
            table.max_step()
        )));
    }
    if n > table.n_c {
        retire_oldest(adt)?;
    }
    let mpo = build_step_mpo(table, model, n)?;
    debug_assert_eq!(mpo.len(), adt.mps.len() + 1);

    // Zip the chain with the operator, fusing bond pairs; the current site
    // additionally absorbs the emitter, producing the new current tensor
    // with the junction leg carried through.
    let len = adt.mps.len();
    let mut sites: Vec<DenseTensor> = Vec::with_capacity(len + 1);
    for i in 0..len.saturating_sub(1) {
        let t = contract(adt.mps.site(i), mpo.site(i), &[(1, 2)])?; // (l, r, wl, po, wr)
        let t = t.permute(&[0, 2, 3, 1, 4])?; // (l, wl, po, r, wr)
        let (l, wl, po, r, wr) = (
            t.shape()[0],
            t.shape()[1],
            t.shape()[2],
            t.shape()[3],
            t.shape()[4],
        );
        sites.push(t.reshape(&[l * wl, po, r * wr])?);
    }
    let cur = adt.mps.site(len - 1);
    let x = contract(cur, mpo.site(len - 1), &[(1, 2)])?; // (l, e, wl, po, wr)
    let y = contract(&x, mpo.site(len), &[(4, 0)])?; // (l, e, wl, po, pn, 1, 1)
    let (l, e, wl, po, pn) = (
        y.shape()[0],
        y.shape()[1],
        y.shape()[2],
        y.shape()[3],
        y.shape()[4],
    );
    let theta = y
        .reshape(&[l, e, wl, po, pn])?
        .permute(&[0, 2, 3, 4, 1])? // (l, wl, po, pn, e)
        .reshape(&[l * wl, po, pn, e])?;
    let split = svd_split(&theta, &[0, 1], &TruncationPolicy::exact())?;
    let carried = fold_singulars_right(&split);
    sites.push(split.left); // (l*wl, po, chi)
    sites.push(carried); // (chi, pn, e)

    let mut chain = MatrixProductState::from_sites(sites)?;
    let dir = if n % 2 == 1 { Fold::Right } else { Fold::Left };
    let discarded = chain.recompress(dir, policy)?;
    match dir {
        Fold::Right => adt.diagnostics.discarded_left_to_right += discarded,
        Fold::Left => adt.diagnostics.discarded_right_to_left += discarded,
    }
    adt.mps = chain;
    adt.step = n;
    Ok(())
}

/// Marginalizes every history leg with the all-ones Liouville covector and
/// unpacks the current index into a density matrix.
pub fn reduced_state(adt: &AugmentedDensityMps) -> SimResult<Array2<C64>> {
    if adt.mps.right_boundary() != 1 {
        return Err(SimError::InvalidParameter(
            "reduced state of a junction-attached chain must go through the combined engine"
                .into(),
        ));
    }
    let d = adt.dim;
    let d2 = d * d;
    let ones = Array1::from_elem(d2, C64::new(1.0, 0.0));
    let covs: Vec<Array1<C64>> = vec![ones; adt.mps.len()];
    let open = adt.mps.len() - 1;
    let f = adt.mps.functional(&covs, Some(open))?; // (1, d2, 1)
    let v = f.values();
    let mut rho = Array2::<C64>::zeros((d, d));
    for i in 0..d {
        for ip in 0..d {
            rho[[i, ip]] = v[i * d + ip];
        }
    }
    Ok(rho)
}

pub(crate) fn row_from_state(
    time: f64,
    rho: &Array2<C64>,
    link_dim: usize,
    max_bond: usize,
    discarded_weight: f64,
) -> TimeSeriesRow {
    let rho00 = rho[[0, 0]].re;
    let rho11 = rho[[1, 1]].re;
    TimeSeriesRow {
        time,
        rho00,
        rho11,
        re_rho01: rho[[0, 1]].re,
        im_rho01: rho[[0, 1]].im,
        trace_defect: (rho00 + rho11 - 1.0).abs(),
        link_dim,
        max_bond,
        discarded_weight,
    }
}

/// Runs a full evolution, returning one record per step including the
/// initial state.
pub fn run(
    model: &SystemModel,
    kernel: &CorrelationKernel,
    cfg: &TempoConfig,
    rho0: ArrayView2<C64>,
) -> SimResult<TimeSeries> {
    cfg.validate()?;
    let table = eta_coefficients(kernel, cfg.dt, cfg.total_steps, cfg.n_c.min(cfg.total_steps))?;
    run_with_table(model, &table, cfg, rho0)
}

/// Same as [`run`] but with a prebuilt memory table.
pub fn run_with_table(
    model: &SystemModel,
    table: &EtaTable,
    cfg: &TempoConfig,
    rho0: ArrayView2<C64>,
) -> SimResult<TimeSeries> {
    cfg.validate()?;
    let mut adt = init(rho0)?;
    let mut series = TimeSeries::new();
    let rho = reduced_state(&adt)?;
    series.push(row_from_state(0.0, &rho, adt.link_dim(), adt.max_bond(), 0.0));
    for n in 1..=cfg.total_steps {
        let before = adt.diagnostics.total();
        step(&mut adt, table, model, &cfg.policy)?;
        let rho = reduced_state(&adt)?;
        series.push(row_from_state(
            n as f64 * cfg.dt,
            &rho,
            adt.link_dim(),
            adt.max_bond(),
            adt.diagnostics.total() - before,
        ));
    }
    Ok(series)
}
