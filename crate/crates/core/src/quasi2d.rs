//! Combined evolution under both reservoirs: the continuous-reservoir chain
//! and the time-bin feedback chain share the current system tensor, which
//! acts as the junction carrying inter-reservoir entanglement.
//!
//! At step boundaries the system tensor has three legs: the bond into the
//! path-integral history chain, the physical Liouville index, and the link
//! bond into the discrete memory chain. During the first half-step the
//! path-integral contraction treats the link as a spectator copied through
//! the head tensor; during the second half-step the feedback gate treats
//! the history bond as a spectator fused into the system's physical leg.
//! The link bond is truncated wherever it borders an SVD, under the global
//! cutoff. Each half-step records the link extent.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use crate::bath::{eta_coefficients, CorrelationKernel, EtaTable, SystemModel};
use crate::error::{SimError, SimResult};
use crate::feedback::{self, FeedbackConfig, StepLiouvillian};
use crate::mps::MatrixProductState;
use crate::series::{TimeSeries, TimeSeriesRow};
use crate::tempo::{self, AugmentedDensityMps, TempoConfig};
use crate::tensor::TruncationPolicy;

/// Default ceiling on the combined memory depth n_c + n_d.
pub const MEMORY_BUDGET: usize = 19;

/// Both chains plus the junction bookkeeping. The system tensor is stored
/// in both containers and synchronized at every half-step boundary.
#[derive(Debug, Clone)]
pub struct JunctionState {
    adt: AugmentedDensityMps,
    fb: feedback::TimeBinMps,
    step: usize,
    /// Link extents recorded after the continuous half-step.
    pub link_after_continuous: Vec<usize>,
    /// Link extents recorded after the feedback half-step.
    pub link_after_feedback: Vec<usize>,
}

impl JunctionState {
    pub fn continuous_chain(&self) -> &AugmentedDensityMps {
        &self.adt
    }

    pub fn feedback_chain(&self) -> &feedback::TimeBinMps {
        &self.fb
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Extent of the link bond between the system tensor and the discrete
    /// memory chain.
    pub fn link_dim(&self) -> usize {
        self.adt.link_dim()
    }

    pub fn max_bond(&self) -> usize {
        self.adt.max_bond().max(self.fb.max_bond())
    }

    /// Largest elementwise deviation between the two stored copies of the
    /// system tensor. Zero up to float noise at step boundaries.
    pub fn junction_consistency_defect(&self) -> SimResult<f64> {
        let cur = self.adt.current(); // (h, j, a)
        let sys = self.fb.system_tensor()?; // (a, j, h, 1)
        let (h, j, a) = (cur.shape()[0], cur.shape()[1], cur.shape()[2]);
        let from_fb = sys.reshape(&[a, j, h])?.permute(&[2, 1, 0])?;
        let mut worst = 0.0f64;
        for (x, y) in cur.values().iter().zip(from_fb.values()) {
            worst = worst.max((x - y).norm());
        }
        Ok(worst)
    }
}

/// Initializes both chains from the same system state.
pub fn init(rho0: ArrayView2<C64>, fb_cfg: &FeedbackConfig) -> SimResult<JunctionState> {
    let adt = tempo::init(rho0)?;
    let fb = feedback::init(rho0, fb_cfg)?;
    Ok(JunctionState {
        adt,
        fb,
        step: 0,
        link_after_continuous: Vec::new(),
        link_after_feedback: Vec::new(),
    })
}

/// One combined step: the system is first evolved under the continuous
/// reservoir, then handed to the feedback algorithm. Both configurations
/// must share the same step size; that is enforced where the table and
/// gate are built.
pub fn combined_step(
    state: &mut JunctionState,
    table: &EtaTable,
    model: &SystemModel,
    gate: &StepLiouvillian,
    policy: &TruncationPolicy,
) -> SimResult<()> {
    tempo::step(&mut state.adt, table, model, policy)?;
    state.link_after_continuous.push(state.adt.link_dim());

    // Hand the updated system tensor (history bond, physical, link) to the
    // feedback chain as (link, physical, history bond, right).
    let cur = state.adt.current();
    let (h, j, a) = (cur.shape()[0], cur.shape()[1], cur.shape()[2]);
    let sys = cur.permute(&[2, 1, 0])?.reshape(&[a, j, h, 1])?;
    state.fb.set_system_tensor(sys)?;

    feedback::step(&mut state.fb, gate, policy)?;

    // Pull it back with the refreshed link bond.
    let sys = state.fb.system_tensor()?; // (a', j, h, 1)
    let (a2, j2, h2) = (sys.shape()[0], sys.shape()[1], sys.shape()[2]);
    let cur = sys.reshape(&[a2, j2, h2])?.permute(&[2, 1, 0])?;
    state.adt.set_current(cur)?;
    state.link_after_feedback.push(a2);

    state.step += 1;
    Ok(())
}

/// Reduced system state: the feedback chain is traced with the system
/// physical and history legs kept open, then closed against the
/// marginalized history chain.
pub fn reduced_state(state: &JunctionState) -> SimResult<Array2<C64>> {
    let v = feedback::reduced_system_vector(&state.fb)?; // (j, h)
    let chain = state.adt.chain();
    let len = chain.len();
    let h_dim = v.ncols();
    let weights: Vec<C64> = if len == 1 {
        vec![C64::new(1.0, 0.0); h_dim]
    } else {
        let hist = MatrixProductState::from_sites(chain.sites()[..len - 1].to_vec())?;
        let d2 = chain.site(0).shape()[1];
        let ones = Array1::from_elem(d2, C64::new(1.0, 0.0));
        let covs: Vec<Array1<C64>> = vec![ones; hist.len()];
        let f = hist.functional(&covs, None)?; // (1, h)
        f.values().to_vec()
    };
    if weights.len() != h_dim {
        return Err(SimError::InvalidParameter(format!(
            "history marginal extent {} does not match junction extent {}",
            weights.len(),
            h_dim
        )));
    }
    let d = 2usize;
    let mut rho = Array2::<C64>::zeros((d, d));
    for j in 0..d * d {
        let mut acc = C64::new(0.0, 0.0);
        for (hh, w) in weights.iter().enumerate() {
            acc += *w * v[[j, hh]];
        }
        rho[[j / d, j % d]] = acc;
    }
    Ok(rho)
}

/// Full combined run. Refuses configurations whose combined memory depth
/// n_c + n_d exceeds the budget unless `budget_override` is set, and
/// rejects mismatched step sizes.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    model: &SystemModel,
    kernel: &CorrelationKernel,
    fb_cfg: &FeedbackConfig,
    tempo_cfg: &TempoConfig,
    rho0: ArrayView2<C64>,
    budget_override: bool,
) -> SimResult<TimeSeries> {
    tempo_cfg.validate()?;
    fb_cfg.validate()?;
    let dt_fb = fb_cfg.dt();
    if (tempo_cfg.dt - dt_fb).abs() > 1e-12 * dt_fb.max(tempo_cfg.dt) {
        return Err(SimError::Config(format!(
            "step-size mismatch: continuous dt = {} ps vs tau / n_d = {} ps",
            tempo_cfg.dt, dt_fb
        )));
    }
    let total = tempo_cfg.n_c + fb_cfg.n_d;
    if total > MEMORY_BUDGET && !budget_override {
        return Err(SimError::BudgetExceeded {
            total,
            budget: MEMORY_BUDGET,
        });
    }

    let steps = tempo_cfg.total_steps;
    let table = eta_coefficients(kernel, tempo_cfg.dt, steps, tempo_cfg.n_c.min(steps))?;
    let gate = feedback::step_gate(fb_cfg)?;
    let mut state = init(rho0, fb_cfg)?;

    let mut series = TimeSeries::new();
    let rho = reduced_state(&state)?;
    series.push(row(0.0, &rho, &state, 0.0));
    for n in 1..=steps {
        let before =
            state.adt.diagnostics.total() + state.fb.diagnostics.total();
        combined_step(&mut state, &table, model, &gate, &tempo_cfg.policy)?;
        let rho = reduced_state(&state)?;
        let after = state.adt.diagnostics.total() + state.fb.diagnostics.total();
        series.push(row(n as f64 * tempo_cfg.dt, &rho, &state, after - before));
    }
    Ok(series)
}

fn row(time: f64, rho: &Array2<C64>, state: &JunctionState, discarded: f64) -> TimeSeriesRow {
    let rho00 = rho[[0, 0]].re;
    let rho11 = rho[[1, 1]].re;
    TimeSeriesRow {
        time,
        rho00,
        rho11,
        re_rho01: rho[[0, 1]].re,
        im_rho01: rho[[0, 1]].im,
        trace_defect: (rho00 + rho11 - 1.0).abs(),
        link_dim: state.link_dim(),
        max_bond: state.max_bond(),
        discarded_weight: discarded,
    }
}
