//! Independent reference solutions: the closed-form pure-dephasing
//! coherence, the delayed-amplitude series for an emitter facing a mirror,
//! a delay-differential long-time solver, the literal path sum over all
//! Liouville index paths, and dense Liouville-space evolution without any
//! matrix-product factorization.
//!
//! These deliberately avoid the numerical kernels of the evolution engines
//! so that agreement is evidence rather than tautology. The path sum shares
//! the memory-coefficient table and the dense evolution shares the step
//! gate, since in both cases the contraction machinery is the quantity
//! under test.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use crate::bath::{liouville_propagator, CorrelationKernel, EtaTable, SystemModel};
use crate::error::{SimError, SimResult};
use crate::feedback::{step_gate, FeedbackConfig};
use crate::quad::gauss_legendre_scaled;
use crate::series::CSV_HEADER;
use crate::tensor::{contract, DenseTensor};
use crate::HBAR_OVER_KB_K_PS;

/// Comparison of an engine trace against a reference on a shared grid.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub grid: Vec<f64>,
    pub reference: Vec<C64>,
    pub engine: Vec<C64>,
    pub max_abs_deviation: f64,
    pub max_rel_deviation: f64,
}

impl OracleReport {
    pub fn compare(grid: Vec<f64>, reference: Vec<C64>, engine: Vec<C64>) -> SimResult<Self> {
        if grid.len() != reference.len() || grid.len() != engine.len() {
            return Err(SimError::InvalidParameter(
                "oracle grids must align exactly with engine output steps".into(),
            ));
        }
        let mut max_abs = 0.0f64;
        let mut max_rel = 0.0f64;
        for (r, e) in reference.iter().zip(engine.iter()) {
            let dev = (r - e).norm();
            max_abs = max_abs.max(dev);
            if r.norm() > 1e-14 {
                max_rel = max_rel.max(dev / r.norm());
            }
        }
        Ok(Self {
            grid,
            reference,
            engine,
            max_abs_deviation: max_abs,
            max_rel_deviation: max_rel,
        })
    }

    /// Same schema as the engine CSV with the reference columns appended.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{},reference_re,reference_im", CSV_HEADER)?;
        for ((t, r), e) in self.grid.iter().zip(&self.reference).zip(&self.engine) {
            writeln!(
                w,
                "{:.16e},0,0,{:.16e},{:.16e},0,1,1,0,{:.16e},{:.16e}",
                t, e.re, e.im, r.re, r.im
            )?;
        }
        Ok(())
    }
}

/// Closed-form coherence of a two-level system under pure dephasing by a
/// harmonic reservoir: rho01(t) = exp(X(t)) rho01(0) with
/// X = int dw J(w) [-i t / w + i sin(wt) / w^2
///                  - coth(hw / 2 k_B T) (1 - cos(wt)) / w^2].
pub fn ibm_analytic(kernel: &CorrelationKernel, rho01_0: C64, t: f64) -> SimResult<C64> {
    if t < 0.0 {
        return Err(SimError::InvalidParameter("t must be nonnegative".into()));
    }
    let (nodes, weights) = gauss_legendre_scaled(kernel.freq_nodes, 0.0, kernel.omega_max);
    let mut x = C64::new(0.0, 0.0);
    for (&w, &gw) in nodes.iter().zip(weights.iter()) {
        let j = kernel.density.value(w)?;
        if j == 0.0 {
            continue;
        }
        let coth = if kernel.temperature == 0.0 {
            1.0
        } else {
            1.0 / (HBAR_OVER_KB_K_PS * w / (2.0 * kernel.temperature)).tanh()
        };
        let re = -coth * (1.0 - (w * t).cos()) / (w * w);
        let im = (w * t).sin() / (w * w) - t / w;
        x += C64::new(gw * j * re, gw * j * im);
    }
    Ok(x.exp() * rho01_0)
}

/// Delayed-amplitude series for the polarization of an initially excited
/// emitter facing a mirror, valid in the single-excitation sector:
/// sum_n e^{-G t}/n! [G e^{(G - i w0) tau} (t - n tau)]^n up to n = t/tau.
/// The population is the squared modulus.
pub fn feedback_analytic(gamma_rate: f64, tau: f64, omega0: f64, t: f64) -> SimResult<C64> {
    if t < 0.0 {
        return Err(SimError::InvalidParameter("t must be nonnegative".into()));
    }
    if tau <= 0.0 || gamma_rate < 0.0 {
        return Err(SimError::InvalidParameter(
            "tau must be positive and the rate nonnegative".into(),
        ));
    }
    let n_max = (t / tau).floor() as usize;
    let mut sum = C64::new(0.0, 0.0);
    let mut log_factorial = 0.0f64;
    for n in 0..=n_max {
        if n > 0 {
            log_factorial += (n as f64).ln();
        }
        let dt = t - n as f64 * tau;
        if n > 0 && dt <= 0.0 {
            continue; // the (t - n tau)^n factor vanishes at onset
        }
        // Magnitude in log space to stay clear of overflow for long times.
        let log_mag = -gamma_rate * t
            + n as f64 * ((gamma_rate * dt).max(f64::MIN_POSITIVE).ln() + gamma_rate * tau)
            - log_factorial;
        let mag = if n == 0 {
            (-gamma_rate * t).exp()
        } else if gamma_rate == 0.0 {
            0.0
        } else {
            log_mag.exp()
        };
        let phase = -(n as f64) * omega0 * tau;
        sum += C64::from_polar(mag, phase);
    }
    Ok(sum)
}

/// Long-time excited-state population of the single-excitation delay
/// equation dc/dt = -G c(t) + G e^{+i 2 pi phase} c(t - tau) for t > tau
/// (plain decay before), integrated with a fixed-step fourth-order scheme
/// and cubic Hermite interpolation of the delayed value. The phase sign
/// matches the evolution engine; the population is invariant under
/// conjugation. Converged when |c|^2 changes by less than 1e-8 over one
/// round trip.
pub fn delay_steady_state(gamma_rate: f64, tau: f64, phase: f64) -> SimResult<f64> {
    delay_steady_state_with_resolution(gamma_rate, tau, phase, 1000)
}

/// Same as [`delay_steady_state`] with an explicit per-round-trip step
/// count (at least 1000 enforces dt <= tau / 1000).
pub fn delay_steady_state_with_resolution(
    gamma_rate: f64,
    tau: f64,
    phase: f64,
    steps_per_tau: usize,
) -> SimResult<f64> {
    if tau <= 0.0 || gamma_rate < 0.0 {
        return Err(SimError::InvalidParameter(
            "tau must be positive and the rate nonnegative".into(),
        ));
    }
    if steps_per_tau < 1000 {
        return Err(SimError::InvalidParameter(
            "the integrator resolves at least 1000 steps per round trip".into(),
        ));
    }
    if gamma_rate == 0.0 {
        return Ok(1.0);
    }
    let dt = tau / steps_per_tau as f64;
    let g = gamma_rate;
    let fb = C64::from_polar(g, 2.0 * std::f64::consts::PI * phase);
    let max_round_trips = 2000usize;

    let capacity = steps_per_tau * max_round_trips + 1;
    let mut c: Vec<C64> = Vec::with_capacity(capacity);
    let mut dc: Vec<C64> = Vec::with_capacity(capacity);
    c.push(C64::new(1.0, 0.0));
    dc.push(C64::new(-g, 0.0));

    // Hermite interpolation of the delayed amplitude halfway between grid
    // samples. All stage times sit on exact half-step positions, so only
    // the midpoint value is ever needed.
    let midpoint = |c: &[C64], dc: &[C64], k: usize| -> C64 {
        let (c0, c1, d0, d1) = (c[k], c[k + 1], dc[k] * dt, dc[k + 1] * dt);
        (c0 + c1) * 0.5 + (d0 - d1) * 0.125
    };

    // Stage clock in integer half-steps keeps the retarded switch exact:
    // the feedback turns on at position 2 * steps_per_tau, and a stage
    // evaluated at the end of the step crossing that point uses the left
    // limit, matching the integral over the step interior.
    let rhs = |y: C64, pos: usize, end_stage: bool, c: &[C64], dc: &[C64]| -> C64 {
        let mut out = -g * y;
        let onset = 2 * steps_per_tau;
        let active = if end_stage { pos > onset } else { pos >= onset };
        if active {
            let p = pos - onset;
            let value = if p % 2 == 0 {
                c[p / 2]
            } else {
                midpoint(c, dc, p / 2)
            };
            out += fb * value;
        }
        out
    };

    let mut block_max = f64::NEG_INFINITY;
    let mut block_min = f64::INFINITY;
    for k in 0..capacity - 1 {
        let y = c[k];
        let k1 = rhs(y, 2 * k, false, &c, &dc);
        let k2 = rhs(y + k1 * (0.5 * dt), 2 * k + 1, false, &c, &dc);
        let k3 = rhs(y + k2 * (0.5 * dt), 2 * k + 1, false, &c, &dc);
        let k4 = rhs(y + k3 * dt, 2 * k + 2, true, &c, &dc);
        let y_next = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        c.push(y_next);
        let d_next = rhs(y_next, 2 * (k + 1), false, &c, &dc);
        dc.push(d_next);

        let step_idx = k + 1;
        let pop = c[step_idx].norm_sqr();
        block_max = block_max.max(pop);
        block_min = block_min.min(pop);
        if step_idx % steps_per_tau == 0 {
            // Converged when the population varies by less than 1e-8 over a
            // full round trip; sampling the whole window avoids aliasing
            // with the oscillatory transient.
            if step_idx >= 2 * steps_per_tau && block_max - block_min < 1e-8 {
                return Ok(pop);
            }
            block_max = f64::NEG_INFINITY;
            block_min = f64::INFINITY;
        }
    }
    Err(SimError::NonConvergence(format!(
        "delay equation population still drifting after {max_round_trips} round trips"
    )))
}

fn bound_check(dim: usize, steps: usize, bound: u64) -> SimResult<()> {
    let mut size: u64 = 1;
    for _ in 0..steps {
        size = size.saturating_mul(dim as u64);
        if size > bound {
            return Err(SimError::SizeBound { size, bound });
        }
    }
    Ok(())
}

/// Literal nested sum over all Liouville index paths with the same
/// improved-memory boundary coefficients as the evolution engine. Returns
/// the reduced state after every step from 0 to `n_steps`.
pub fn brute_force_path_sum(
    model: &SystemModel,
    table: &EtaTable,
    rho0: ArrayView2<C64>,
    n_steps: usize,
) -> SimResult<Vec<Array2<C64>>> {
    let d = model.dimension;
    let d2 = d * d;
    bound_check(d2, n_steps + 1, 1 << 24)?;
    crate::tempo::check_density_matrix(rho0)?;
    let rho0v = crate::tempo::vectorize(rho0);
    let mtilde = liouville_propagator(model, table.dt);
    let n_c = table.n_c;

    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(rho0.to_owned());

    for n in 1..=n_steps {
        let mut rho_vec = vec![C64::new(0.0, 0.0); d2];
        let paths = d2.pow((n + 1) as u32);
        let mut path = vec![0usize; n + 1];
        for code in 0..paths {
            let mut cc = code;
            for slot in (0..=n).rev() {
                path[slot] = cc % d2;
                cc /= d2;
            }
            let mut w = rho0v[path[0]];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for s in 1..=n {
                w *= mtilde[[path[s], path[s - 1]]];
                let max_lag = (s - 1).min(n_c);
                for lag in 0..=max_lag {
                    w *= crate::bath::influence_factor(
                        table,
                        model,
                        lag,
                        path[s],
                        path[s - lag],
                        s,
                    )?;
                }
                // Self term at lag 0 couples the index to itself; the loop
                // above starts at lag 0 with path[s - 0] = path[s].
            }
            rho_vec[path[n]] += w;
        }
        let mut rho = Array2::<C64>::zeros((d, d));
        for i in 0..d {
            for ip in 0..d {
                rho[[i, ip]] = rho_vec[i * d + ip];
            }
        }
        out.push(rho);
    }
    Ok(out)
}

/// Second, independently ordered evaluation of the same discrete dynamics:
/// the full window tensor is evolved densely (no matrix-product
/// factorization, no path enumeration). Used to cross-check the path sum.
pub fn dense_window_evolution(
    model: &SystemModel,
    table: &EtaTable,
    rho0: ArrayView2<C64>,
    n_steps: usize,
) -> SimResult<Vec<Array2<C64>>> {
    let d = model.dimension;
    let d2 = d * d;
    bound_check(d2, table.n_c + 2, 1 << 24)?;
    crate::tempo::check_density_matrix(rho0)?;
    let mtilde = liouville_propagator(model, table.dt);
    let n_c = table.n_c;

    // Window holds indices (oldest, ..., current), row-major.
    let mut window: Vec<C64> = crate::tempo::vectorize(rho0);
    let mut window_len = 1usize;

    let reduce = |window: &Vec<C64>, window_len: usize| -> Array2<C64> {
        let mut rho = Array2::<C64>::zeros((d, d));
        let block = d2.pow((window_len - 1) as u32);
        for (flat, v) in window.iter().enumerate() {
            let j = flat % d2;
            let _ = block;
            rho[[j / d, j % d]] += *v;
        }
        rho
    };

    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(rho0.to_owned());

    for n in 1..=n_steps {
        if n > n_c {
            // Retire the oldest index.
            let tail_size = d2.pow((window_len - 1) as u32);
            let mut folded = vec![C64::new(0.0, 0.0); tail_size];
            for (flat, v) in window.iter().enumerate() {
                folded[flat % tail_size] += *v;
            }
            window = folded;
            window_len -= 1;
        }
        let old_size = d2.pow(window_len as u32);
        let new_size = old_size * d2;
        let mut next = vec![C64::new(0.0, 0.0); new_size];
        let mut digits = vec![0usize; window_len];
        for flat in 0..old_size {
            let w0 = window[flat];
            if w0 == C64::new(0.0, 0.0) {
                continue;
            }
            let mut cc = flat;
            for slot in (0..window_len).rev() {
                digits[slot] = cc % d2;
                cc /= d2;
            }
            let current = digits[window_len - 1];
            for jn in 0..d2 {
                let mut w = w0 * mtilde[[jn, current]];
                w *= crate::bath::influence_factor(table, model, 0, jn, jn, n)?;
                for (slot, &jm) in digits.iter().enumerate() {
                    let lag = window_len - slot;
                    let partner = n as isize - lag as isize;
                    if partner >= 1 && lag <= n_c {
                        w *= crate::bath::influence_factor(table, model, lag, jn, jm, n)?;
                    }
                }
                next[flat * d2 + jn] += w;
            }
        }
        window = next;
        window_len += 1;
        out.push(reduce(&window, window_len));
    }
    Ok(out)
}

/// Dense Liouville-space evolution of the feedback problem: the same
/// per-step three-site gate embedded in the full product space of every
/// bin, with no matrix-product factorization. Axis order of the returned
/// vectors: (memory bins oldest first, system, present bins oldest first),
/// each factor packed row-major.
pub fn dense_liouville_evolution(
    cfg: &FeedbackConfig,
    steps: usize,
    rho0: ArrayView2<C64>,
) -> SimResult<Vec<Array1<C64>>> {
    cfg.validate()?;
    crate::tempo::check_density_matrix(rho0)?;
    let d2 = 4usize;
    let b = cfg.bin_dim();
    let total_bins = cfg.n_d + steps;
    let mut size: u64 = d2 as u64;
    for _ in 0..total_bins {
        size = size.saturating_mul(b as u64);
        if size > (1 << 20) {
            return Err(SimError::SizeBound {
                size,
                bound: 1 << 20,
            });
        }
    }

    let gate = step_gate(cfg)?;
    let gate6 = DenseTensor::from_array(gate.matrix().clone().into_dyn())
        .reshape(&[b, d2, b, b, d2, b])?;

    // One axis per factor: [m_1 .. m_{n_d}, system, p_1 .. p_steps].
    let n_axes = cfg.n_d + 1 + steps;
    let sys_axis = cfg.n_d;
    let mut shape = vec![b; n_axes];
    shape[sys_axis] = d2;
    let mut state = DenseTensor::zeros(&shape);
    {
        // All bins in vacuum, system in rho0.
        let rv = crate::tempo::vectorize(rho0);
        let stride: usize = shape[sys_axis + 1..].iter().product();
        let vals = state.values_mut();
        for (j, v) in rv.iter().enumerate() {
            vals[j * stride] = *v;
        }
    }

    let mut out = Vec::with_capacity(steps + 1);
    out.push(Array1::from_vec(state.values().to_vec()));

    for n in 1..=steps {
        let mem_axis = if n <= cfg.n_d { n - 1 } else { n };
        let pres_axis = sys_axis + n;
        let contracted = contract(&gate6, &state, &[(3, mem_axis), (4, sys_axis), (5, pres_axis)])?;
        // Result axes: (mem', sys', pres', untouched...). Restore order.
        let mut perm = vec![0usize; n_axes];
        let mut untouched = Vec::with_capacity(n_axes - 3);
        for ax in 0..n_axes {
            if ax != mem_axis && ax != sys_axis && ax != pres_axis {
                untouched.push(ax);
            }
        }
        for (dest, item) in perm.iter_mut().enumerate() {
            *item = if dest == mem_axis {
                0
            } else if dest == sys_axis {
                1
            } else if dest == pres_axis {
                2
            } else {
                3 + untouched.iter().position(|&a| a == dest).unwrap()
            };
        }
        state = contracted.permute(&perm)?;
        out.push(Array1::from_vec(state.values().to_vec()));
    }
    Ok(out)
}

/// Reduces a full Liouville vector from [`dense_liouville_evolution`] to
/// the system density matrix by tracing every bin factor.
pub fn dense_reduced_system(
    vector: ArrayView1<C64>,
    cfg: &FeedbackConfig,
    steps: usize,
) -> SimResult<Array2<C64>> {
    let b = cfg.bin_dim();
    let p = cfg.n_ph + 1;
    let d2 = 4usize;
    let n_axes = cfg.n_d + 1 + steps;
    let sys_axis = cfg.n_d;
    let mut shape = vec![b; n_axes];
    shape[sys_axis] = d2;
    let mut t = DenseTensor::from_vec(&shape, vector.to_vec())?;
    let trace_bin = DenseTensor::from_vec(
        &[b],
        (0..b)
            .map(|j| {
                if j / p == j % p {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect(),
    )?;
    // Trace bins from the last axis backward to keep axis numbering stable.
    for ax in (0..n_axes).rev() {
        if ax != sys_axis {
            t = contract(&t, &trace_bin, &[(ax, 0)])?;
        }
    }
    let v = t.values();
    let mut rho = Array2::<C64>::zeros((2, 2));
    for i in 0..2 {
        for ip in 0..2 {
            rho[[i, ip]] = v[i * 2 + ip];
        }
    }
    Ok(rho)
}

/// Scaling-and-squaring matrix exponential, independent of the truncated
/// series used by the engines.
pub fn matrix_exponential(m: &Array2<C64>) -> Array2<C64> {
    let norm: f64 = m
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 1.0 / 2f64.powi(s as i32);
    let scaled = m.mapv(|v| v * scale);
    let dim = m.nrows();
    let mut sum = Array2::<C64>::eye(dim);
    let mut term = Array2::<C64>::eye(dim);
    for k in 1..=24 {
        term = term.dot(&scaled).mapv(|v| v / k as f64);
        sum = sum + &term;
    }
    for _ in 0..s {
        sum = sum.dot(&sum);
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{eta_coefficients, SpectralDensity};

    fn ohmic_kernel(t: f64) -> CorrelationKernel {
        CorrelationKernel::new(t, SpectralDensity::ohmic(0.1, 2.0), 500, 24, None).unwrap()
    }

    #[test]
    fn ibm_at_zero_time_is_initial_coherence() {
        let kernel = ohmic_kernel(77.0);
        let rho01 = C64::new(0.0, 0.5);
        let got = ibm_analytic(&kernel, rho01, 0.0).unwrap();
        assert!((got - rho01).norm() < 1e-12);
    }

    #[test]
    fn ibm_decoupled_is_constant() {
        let kernel =
            CorrelationKernel::new(4.0, SpectralDensity::none(), 64, 8, Some(10.0)).unwrap();
        let rho01 = C64::new(0.3, -0.2);
        for t in [0.5, 2.0, 7.0] {
            let got = ibm_analytic(&kernel, rho01, t).unwrap();
            assert!((got - rho01).norm() < 1e-14);
        }
    }

    #[test]
    fn ibm_converges_under_quadrature_refinement() {
        let coarse = ohmic_kernel(77.0);
        let fine = CorrelationKernel::new(
            77.0,
            SpectralDensity::ohmic(0.1, 2.0),
            1000,
            24,
            Some(coarse.omega_max),
        )
        .unwrap();
        let a = ibm_analytic(&coarse, C64::new(0.0, 0.5), 1.0).unwrap();
        let b = ibm_analytic(&fine, C64::new(0.0, 0.5), 1.0).unwrap();
        assert!((a - b).norm() / b.norm() < 1e-9);
    }

    #[test]
    fn ibm_modulus_never_exceeds_initial_and_decreases() {
        let kernel = ohmic_kernel(77.0);
        let rho01 = C64::new(0.0, 0.5);
        let mut prev = 0.5f64;
        for k in 1..=30 {
            let t = 0.1 * k as f64;
            let v = ibm_analytic(&kernel, rho01, t).unwrap().norm();
            assert!(v <= 0.5 + 1e-12);
            assert!(v <= prev + 1e-10, "modulus grew at t={t}");
            prev = v;
        }
    }

    #[test]
    fn feedback_series_before_first_return_is_plain_decay() {
        let (g, tau) = (0.9, 1.2);
        for t in [0.0, 0.3, 1.0] {
            let v = feedback_analytic(g, tau, 5.0, t).unwrap();
            assert!((v.norm() - (-g * t).exp()).abs() < 1e-13);
        }
        assert!((feedback_analytic(g, tau, 5.0, 0.0).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn feedback_series_matches_direct_two_term_evaluation() {
        // Hand-evaluated n = 0 and n = 1 terms at an integer phase.
        let (g, tau, t) = (1.0, 3.0, 4.0);
        let omega0 = 2.0 * std::f64::consts::PI * 3.0 / tau; // phase = 3
        let direct = (-g * t as f64).exp() * (1.0 + g * (g * tau).exp() * (t - tau));
        let got = feedback_analytic(g, tau, omega0, t).unwrap();
        assert!((got.re - direct).abs() < 1e-12 * direct);
        assert!(got.im.abs() < 1e-9);
    }

    #[test]
    fn feedback_series_is_continuous_at_onsets() {
        let (g, tau, w0) = (0.9, 1.2, 2.7);
        for n in 1..=3 {
            let t = n as f64 * tau;
            let left = feedback_analytic(g, tau, w0, t - 1e-9).unwrap();
            let right = feedback_analytic(g, tau, w0, t + 1e-9).unwrap();
            assert!((left - right).norm() < 1e-7);
        }
    }

    #[test]
    fn delay_equation_without_decay_returns_unity() {
        assert_eq!(delay_steady_state(0.0, 1.2, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn delay_equation_plateau_matches_series_partial_sums() {
        let (g, tau) = (1.0 / 1.2, 1.2); // gamma_rate * tau = 1
        let plateau = delay_steady_state(g, tau, 1.0).unwrap();
        // Constructive interference pins the amplitude at 1/(1 + G tau).
        let series_tail = feedback_analytic(g, tau, 2.0 * std::f64::consts::PI / tau, 20.0 * tau)
            .unwrap()
            .norm_sqr();
        assert!(
            (plateau - series_tail).abs() < 1e-3,
            "{plateau} vs {series_tail}"
        );
        let closed = 1.0 / (1.0 + g * tau).powi(2);
        assert!((plateau - closed).abs() < 1e-4, "{plateau} vs {closed}");
    }

    #[test]
    fn delay_equation_antiphase_empties_the_emitter() {
        let v = delay_steady_state(0.9, 1.2, 0.5).unwrap();
        assert!(v < 1e-6, "population {v}");
    }

    #[test]
    fn delay_equation_invariant_under_step_halving() {
        let a = delay_steady_state_with_resolution(0.9, 1.2, 1.0, 1000).unwrap();
        let b = delay_steady_state_with_resolution(0.9, 1.2, 1.0, 2000).unwrap();
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn matrix_exponential_agrees_with_series_on_small_input() {
        let m = array![
            [C64::new(0.1, 0.2), C64::new(0.0, -0.3)],
            [C64::new(0.2, 0.0), C64::new(-0.1, 0.1)]
        ];
        let e = matrix_exponential(&m);
        // Direct series at this norm converges quickly.
        let mut sum = Array2::<C64>::eye(2);
        let mut term = Array2::<C64>::eye(2);
        for k in 1..30 {
            term = term.dot(&m).mapv(|v| v / k as f64);
            sum = sum + &term;
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((e[[i, j]] - sum[[i, j]]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn path_sum_single_step_is_propagator_with_self_term() {
        let kernel = ohmic_kernel(77.0);
        let table = eta_coefficients(&kernel, 0.1, 3, 2).unwrap();
        let model = SystemModel::two_level(0.0, 0.4);
        let mut rho0 = Array2::<C64>::zeros((2, 2));
        rho0[[0, 0]] = C64::new(0.2, 0.0);
        rho0[[1, 1]] = C64::new(0.8, 0.0);
        rho0[[0, 1]] = C64::new(0.1, 0.3);
        rho0[[1, 0]] = C64::new(0.1, -0.3);
        let states = brute_force_path_sum(&model, &table, rho0.view(), 1).unwrap();

        let mtilde = liouville_propagator(&model, 0.1);
        let rv = crate::tempo::vectorize(rho0.view());
        let mut expected = vec![C64::new(0.0, 0.0); 4];
        for jn in 0..4 {
            let self_term =
                crate::bath::influence_factor(&table, &model, 0, jn, jn, 1).unwrap();
            for j0 in 0..4 {
                expected[jn] += mtilde[[jn, j0]] * self_term * rv[j0];
            }
        }
        for jn in 0..4 {
            let got = states[1][[jn / 2, jn % 2]];
            assert!((got - expected[jn]).norm() < 1e-14);
        }
    }

    #[test]
    fn path_sum_without_memory_is_repeated_propagation() {
        let kernel =
            CorrelationKernel::new(4.0, SpectralDensity::none(), 32, 8, Some(5.0)).unwrap();
        let table = eta_coefficients(&kernel, 0.1, 4, 2).unwrap();
        let model = SystemModel::two_level(0.0, 0.5);
        let mut rho0 = Array2::<C64>::zeros((2, 2));
        rho0[[1, 1]] = C64::new(1.0, 0.0);
        let states = brute_force_path_sum(&model, &table, rho0.view(), 4).unwrap();

        let m = crate::bath::system_propagator(&model, 0.1);
        let mdag = m.t().mapv(|v| v.conj());
        let mut expected = rho0.clone();
        for n in 1..=4 {
            expected = m.dot(&expected).dot(&mdag);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((states[n][[i, j]] - expected[[i, j]]).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn path_sum_and_dense_window_agree() {
        // Two independent loop orders over the same discrete dynamics.
        let kernel = ohmic_kernel(300.0);
        let table = eta_coefficients(&kernel, 0.1, 5, 3).unwrap();
        let model = SystemModel::two_level(0.0, 0.5);
        let mut rho0 = Array2::<C64>::zeros((2, 2));
        rho0[[1, 1]] = C64::new(1.0, 0.0);
        let a = brute_force_path_sum(&model, &table, rho0.view(), 5).unwrap();
        let b = dense_window_evolution(&model, &table, rho0.view(), 5).unwrap();
        for n in 0..=5 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (a[n][[i, j]] - b[n][[i, j]]).norm() < 1e-12,
                        "step {n} element ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn path_sum_enforces_size_bound() {
        let kernel = ohmic_kernel(77.0);
        let table = eta_coefficients(&kernel, 0.1, 40, 4).unwrap();
        let model = SystemModel::two_level(0.0, 0.0);
        let mut rho0 = Array2::<C64>::zeros((2, 2));
        rho0[[1, 1]] = C64::new(1.0, 0.0);
        assert!(matches!(
            brute_force_path_sum(&model, &table, rho0.view(), 40),
            Err(SimError::SizeBound { .. })
        ));
    }

    #[test]
    fn dense_liouville_constant_without_coupling() {
        let cfg = FeedbackConfig::new(0.0, 1.0, 2, 0.0);
        let mut rho0 = Array2::<C64>::zeros((2, 2));
        rho0[[1, 1]] = C64::new(1.0, 0.0);
        let states = dense_liouville_evolution(&cfg, 3, rho0.view()).unwrap();
        for n in 1..states.len() {
            for (a, b) in states[n].iter().zip(states[0].iter()) {
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn dense_liouville_preserves_trace() {
        let cfg = FeedbackConfig::new(0.9, 1.2, 2, 0.3);
        let mut rho0 = Array2::<C64>::zeros((2, 2));
        rho0[[1, 1]] = C64::new(1.0, 0.0);
        let states = dense_liouville_evolution(&cfg, 4, rho0.view()).unwrap();
        for (n, v) in states.iter().enumerate() {
            let rho = dense_reduced_system(v.view(), &cfg, 4).unwrap();
            let tr = rho[[0, 0]] + rho[[1, 1]];
            assert!(
                (tr - C64::new(1.0, 0.0)).norm() < 1e-12,
                "trace defect at step {n}"
            );
        }
    }

    #[test]
    fn dense_liouville_enforces_size_bound() {
        let cfg = FeedbackConfig::new(0.9, 1.2, 4, 0.3);
        let mut rho0 = Array2::<C64>::zeros((2, 2));
        rho0[[1, 1]] = C64::new(1.0, 0.0);
        assert!(matches!(
            dense_liouville_evolution(&cfg, 10, rho0.view()),
            Err(SimError::SizeBound { .. })
        ));
    }
}
