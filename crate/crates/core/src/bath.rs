//! Continuous-reservoir ingredients: spectral densities, the bath
//! autocorrelation function, discretized memory coefficients with an
//! improved finite-memory tail, influence factors, and the free system
//! propagator.
//!
//! All frequencies are angular and carried in inverse picoseconds with
//! ħ = 1; temperature enters only through ħω/(k_B T) via
//! [`crate::HBAR_OVER_KB_K_PS`].

use ndarray::prelude::*;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{SimError, SimResult};
use crate::quad::gauss_legendre_scaled;
use crate::HBAR_OVER_KB_K_PS;

/// Frequency cutoff shape of the parametric spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffForm {
    /// exp(-omega/omega_c)
    Exponential,
    /// exp(-(omega/omega_c)^2)
    Gaussian,
}

/// Deformation-potential parameters for bulk acoustic phonons coupled to a
/// confined two-level emitter. The two bands enter through the difference of
/// their coupling elements.
///
/// These are configuration inputs; the bundled example values follow common
/// GaAs literature numbers and are not normative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulkPhononParams {
    /// Deformation potentials, eV.
    pub d1_ev: f64,
    pub d2_ev: f64,
    /// Effective masses in units of the free-electron mass.
    pub m1_me: f64,
    pub m2_me: f64,
    /// Confinement energies ħω_i, meV.
    pub e1_mev: f64,
    pub e2_mev: f64,
    /// Mass density, kg/m^3.
    pub density_kg_m3: f64,
    /// Sound velocity, m/s.
    pub sound_velocity_m_s: f64,
}

impl BulkPhononParams {
    /// Example GaAs-like parameter set (non-normative).
    pub fn gaas_example() -> Self {
        Self {
            d1_ev: -3.5,
            d2_ev: 7.0,
            m1_me: 0.51,
            m2_me: 0.063,
            e1_mev: 25.0,
            e2_mev: 40.0,
            density_kg_m3: 5370.0,
            sound_velocity_m_s: 5110.0,
        }
    }
}

/// Frequency-resolved squared coupling of the continuous reservoir.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    /// J(omega) = 2 alpha omega^s omega_c^{1-s} exp(-(omega/omega_c)^p)
    Parametric {
        alpha: f64,
        exponent: f64,
        omega_c: f64,
        cutoff: CutoffForm,
    },
    /// Bulk acoustic phonon coupling with two confined bands.
    GaasBulk(BulkPhononParams),
}

const HBAR_SI: f64 = 1.054_571_817e-34; // J s
const EV_SI: f64 = 1.602_176_634e-19; // J
const ELECTRON_MASS_SI: f64 = 9.109_383_7015e-31; // kg

impl SpectralDensity {
    pub fn ohmic(alpha: f64, omega_c: f64) -> Self {
        Self::Parametric {
            alpha,
            exponent: 1.0,
            omega_c,
            cutoff: CutoffForm::Exponential,
        }
    }

    pub fn super_ohmic_gaussian(alpha: f64, omega_c: f64) -> Self {
        Self::Parametric {
            alpha,
            exponent: 3.0,
            omega_c,
            cutoff: CutoffForm::Gaussian,
        }
    }

    /// A vanishing coupling; useful to switch the reservoir off.
    pub fn none() -> Self {
        Self::Parametric {
            alpha: 0.0,
            exponent: 1.0,
            omega_c: 1.0,
            cutoff: CutoffForm::Exponential,
        }
    }

    pub fn validate(&self) -> SimResult<()> {
        match self {
            Self::Parametric {
                alpha,
                exponent,
                omega_c,
                ..
            } => {
                if *alpha < 0.0 || *omega_c <= 0.0 || *exponent <= 0.0 {
                    return Err(SimError::InvalidParameter(format!(
                        "parametric spectral density needs alpha >= 0, omega_c > 0, s > 0 (got alpha={alpha}, s={exponent}, omega_c={omega_c})"
                    )));
                }
            }
            Self::GaasBulk(p) => {
                if p.m1_me <= 0.0
                    || p.m2_me <= 0.0
                    || p.e1_mev <= 0.0
                    || p.e2_mev <= 0.0
                    || p.density_kg_m3 <= 0.0
                    || p.sound_velocity_m_s <= 0.0
                {
                    return Err(SimError::InvalidParameter(
                        "bulk phonon parameters must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// J(omega) in ps^-1 for omega >= 0 in ps^-1. J(0) = 0 for every kind.
    pub fn value(&self, omega: f64) -> SimResult<f64> {
        if omega < 0.0 {
            return Err(SimError::InvalidParameter(format!(
                "spectral density evaluated at negative frequency {omega}"
            )));
        }
        if omega == 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            Self::Parametric {
                alpha,
                exponent,
                omega_c,
                cutoff,
            } => {
                let damp = match cutoff {
                    CutoffForm::Exponential => (-omega / omega_c).exp(),
                    CutoffForm::Gaussian => (-(omega / omega_c).powi(2)).exp(),
                };
                2.0 * alpha * omega.powf(*exponent) * omega_c.powf(1.0 - exponent) * damp
            }
            Self::GaasBulk(p) => {
                // Work in SI, convert the rate density to ps^-1 at the end.
                let omega_si = omega * 1e12;
                let q = omega_si / p.sound_velocity_m_s; // 1/m
                let prefactor = HBAR_SI * q / (2.0 * p.density_kg_m3 * p.sound_velocity_m_s); // m^3
                let band = |d_ev: f64, m_me: f64, e_mev: f64| -> f64 {
                    let omega_conf = e_mev * 1e-3 * EV_SI / HBAR_SI; // rad/s
                    let mass = m_me * ELECTRON_MASS_SI;
                    let gauss = (-HBAR_SI * q * q / (4.0 * mass * omega_conf)).exp();
                    (d_ev * EV_SI / HBAR_SI) * gauss
                };
                let g = prefactor.sqrt() * (band(p.d2_ev, p.m2_me, p.e2_mev)
                    - band(p.d1_ev, p.m1_me, p.e1_mev)); // m^{3/2}/s
                let j_si = 4.0 * std::f64::consts::PI * q * q * g * g / p.sound_velocity_m_s; // 1/s
                j_si * 1e-12
            }
        })
    }
}

/// Bath autocorrelation function phi(t) of a spectral density at a given
/// temperature, evaluated by Gauss-Legendre quadrature on [0, omega_max].
#[derive(Debug, Clone)]
pub struct CorrelationKernel {
    pub temperature: f64,
    pub density: SpectralDensity,
    pub omega_max: f64,
    /// Node count for the frequency integral.
    pub freq_nodes: usize,
    /// Per-axis node count for the two-dimensional cell integrals of the
    /// memory coefficients.
    pub cell_nodes: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    boltzmann_weighted: Vec<f64>,
}

impl CorrelationKernel {
    /// Builds a kernel; `omega_max = None` picks the smallest grid bound at
    /// which the thermally weighted spectral density has decayed to 1e-13 of
    /// its peak.
    pub fn new(
        temperature: f64,
        density: SpectralDensity,
        freq_nodes: usize,
        cell_nodes: usize,
        omega_max: Option<f64>,
    ) -> SimResult<Self> {
        if temperature < 0.0 {
            return Err(SimError::InvalidParameter(format!(
                "temperature {temperature} K is negative"
            )));
        }
        if freq_nodes == 0 || cell_nodes == 0 {
            return Err(SimError::InvalidParameter(
                "quadrature node counts must be positive".into(),
            ));
        }
        density.validate()?;

        let weighted = |omega: f64| -> f64 {
            let j = density.value(omega).unwrap_or(0.0);
            j * coth_half(omega, temperature)
        };
        let omega_max = match omega_max {
            Some(v) => v,
            None => auto_omega_max(&weighted),
        };
        // The grid bound must dominate the thermally weighted tail.
        let peak = scan_peak(&weighted, omega_max);
        if peak > 0.0 && weighted(omega_max) > 1e-12 * peak {
            return Err(SimError::InvalidParameter(format!(
                "omega_max = {omega_max} ps^-1 truncates the thermally weighted spectral density above 1e-12 of its peak"
            )));
        }

        let (nodes, weights) = gauss_legendre_scaled(freq_nodes, 0.0, omega_max);
        let boltzmann_weighted = nodes
            .iter()
            .map(|&w| density.value(w).unwrap_or(0.0) * coth_half(w, temperature))
            .collect();
        Ok(Self {
            temperature,
            density,
            omega_max,
            freq_nodes,
            cell_nodes,
            nodes,
            weights,
            boltzmann_weighted,
        })
    }

    /// phi(t) = int dw J(w) [coth(hw / 2 k_B T) cos(wt) - i sin(wt)].
    pub fn phi(&self, t: f64) -> C64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (k, (&w, &gw)) in self.nodes.iter().zip(self.weights.iter()).enumerate() {
            let j = self.density.value(w).unwrap_or(0.0);
            let (s, c) = (w * t).sin_cos();
            re += gw * self.boltzmann_weighted[k] * c;
            im -= gw * j * s;
        }
        C64::new(re, im)
    }
}

fn coth_half(omega: f64, temperature: f64) -> f64 {
    // coth(h omega / 2 k_B T); the T = 0 limit is 1 for omega > 0.
    if temperature == 0.0 || omega == 0.0 {
        return 1.0;
    }
    let x = HBAR_OVER_KB_K_PS * omega / (2.0 * temperature);
    1.0 / x.tanh()
}

fn scan_peak(f: &impl Fn(f64) -> f64, omega_max: f64) -> f64 {
    (1..=4000)
        .map(|i| f(omega_max * i as f64 / 4000.0))
        .fold(0.0, f64::max)
}

fn auto_omega_max(f: &impl Fn(f64) -> f64) -> f64 {
    let mut hi = 1.0;
    loop {
        let peak = scan_peak(f, hi);
        if peak == 0.0 {
            return 1.0;
        }
        if f(hi) <= 1e-13 * peak {
            return hi;
        }
        hi *= 2.0;
        if hi > 1e9 {
            return hi;
        }
    }
}

/// Discretized bath-memory coefficients eta_k and their cumulative tail.
///
/// `eta[k]` is the double time integral of phi over two step-size cells at
/// lag k; the lag-0 cell integrates the time-ordered triangle so that pure
/// dephasing reproduces the closed-form coherence decay at any step size.
/// `tail[n]` folds all lags beyond the memory depth into the boundary
/// coefficient at step n.
#[derive(Debug, Clone)]
pub struct EtaTable {
    pub dt: f64,
    pub n_c: usize,
    eta: Vec<C64>,
    tail: Vec<C64>,
}

impl EtaTable {
    pub fn eta(&self, lag: usize) -> C64 {
        self.eta[lag]
    }

    pub fn tail(&self, step: usize) -> C64 {
        self.tail[step]
    }

    pub fn max_step(&self) -> usize {
        self.tail.len() - 1
    }

    /// Coefficient applied at `lag` during step `n`: the plain cell integral
    /// inside the window, the tail-augmented boundary value at the window
    /// edge.
    pub fn eta_effective(&self, lag: usize, step: usize) -> SimResult<C64> {
        if lag > self.n_c {
            return Err(SimError::LagOutOfWindow {
                lag,
                n_c: self.n_c,
            });
        }
        if lag == self.n_c {
            Ok(self.eta[lag] + self.tail[step.min(self.tail.len() - 1)])
        } else {
            Ok(self.eta[lag])
        }
    }
}

/// Builds the memory-coefficient table for `n_steps` evolution steps with
/// memory depth `n_c`, using tensorized Gauss-Legendre quadrature over each
/// time cell.
pub fn eta_coefficients(
    kernel: &CorrelationKernel,
    dt: f64,
    n_steps: usize,
    n_c: usize,
) -> SimResult<EtaTable> {
    if dt <= 0.0 {
        return Err(SimError::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    if n_c == 0 || n_c > n_steps {
        return Err(SimError::InvalidParameter(format!(
            "memory depth n_c = {n_c} outside [1, n_steps = {n_steps}]"
        )));
    }
    let m = kernel.cell_nodes;
    let (u, wu) = gauss_legendre_scaled(m, 0.0, dt);
    // Unit-interval nodes for the triangle map of the lag-0 cell.
    let (s, ws) = gauss_legendre_scaled(m, 0.0, 1.0);

    let eta: Vec<C64> = (0..=n_steps)
        .into_par_iter()
        .map(|k| {
            let mut acc = C64::new(0.0, 0.0);
            if k == 0 {
                // Ordered triangle 0 <= v <= u <= dt, v = u * s.
                for (i, &ui) in u.iter().enumerate() {
                    for (j, &sj) in s.iter().enumerate() {
                        acc += wu[i] * ws[j] * ui * kernel.phi(ui * (1.0 - sj));
                    }
                }
            } else {
                for (i, &ui) in u.iter().enumerate() {
                    for (j, &vj) in u.iter().enumerate() {
                        acc += wu[i] * wu[j] * kernel.phi(k as f64 * dt + ui - vj);
                    }
                }
            }
            acc
        })
        .collect();

    let mut tail = vec![C64::new(0.0, 0.0); n_steps + 1];
    for n in 1..=n_steps {
        tail[n] = tail[n - 1]
            + if n >= n_c + 2 {
                eta[n - 1]
            } else {
                C64::new(0.0, 0.0)
            };
    }

    Ok(EtaTable { dt, n_c, eta, tail })
}

/// Two-level system with a diagonal bath-coupling operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    /// Hilbert-space dimension (two for everything in this crate).
    pub dimension: usize,
    /// Eigenvalues of the diagonal coupling operator, one per level.
    pub coupling: Vec<f64>,
    /// Level splitting in the chosen frame, ps^-1.
    pub omega0: f64,
    /// Continuous driving amplitude, ps^-1.
    pub rabi: f64,
}

impl SystemModel {
    /// Two-level emitter coupled through the excited-state projector.
    pub fn two_level(omega0: f64, rabi: f64) -> Self {
        Self {
            dimension: 2,
            coupling: vec![0.0, 1.0],
            omega0,
            rabi,
        }
    }

    pub fn liouville_dim(&self) -> usize {
        self.dimension * self.dimension
    }

    /// Packs (row, column) into the fixed Liouville index i * d + i'.
    pub fn pack(&self, i: usize, ip: usize) -> usize {
        i * self.dimension + ip
    }

    pub fn unpack(&self, j: usize) -> (usize, usize) {
        (j / self.dimension, j % self.dimension)
    }
}

/// Influence-functional factor coupling Liouville index `j` at the current
/// step to `jp` at `lag` steps earlier:
/// exp(-(k_i - k_i')(eta k_m - conj(eta) k_m')) with the effective boundary
/// coefficient at the window edge. Diagonal indices give exactly one.
pub fn influence_factor(
    table: &EtaTable,
    model: &SystemModel,
    lag: usize,
    j: usize,
    jp: usize,
    step: usize,
) -> SimResult<C64> {
    let d2 = model.liouville_dim();
    if j >= d2 || jp >= d2 {
        return Err(SimError::InvalidParameter(format!(
            "Liouville index out of range: {j}, {jp} for dimension {d2}"
        )));
    }
    let eta = table.eta_effective(lag, step)?;
    let (i, ipr) = model.unpack(j);
    let (m, mpr) = model.unpack(jp);
    let diff = model.coupling[i] - model.coupling[ipr];
    if diff == 0.0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let exponent = -diff * (eta * model.coupling[m] - eta.conj() * model.coupling[mpr]);
    Ok(exponent.exp())
}

/// Free propagator M = exp(-i H dt) with H = omega0 |1><1| + rabi (sx),
/// evaluated in closed form for two levels.
pub fn system_propagator(model: &SystemModel, dt: f64) -> Array2<C64> {
    assert_eq!(model.dimension, 2, "closed-form propagator is two-level");
    let a = 0.5 * model.omega0;
    let bx = model.rabi;
    let bz = -0.5 * model.omega0;
    let b = (bx * bx + bz * bz).sqrt();
    let phase = C64::new(0.0, -a * dt).exp();
    if b == 0.0 {
        return Array2::eye(2) * phase;
    }
    let (cs, sn) = ((b * dt).cos(), (b * dt).sin());
    let i = C64::new(0.0, 1.0);
    let nx = bx / b;
    let nz = bz / b;
    let mut m = Array2::<C64>::zeros((2, 2));
    m[[0, 0]] = phase * (C64::new(cs, 0.0) - i * sn * nz);
    m[[0, 1]] = phase * (-i * sn * nx);
    m[[1, 0]] = phase * (-i * sn * nx);
    m[[1, 1]] = phase * (C64::new(cs, 0.0) + i * sn * nz);
    m
}

/// Liouville-space propagator acting on row-major vectorized density
/// matrices: rho -> M rho M^dagger becomes kron(M, conj(M)).
pub fn liouville_propagator(model: &SystemModel, dt: f64) -> Array2<C64> {
    let m = system_propagator(model, dt);
    kron_conj(&m)
}

fn kron_conj(m: &Array2<C64>) -> Array2<C64> {
    let d = m.nrows();
    let mut out = Array2::<C64>::zeros((d * d, d * d));
    for i in 0..d {
        for ip in 0..d {
            for k in 0..d {
                for kp in 0..d {
                    out[[i * d + ip, k * d + kp]] = m[[i, k]] * m[[ip, kp]].conj();
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ohmic_kernel(temperature: f64) -> CorrelationKernel {
        CorrelationKernel::new(
            temperature,
            SpectralDensity::ohmic(0.1, 2.0),
            400,
            24,
            None,
        )
        .unwrap()
    }

    #[test]
    fn parametric_value_matches_formula() {
        let j = SpectralDensity::Parametric {
            alpha: 0.1,
            exponent: 1.0,
            omega_c: 2.0,
            cutoff: CutoffForm::Exponential,
        };
        let got = j.value(2.0).unwrap();
        let expected = 0.4 * (-1.0f64).exp();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.14715).abs() < 1e-5);
    }

    #[test]
    fn spectral_density_vanishes_at_zero() {
        let j = SpectralDensity::super_ohmic_gaussian(0.3, 1.5);
        assert_eq!(j.value(0.0).unwrap(), 0.0);
        let g = SpectralDensity::GaasBulk(BulkPhononParams::gaas_example());
        assert_eq!(g.value(0.0).unwrap(), 0.0);
        assert!(j.value(-1.0).is_err());
    }

    #[test]
    fn gaas_value_matches_independent_evaluation() {
        // Same physics written out from scratch in SI units, with its own
        // constant values.
        let p = BulkPhononParams::gaas_example();
        let hbar = 1.054571817e-34;
        let ev = 1.602176634e-19;
        let me = 9.1093837015e-31;
        let omega_ps = 3.7; // ps^-1
        let omega = omega_ps * 1e12;
        let q = omega / p.sound_velocity_m_s;
        let g_band = |d: f64, m: f64, e: f64| {
            (hbar * q / (2.0 * p.density_kg_m3 * p.sound_velocity_m_s)).sqrt()
                * (d * ev / hbar)
                * (-hbar * q * q / (4.0 * m * me * (e * 1e-3 * ev / hbar))).exp()
        };
        let g = g_band(p.d2_ev, p.m2_me, p.e2_mev) - g_band(p.d1_ev, p.m1_me, p.e1_mev);
        let j_expected = 4.0 * std::f64::consts::PI * q * q * g * g / p.sound_velocity_m_s * 1e-12;

        let j = SpectralDensity::GaasBulk(p);
        let got = j.value(omega_ps).unwrap();
        assert!(
            ((got - j_expected) / j_expected).abs() < 1e-12,
            "{got} vs {j_expected}"
        );
        assert!(got >= 0.0);
    }

    #[test]
    fn hbar_over_kb_matches_codata_to_four_figures() {
        let ratio = 1.054571817e-34 / 1.380649e-23 * 1e12; // K ps
        assert!((ratio - HBAR_OVER_KB_K_PS).abs() / ratio < 5e-5);
    }

    #[test]
    fn phi_vanishes_for_decoupled_bath() {
        let kernel =
            CorrelationKernel::new(77.0, SpectralDensity::none(), 64, 8, Some(10.0)).unwrap();
        for t in [0.0, 0.3, 2.0] {
            assert_eq!(kernel.phi(t), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn phi_is_hermitian_in_time() {
        let kernel = ohmic_kernel(77.0);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let t = rng.gen_range(-5.0..5.0);
            let a = kernel.phi(t);
            let b = kernel.phi(-t).conj();
            assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn phi_converges_under_node_doubling() {
        let coarse = CorrelationKernel::new(
            0.0,
            SpectralDensity::ohmic(0.2, 2.0),
            300,
            8,
            None,
        )
        .unwrap();
        let fine = CorrelationKernel::new(
            0.0,
            SpectralDensity::ohmic(0.2, 2.0),
            600,
            8,
            Some(coarse.omega_max),
        )
        .unwrap();
        for t in [0.1, 0.7, 1.9] {
            let a = coarse.phi(t);
            let b = fine.phi(t);
            assert!((a - b).norm() / b.norm() < 1e-8, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn eta_all_zero_for_decoupled_bath() {
        let kernel =
            CorrelationKernel::new(4.0, SpectralDensity::none(), 32, 8, Some(10.0)).unwrap();
        let table = eta_coefficients(&kernel, 0.1, 6, 3).unwrap();
        for k in 0..=6 {
            assert_eq!(table.eta(k), C64::new(0.0, 0.0));
        }
        for n in 0..=6 {
            assert_eq!(table.tail(n), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn tail_bookkeeping_matches_definition() {
        let kernel = ohmic_kernel(77.0);
        let n_c = 3;
        let table = eta_coefficients(&kernel, 0.1, 10, n_c).unwrap();
        assert_eq!(table.tail(n_c + 1), C64::new(0.0, 0.0));
        assert!((table.tail(n_c + 2) - table.eta(n_c + 1)).norm() < 1e-15);
        // Direct sum for a later step.
        let n = 8;
        let mut expected = C64::new(0.0, 0.0);
        for k in n_c + 1..n {
            expected += table.eta(k);
        }
        assert!((table.tail(n) - expected).norm() < 1e-13);
    }

    #[test]
    fn eta_cell_quadrature_converges() {
        let coarse = CorrelationKernel::new(77.0, SpectralDensity::ohmic(0.1, 2.0), 400, 32, None)
            .unwrap();
        let fine =
            CorrelationKernel::new(77.0, SpectralDensity::ohmic(0.1, 2.0), 400, 64, None).unwrap();
        let a = eta_coefficients(&coarse, 0.1, 4, 2).unwrap();
        let b = eta_coefficients(&fine, 0.1, 4, 2).unwrap();
        let rel = (a.eta(3) - b.eta(3)).norm() / b.eta(3).norm();
        assert!(rel < 1e-7, "relative deviation {rel}");
    }

    #[test]
    fn eta_magnitude_decays_for_ohmic_kernel() {
        let kernel = ohmic_kernel(77.0);
        let table = eta_coefficients(&kernel, 0.1, 40, 40).unwrap();
        // Monotone non-increasing beyond some small k0 <= 5.
        let mags: Vec<f64> = (0..=40).map(|k| table.eta(k).norm()).collect();
        let mut k0 = 0;
        while k0 + 1 <= 5 && mags[k0 + 1] > mags[k0] {
            k0 += 1;
        }
        assert!(k0 <= 5);
        for k in k0..40 {
            assert!(
                mags[k + 1] <= mags[k] * (1.0 + 1e-12),
                "|eta| grew at k={k}: {} -> {}",
                mags[k],
                mags[k + 1]
            );
        }
        assert!(mags[40] < mags[1]);
    }

    #[test]
    fn influence_factor_is_one_on_diagonal_indices() {
        let kernel = ohmic_kernel(300.0);
        let table = eta_coefficients(&kernel, 0.1, 8, 4).unwrap();
        let model = SystemModel::two_level(0.0, 0.0);
        for lag in 0..=4 {
            for jp in 0..4 {
                for &j in &[0usize, 3] {
                    let f = influence_factor(&table, &model, lag, j, jp, 6).unwrap();
                    assert_eq!(f, C64::new(1.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn influence_factor_is_one_for_vanishing_eta() {
        let kernel =
            CorrelationKernel::new(4.0, SpectralDensity::none(), 32, 8, Some(5.0)).unwrap();
        let table = eta_coefficients(&kernel, 0.1, 5, 2).unwrap();
        let model = SystemModel::two_level(0.0, 0.0);
        for j in 0..4 {
            for jp in 0..4 {
                let f = influence_factor(&table, &model, 1, j, jp, 3).unwrap();
                assert!((f - C64::new(1.0, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn influence_factor_matches_direct_formula() {
        let kernel = ohmic_kernel(77.0);
        let table = eta_coefficients(&kernel, 0.15, 6, 3).unwrap();
        let model = SystemModel::two_level(0.0, 0.0);
        let eta1 = table.eta(1);
        // j = (1, 0), jp = (0, 1): the exponent written out by hand.
        let expected = (-(1.0) * (eta1 * 0.0 - eta1.conj() * 1.0)).exp();
        let got = influence_factor(&table, &model, 1, model.pack(1, 0), model.pack(0, 1), 2)
            .unwrap();
        assert!((got - expected).norm() < 1e-14);
        // Off-window lag errors out.
        assert!(influence_factor(&table, &model, 4, 0, 0, 5).is_err());
    }

    #[test]
    fn influence_factor_modulus_bounded_by_one_when_damping() {
        let kernel = ohmic_kernel(77.0);
        let table = eta_coefficients(&kernel, 0.1, 6, 3).unwrap();
        let model = SystemModel::two_level(0.0, 0.0);
        for lag in 0..=2usize {
            for j in 0..4 {
                for jp in 0..4 {
                    let (i, ipr) = model.unpack(j);
                    let (m, mpr) = model.unpack(jp);
                    let eta = table.eta(lag);
                    let diff = model.coupling[i] - model.coupling[ipr];
                    let z = diff * (eta * model.coupling[m] - eta.conj() * model.coupling[mpr]);
                    if z.re >= 0.0 {
                        let f = influence_factor(&table, &model, lag, j, jp, 2).unwrap();
                        assert!(f.norm() <= 1.0 + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn propagator_is_identity_without_drive_or_splitting() {
        let model = SystemModel::two_level(0.0, 0.0);
        let m = system_propagator(&model, 0.37);
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((m[[i, j]] - C64::new(expected, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn propagator_is_unitary() {
        let model = SystemModel::two_level(1.3, 0.7);
        let m = system_propagator(&model, 0.21);
        let mdag = m.t().mapv(|v| v.conj());
        let prod = m.dot(&mdag);
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((prod[[i, j]] - C64::new(expected, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn propagator_matches_series_oracle() {
        let model = SystemModel::two_level(0.0, 0.5);
        let dt = 0.1;
        let m = system_propagator(&model, dt);
        // Power-series exponential of -i H dt, summed to machine precision.
        let h = [
            [C64::new(0.0, 0.0), C64::new(0.5, 0.0)],
            [C64::new(0.5, 0.0), C64::new(0.0, 0.0)],
        ];
        let mut term = [
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        ];
        let mut sum = term;
        for k in 1..40 {
            let mut next = [[C64::new(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        next[i][j] += term[i][l] * h[l][j] * C64::new(0.0, -dt) / k as f64;
                    }
                }
            }
            term = next;
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[[i, j]] - sum[i][j]).norm() < 1e-14);
            }
        }
        // Also the closed form cos - i sin sx.
        assert!((m[[0, 0]] - C64::new((0.05f64).cos(), 0.0)).norm() < 1e-14);
        assert!((m[[0, 1]] - C64::new(0.0, -(0.05f64).sin())).norm() < 1e-14);
    }

    #[test]
    fn propagator_composes() {
        let model = SystemModel::two_level(0.9, 0.4);
        let dt = 0.17;
        let m1 = system_propagator(&model, dt);
        let m2 = system_propagator(&model, 2.0 * dt);
        let prod = m1.dot(&m1);
        for i in 0..2 {
            for j in 0..2 {
                assert!((m2[[i, j]] - prod[[i, j]]).norm() < 1e-13);
            }
        }
    }
}
