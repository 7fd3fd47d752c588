//! Analytic 1D scattering amplitudes for symmetric potentials, S-matrix
//! eigenphases, and the unique minimal-variance clock kernel in the
//! in-asymptote representation.
//!
//! States are specified by their in-asymptote amplitudes; the Moller operator
//! is unitary and intertwines the full and free Hamiltonians, so every
//! energy-representation quadratic form is evaluated directly on
//! in-amplitudes with the scattering phases attached to the channel
//! functions. No position-space scattering states are synthesized.

use crate::error::Error;
use crate::kernelcore::KernelBasis;
use crate::state::{MomentumGrid, UnitSystem};
use crate::{Result, C64};
use std::io::Write;

/// Regularization floor for `|1 + T +/- R|`.
pub const EPS_REG: f64 = 1e-6;

/// Transmission and reflection amplitudes per node of a positive-k grid.
#[derive(Debug, Clone)]
pub struct ScatteringAmplitudes1D {
    grid: MomentumGrid,
    t: Vec<C64>,
    r: Vec<C64>,
}

impl ScatteringAmplitudes1D {
    pub fn new(grid: MomentumGrid, t: Vec<C64>, r: Vec<C64>) -> Result<Self> {
        if grid.k_min() <= 0.0 {
            return Err(Error::InvalidGrid("scattering amplitudes need a k > 0 grid".into()));
        }
        if t.len() != grid.len() || r.len() != grid.len() {
            return Err(Error::GridMismatch("one (T, R) pair per grid node required".into()));
        }
        Ok(Self { grid, t, r })
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn transmission(&self) -> &[C64] {
        &self.t
    }

    pub fn reflection(&self) -> &[C64] {
        &self.r
    }

    /// Max deviations from `|T|^2 + |R|^2 = 1` and `|T +/- R| = 1`.
    pub fn unitarity_deviation(&self) -> (f64, f64) {
        let mut flux: f64 = 0.0;
        let mut phase: f64 = 0.0;
        for (t, r) in self.t.iter().zip(&self.r) {
            flux = flux.max((t.norm_sqr() + r.norm_sqr() - 1.0).abs());
            phase = phase.max(((t + r).norm() - 1.0).abs());
            phase = phase.max(((t - r).norm() - 1.0).abs());
        }
        (flux, phase)
    }

    /// CSV export, columns `k, reT, imT, reR, imR, delta_plus, delta_minus`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let phases = eigenphases(self).ok();
        writeln!(out, "# 1D scattering amplitudes")?;
        writeln!(out, "k,reT,imT,reR,imR,delta_plus,delta_minus")?;
        for (j, &k) in self.grid.k().iter().enumerate() {
            let (dp, dm) = phases
                .as_ref()
                .map_or((f64::NAN, f64::NAN), |p| (p.delta_plus[j], p.delta_minus[j]));
            writeln!(
                out,
                "{k:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{dp:.12e},{dm:.12e}",
                self.t[j].re, self.t[j].im, self.r[j].re, self.r[j].im
            )?;
        }
        Ok(())
    }
}

/// Delta-potential amplitudes at a single wavenumber:
/// `T = 1/(1 + i m g / hbar^2 k)`, `R = T - 1`.
pub fn delta_potential_tr(strength: f64, k: f64, units: &UnitSystem) -> (C64, C64) {
    let chi = units.mass * strength / (units.hbar * units.hbar * k);
    let t = C64::new(1.0, 0.0) / C64::new(1.0, chi);
    (t, t - 1.0)
}

/// Analytic amplitudes for `V = g delta(x)` on a positive-k grid.
pub fn delta_potential_amplitudes(
    strength: f64,
    grid: &MomentumGrid,
    units: &UnitSystem,
) -> Result<ScatteringAmplitudes1D> {
    let mut t = Vec::with_capacity(grid.len());
    let mut r = Vec::with_capacity(grid.len());
    for &k in grid.k() {
        let (tk, rk) = delta_potential_tr(strength, k, units);
        t.push(tk);
        r.push(rk);
    }
    ScatteringAmplitudes1D::new(grid.clone(), t, r)
}

/// Square well/barrier amplitudes at a single wavenumber, support `[-a, a]`.
///
/// The interior wavenumber is analytically continued for `E < V0`
/// (evanescent interior), so the tunneling regime needs no special casing.
pub fn square_well_tr(v0: f64, a: f64, k: f64, units: &UnitSystem) -> (C64, C64) {
    let length = 2.0 * a;
    let energy = units.energy_of_k(k);
    let q2 = 2.0 * units.mass * (energy - v0) / (units.hbar * units.hbar);
    let q = C64::new(q2, 0.0).sqrt();
    let kk = C64::new(k, 0.0);
    let sin = (q * length).sin();
    let cos = (q * length).cos();
    let eps = (kk / q + q / kk) * 0.5;
    let eta = (kk / q - q / kk) * 0.5;
    let den = cos - C64::new(0.0, 1.0) * eps * sin;
    let phase = C64::new(0.0, -k * length).exp();
    let t = phase / den;
    let r = phase * (C64::new(0.0, -1.0) * eta * sin) / den;
    (t, r)
}

/// Analytic amplitudes for a symmetric square well/barrier on a positive-k grid.
pub fn square_well_amplitudes(
    v0: f64,
    a: f64,
    grid: &MomentumGrid,
    units: &UnitSystem,
) -> Result<ScatteringAmplitudes1D> {
    if !(a > 0.0) {
        return Err(Error::Precondition(format!("half-width a must be positive, got {a}")));
    }
    let mut t = Vec::with_capacity(grid.len());
    let mut r = Vec::with_capacity(grid.len());
    for &k in grid.k() {
        let (tk, rk) = square_well_tr(v0, a, k, units);
        t.push(tk);
        r.push(rk);
    }
    ScatteringAmplitudes1D::new(grid.clone(), t, r)
}

/// Continuous-branch parity eigenphases, `e^{2 i delta_pm} = T +/- R`.
#[derive(Debug, Clone)]
pub struct Eigenphases {
    pub delta_plus: Vec<f64>,
    pub delta_minus: Vec<f64>,
}

/// Extracts `delta_pm(k)` with the branch unwrapped by continuity downward
/// from the largest grid `k`, anchored near zero at the high-energy edge.
pub fn eigenphases(amps: &ScatteringAmplitudes1D) -> Result<Eigenphases> {
    let (flux, phase) = amps.unitarity_deviation();
    if flux > 1e-8 || phase > 1e-8 {
        return Err(Error::Precondition(format!(
            "amplitudes violate unitarity: flux dev {flux:.3e}, phase dev {phase:.3e}"
        )));
    }
    let unwrap = |values: Vec<C64>| -> Result<Vec<f64>> {
        let n = values.len();
        let mut delta = vec![0.0; n];
        // principal half-phase at the high-k anchor, folded into (-pi/2, pi/2]
        let mut prev = 0.5 * values[n - 1].arg();
        if prev > std::f64::consts::FRAC_PI_2 {
            prev -= std::f64::consts::PI;
        }
        delta[n - 1] = prev;
        for j in (0..n - 1).rev() {
            let raw = 0.5 * values[j].arg();
            // delta is defined mod pi; pick the branch closest to the neighbor
            let shift = ((prev - raw) / std::f64::consts::PI).round();
            let d = raw + shift * std::f64::consts::PI;
            if (d - prev).abs() > std::f64::consts::PI {
                return Err(Error::Precondition(format!(
                    "eigenphase branch discontinuity exceeding pi near k = {}",
                    amps.grid.k()[j]
                )));
            }
            delta[j] = d;
            prev = d;
        }
        Ok(delta)
    };
    let plus: Vec<C64> = amps.t.iter().zip(&amps.r).map(|(t, r)| t + r).collect();
    let minus: Vec<C64> = amps.t.iter().zip(&amps.r).map(|(t, r)| t - r).collect();
    Ok(Eigenphases { delta_plus: unwrap(plus)?, delta_minus: unwrap(minus)? })
}

/// Unimodular clock channel coefficients
/// `c_+ = (1 + conj(T) + conj(R))/|1 + T + R|` and
/// `c_- = i (1 + conj(T) - conj(R))/|1 + T - R|`.
#[derive(Debug, Clone)]
pub struct ClockChannelCoeffs {
    pub c_plus: Vec<C64>,
    pub c_minus: Vec<C64>,
}

/// Computes the in-state channel phases, rejecting nodes where
/// `|1 + T +/- R|` falls below [`EPS_REG`].
pub fn clock_channel_coeffs(amps: &ScatteringAmplitudes1D) -> Result<ClockChannelCoeffs> {
    let mut c_plus = Vec::with_capacity(amps.grid.len());
    let mut c_minus = Vec::with_capacity(amps.grid.len());
    for ((&k, t), r) in amps.grid.k().iter().zip(&amps.t).zip(&amps.r) {
        let d_plus = (C64::new(1.0, 0.0) + t + r).norm();
        let d_minus = (C64::new(1.0, 0.0) + t - r).norm();
        if d_plus < EPS_REG {
            return Err(Error::NearSingularKernel { k, value: d_plus, floor: EPS_REG });
        }
        if d_minus < EPS_REG {
            return Err(Error::NearSingularKernel { k, value: d_minus, floor: EPS_REG });
        }
        c_plus.push((C64::new(1.0, 0.0) + t.conj() + r.conj()) / d_plus);
        c_minus.push(C64::new(0.0, 1.0) * (C64::new(1.0, 0.0) + t.conj() - r.conj()) / d_minus);
    }
    Ok(ClockChannelCoeffs { c_plus, c_minus })
}

/// The unique clock kernel of a symmetric scattering system, expressed as a
/// channel-diagonal basis over the parity-channel energy grid.
///
/// Feeding it to `kernelcore::time_distribution` with the in-asymptote
/// energy channels of a packet yields the unique clock distribution.
pub fn clock_kernel_scattering(amps: &ScatteringAmplitudes1D, units: &UnitSystem) -> Result<KernelBasis> {
    let coeffs = clock_channel_coeffs(amps)?;
    let e: Vec<f64> = amps.grid.k().iter().map(|&k| units.energy_of_k(k)).collect();
    let w: Vec<f64> = amps
        .grid
        .k()
        .iter()
        .zip(amps.grid.weights())
        .map(|(&k, &wk)| units.hbar * units.hbar * k / units.mass * wk)
        .collect();
    KernelBasis::channel_diagonal(e, w, &[coeffs.c_plus, coeffs.c_minus])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernelcore::{self, Sense};
    use crate::state::{EnergyChannels, WavePacket};
    use approx::assert_abs_diff_eq;

    fn units() -> UnitSystem {
        UnitSystem::natural()
    }

    fn kgrid() -> MomentumGrid {
        MomentumGrid::positive(0.0, 10.0, 256).unwrap()
    }

    /// Oracle: RK4 integration of the stationary equation with plane-wave
    /// boundary conditions, extracting T and R by matching on the free side.
    fn shoot_tr(potential: &dyn Fn(f64) -> f64, k: f64, x_max: f64, n_steps: usize, u: &UnitSystem) -> (C64, C64) {
        let two_m_over_h2 = 2.0 * u.mass / (u.hbar * u.hbar);
        let energy = u.energy_of_k(k);
        let rhs = |x: f64, psi: C64, dpsi: C64| -> (C64, C64) {
            (dpsi, C64::new(two_m_over_h2 * (potential(x) - energy), 0.0) * psi)
        };
        let h = -2.0 * x_max / n_steps as f64;
        let mut x = x_max;
        let mut psi = C64::new(0.0, k * x_max).exp();
        let mut dpsi = C64::new(0.0, k) * psi;
        for _ in 0..n_steps {
            let (k1p, k1d) = rhs(x, psi, dpsi);
            let (k2p, k2d) = rhs(x + 0.5 * h, psi + 0.5 * h * k1p, dpsi + 0.5 * h * k1d);
            let (k3p, k3d) = rhs(x + 0.5 * h, psi + 0.5 * h * k2p, dpsi + 0.5 * h * k2d);
            let (k4p, k4d) = rhs(x + h, psi + h * k3p, dpsi + h * k3d);
            psi += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            dpsi += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            x += h;
        }
        // psi(-x_max) = A e^{ikx} + B e^{-ikx}; T = 1/A, R = B/A
        let ik = C64::new(0.0, k);
        let a = 0.5 * (psi + dpsi / ik) / C64::new(0.0, -k * x_max).exp();
        let b = 0.5 * (psi - dpsi / ik) / C64::new(0.0, k * x_max).exp();
        (1.0 / a, b / a)
    }

    fn edge_sampled(x: f64, a: f64, v0: f64) -> f64 {
        let d = x.abs() - a;
        if d.abs() < 1e-12 {
            0.5 * v0
        } else if d < 0.0 {
            v0
        } else {
            0.0
        }
    }

    #[test]
    fn delta_free_limit() {
        let amps = delta_potential_amplitudes(0.0, &kgrid(), &units()).unwrap();
        for (t, r) in amps.transmission().iter().zip(amps.reflection()) {
            assert!((t - C64::new(1.0, 0.0)).norm() < 1e-14);
            assert!(r.norm() < 1e-14);
        }
    }

    #[test]
    fn delta_half_transmission() {
        // matching-condition oracle: 1 + R = T, ikT - ik(1 - R) = (2mg/h^2) T
        let u = units();
        let (g, k) = (1.0, 1.0);
        let (t, r) = delta_potential_tr(g, k, &u);
        assert_abs_diff_eq!(t.norm_sqr(), 0.5, epsilon = 1e-12);
        let ik = C64::new(0.0, k);
        let coupling = 2.0 * u.mass * g / (u.hbar * u.hbar);
        // residuals of the matching system
        let r1 = (C64::new(1.0, 0.0) + r) - t;
        let r2 = ik * t - ik * (C64::new(1.0, 0.0) - r) - coupling * t;
        assert!(r1.norm() < 1e-12 && r2.norm() < 1e-12);
    }

    #[test]
    fn delta_strong_coupling_limit() {
        let u = units();
        let amps = delta_potential_amplitudes(1e6, &kgrid(), &u).unwrap();
        assert!(amps.transmission().iter().all(|t| t.norm() < 1e-4));
        let (flux, phase) = amps.unitarity_deviation();
        assert!(flux < 1e-10 && phase < 1e-10);
    }

    #[test]
    fn square_well_free_limit() {
        let amps = square_well_amplitudes(0.0, 1.0, &kgrid(), &units()).unwrap();
        for (t, r) in amps.transmission().iter().zip(amps.reflection()) {
            assert!((t - C64::new(1.0, 0.0)).norm() < 1e-12);
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn square_barrier_matches_ode_shooting() {
        let u = units();
        let (v0, a, k) = (2.0, 1.0, 1.0);
        let (t, r) = square_well_tr(v0, a, k, &u);
        // half-value at the sampled edge keeps the RK4 stages clean when the
        // discontinuity falls exactly on a step boundary
        let potential = move |x: f64| edge_sampled(x, a, v0);
        let (t_ode, r_ode) = shoot_tr(&potential, k, 1.5, 60_000, &u);
        assert!((t - t_ode).norm() < 1e-6, "T {t} vs ODE {t_ode}");
        assert!((r - r_ode).norm() < 1e-6, "R {r} vs ODE {r_ode}");
        assert_abs_diff_eq!(t.norm_sqr() + r.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn square_well_attractive_matches_ode_shooting() {
        let u = units();
        let (v0, a, k) = (-1.5, 0.8, 1.3);
        let (t, r) = square_well_tr(v0, a, k, &u);
        let potential = move |x: f64| edge_sampled(x, a, v0);
        let (t_ode, r_ode) = shoot_tr(&potential, k, 1.2, 60_000, &u);
        assert!((t - t_ode).norm() < 1e-6);
        assert!((r - r_ode).norm() < 1e-6);
    }

    #[test]
    fn transmission_resonance() {
        // interior momentum q with q * 2a = pi gives |T| = 1
        let u = units();
        let (v0, a) = (-1.0, 1.0);
        let q_res = std::f64::consts::PI / (2.0 * a);
        let k_res = (q_res * q_res + 2.0 * u.mass * v0 / (u.hbar * u.hbar)).sqrt();
        let (t, r) = square_well_tr(v0, a, k_res, &u);
        assert_abs_diff_eq!(t.norm(), 1.0, epsilon = 1e-8);
        assert!(r.norm() < 1e-8);
    }

    #[test]
    fn unitarity_over_parameter_sweep() {
        let u = units();
        for &g in &[0.3, 1.0, 5.0, 40.0] {
            let amps = delta_potential_amplitudes(g, &kgrid(), &u).unwrap();
            let (flux, phase) = amps.unitarity_deviation();
            assert!(flux < 1e-10 && phase < 1e-10, "g = {g}");
        }
        for &(v0, a) in &[(2.0, 1.0), (-3.0, 0.5), (8.0, 0.3), (-0.7, 2.0)] {
            let amps = square_well_amplitudes(v0, a, &kgrid(), &u).unwrap();
            let (flux, phase) = amps.unitarity_deviation();
            assert!(flux < 1e-10 && phase < 1e-10, "v0 = {v0}, a = {a}");
        }
    }

    #[test]
    fn eigenphases_free_and_delta() {
        let u = units();
        let free = delta_potential_amplitudes(0.0, &kgrid(), &u).unwrap();
        let ph = eigenphases(&free).unwrap();
        assert!(ph.delta_plus.iter().all(|d| d.abs() < 1e-12));
        assert!(ph.delta_minus.iter().all(|d| d.abs() < 1e-12));

        let g = 1.0;
        let amps = delta_potential_amplitudes(g, &kgrid(), &u).unwrap();
        let ph = eigenphases(&amps).unwrap();
        for (j, &k) in amps.grid().k().iter().enumerate() {
            let chi = u.mass * g / (u.hbar * u.hbar * k);
            // e^{2i delta_+} = (1 - i chi)/(1 + i chi)
            let expected = C64::new(1.0, -chi) / C64::new(1.0, chi);
            let actual = C64::new(0.0, 2.0 * ph.delta_plus[j]).exp();
            assert!((actual - expected).norm() < 1e-10);
            // odd waves do not feel the delta potential
            assert!(ph.delta_minus[j].abs() < 1e-12);
        }
        // unwrapped branch is continuous
        for w in ph.delta_plus.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.5);
        }
    }

    #[test]
    fn clock_coefficients_unimodular() {
        let u = units();
        let amps = square_well_amplitudes(1.5, 0.7, &kgrid(), &u).unwrap();
        let coeffs = clock_channel_coeffs(&amps).unwrap();
        for c in coeffs.c_plus.iter().chain(&coeffs.c_minus) {
            assert_abs_diff_eq!(c.norm(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn clock_kernel_free_limit_matches_constant_kernel() {
        let u = units();
        let amps = delta_potential_amplitudes(0.0, &kgrid(), &u).unwrap();
        let basis = clock_kernel_scattering(&amps, &u).unwrap();
        let constant = KernelBasis::constant(basis.energies().to_vec(), basis.weights().to_vec(), 2).unwrap();
        for ei in [0, 5, 100, 255] {
            for ej in [0, 17, 200] {
                for a in 0..2 {
                    for ap in 0..2 {
                        let x = kernelcore::kernel_element(&basis, ei, a, ej, ap, &u).unwrap();
                        let y = kernelcore::kernel_element(&constant, ei, a, ej, ap, &u).unwrap();
                        assert!((x - y).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn clock_kernel_basis_valid_for_any_amplitudes() {
        let u = units();
        for amps in [
            delta_potential_amplitudes(2.5, &kgrid(), &u).unwrap(),
            square_well_amplitudes(3.0, 0.6, &kgrid(), &u).unwrap(),
            square_well_amplitudes(-2.0, 1.1, &kgrid(), &u).unwrap(),
        ] {
            let basis = clock_kernel_scattering(&amps, &u).unwrap();
            assert!(kernelcore::validate_kernel_basis(&basis).pass);
        }
    }

    #[test]
    fn clock_distribution_normalized_and_covariant() {
        let u = units();
        let full = MomentumGrid::symmetric(10.0, 512).unwrap();
        let packet = WavePacket::gaussian(&full, 5.0, 0.5, -20.0).unwrap();
        let phi = EnergyChannels::from_packet(&packet, &u).unwrap();
        let amps = delta_potential_amplitudes(1.0, &kgrid(), &u).unwrap();
        let basis = clock_kernel_scattering(&amps, &u).unwrap();
        let tg = kernelcore::suggest_time_window(&basis, &phi, Sense::Clock, &u, 8.0, 2001).unwrap();
        let d = kernelcore::time_distribution(&basis, &phi, &tg, Sense::Clock, &u).unwrap();
        assert_abs_diff_eq!(d.total(), 1.0, epsilon = 1e-4);
        // covariance: phase evolution shifts the clock distribution forward
        let t0 = 3.0 * tg.dt();
        let shifted = kernelcore::time_distribution(&basis, &phi.phase_evolve(t0, &u), &tg, Sense::Clock, &u).unwrap();
        let shift = (t0 / tg.dt()).round() as usize;
        for j in shift..tg.len() {
            assert_abs_diff_eq!(shifted.values()[j], d.values()[j - shift], epsilon = 1e-8);
        }
    }

    #[test]
    fn free_limit_continuity_in_coupling() {
        let u = units();
        let full = MomentumGrid::symmetric(10.0, 256).unwrap();
        let packet = WavePacket::gaussian(&full, 5.0, 0.5, -10.0).unwrap();
        let phi = EnergyChannels::from_packet(&packet, &u).unwrap();
        let kg = MomentumGrid::positive(0.0, 10.0, 128).unwrap();
        let tg = crate::state::TimeGrid::new(-6.0, 2.0, 401).unwrap();
        let free = clock_kernel_scattering(&delta_potential_amplitudes(0.0, &kg, &u).unwrap(), &u).unwrap();
        let d_free = kernelcore::time_distribution(&free, &phi, &tg, Sense::Clock, &u).unwrap();
        let mut prev_sup = f64::INFINITY;
        for &g in &[0.5, 0.1, 0.02] {
            let basis = clock_kernel_scattering(&delta_potential_amplitudes(g, &kg, &u).unwrap(), &u).unwrap();
            let d = kernelcore::time_distribution(&basis, &phi, &tg, Sense::Clock, &u).unwrap();
            let sup = d
                .values()
                .iter()
                .zip(d_free.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            assert!(sup < prev_sup || sup < 1e-10, "sup {sup} did not shrink (prev {prev_sup})");
            prev_sup = sup;
        }
        assert!(prev_sup < 1e-3);
    }
}
