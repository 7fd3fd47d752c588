//! Grids, units, wave packets, free evolution, and the energy-channel
//! representation.
//!
//! Momentum grids are uniform with a half-step offset so that `k = 0` is
//! never a node; the Jacobian `sqrt(m / hbar^2 k)` of the momentum-to-energy
//! change of variable is then finite everywhere. Quadrature is the midpoint
//! rule on the offset nodes (all weights equal to the spacing), and energy
//! weights follow by the change of variable `w_E = (hbar^2 k / m) w_k`, which
//! keeps the norm identical in both representations.

use crate::error::Error;
use crate::{Result, C64};
use std::f64::consts::PI;
use std::io::Write;

/// Physical constants threaded through every computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    pub hbar: f64,
    pub mass: f64,
}

impl UnitSystem {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0) || !(mass > 0.0) {
            return Err(Error::Precondition(format!(
                "hbar and mass must be positive, got hbar = {hbar}, mass = {mass}"
            )));
        }
        Ok(Self { hbar, mass })
    }

    /// Natural units, hbar = m = 1.
    pub fn natural() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }

    /// Kinetic energy of wavenumber `k`.
    pub fn energy_of_k(&self, k: f64) -> f64 {
        self.hbar * self.hbar * k * k / (2.0 * self.mass)
    }
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::natural()
    }
}

/// Uniform half-step-offset momentum quadrature grid.
///
/// Nodes are `k_min + (j + 1/2) dk`; zero is excluded by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    k: Vec<f64>,
    w: Vec<f64>,
    spacing: f64,
    sign_symmetric: bool,
}

impl MomentumGrid {
    /// Grid of `n` nodes covering `(k_min, k_max)` with half-step offset.
    pub fn span(k_min: f64, k_max: f64, n: usize) -> Result<Self> {
        if n == 0 || !(k_max > k_min) {
            return Err(Error::InvalidGrid(format!(
                "need n > 0 and k_max > k_min, got n = {n}, [{k_min}, {k_max}]"
            )));
        }
        let dk = (k_max - k_min) / n as f64;
        let k: Vec<f64> = (0..n).map(|j| k_min + (j as f64 + 0.5) * dk).collect();
        if k.iter().any(|&kj| kj.abs() < 1e-12 * dk) {
            return Err(Error::InvalidGrid(
                "grid places a node at k = 0; shift the span or change n".into(),
            ));
        }
        let sign_symmetric = {
            let sym = (k_min + k_max).abs() < 1e-12 * dk;
            sym && n % 2 == 0
        };
        let w = vec![dk; n];
        Ok(Self { k, w, spacing: dk, sign_symmetric })
    }

    /// Sign-symmetric grid over `[-k_max, k_max]` with `n` (even) nodes.
    pub fn symmetric(k_max: f64, n: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "symmetric grid needs an even node count, got {n}"
            )));
        }
        Self::span(-k_max, k_max, n)
    }

    /// Positive-only grid over `(k_min, k_max)`, `0 <= k_min`.
    pub fn positive(k_min: f64, k_max: f64, n: usize) -> Result<Self> {
        if k_min < 0.0 {
            return Err(Error::InvalidGrid(format!("positive grid needs k_min >= 0, got {k_min}")));
        }
        Self::span(k_min, k_max, n)
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn k_min(&self) -> f64 {
        self.k[0]
    }

    pub fn k_max(&self) -> f64 {
        self.k[self.k.len() - 1]
    }

    /// True when every node `k` has a mirror node `-k` on the grid.
    pub fn is_sign_symmetric(&self) -> bool {
        self.sign_symmetric
    }

    /// Index of the node at `-k[j]` on a sign-symmetric grid.
    pub fn mirror_index(&self, j: usize) -> usize {
        debug_assert!(self.sign_symmetric);
        self.k.len() - 1 - j
    }
}

/// One Gaussian component of a packet specification.
#[derive(Debug, Clone, Copy)]
pub struct GaussianComponent {
    pub k0: f64,
    pub sigma_k: f64,
    pub x0: f64,
    /// Real weight of the component in the superposition.
    pub weight: f64,
    /// Extra constant phase (radians) multiplying the component.
    pub phase: f64,
}

impl GaussianComponent {
    pub fn new(k0: f64, sigma_k: f64, x0: f64) -> Self {
        Self { k0, sigma_k, x0, weight: 1.0, phase: 0.0 }
    }
}

/// Momentum-space state |psi> sampled on a quadrature grid.
#[derive(Debug, Clone)]
pub struct WavePacket {
    grid: MomentumGrid,
    amps: Vec<C64>,
}

impl WavePacket {
    /// Wraps raw amplitudes without normalizing.
    pub fn from_amplitudes(grid: MomentumGrid, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes on a {}-node grid",
                amps.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, amps })
    }

    /// Normalized Gaussian `exp(-(k-k0)^2/4 sigma^2) exp(-i k x0)`.
    pub fn gaussian(grid: &MomentumGrid, k0: f64, sigma_k: f64, x0: f64) -> Result<Self> {
        Self::superposition(grid, &[GaussianComponent::new(k0, sigma_k, x0)])
    }

    /// Normalized weighted sum of Gaussian components.
    ///
    /// Every component must have its 6-sigma support inside the grid.
    pub fn superposition(grid: &MomentumGrid, components: &[GaussianComponent]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Precondition("empty component list".into()));
        }
        for c in components {
            if !(c.sigma_k > 0.0) {
                return Err(Error::Precondition(format!("sigma_k must be positive, got {}", c.sigma_k)));
            }
            let lo = c.k0 - 6.0 * c.sigma_k;
            let hi = c.k0 + 6.0 * c.sigma_k;
            if lo < grid.k_min() || hi > grid.k_max() {
                return Err(Error::GridCoverage {
                    needed_min: lo,
                    needed_max: hi,
                    grid_min: grid.k_min(),
                    grid_max: grid.k_max(),
                });
            }
        }
        let mut amps = vec![C64::new(0.0, 0.0); grid.len()];
        for c in components {
            for (j, &k) in grid.k().iter().enumerate() {
                let d = k - c.k0;
                let mag = (-d * d / (4.0 * c.sigma_k * c.sigma_k)).exp();
                let phase = C64::new(0.0, -k * c.x0 + c.phase).exp();
                amps[j] += c.weight * mag * phase;
            }
        }
        let mut packet = Self { grid: grid.clone(), amps };
        packet.normalize()?;
        Ok(packet)
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    /// Quadrature norm^2, `sum w_j |psi(k_j)|^2`.
    pub fn norm2(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.amps)
            .map(|(w, a)| w * a.norm_sqr())
            .sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n2 = self.norm2();
        if !(n2 > 0.0) {
            return Err(Error::Precondition("cannot normalize a zero packet".into()));
        }
        let s = 1.0 / n2.sqrt();
        for a in &mut self.amps {
            *a *= s;
        }
        Ok(())
    }

    /// Mean wavenumber `<k>`.
    pub fn mean_k(&self) -> f64 {
        self.grid
            .k()
            .iter()
            .zip(self.grid.weights())
            .zip(&self.amps)
            .map(|((k, w), a)| k * w * a.norm_sqr())
            .sum()
    }

    /// Free evolution: each amplitude gains `exp(-i hbar k^2 t / 2m)`.
    pub fn free_evolve(&self, t: f64, units: &UnitSystem) -> WavePacket {
        let amps = self
            .grid
            .k()
            .iter()
            .zip(&self.amps)
            .map(|(&k, a)| a * C64::new(0.0, -units.energy_of_k(k) * t / units.hbar).exp())
            .collect();
        WavePacket { grid: self.grid.clone(), amps }
    }

    /// Position-space amplitude `(1/sqrt(2 pi)) sum_j w_j e^{i k_j x} e^{-i hbar k_j^2 t/2m} psi(k_j)`.
    pub fn position_amplitude(&self, x: f64, t: f64, units: &UnitSystem) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for ((&k, &w), a) in self.grid.k().iter().zip(self.grid.weights()).zip(&self.amps) {
            let phase = k * x - units.energy_of_k(k) * t / units.hbar;
            acc += w * a * C64::new(0.0, phase).exp();
        }
        acc / (2.0 * PI).sqrt()
    }

    /// Spatial derivative of the position-space amplitude.
    pub fn position_amplitude_dx(&self, x: f64, t: f64, units: &UnitSystem) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for ((&k, &w), a) in self.grid.k().iter().zip(self.grid.weights()).zip(&self.amps) {
            let phase = k * x - units.energy_of_k(k) * t / units.hbar;
            acc += w * a * C64::new(0.0, k) * C64::new(0.0, phase).exp();
        }
        acc / (2.0 * PI).sqrt()
    }

    /// Conjugated amplitudes (time-reversed state).
    pub fn conjugate(&self) -> WavePacket {
        WavePacket {
            grid: self.grid.clone(),
            amps: self.amps.iter().map(|a| a.conj()).collect(),
        }
    }

    /// Amplitudes swapped `k -> -k` (space-reflected state); sign-symmetric grids only.
    pub fn reflect(&self) -> Result<WavePacket> {
        if !self.grid.is_sign_symmetric() {
            return Err(Error::GridMismatch("reflection needs a sign-symmetric grid".into()));
        }
        let n = self.amps.len();
        let amps = (0..n).map(|j| self.amps[n - 1 - j]).collect();
        Ok(WavePacket { grid: self.grid.clone(), amps })
    }

    /// CSV of the momentum density, columns `k, density`.
    pub fn write_momentum_density_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# momentum density")?;
        writeln!(out, "k,density")?;
        for (k, a) in self.grid.k().iter().zip(&self.amps) {
            writeln!(out, "{k:.12e},{:.12e}", a.norm_sqr())?;
        }
        Ok(())
    }

    /// CSV of the position density at time `t`, columns `x, density`.
    pub fn write_position_density_csv<W: Write>(
        &self,
        xs: &[f64],
        t: f64,
        units: &UnitSystem,
        mut out: W,
    ) -> std::io::Result<()> {
        writeln!(out, "# position density at t = {t}")?;
        writeln!(out, "x,density")?;
        for &x in xs {
            let a = self.position_amplitude(x, t, units);
            writeln!(out, "{x:.12e},{:.12e}", a.norm_sqr())?;
        }
        Ok(())
    }
}

/// State in the energy-channel representation psi(E, alpha).
///
/// For 1D sign-symmetric packets the two channels are the parity
/// combinations: `psi_+ = (psi(k) + psi(-k))/sqrt(2)` and
/// `psi_- = -i (psi(k) - psi(-k))/sqrt(2)`, each carrying the Jacobian
/// `sqrt(m / hbar^2 k)`.
#[derive(Debug, Clone)]
pub struct EnergyChannels {
    e: Vec<f64>,
    w: Vec<f64>,
    /// Wavenumber of each energy node (kept for kernel constructions).
    k: Vec<f64>,
    n_channels: usize,
    /// Row-major `[energy][channel]`.
    amps: Vec<C64>,
}

impl EnergyChannels {
    pub fn from_parts(e: Vec<f64>, w: Vec<f64>, k: Vec<f64>, n_channels: usize, amps: Vec<C64>) -> Result<Self> {
        if e.len() != w.len() || e.len() != k.len() || amps.len() != e.len() * n_channels {
            return Err(Error::GridMismatch("inconsistent energy-channel dimensions".into()));
        }
        Ok(Self { e, w, k, n_channels, amps })
    }

    /// Converts a packet on a sign-symmetric grid into parity channels.
    pub fn from_packet(packet: &WavePacket, units: &UnitSystem) -> Result<Self> {
        let grid = packet.grid();
        if !grid.is_sign_symmetric() {
            return Err(Error::GridMismatch(
                "energy-channel conversion needs a sign-symmetric momentum grid".into(),
            ));
        }
        let n = grid.len();
        let half = n / 2;
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut e = Vec::with_capacity(half);
        let mut w = Vec::with_capacity(half);
        let mut k_out = Vec::with_capacity(half);
        let mut amps = Vec::with_capacity(2 * half);
        // positive-k nodes are the upper half, ascending
        for j in half..n {
            let k = grid.k()[j];
            let jm = grid.mirror_index(j);
            let psi_p = packet.amplitudes()[j];
            let psi_m = packet.amplitudes()[jm];
            let jac = (units.mass / (units.hbar * units.hbar * k)).sqrt();
            let plus = (psi_p + psi_m) * inv_sqrt2 * jac;
            let minus = C64::new(0.0, -1.0) * (psi_p - psi_m) * inv_sqrt2 * jac;
            e.push(units.energy_of_k(k));
            w.push(units.hbar * units.hbar * k / units.mass * grid.weights()[j]);
            k_out.push(k);
            amps.push(plus);
            amps.push(minus);
        }
        Ok(Self { e, w, k: k_out, n_channels: 2, amps })
    }

    pub fn energies(&self) -> &[f64] {
        &self.e
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_energies(&self) -> usize {
        self.e.len()
    }

    pub fn amplitude(&self, e_idx: usize, channel: usize) -> C64 {
        self.amps[e_idx * self.n_channels + channel]
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    /// Quadrature norm^2 over all channels.
    pub fn norm2(&self) -> f64 {
        let mut acc = 0.0;
        for (i, &w) in self.w.iter().enumerate() {
            for c in 0..self.n_channels {
                acc += w * self.amplitude(i, c).norm_sqr();
            }
        }
        acc
    }

    /// Multiplies every amplitude by `exp(-i E t0 / hbar)` (free evolution in
    /// the energy representation).
    pub fn phase_evolve(&self, t0: f64, units: &UnitSystem) -> EnergyChannels {
        let mut out = self.clone();
        for (i, &e) in self.e.iter().enumerate() {
            let ph = C64::new(0.0, -e * t0 / units.hbar).exp();
            for c in 0..self.n_channels {
                out.amps[i * self.n_channels + c] *= ph;
            }
        }
        out
    }

    /// Conjugated amplitudes.
    pub fn conjugate(&self) -> EnergyChannels {
        let mut out = self.clone();
        for a in &mut out.amps {
            *a = a.conj();
        }
        out
    }
}

/// Uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t: Vec<f64>,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(t_max > t_min) {
            return Err(Error::InvalidGrid(format!(
                "time grid needs n >= 2 and t_max > t_min, got n = {n}, [{t_min}, {t_max}]"
            )));
        }
        let dt = (t_max - t_min) / (n - 1) as f64;
        let t = (0..n).map(|j| t_min + j as f64 * dt).collect();
        Ok(Self { t, dt })
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t_min(&self) -> f64 {
        self.t[0]
    }

    pub fn t_max(&self) -> f64 {
        self.t[self.t.len() - 1]
    }
}

/// Sampled temporal probability density Pi(t), units 1/time.
#[derive(Debug, Clone)]
pub struct TimeDistribution {
    times: TimeGrid,
    values: Vec<f64>,
}

impl TimeDistribution {
    pub fn new(times: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != times.len() {
            return Err(Error::GridMismatch(format!(
                "{} values on a {}-node time grid",
                values.len(),
                times.len()
            )));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Trapezoid integral over the whole window.
    pub fn total(&self) -> f64 {
        trapezoid(&self.values, self.times.dt())
    }

    /// Cumulative probability F(tau), trapezoid up to `tau`.
    pub fn cumulative(&self, tau: f64) -> Result<f64> {
        let (t_min, t_max) = (self.times.t_min(), self.times.t_max());
        if tau < t_min - 1e-12 || tau > t_max + 1e-12 {
            return Err(Error::TimeOutOfRange { t: tau, t_min, t_max });
        }
        let tau = tau.clamp(t_min, t_max);
        let dt = self.times.dt();
        let pos = (tau - t_min) / dt;
        let j = (pos.floor() as usize).min(self.values.len() - 1);
        let mut acc = 0.0;
        for i in 0..j {
            acc += 0.5 * (self.values[i] + self.values[i + 1]) * dt;
        }
        if j + 1 < self.values.len() {
            let frac = pos - j as f64;
            if frac > 0.0 {
                let v_tau = self.values[j] + frac * (self.values[j + 1] - self.values[j]);
                acc += 0.5 * (self.values[j] + v_tau) * frac * dt;
            }
        }
        Ok(acc)
    }

    /// First moment by direct quadrature.
    pub fn mean(&self) -> f64 {
        let weighted: Vec<f64> = self
            .times
            .times()
            .iter()
            .zip(&self.values)
            .map(|(t, v)| t * v)
            .collect();
        trapezoid(&weighted, self.times.dt())
    }

    /// Second moment by direct quadrature.
    pub fn second_moment(&self) -> f64 {
        let weighted: Vec<f64> = self
            .times
            .times()
            .iter()
            .zip(&self.values)
            .map(|(t, v)| t * t * v)
            .collect();
        trapezoid(&weighted, self.times.dt())
    }

    /// Variance of the (assumed normalized) distribution.
    pub fn variance(&self) -> f64 {
        let n = self.total();
        let m1 = self.mean() / n;
        self.second_moment() / n - m1 * m1
    }

    /// CSV with columns `t, pi, cumulative`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# time distribution; total = {:.12e}", self.total())?;
        writeln!(out, "t,pi,cumulative")?;
        let dt = self.times.dt();
        let mut cum = 0.0;
        let mut prev: Option<f64> = None;
        for (t, v) in self.times.times().iter().zip(&self.values) {
            if let Some(p) = prev {
                cum += 0.5 * (p + v) * dt;
            }
            prev = Some(*v);
            writeln!(out, "{t:.12e},{v:.12e},{cum:.12e}")?;
        }
        Ok(())
    }
}

/// Uniform-spacing trapezoid rule.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    (0.5 * (values[0] + values[values.len() - 1]) + inner) * dx
}
