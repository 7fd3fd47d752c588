//! Phase shifts for spherical potentials and the unique rotation-invariant
//! clock kernel, working entirely in (k, l, m) amplitude space.
//!
//! The kernel is diagonal in (l, m); each channel carries the unimodular
//! factor `(1 + e^{-2 i delta_l})/|1 + e^{2 i delta_l}|` on top of the free
//! `sqrt(k)` weight. Position-space radial functions are never evaluated:
//! states are prepared directly as channel amplitudes.

use crate::error::Error;
use crate::par;
use crate::state::{MomentumGrid, TimeDistribution, TimeGrid, UnitSystem};
use crate::{Result, C64};
use std::f64::consts::PI;
use std::io::Write;

/// Regularization floor for `|1 + e^{2 i delta}|`.
pub const EPS_REG: f64 = 1e-6;

/// Default highest retained angular momentum.
pub const DEFAULT_L_MAX: u32 = 8;

/// Spherical Bessel `j_l` for real argument by normalized downward
/// recurrence (stable for all l at moderate x).
fn sph_jn(l_max: usize, x: f64) -> Vec<f64> {
    if x.abs() < 1e-8 {
        // series leading term x^l / (2l+1)!!
        let mut out = Vec::with_capacity(l_max + 1);
        let mut dfact = 1.0;
        for l in 0..=l_max {
            if l > 0 {
                dfact *= (2 * l + 1) as f64;
            }
            out.push(x.powi(l as i32) / dfact);
        }
        return out;
    }
    let start = l_max + 16 + (1.5 * x.abs()) as usize;
    let mut jp = 0.0_f64;
    let mut j = 1e-30_f64;
    let mut out = vec![0.0; l_max + 1];
    for n in (0..start).rev() {
        let jm = (2 * n + 3) as f64 / x * j - jp;
        jp = j;
        j = jm;
        if n <= l_max {
            out[n] = j;
        }
        if j.abs() > 1e250 {
            let s = 1e-250;
            jp *= s;
            j *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    let scale = (x.sin() / x) / out[0];
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// Spherical Neumann `n_l` for real argument by upward recurrence.
fn sph_yn(l_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(l_max + 1);
    let y0 = -x.cos() / x;
    out.push(y0);
    if l_max >= 1 {
        out.push(-x.cos() / (x * x) - x.sin() / x);
    }
    for l in 1..l_max {
        let next = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
        out.push(next);
    }
    out
}

/// Log-derivative `j_l'(z)/j_l(z)` for complex argument via the downward
/// ratio recurrence `rho_n = j_n / j_{n-1}`; overflow-free even deep in the
/// evanescent regime.
fn sph_j_logderiv(l: usize, z: C64) -> C64 {
    let start = l + 24 + (1.5 * z.norm()) as usize;
    let mut rho = z / (2 * start + 3) as f64;
    let mut rho_at = vec![C64::new(0.0, 0.0); l + 2];
    for n in (1..=start).rev() {
        rho = z / ((2 * n + 1) as f64 - z * rho);
        if n <= l + 1 {
            rho_at[n] = rho;
        }
    }
    if l == 0 {
        -rho_at[1]
    } else {
        1.0 / rho_at[l] - (l as f64 + 1.0) / z * C64::new(1.0, 0.0)
    }
}

/// Channel label (l, m).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelLm {
    pub l: u32,
    pub m: i32,
}

/// Phase shifts `delta_l(k)` on a positive-k grid, continuous branch
/// anchored near zero at the high-k grid edge.
#[derive(Debug, Clone)]
pub struct PhaseShiftTable {
    grid: MomentumGrid,
    /// `delta[l][k_idx]`.
    delta: Vec<Vec<f64>>,
}

impl PhaseShiftTable {
    pub fn new(grid: MomentumGrid, delta: Vec<Vec<f64>>) -> Result<Self> {
        if delta.iter().any(|row| row.len() != grid.len()) {
            return Err(Error::GridMismatch("one delta value per grid node and l required".into()));
        }
        Ok(Self { grid, delta })
    }

    /// All-zero table (free particle).
    pub fn free(grid: MomentumGrid, l_max: u32) -> Self {
        let delta = vec![vec![0.0; grid.len()]; l_max as usize + 1];
        Self { grid, delta }
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn l_max(&self) -> u32 {
        self.delta.len() as u32 - 1
    }

    pub fn delta(&self, l: u32) -> &[f64] {
        &self.delta[l as usize]
    }

    /// CSV export, columns `l, k, delta_l`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# partial-wave phase shifts, l_max = {}", self.l_max())?;
        writeln!(out, "l,k,delta_l")?;
        for (l, row) in self.delta.iter().enumerate() {
            for (k, d) in self.grid.k().iter().zip(row) {
                writeln!(out, "{l},{k:.12e},{d:.12e}")?;
            }
        }
        Ok(())
    }
}

/// Phase shifts of a spherical square well/barrier of depth/height `v0` and
/// radius `a` from spherical-Bessel matching at `r = a`.
pub fn spherical_well_phase_shifts(
    v0: f64,
    a: f64,
    l_max: u32,
    grid: &MomentumGrid,
    units: &UnitSystem,
) -> Result<PhaseShiftTable> {
    if grid.k_min() <= 0.0 {
        return Err(Error::InvalidGrid("phase shifts need a k > 0 grid".into()));
    }
    if !(a > 0.0) {
        return Err(Error::Precondition(format!("radius a must be positive, got {a}")));
    }
    let lm = l_max as usize;
    let mut delta = vec![vec![0.0; grid.len()]; lm + 1];
    for (ki, &k) in grid.k().iter().enumerate() {
        let energy = units.energy_of_k(k);
        let q2 = 2.0 * units.mass * (energy - v0) / (units.hbar * units.hbar);
        let q = C64::new(q2, 0.0).sqrt();
        let x = k * a;
        let j = sph_jn(lm + 1, x);
        let y = sph_yn(lm + 1, x);
        for l in 0..=lm {
            // interior log-derivative q j_l'(qa)/j_l(qa); real for real or
            // purely imaginary q
            let ld = q * sph_j_logderiv(l, q * a);
            debug_assert!(ld.im.abs() < 1e-8 * (1.0 + ld.re.abs()));
            let ld = ld.re;
            let (jl, yl) = (j[l], y[l]);
            let (jd, yd) = if l == 0 {
                (-j[1], -y[1])
            } else {
                (j[l - 1] - (l as f64 + 1.0) / x * j[l], y[l - 1] - (l as f64 + 1.0) / x * y[l])
            };
            let num = k * jd - ld * jl;
            let den = k * yd - ld * yl;
            delta[l][ki] = num.atan2(den).atan_fold();
        }
    }
    // each value is only defined mod pi; anchor the branch near zero at the
    // low-k edge and unwrap upward by continuity
    for row in &mut delta {
        let mut prev = row[0];
        for j in 1..row.len() {
            let shift = ((prev - row[j]) / PI).round();
            row[j] += shift * PI;
            prev = row[j];
        }
    }
    PhaseShiftTable::new(grid.clone(), delta)
}

trait AtanFold {
    fn atan_fold(self) -> f64;
}

impl AtanFold for f64 {
    /// Folds an atan2 result into the (-pi/2, pi/2] branch of a phase
    /// defined modulo pi.
    fn atan_fold(self) -> f64 {
        let mut v = self;
        while v > PI / 2.0 {
            v -= PI;
        }
        while v <= -PI / 2.0 {
            v += PI;
        }
        v
    }
}

/// Unimodular channel factor `(1 + e^{-2 i delta})/|1 + e^{2 i delta}|`.
pub fn channel_factor(delta: f64) -> Result<C64> {
    let denom = (C64::new(1.0, 0.0) + C64::new(0.0, 2.0 * delta).exp()).norm();
    if denom < EPS_REG {
        return Err(Error::ChannelFactorSingular { delta, value: denom, floor: EPS_REG });
    }
    Ok((C64::new(1.0, 0.0) + C64::new(0.0, -2.0 * delta).exp()) / denom)
}

/// State as channel amplitudes `phi_{lm}(k)` on a positive-k grid.
#[derive(Debug, Clone)]
pub struct PartialWaveState {
    grid: MomentumGrid,
    channels: Vec<ChannelLm>,
    /// `amps[channel][k_idx]`.
    amps: Vec<Vec<C64>>,
}

impl PartialWaveState {
    pub fn new(grid: MomentumGrid, channels: Vec<ChannelLm>, mut amps: Vec<Vec<C64>>) -> Result<Self> {
        if channels.len() != amps.len() || amps.iter().any(|a| a.len() != grid.len()) {
            return Err(Error::GridMismatch("one full amplitude row per channel required".into()));
        }
        for c in &channels {
            if c.m.unsigned_abs() > c.l {
                return Err(Error::Precondition(format!("|m| <= l violated for (l={}, m={})", c.l, c.m)));
            }
        }
        let norm2: f64 = amps
            .iter()
            .map(|row| -> f64 {
                grid.weights().iter().zip(row).map(|(w, a)| w * a.norm_sqr()).sum()
            })
            .sum();
        if !(norm2 > 0.0) {
            return Err(Error::Precondition("cannot normalize a zero state".into()));
        }
        let s = 1.0 / norm2.sqrt();
        for row in &mut amps {
            for a in row.iter_mut() {
                *a *= s;
            }
        }
        Ok(Self { grid, channels, amps })
    }

    /// Gaussian radial profile in a single (l, m) channel.
    pub fn single_channel_gaussian(grid: &MomentumGrid, channel: ChannelLm, k0: f64, sigma_k: f64) -> Result<Self> {
        let amps: Vec<C64> = grid
            .k()
            .iter()
            .map(|&k| {
                let d = k - k0;
                C64::new((-d * d / (4.0 * sigma_k * sigma_k)).exp(), 0.0)
            })
            .collect();
        Self::new(grid.clone(), vec![channel], vec![amps])
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn channels(&self) -> &[ChannelLm] {
        &self.channels
    }

    pub fn amplitudes(&self) -> &[Vec<C64>] {
        &self.amps
    }

    /// Per-channel norm fractions (diagnostic for l_max convergence).
    pub fn channel_norms(&self) -> Vec<f64> {
        self.amps
            .iter()
            .map(|row| self.grid.weights().iter().zip(row).map(|(w, a)| w * a.norm_sqr()).sum())
            .collect()
    }

    /// Phase evolution `e^{-i E t0 / hbar}` applied to every channel.
    pub fn phase_evolve(&self, t0: f64, units: &UnitSystem) -> PartialWaveState {
        let mut out = self.clone();
        for row in &mut out.amps {
            for (a, &k) in row.iter_mut().zip(self.grid.k()) {
                *a *= C64::new(0.0, -units.energy_of_k(k) * t0 / units.hbar).exp();
            }
        }
        out
    }
}

/// Clock distribution of a partial-wave state under the unique
/// rotation-invariant kernel, diagonal in (l, m).
pub fn clock_distribution_3d(
    state: &PartialWaveState,
    shifts: &PhaseShiftTable,
    times: &TimeGrid,
    units: &UnitSystem,
) -> Result<TimeDistribution> {
    if state.grid() != shifts.grid() {
        return Err(Error::GridMismatch("state and phase-shift grids differ".into()));
    }
    for c in state.channels() {
        if c.l > shifts.l_max() {
            return Err(Error::IndexOutOfGrid(format!(
                "channel l = {} beyond table l_max = {}",
                c.l,
                shifts.l_max()
            )));
        }
    }
    // conj(channel factor) per node, per occupied channel
    let mut factors: Vec<Vec<C64>> = Vec::with_capacity(state.channels().len());
    for c in state.channels() {
        let row: Result<Vec<C64>> = shifts
            .delta(c.l)
            .iter()
            .map(|&d| channel_factor(d).map(|f| f.conj()))
            .collect();
        factors.push(row?);
    }
    let grid = state.grid();
    let prefactor = units.hbar / (2.0 * PI * units.mass);
    let values = par::map_collect(times.times(), |&t| {
        let mut total = 0.0;
        for (row, fac) in state.amplitudes().iter().zip(&factors) {
            let mut amp = C64::new(0.0, 0.0);
            for (((&k, &w), a), f) in grid.k().iter().zip(grid.weights()).zip(row).zip(fac) {
                let phase = C64::new(0.0, units.energy_of_k(k) * t / units.hbar).exp();
                amp += w * k.sqrt() * f * phase * a;
            }
            total += amp.norm_sqr();
        }
        prefactor * total
    });
    TimeDistribution::new(times.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn units() -> UnitSystem {
        UnitSystem::natural()
    }

    fn kgrid() -> MomentumGrid {
        MomentumGrid::positive(0.0, 10.0, 256).unwrap()
    }

    #[test]
    fn bessel_values_against_closed_forms() {
        for &x in &[0.3, 1.7, 6.4] {
            let j = sph_jn(2, x);
            assert_abs_diff_eq!(j[0], x.sin() / x, epsilon = 1e-12);
            assert_abs_diff_eq!(j[1], x.sin() / (x * x) - x.cos() / x, epsilon = 1e-12);
            let y = sph_yn(2, x);
            assert_abs_diff_eq!(y[0], -x.cos() / x, epsilon = 1e-12);
            assert_abs_diff_eq!(y[1], -x.cos() / (x * x) - x.sin() / x, epsilon = 1e-12);
        }
    }

    #[test]
    fn logderiv_matches_closed_form() {
        for &z in &[C64::new(1.3, 0.0), C64::new(0.0, 2.7), C64::new(0.0, 40.0)] {
            let ld = sph_j_logderiv(0, z);
            if z.norm() < 10.0 {
                // j0'/j0 = cot z - 1/z
                let direct = z.cos() / z.sin() - 1.0 / z;
                assert!((ld - direct).norm() < 1e-10, "z = {z}");
            } else {
                // deep evanescent: cot(i kappa) -> -i, so j0'/j0 -> -i - 1/z
                let asymptotic = C64::new(0.0, -1.0) - 1.0 / z;
                assert!((ld - asymptotic).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn free_potential_zero_shifts() {
        let t = spherical_well_phase_shifts(0.0, 1.0, 4, &kgrid(), &units()).unwrap();
        for l in 0..=4 {
            assert!(t.delta(l).iter().all(|d| d.abs() < 1e-10), "l = {l}");
        }
    }

    /// Oracle: radial ODE shooting for u_l(r), matched to free solutions
    /// past the potential edge.
    fn shoot_delta(v0: f64, a: f64, l: u32, k: f64, u: &UnitSystem) -> f64 {
        let lf = l as f64;
        let energy = u.energy_of_k(k);
        let two_m = 2.0 * u.mass / (u.hbar * u.hbar);
        let pot = |r: f64| if r <= a { v0 } else { 0.0 };
        let rhs = |r: f64, y: f64, dy: f64| -> (f64, f64) {
            (dy, (lf * (lf + 1.0) / (r * r) + two_m * (pot(r) - energy)) * y)
        };
        let r0 = 1e-6;
        let r_match = a * 1.5;
        let n = 200_000;
        let h = (r_match - r0) / n as f64;
        let mut r = r0;
        let mut y = r0.powi(l as i32 + 1);
        let mut dy = (lf + 1.0) * r0.powi(l as i32);
        for _ in 0..n {
            let (k1y, k1d) = rhs(r, y, dy);
            let (k2y, k2d) = rhs(r + 0.5 * h, y + 0.5 * h * k1y, dy + 0.5 * h * k1d);
            let (k3y, k3d) = rhs(r + 0.5 * h, y + 0.5 * h * k2y, dy + 0.5 * h * k2d);
            let (k4y, k4d) = rhs(r + h, y + h * k3y, dy + h * k3d);
            y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            dy += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            r += h;
            if y.abs() > 1e200 {
                y *= 1e-200;
                dy *= 1e-200;
            }
        }
        // R = u/r; R'/R = u'/u - 1/r
        let ld = dy / y - 1.0 / r_match;
        let x = k * r_match;
        let j = sph_jn(l as usize + 1, x);
        let yv = sph_yn(l as usize + 1, x);
        let (jd, yd) = if l == 0 {
            (-j[1], -yv[1])
        } else {
            (
                j[l as usize - 1] - (lf + 1.0) / x * j[l as usize],
                yv[l as usize - 1] - (lf + 1.0) / x * yv[l as usize],
            )
        };
        (k * jd - ld * j[l as usize]).atan2(k * yd - ld * yv[l as usize])
    }

    #[test]
    fn hard_core_limit_s_wave() {
        let u = units();
        let a = 1.0;
        let grid = MomentumGrid::positive(0.2, 2.0, 32).unwrap();
        let t = spherical_well_phase_shifts(1e8, a, 0, &grid, &u).unwrap();
        for (&k, &d) in grid.k().iter().zip(t.delta(0)) {
            assert_abs_diff_eq!(d, -k * a, epsilon = 1e-3);
        }
    }

    #[test]
    fn phase_shifts_match_radial_ode() {
        let u = units();
        let (v0, a) = (-2.0, 1.0);
        for &(l, k) in &[(0_u32, 0.7), (1, 1.3), (2, 2.4)] {
            let grid = MomentumGrid::positive(k - 0.05, k + 0.05, 1).unwrap();
            let table = spherical_well_phase_shifts(v0, a, l, &grid, &u).unwrap();
            let got = table.delta(l)[0];
            let want = shoot_delta(v0, a, l, grid.k()[0], &u);
            let diff = (got - want).rem_euclid(PI);
            let diff = diff.min(PI - diff);
            assert!(diff < 1e-4, "l = {l}, k = {k}: {got} vs {want}");
        }
    }

    #[test]
    fn zero_energy_resonance_s_wave() {
        let u = units();
        // threshold bound state at kappa0 a = pi/2 for the attractive well
        let v0 = -PI * PI / 8.0;
        let a = 1.0;
        let grid = MomentumGrid::positive(0.02, 0.1, 4).unwrap();
        let t = spherical_well_phase_shifts(v0, a, 0, &grid, &u).unwrap();
        for (ki, &k) in grid.k().iter().enumerate() {
            let want = shoot_delta(v0, a, 0, k, &u);
            let got = t.delta(0)[ki];
            let diff = (got - want).rem_euclid(PI);
            let diff = diff.min(PI - diff);
            assert!(diff < 1e-4, "k = {k}: {got} vs {want}");
        }
        // delta_0 approaches pi/2 (mod pi) as k -> 0
        let low = t.delta(0)[0].rem_euclid(PI);
        assert!((low - PI / 2.0).abs() < 0.1, "delta_0(k->0) = {low}");
    }

    #[test]
    fn channel_factor_values() {
        assert!((channel_factor(0.0).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
        let f = channel_factor(PI / 4.0).unwrap();
        let expected = C64::new(0.0, -PI / 4.0).exp();
        assert!((f - expected).norm() < 1e-12);
        // conjugation symmetry
        for &d in &[0.3, 1.1, -0.8] {
            let a = channel_factor(d).unwrap();
            let b = channel_factor(-d).unwrap();
            assert!((a.conj() - b).norm() < 1e-12);
        }
        assert!(matches!(
            channel_factor(PI / 2.0),
            Err(Error::ChannelFactorSingular { .. })
        ));
    }

    #[test]
    fn free_kernel_matches_direct_quadrature() {
        let u = units();
        let grid = kgrid();
        let state = PartialWaveState::single_channel_gaussian(&grid, ChannelLm { l: 1, m: 0 }, 5.0, 0.5).unwrap();
        let shifts = PhaseShiftTable::free(grid.clone(), 2);
        let tg = TimeGrid::new(-3.0, 3.0, 601).unwrap();
        let d = clock_distribution_3d(&state, &shifts, &tg, &u).unwrap();
        // direct free quadrature: (hbar/2 pi m) |sum w sqrt(k) e^{iEt} phi|^2
        for (j, &t) in tg.times().iter().enumerate() {
            let mut amp = C64::new(0.0, 0.0);
            for ((&k, &w), a) in grid.k().iter().zip(grid.weights()).zip(&state.amplitudes()[0]) {
                amp += w * k.sqrt() * C64::new(0.0, u.energy_of_k(k) * t / u.hbar).exp() * a;
            }
            let direct = u.hbar / (2.0 * PI * u.mass) * amp.norm_sqr();
            assert!((d.values()[j] - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn distribution_normalizes_and_single_channel_diagonal() {
        let u = units();
        let grid = kgrid();
        let state = PartialWaveState::single_channel_gaussian(&grid, ChannelLm { l: 2, m: -1 }, 5.0, 0.5).unwrap();
        let shifts = spherical_well_phase_shifts(-1.0, 0.8, 4, &grid, &u).unwrap();
        let tg = TimeGrid::new(-4.0, 4.0, 1601).unwrap();
        let d = clock_distribution_3d(&state, &shifts, &tg, &u).unwrap();
        assert_abs_diff_eq!(d.total(), 1.0, epsilon = 1e-4);
        assert!(d.min_value() >= -1e-12);
    }

    #[test]
    fn lm_relative_phase_invariance() {
        let u = units();
        let grid = kgrid();
        let mk = |phase: f64| {
            let rows: Vec<Vec<C64>> = [5.0, 6.0]
                .iter()
                .enumerate()
                .map(|(i, &k0)| {
                    grid.k()
                        .iter()
                        .map(|&k| {
                            let d: f64 = k - k0;
                            let ph = if i == 1 { phase } else { 0.0 };
                            C64::new(0.0, ph).exp() * (-d * d).exp()
                        })
                        .collect()
                })
                .collect();
            PartialWaveState::new(
                grid.clone(),
                vec![ChannelLm { l: 0, m: 0 }, ChannelLm { l: 3, m: 2 }],
                rows,
            )
            .unwrap()
        };
        let shifts = spherical_well_phase_shifts(1.2, 0.6, 4, &grid, &u).unwrap();
        let tg = TimeGrid::new(-2.0, 2.0, 401).unwrap();
        let d0 = clock_distribution_3d(&mk(0.0), &shifts, &tg, &u).unwrap();
        let d1 = clock_distribution_3d(&mk(2.1), &shifts, &tg, &u).unwrap();
        for (a, b) in d0.values().iter().zip(d1.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn clock_covariance_shift() {
        let u = units();
        let grid = kgrid();
        let state = PartialWaveState::single_channel_gaussian(&grid, ChannelLm { l: 0, m: 0 }, 5.0, 0.5).unwrap();
        let shifts = spherical_well_phase_shifts(-0.5, 1.0, 2, &grid, &u).unwrap();
        let tg = TimeGrid::new(-4.0, 4.0, 801).unwrap();
        let d = clock_distribution_3d(&state, &shifts, &tg, &u).unwrap();
        let t0 = 5.0 * tg.dt();
        let ds = clock_distribution_3d(&state.phase_evolve(t0, &u), &shifts, &tg, &u).unwrap();
        let shift = 5;
        for j in shift..tg.len() {
            assert_abs_diff_eq!(ds.values()[j], d.values()[j - shift], epsilon = 1e-8);
        }
    }

    #[test]
    fn continuity_in_well_depth() {
        let u = units();
        let grid = kgrid();
        let state = PartialWaveState::single_channel_gaussian(&grid, ChannelLm { l: 1, m: 1 }, 5.0, 0.5).unwrap();
        let tg = TimeGrid::new(-2.0, 2.0, 401).unwrap();
        let free = clock_distribution_3d(&state, &PhaseShiftTable::free(grid.clone(), 2), &tg, &u).unwrap();
        let mut prev_sup = f64::INFINITY;
        for &v0 in &[0.4, 0.1, 0.02] {
            let shifts = spherical_well_phase_shifts(v0, 1.0, 2, &grid, &u).unwrap();
            let d = clock_distribution_3d(&state, &shifts, &tg, &u).unwrap();
            let sup = d
                .values()
                .iter()
                .zip(free.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            assert!(sup < prev_sup || sup < 1e-10);
            prev_sup = sup;
        }
        assert!(prev_sup < 1e-2);
    }
}
