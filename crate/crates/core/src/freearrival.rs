//! Generalized Kijowski arrival distribution for free particles, the
//! positive current quantization, and the comparison with the ordinary
//! probability current (backflow).
//!
//! The 1D arrival density is evaluated directly from the two incoherent
//! half-line momentum sums
//!
//! `Pi(t) = (hbar/2 pi m) [ |sum_{k>0} w sqrt(k) e^{-i hbar k^2 t/2m} psi(k)|^2
//!                        + |sum_{k<0} w sqrt(|k|) e^{-i hbar k^2 t/2m} psi(k)|^2 ]`
//!
//! The arrival sign convention (`-i` in the time exponent) is pinned by the
//! classical limit: a right-mover launched from `x0 < 0` peaks at
//! `t = m |x0| / hbar k0`.

use crate::error::Error;
use crate::par;
use crate::state::{GaussianComponent, MomentumGrid, TimeDistribution, TimeGrid, UnitSystem, WavePacket};
use crate::{Result, C64};
use std::f64::consts::PI;

/// Half-line Kijowski functional of one amplitude column: the two incoherent
/// terms, with the plane-offset factor `e^{i k a}` applied.
///
/// Summation runs over grid nodes in ascending order; this order is shared by
/// the parallel and sequential paths.
fn kijowski_values(
    grid: &MomentumGrid,
    amps: &[C64],
    times: &TimeGrid,
    plane_offset: f64,
    twist: Option<&dyn Fn(f64) -> f64>,
    units: &UnitSystem,
) -> Vec<f64> {
    let prefactor = units.hbar / (2.0 * PI * units.mass);
    let nodes: Vec<(f64, f64, C64)> = grid
        .k()
        .iter()
        .zip(grid.weights())
        .zip(amps)
        .map(|((&k, &w), &a)| {
            let lam = twist.map_or(0.0, |f| f(k.abs()));
            let a = a * C64::new(0.0, k * plane_offset - lam).exp();
            (k, w, a)
        })
        .collect();
    par::map_collect(times.times(), |&t| {
        let mut right = C64::new(0.0, 0.0);
        let mut left = C64::new(0.0, 0.0);
        for &(k, w, a) in &nodes {
            let phase = C64::new(0.0, -units.energy_of_k(k) * t / units.hbar).exp();
            let term = w * k.abs().sqrt() * phase * a;
            if k > 0.0 {
                right += term;
            } else {
                left += term;
            }
        }
        prefactor * (right.norm_sqr() + left.norm_sqr())
    })
}

/// Sequential reference path for the same functional (bench comparison).
pub fn kijowski_1d_seq(packet: &WavePacket, times: &TimeGrid, units: &UnitSystem) -> Vec<f64> {
    let prefactor = units.hbar / (2.0 * PI * units.mass);
    let grid = packet.grid();
    par::map_collect_seq(times.times(), |&t| {
        let mut right = C64::new(0.0, 0.0);
        let mut left = C64::new(0.0, 0.0);
        for ((&k, &w), &a) in grid.k().iter().zip(grid.weights()).zip(packet.amplitudes()) {
            let phase = C64::new(0.0, -units.energy_of_k(k) * t / units.hbar).exp();
            let term = w * k.abs().sqrt() * phase * a;
            if k > 0.0 {
                right += term;
            } else {
                left += term;
            }
        }
        prefactor * (right.norm_sqr() + left.norm_sqr())
    })
}

/// Kijowski arrival distribution at `x = 0` for a 1D free packet.
pub fn kijowski_1d(packet: &WavePacket, times: &TimeGrid, units: &UnitSystem) -> Result<TimeDistribution> {
    let values = kijowski_values(packet.grid(), packet.amplitudes(), times, 0.0, None, units);
    TimeDistribution::new(times.clone(), values)
}

/// Probability current `J(x, t) = (hbar/m) Im[conj(psi) d_x psi]` sampled on
/// the time grid.
pub fn current_at_plane(packet: &WavePacket, times: &TimeGrid, x: f64, units: &UnitSystem) -> Vec<f64> {
    par::map_collect(times.times(), |&t| {
        let psi = packet.position_amplitude(x, t, units);
        let dpsi = packet.position_amplitude_dx(x, t, units);
        units.hbar / units.mass * (psi.conj() * dpsi).im
    })
}

/// Transverse quadrature node of a plane-arrival packet.
#[derive(Debug, Clone, Copy)]
pub struct TransverseNode {
    pub k2: f64,
    pub k3: f64,
    pub weight: f64,
}

/// 3D packet for arrivals at a plane perpendicular to the longitudinal axis.
///
/// The arrival kernel is diagonal in the transverse momenta, so the state is
/// stored as amplitude columns over transverse nodes; no transverse
/// coherences are ever formed.
#[derive(Debug, Clone)]
pub enum PlanePacket3D {
    /// Product state `psi(k1) chi(k2, k3)`.
    Factorized {
        longitudinal: WavePacket,
        transverse: Vec<TransverseNode>,
        chi: Vec<C64>,
    },
    /// One longitudinal amplitude column per transverse node.
    General {
        grid: MomentumGrid,
        transverse: Vec<TransverseNode>,
        columns: Vec<Vec<C64>>,
    },
}

impl PlanePacket3D {
    pub fn factorized(longitudinal: WavePacket, transverse: Vec<TransverseNode>, chi: Vec<C64>) -> Result<Self> {
        if chi.len() != transverse.len() {
            return Err(Error::GridMismatch("one chi amplitude per transverse node required".into()));
        }
        let t_norm: f64 = transverse
            .iter()
            .zip(&chi)
            .map(|(n, c)| n.weight * c.norm_sqr())
            .sum();
        if (t_norm - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "transverse factor not normalized: sum w |chi|^2 = {t_norm}"
            )));
        }
        if (longitudinal.norm2() - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition("longitudinal factor not normalized".into()));
        }
        Ok(Self::Factorized { longitudinal, transverse, chi })
    }

    pub fn general(grid: MomentumGrid, transverse: Vec<TransverseNode>, columns: Vec<Vec<C64>>) -> Result<Self> {
        if columns.len() != transverse.len() || columns.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch("one full-length column per transverse node required".into()));
        }
        let norm: f64 = transverse
            .iter()
            .zip(&columns)
            .map(|(n, col)| {
                let col_norm: f64 = grid.weights().iter().zip(col).map(|(w, a)| w * a.norm_sqr()).sum();
                n.weight * col_norm
            })
            .sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("3D packet not normalized: norm^2 = {norm}")));
        }
        Ok(Self::General { grid, transverse, columns })
    }
}

/// Arrival distribution at the plane `x1 = a` for a 3D packet.
pub fn kijowski_plane_3d(
    packet: &PlanePacket3D,
    times: &TimeGrid,
    a: f64,
    units: &UnitSystem,
) -> Result<TimeDistribution> {
    let mut total = vec![0.0; times.len()];
    match packet {
        PlanePacket3D::Factorized { longitudinal, transverse, chi } => {
            let one_d = kijowski_values(longitudinal.grid(), longitudinal.amplitudes(), times, a, None, units);
            let weight: f64 = transverse.iter().zip(chi).map(|(n, c)| n.weight * c.norm_sqr()).sum();
            for (o, v) in total.iter_mut().zip(&one_d) {
                *o = weight * v;
            }
        }
        PlanePacket3D::General { grid, transverse, columns } => {
            for (node, col) in transverse.iter().zip(columns) {
                let vals = kijowski_values(grid, col, times, a, None, units);
                for (o, v) in total.iter_mut().zip(&vals) {
                    *o += node.weight * v;
                }
            }
        }
    }
    TimeDistribution::new(times.clone(), total)
}

/// Arrival-time variance with the minimal kernel vs a phase-twisted kernel
/// `b = sqrt(k) e^{i lambda(k)}`; both by direct quadrature on `times`.
///
/// Returns `(minimal, twisted)`.
pub fn variance_penalty(
    packet: &WavePacket,
    twist: &dyn Fn(f64) -> f64,
    times: &TimeGrid,
    units: &UnitSystem,
) -> Result<(f64, f64)> {
    for &k in packet.grid().k() {
        if !twist(k.abs()).is_finite() {
            return Err(Error::Precondition(format!("twist not finite at k = {k}")));
        }
    }
    let base = kijowski_values(packet.grid(), packet.amplitudes(), times, 0.0, None, units);
    let twisted = kijowski_values(packet.grid(), packet.amplitudes(), times, 0.0, Some(twist), units);
    let v_min = TimeDistribution::new(times.clone(), base)?.variance();
    let v_tw = TimeDistribution::new(times.clone(), twisted)?.variance();
    Ok((v_min, v_tw))
}

/// Outcome of a backflow parameter scan.
#[derive(Debug, Clone)]
pub struct BackflowFixture {
    pub components: [GaussianComponent; 2],
    pub min_current: f64,
    pub time_of_min: f64,
}

/// Scans relative amplitude and phase of a two-Gaussian positive-momentum
/// superposition for negativity of the probability current at `x = 0`.
///
/// The Kijowski distribution of the same states stays nonnegative; the scan
/// exhibits the backflow effect that rules out the current as an arrival
/// density.
pub fn backflow_scan(
    grid: &MomentumGrid,
    times: &TimeGrid,
    k_pair: (f64, f64),
    sigma_k: f64,
    units: &UnitSystem,
) -> Result<BackflowFixture> {
    let ratios = [0.4, 0.6, 0.8, 1.0, 1.3, 1.6];
    let n_phases = 16;
    let mut best: Option<BackflowFixture> = None;
    for &r in &ratios {
        for ip in 0..n_phases {
            let phase = 2.0 * PI * ip as f64 / n_phases as f64;
            let comps = [
                GaussianComponent { k0: k_pair.0, sigma_k, x0: 0.0, weight: 1.0, phase: 0.0 },
                GaussianComponent { k0: k_pair.1, sigma_k, x0: 0.0, weight: r, phase },
            ];
            let packet = WavePacket::superposition(grid, &comps)?;
            let current = current_at_plane(&packet, times, 0.0, units);
            let (j_min, t_min) = current
                .iter()
                .zip(times.times())
                .fold((f64::INFINITY, 0.0), |(jm, tm), (&j, &t)| {
                    if j < jm {
                        (j, t)
                    } else {
                        (jm, tm)
                    }
                });
            let candidate = BackflowFixture { components: comps, min_current: j_min, time_of_min: t_min };
            if best.as_ref().is_none_or(|b| j_min < b.min_current) {
                best = Some(candidate);
            }
        }
    }
    best.ok_or_else(|| Error::Precondition("empty scan".into()))
}
