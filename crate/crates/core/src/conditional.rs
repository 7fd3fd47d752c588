//! Detection by a complex absorbing potential: raw first-arrival
//! distributions, total arrival probability, conditional normalization, and
//! operator normalization via the Gram matrix of a packet basis.
//!
//! The detector is a purely imaginary potential -i V_I(x) with a smooth
//! monomial bump profile; absorbed amplitude never returns, which is what
//! makes the recorded rate a *first*-arrival density at the model level.

use crate::error::Error;
use crate::par;
use crate::state::{trapezoid, TimeDistribution, TimeGrid, UnitSystem, WavePacket};
use crate::{Result, C64};
use nalgebra::DMatrix;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

/// Default relative eigenvalue floor for the Gram operator.
pub const DEFAULT_EPS_N: f64 = 1e-6;

/// Maximum tolerated initial-norm fraction inside the absorber support.
pub const OVERLAP_LIMIT: f64 = 1e-8;

/// Split-step stability bound on `dt * max|V - iV_I| / hbar`.
const STABILITY_LIMIT: f64 = 0.1;

/// Uniform periodic position grid with a power-of-two point count.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    dx: f64,
    n: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(Error::InvalidGrid(format!("need x_max > x_min, got [{x_min}, {x_max}]")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("grid size must be a power of two >= 8, got {n}")));
        }
        Ok(Self { x_min, dx: (x_max - x_min) / n as f64, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.n as f64 * self.dx
    }

    /// FFT wavenumber of bin `j` (standard wrap-around ordering).
    fn wavenumber(&self, j: usize) -> f64 {
        let m = if j <= self.n / 2 { j as f64 } else { j as f64 - self.n as f64 };
        2.0 * PI * m / (self.n as f64 * self.dx)
    }

    /// Samples a momentum-space packet onto the grid, normalized so that
    /// `sum |psi|^2 dx = 1`.
    pub fn sample_packet(&self, packet: &WavePacket, units: &UnitSystem) -> Vec<C64> {
        let mut psi: Vec<C64> = (0..self.n)
            .map(|j| packet.position_amplitude(self.x(j), 0.0, units))
            .collect();
        let norm2: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dx;
        let s = 1.0 / norm2.sqrt();
        for a in &mut psi {
            *a *= s;
        }
        psi
    }
}

/// Smooth absorber bump: `V_I(x) = strength (1 - |x - center|/half_width)^p`
/// on its support, zero outside.
#[derive(Debug, Clone, Copy)]
pub struct AbsorberConfig {
    pub center: f64,
    pub half_width: f64,
    pub strength: f64,
    pub exponent: u32,
}

impl AbsorberConfig {
    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        if !(self.strength > 0.0) {
            return Err(Error::Precondition(format!("absorber strength must be positive, got {}", self.strength)));
        }
        if !(self.half_width > 0.0) {
            return Err(Error::Precondition("absorber half_width must be positive".into()));
        }
        if self.exponent < 2 {
            return Err(Error::Precondition(format!("absorber exponent must be >= 2, got {}", self.exponent)));
        }
        if self.center - self.half_width < grid.x_min() || self.center + self.half_width > grid.x_max() {
            return Err(Error::Precondition("absorber support extends beyond the grid".into()));
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        let u = 1.0 - (x - self.center).abs() / self.half_width;
        if u > 0.0 {
            self.strength * u.powi(self.exponent as i32)
        } else {
            0.0
        }
    }

    fn samples(&self, grid: &SpatialGrid) -> Vec<f64> {
        (0..grid.len()).map(|j| self.value(grid.x(j))).collect()
    }
}

/// Second-order split-step propagator for `H - i V_I`.
struct Propagator {
    grid: SpatialGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kinetic: Vec<C64>,
    half_pot: Vec<C64>,
    v_i: Vec<f64>,
    dx: f64,
    hbar: f64,
}

impl Propagator {
    fn new(
        grid: &SpatialGrid,
        v: &[f64],
        absorber: Option<&AbsorberConfig>,
        dt: f64,
        units: &UnitSystem,
    ) -> Result<Self> {
        if v.len() != grid.len() {
            return Err(Error::GridMismatch("potential samples must match the grid".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Precondition(format!("time step must be positive, got {dt}")));
        }
        if let Some(a) = absorber {
            a.validate(grid)?;
        }
        let v_i = absorber.map(|a| a.samples(grid)).unwrap_or_else(|| vec![0.0; grid.len()]);
        let v_scale = v
            .iter()
            .zip(&v_i)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0_f64, f64::max);
        if dt * v_scale / units.hbar >= STABILITY_LIMIT {
            return Err(Error::Stability(format!(
                "dt * max|V - iV_I| / hbar = {:.3} exceeds {STABILITY_LIMIT}",
                dt * v_scale / units.hbar
            )));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.len());
        let inv = planner.plan_fft_inverse(grid.len());
        let kinetic = (0..grid.len())
            .map(|j| {
                let k = grid.wavenumber(j);
                C64::new(0.0, -units.energy_of_k(k) * dt / units.hbar).exp()
            })
            .collect();
        let half_pot = v
            .iter()
            .zip(&v_i)
            .map(|(&vr, &vi)| (C64::new(-vi, -vr) * (0.5 * dt / units.hbar)).exp())
            .collect();
        Ok(Self {
            grid: grid.clone(),
            fwd,
            inv,
            kinetic,
            half_pot,
            v_i,
            dx: grid.dx(),
            hbar: units.hbar,
        })
    }

    /// Requires the state to be resolved: at most `1e-6` of its norm above
    /// the 8-points-per-wavelength ceiling.
    fn check_resolution(&self, psi: &[C64]) -> Result<()> {
        let mut spec = psi.to_vec();
        self.fwd.process(&mut spec);
        let total: f64 = spec.iter().map(|a| a.norm_sqr()).sum();
        let k_lim = PI / (4.0 * self.dx);
        let high: f64 = spec
            .iter()
            .enumerate()
            .filter(|(j, _)| self.grid.wavenumber(*j).abs() > k_lim)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if high > 1e-6 * total {
            return Err(Error::Stability(format!(
                "{:.2e} of the state lies above the 8-points-per-wavelength limit k = {k_lim:.3}",
                high / total
            )));
        }
        Ok(())
    }

    fn step(&self, psi: &mut [C64]) {
        for (a, h) in psi.iter_mut().zip(&self.half_pot) {
            *a *= h;
        }
        self.fwd.process(psi);
        let scale = 1.0 / self.grid.len() as f64;
        for (a, k) in psi.iter_mut().zip(&self.kinetic) {
            *a *= k * scale;
        }
        self.inv.process(psi);
        for (a, h) in psi.iter_mut().zip(&self.half_pot) {
            *a *= h;
        }
    }

    fn norm2(&self, psi: &[C64]) -> f64 {
        psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dx
    }

    fn rate(&self, psi: &[C64]) -> f64 {
        2.0 / self.hbar
            * psi
                .iter()
                .zip(&self.v_i)
                .map(|(a, vi)| vi * a.norm_sqr())
                .sum::<f64>()
            * self.dx
    }
}

/// Norm and absorption-rate history of one propagation.
#[derive(Debug, Clone)]
pub struct PropagationRun {
    times: TimeGrid,
    norm: Vec<f64>,
    rate: Vec<f64>,
    final_state: Vec<C64>,
}

impl PropagationRun {
    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn norm(&self) -> &[f64] {
        &self.norm
    }

    pub fn rate(&self) -> &[f64] {
        &self.rate
    }

    pub fn final_state(&self) -> &[C64] {
        &self.final_state
    }

    pub fn absorbed(&self) -> f64 {
        1.0 - self.norm[self.norm.len() - 1]
    }

    /// CSV export, columns `t, norm, rate`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# absorbing-potential run, {} samples", self.times.len())?;
        writeln!(out, "t,norm,rate")?;
        for ((t, n), r) in self.times.times().iter().zip(&self.norm).zip(&self.rate) {
            writeln!(out, "{t:.12e},{n:.12e},{r:.12e}")?;
        }
        Ok(())
    }
}

/// Propagates a normalized initial state through `V - i V_I` and records
/// norm and absorption rate at every step.
pub fn propagate_with_absorber(
    grid: &SpatialGrid,
    psi0: &[C64],
    v: &[f64],
    absorber: Option<&AbsorberConfig>,
    dt: f64,
    n_steps: usize,
    units: &UnitSystem,
) -> Result<PropagationRun> {
    let prop = Propagator::new(grid, v, absorber, dt, units)?;
    if psi0.len() != grid.len() {
        return Err(Error::GridMismatch("initial state must match the grid".into()));
    }
    let norm0 = prop.norm2(psi0);
    if !(norm0 > 0.0) {
        return Err(Error::Precondition("cannot propagate a zero state".into()));
    }
    let mut psi: Vec<C64> = psi0.iter().map(|a| a / norm0.sqrt()).collect();
    prop.check_resolution(&psi)?;
    if absorber.is_some() {
        let overlap = psi
            .iter()
            .zip(&prop.v_i)
            .filter(|(_, vi)| **vi > 0.0)
            .map(|(a, _)| a.norm_sqr())
            .sum::<f64>()
            * grid.dx();
        if overlap > OVERLAP_LIMIT {
            return Err(Error::AbsorberOverlap { overlap, limit: OVERLAP_LIMIT });
        }
    }
    let mut norm = Vec::with_capacity(n_steps + 1);
    let mut rate = Vec::with_capacity(n_steps + 1);
    norm.push(prop.norm2(&psi));
    rate.push(prop.rate(&psi));
    for _ in 0..n_steps {
        prop.step(&mut psi);
        norm.push(prop.norm2(&psi));
        rate.push(prop.rate(&psi));
    }
    Ok(PropagationRun {
        times: TimeGrid::new(0.0, dt * n_steps as f64, n_steps + 1)?,
        norm,
        rate,
        final_state: psi,
    })
}

/// Estimate of arrival probability missed by stopping the run too early.
#[derive(Debug, Clone, Copy)]
pub struct TruncationWarning {
    pub tail_estimate: f64,
}

/// Raw (non-normalized) first-arrival distribution `rate(t)`, with a
/// truncation warning if the tail past the window looks larger than 1e-3.
pub fn arrival_distribution_raw(run: &PropagationRun) -> Result<(TimeDistribution, Option<TruncationWarning>)> {
    let dist = TimeDistribution::new(run.times.clone(), run.rate.clone())?;
    let n = run.rate.len();
    let r_end = run.rate[n - 1];
    let peak = run.rate.iter().cloned().fold(0.0_f64, f64::max);
    let tail = if r_end <= 1e-12 * peak.max(1e-300) {
        0.0
    } else {
        // exponential extrapolation from the last tenth of the window,
        // falling back to the surviving norm if the rate is not decaying
        let m = (n / 10).max(2);
        let r_ref = run.rate[n - 1 - m];
        if r_ref > r_end {
            let lambda = (r_ref / r_end).ln() / (m as f64 * run.times.dt());
            r_end / lambda
        } else {
            run.norm[n - 1]
        }
    };
    let warn = if tail > 1e-3 { Some(TruncationWarning { tail_estimate: tail }) } else { None };
    Ok((dist, warn))
}

/// Total arrival probability `N = integral of the raw distribution`.
pub fn total_arrival(dist: &TimeDistribution) -> f64 {
    dist.total()
}

/// Conditional distribution `rate(t)/N`; refuses to divide when the arrival
/// probability is at or below `eps_n`.
pub fn conditional_distribution(dist: &TimeDistribution, eps_n: f64) -> Result<TimeDistribution> {
    let n = total_arrival(dist);
    if n <= eps_n {
        return Err(Error::NoArrival { n, floor: eps_n });
    }
    let values = dist.values().iter().map(|r| r / n).collect();
    TimeDistribution::new(dist.times().clone(), values)
}

/// Lowdin symmetric orthonormalization: returns `chi_m = sum_n (S^{-1/2})_{nm} psi_n`
/// for the overlap matrix `S` of the individually normalized inputs.
fn orthonormalize(grid: &SpatialGrid, basis: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    let b = basis.len();
    let mut normed: Vec<Vec<C64>> = Vec::with_capacity(b);
    for psi in basis {
        if psi.len() != grid.len() {
            return Err(Error::GridMismatch("basis state must match the grid".into()));
        }
        let n2 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.dx();
        if !(n2 > 0.0) {
            return Err(Error::Precondition("cannot orthonormalize a zero basis state".into()));
        }
        normed.push(psi.iter().map(|a| a / n2.sqrt()).collect());
    }
    let mut s = DMatrix::<C64>::zeros(b, b);
    for p in 0..b {
        for q in p..b {
            let mut acc = C64::new(0.0, 0.0);
            for (a, c) in normed[p].iter().zip(&normed[q]) {
                acc += a.conj() * c;
            }
            acc *= grid.dx();
            s[(p, q)] = acc;
            s[(q, p)] = acc.conj();
        }
    }
    let eig = s.symmetric_eigen();
    let lam_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let mut inv_sqrt = DMatrix::<C64>::zeros(b, b);
    for i in 0..b {
        let lam = eig.eigenvalues[i];
        if lam <= 1e-10 * lam_max {
            return Err(Error::Precondition(
                "basis packets are numerically linearly dependent".into(),
            ));
        }
        let u = eig.eigenvectors.column(i);
        for p in 0..b {
            for q in 0..b {
                inv_sqrt[(p, q)] += u[p] * u[q].conj() / lam.sqrt();
            }
        }
    }
    let mut out = Vec::with_capacity(b);
    for m in 0..b {
        let mut chi = vec![C64::new(0.0, 0.0); grid.len()];
        for n in 0..b {
            let c = inv_sqrt[(n, m)];
            for (o, a) in chi.iter_mut().zip(&normed[n]) {
                *o += c * a;
            }
        }
        out.push(chi);
    }
    Ok(out)
}

/// Gram operator of a packet basis under the detection model: the
/// bilinearized total arrival probability together with the cross-rate
/// series it was integrated from.
#[derive(Debug, Clone)]
pub struct GramOperator {
    times: TimeGrid,
    /// `cross_rate[t_idx][(m, n)]`, Hermitian at every sample.
    cross_rate: Vec<DMatrix<C64>>,
    matrix: DMatrix<C64>,
    eps_rel: f64,
}

/// Builds the Gram operator by lockstep propagation of every basis packet.
///
/// The packets are normalized and Lowdin-orthonormalized first (the total
/// arrival operator is bounded by 1 only against an orthonormal set); the
/// returned matrices are expressed in that orthonormal basis.
pub fn gram_operator(
    grid: &SpatialGrid,
    basis: &[Vec<C64>],
    v: &[f64],
    absorber: &AbsorberConfig,
    dt: f64,
    n_steps: usize,
    units: &UnitSystem,
) -> Result<GramOperator> {
    if basis.is_empty() {
        return Err(Error::Precondition("empty basis".into()));
    }
    let prop = Propagator::new(grid, v, Some(absorber), dt, units)?;
    let basis = orthonormalize(grid, basis)?;
    let basis = &basis;
    // only the absorber support enters the cross rates; store just that slice
    let support: Vec<usize> = prop
        .v_i
        .iter()
        .enumerate()
        .filter(|(_, vi)| **vi > 0.0)
        .map(|(j, _)| j)
        .collect();
    let vi_support: Vec<f64> = support.iter().map(|&j| prop.v_i[j]).collect();
    let traces: Vec<Result<Vec<Vec<C64>>>> = par::map_collect(basis, |psi0| {
        let run_grid = grid;
        let norm0 = prop.norm2(psi0);
        if !(norm0 > 0.0) {
            return Err(Error::Precondition("cannot propagate a zero basis state".into()));
        }
        let mut psi: Vec<C64> = psi0.iter().map(|a| a / norm0.sqrt()).collect();
        prop.check_resolution(&psi)?;
        let overlap = support.iter().map(|&j| psi[j].norm_sqr()).sum::<f64>() * run_grid.dx();
        if overlap > OVERLAP_LIMIT {
            return Err(Error::AbsorberOverlap { overlap, limit: OVERLAP_LIMIT });
        }
        let mut trace = Vec::with_capacity(n_steps + 1);
        trace.push(support.iter().map(|&j| psi[j]).collect::<Vec<_>>());
        for _ in 0..n_steps {
            prop.step(&mut psi);
            trace.push(support.iter().map(|&j| psi[j]).collect::<Vec<_>>());
        }
        Ok(trace)
    });
    let traces: Vec<Vec<Vec<C64>>> = traces.into_iter().collect::<Result<_>>()?;
    let b = basis.len();
    let scale = 2.0 / units.hbar * grid.dx();
    let cross_rate: Vec<DMatrix<C64>> = (0..=n_steps)
        .map(|ti| {
            let mut m = DMatrix::<C64>::zeros(b, b);
            for p in 0..b {
                for q in p..b {
                    let mut acc = C64::new(0.0, 0.0);
                    for ((&vi, a), c) in vi_support.iter().zip(&traces[p][ti]).zip(&traces[q][ti]) {
                        acc += vi * a.conj() * c;
                    }
                    acc *= scale;
                    m[(p, q)] = acc;
                    m[(q, p)] = acc.conj();
                }
            }
            m
        })
        .collect();
    let times = TimeGrid::new(0.0, dt * n_steps as f64, n_steps + 1)?;
    let mut matrix = DMatrix::<C64>::zeros(b, b);
    for p in 0..b {
        for q in 0..b {
            let series: Vec<f64> = cross_rate.iter().map(|m| m[(p, q)].re).collect();
            let series_im: Vec<f64> = cross_rate.iter().map(|m| m[(p, q)].im).collect();
            matrix[(p, q)] = C64::new(trapezoid(&series, dt), trapezoid(&series_im, dt));
        }
    }
    let eig = matrix.clone().symmetric_eigen();
    for &lam in eig.eigenvalues.iter() {
        if lam < -1e-6 {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: lam, tolerance: 1e-6 });
        }
        if lam > 1.0 + 1e-6 {
            return Err(Error::Precondition(format!(
                "Gram eigenvalue {lam} exceeds 1: propagation is not norm-decreasing"
            )));
        }
    }
    Ok(GramOperator { times, cross_rate, matrix, eps_rel: DEFAULT_EPS_N })
}

impl GramOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn cross_rate(&self) -> &[DMatrix<C64>] {
        &self.cross_rate
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev = 0.0_f64;
        for p in 0..self.dim() {
            for q in 0..self.dim() {
                dev = dev.max((self.matrix[(p, q)] - self.matrix[(q, p)].conj()).norm());
            }
        }
        dev
    }

    /// `(N^{1/2}, N^{-1/2}, projector, retained count)` with the eigenvalue
    /// floor applied; floored directions are projected out.
    fn spectral_roots(&self) -> (DMatrix<C64>, DMatrix<C64>, DMatrix<C64>, usize) {
        let eig = self.matrix.clone().symmetric_eigen();
        let lam_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let floor = self.eps_rel * lam_max;
        let b = self.dim();
        let mut sqrt = DMatrix::<C64>::zeros(b, b);
        let mut inv_sqrt = DMatrix::<C64>::zeros(b, b);
        let mut proj = DMatrix::<C64>::zeros(b, b);
        let mut retained = 0;
        for i in 0..b {
            let lam = eig.eigenvalues[i];
            if lam <= floor {
                continue;
            }
            retained += 1;
            let u = eig.eigenvectors.column(i);
            for p in 0..b {
                for q in 0..b {
                    let outer = u[p] * u[q].conj();
                    sqrt[(p, q)] += lam.sqrt() * outer;
                    inv_sqrt[(p, q)] += outer / lam.sqrt();
                    proj[(p, q)] += outer;
                }
            }
        }
        (sqrt, inv_sqrt, proj, retained)
    }

    pub fn retained_rank(&self) -> usize {
        self.spectral_roots().3
    }

    /// CSV export of the matrix, columns `m, n, re, im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# Gram matrix, dimension {}", self.dim())?;
        writeln!(out, "m,n,re,im")?;
        for p in 0..self.dim() {
            for q in 0..self.dim() {
                let v = self.matrix[(p, q)];
                writeln!(out, "{p},{q},{:.12e},{:.12e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Operator-normalized arrival distribution of the state with basis
/// coefficients `coeffs`: the expectation of `N^{-1/2} Pi(t) N^{-1/2}` in
/// the renormalized state `N^{1/2} c / |N^{1/2} c|`.
pub fn operator_normalized_distribution(g: &GramOperator, coeffs: &[C64]) -> Result<TimeDistribution> {
    if coeffs.len() != g.dim() {
        return Err(Error::GridMismatch("one coefficient per basis element required".into()));
    }
    let (sqrt, inv_sqrt, _, retained) = g.spectral_roots();
    if retained == 0 {
        return Err(Error::NoArrival { n: 0.0, floor: g.eps_rel });
    }
    let c = DMatrix::<C64>::from_column_slice(g.dim(), 1, coeffs);
    let psi_n = &sqrt * &c;
    let w2: f64 = psi_n.iter().map(|a| a.norm_sqr()).sum();
    if w2 <= g.eps_rel {
        return Err(Error::NoArrival { n: w2, floor: g.eps_rel });
    }
    let psi_n = psi_n / C64::new(w2.sqrt(), 0.0);
    let values: Vec<f64> = g
        .cross_rate
        .iter()
        .map(|m| {
            let pn = &inv_sqrt * m * &inv_sqrt;
            let v = (psi_n.adjoint() * pn * &psi_n)[(0, 0)];
            v.re
        })
        .collect();
    TimeDistribution::new(g.times.clone(), values)
}

/// Largest entry-wise deviation of the time integral of the operator-
/// normalized kernel from the projector onto the retained span.
pub fn integral_identity_deviation(g: &GramOperator) -> f64 {
    let (_, inv_sqrt, proj, _) = g.spectral_roots();
    let b = g.dim();
    let mut integral = DMatrix::<C64>::zeros(b, b);
    for p in 0..b {
        for q in 0..b {
            let re: Vec<f64> = g
                .cross_rate
                .iter()
                .map(|m| (&inv_sqrt * m * &inv_sqrt)[(p, q)].re)
                .collect();
            let im: Vec<f64> = g
                .cross_rate
                .iter()
                .map(|m| (&inv_sqrt * m * &inv_sqrt)[(p, q)].im)
                .collect();
            integral[(p, q)] = C64::new(trapezoid(&re, g.times.dt()), trapezoid(&im, g.times.dt()));
        }
    }
    let mut dev = 0.0_f64;
    for p in 0..b {
        for q in 0..b {
            dev = dev.max((integral[(p, q)] - proj[(p, q)]).norm());
        }
    }
    dev
}
