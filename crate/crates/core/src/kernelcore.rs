//! General covariant time kernels: channel functions, time distributions,
//! moments, and the discrete Schmidt construction.
//!
//! A kernel is represented by its channel functions `b_i(E, alpha)` on a
//! shared energy grid; the induced positive bilinear form is
//! `(1/2 pi hbar) sum_i b_i conj(b_i)`. Evaluating it on a state in the
//! energy-channel representation gives the temporal probability density
//!
//! `Pi(t) = (1/2 pi hbar) sum_i | sum_{E,alpha} w_E e^{s E t/hbar}
//!          conj(b_i(E,alpha)) psi(E,alpha) |^2`
//!
//! with `s = +i` for a clock observable and `s = -i` for an arrival
//! observable. The time loop sums energies in ascending grid order, channels
//! innermost; this order is fixed so parallel and sequential builds agree
//! bitwise.

use crate::error::Error;
use crate::par;
use crate::state::{EnergyChannels, TimeDistribution, TimeGrid, UnitSystem};
use crate::{Result, C64};
use nalgebra::DMatrix;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Which way the distribution shifts under time evolution of the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// Forward covariance: evolving the state by `t0` shifts Pi later by `t0`.
    Clock,
    /// Backward covariance: evolving the state by `t0` shifts Pi earlier by `t0`.
    Arrival,
}

/// Channel functions `b_i(E, alpha)` defining a covariant kernel.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    e: Vec<f64>,
    w: Vec<f64>,
    n_channels: usize,
    /// One flattened `[energy][channel]` vector per basis function.
    functions: Vec<Vec<C64>>,
}

/// Diagnostic from [`validate_kernel_basis`].
#[derive(Debug, Clone, Copy)]
pub struct BasisReport {
    /// Max deviation of `sum_i b_i(E,a) conj(b_i(E,a'))` from the identity.
    pub max_deviation: f64,
    pub pass: bool,
}

impl KernelBasis {
    pub fn new(e: Vec<f64>, w: Vec<f64>, n_channels: usize, functions: Vec<Vec<C64>>) -> Result<Self> {
        if e.len() != w.len() {
            return Err(Error::GridMismatch("energy grid and weights differ in length".into()));
        }
        let dim = e.len() * n_channels;
        if functions.iter().any(|f| f.len() != dim) {
            return Err(Error::GridMismatch(format!(
                "basis functions must have {dim} entries (n_E * n_channels)"
            )));
        }
        Ok(Self { e, w, n_channels, functions })
    }

    /// The minimal (constant) basis: `b_i(E, alpha) = delta_{i alpha}`.
    ///
    /// This is the unique minimal-variance kernel for channel-diagonal
    /// symmetric systems.
    pub fn constant(e: Vec<f64>, w: Vec<f64>, n_channels: usize) -> Result<Self> {
        let dim = e.len() * n_channels;
        let mut functions = Vec::with_capacity(n_channels);
        for i in 0..n_channels {
            let mut f = vec![C64::new(0.0, 0.0); dim];
            for ei in 0..e.len() {
                f[ei * n_channels + i] = C64::new(1.0, 0.0);
            }
            functions.push(f);
        }
        Self::new(e, w, n_channels, functions)
    }

    /// Channel-diagonal basis from one unimodular phase function per channel.
    ///
    /// `phases[c][ei]` multiplies the constant basis on channel `c`.
    pub fn channel_diagonal(e: Vec<f64>, w: Vec<f64>, phases: &[Vec<C64>]) -> Result<Self> {
        let n_channels = phases.len();
        let dim = e.len() * n_channels;
        if phases.iter().any(|p| p.len() != e.len()) {
            return Err(Error::GridMismatch("phase function length must match the energy grid".into()));
        }
        let mut functions = Vec::with_capacity(n_channels);
        for (c, phase) in phases.iter().enumerate() {
            let mut f = vec![C64::new(0.0, 0.0); dim];
            for (ei, ph) in phase.iter().enumerate() {
                f[ei * n_channels + c] = *ph;
            }
            functions.push(f);
        }
        Self::new(e, w, n_channels, functions)
    }

    pub fn energies(&self) -> &[f64] {
        &self.e
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_functions(&self) -> usize {
        self.functions.len()
    }

    pub fn functions(&self) -> &[Vec<C64>] {
        &self.functions
    }

    pub fn value(&self, i: usize, e_idx: usize, channel: usize) -> C64 {
        self.functions[i][e_idx * self.n_channels + channel]
    }

    /// Conjugate of every basis function.
    pub fn conjugate(&self) -> KernelBasis {
        KernelBasis {
            e: self.e.clone(),
            w: self.w.clone(),
            n_channels: self.n_channels,
            functions: self
                .functions
                .iter()
                .map(|f| f.iter().map(|z| z.conj()).collect())
                .collect(),
        }
    }

    fn check_shared_grid(&self, phi: &EnergyChannels) -> Result<()> {
        if self.n_channels != phi.n_channels() || self.e.len() != phi.n_energies() {
            return Err(Error::GridMismatch(format!(
                "basis is {}x{} (E x channels), state is {}x{}",
                self.e.len(),
                self.n_channels,
                phi.n_energies(),
                phi.n_channels()
            )));
        }
        for (a, b) in self.e.iter().zip(phi.energies()) {
            if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                return Err(Error::GridMismatch("basis and state energy grids differ".into()));
            }
        }
        Ok(())
    }

    /// CSV export, columns `E, alpha, i, re, im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# kernel basis: {} functions, {} channels", self.functions.len(), self.n_channels)?;
        writeln!(out, "E,alpha,i,re,im")?;
        for (i, f) in self.functions.iter().enumerate() {
            for (ei, e) in self.e.iter().enumerate() {
                for c in 0..self.n_channels {
                    let z = f[ei * self.n_channels + c];
                    writeln!(out, "{e:.12e},{c},{i},{:.12e},{:.12e}", z.re, z.im)?;
                }
            }
        }
        Ok(())
    }

    /// Reads a basis written by [`KernelBasis::write_csv`] back onto the
    /// given grid.
    pub fn read_csv<R: BufRead>(reader: R, e: Vec<f64>, w: Vec<f64>, n_channels: usize) -> Result<Self> {
        let dim = e.len() * n_channels;
        let mut functions: Vec<Vec<C64>> = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(|err| Error::Precondition(format!("read error: {err}")))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('E') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 5 {
                return Err(Error::Precondition(format!("bad basis CSV row: {line}")));
            }
            let ev: f64 = parts[0].parse().map_err(|_| Error::Precondition(format!("bad E: {}", parts[0])))?;
            let c: usize = parts[1].parse().map_err(|_| Error::Precondition(format!("bad alpha: {}", parts[1])))?;
            let i: usize = parts[2].parse().map_err(|_| Error::Precondition(format!("bad i: {}", parts[2])))?;
            let re: f64 = parts[3].parse().map_err(|_| Error::Precondition(format!("bad re: {}", parts[3])))?;
            let im: f64 = parts[4].parse().map_err(|_| Error::Precondition(format!("bad im: {}", parts[4])))?;
            let ei = e
                .iter()
                .position(|&x| (x - ev).abs() <= 1e-9 * (1.0 + x.abs()))
                .ok_or_else(|| Error::IndexOutOfGrid(format!("E = {ev} not on the grid")))?;
            while functions.len() <= i {
                functions.push(vec![C64::new(0.0, 0.0); dim]);
            }
            if c >= n_channels {
                return Err(Error::IndexOutOfGrid(format!("channel {c} out of range")));
            }
            functions[i][ei * n_channels + c] = C64::new(re, im);
        }
        Self::new(e, w, n_channels, functions)
    }
}

/// Checks the channel-completeness condition
/// `sum_i b_i(E,a) conj(b_i(E,a')) = delta_{a a'}` at every grid energy.
pub fn validate_kernel_basis(basis: &KernelBasis) -> BasisReport {
    let nc = basis.n_channels;
    let mut max_dev: f64 = 0.0;
    for ei in 0..basis.e.len() {
        for a in 0..nc {
            for ap in 0..nc {
                let mut s = C64::new(0.0, 0.0);
                for f in &basis.functions {
                    s += f[ei * nc + a] * f[ei * nc + ap].conj();
                }
                let target = if a == ap { 1.0 } else { 0.0 };
                max_dev = max_dev.max((s - target).norm());
            }
        }
    }
    BasisReport { max_deviation: max_dev, pass: max_dev < 1e-8 }
}

/// One matrix element `(1/2 pi hbar) sum_i b_i(E,a) conj(b_i(E',a'))`.
pub fn kernel_element(
    basis: &KernelBasis,
    e_idx: usize,
    channel: usize,
    e_idx2: usize,
    channel2: usize,
    units: &UnitSystem,
) -> Result<C64> {
    let nc = basis.n_channels;
    if e_idx >= basis.e.len() || e_idx2 >= basis.e.len() || channel >= nc || channel2 >= nc {
        return Err(Error::IndexOutOfGrid(format!(
            "({e_idx},{channel}) x ({e_idx2},{channel2}) on {}x{nc}",
            basis.e.len()
        )));
    }
    let mut s = C64::new(0.0, 0.0);
    for f in &basis.functions {
        s += f[e_idx * nc + channel] * f[e_idx2 * nc + channel2].conj();
    }
    Ok(s / (2.0 * PI * units.hbar))
}

/// Temporal probability density of `phi` under the kernel, sampled on `times`.
pub fn time_distribution(
    basis: &KernelBasis,
    phi: &EnergyChannels,
    times: &TimeGrid,
    sense: Sense,
    units: &UnitSystem,
) -> Result<TimeDistribution> {
    basis.check_shared_grid(phi)?;
    let report = validate_kernel_basis(basis);
    if !report.pass {
        return Err(Error::Precondition(format!(
            "kernel basis fails channel completeness: deviation {:.3e}",
            report.max_deviation
        )));
    }
    let values = time_distribution_unchecked(basis, phi, times, sense, units);
    TimeDistribution::new(times.clone(), values)
}

/// Inner evaluation without grid or completeness checks (bench / hot path).
pub fn time_distribution_unchecked(
    basis: &KernelBasis,
    phi: &EnergyChannels,
    times: &TimeGrid,
    sense: Sense,
    units: &UnitSystem,
) -> Vec<f64> {
    let s = match sense {
        Sense::Clock => 1.0,
        Sense::Arrival => -1.0,
    };
    let nc = basis.n_channels;
    let ne = basis.e.len();
    let prefactor = 1.0 / (2.0 * PI * units.hbar);
    par::map_collect(times.times(), |&t| {
        let mut total = 0.0;
        for f in &basis.functions {
            let mut amp = C64::new(0.0, 0.0);
            for ei in 0..ne {
                let phase = C64::new(0.0, s * basis.e[ei] * t / units.hbar).exp();
                let mut ch = C64::new(0.0, 0.0);
                for c in 0..nc {
                    ch += f[ei * nc + c].conj() * phi.amplitude(ei, c);
                }
                amp += basis.w[ei] * phase * ch;
            }
            total += amp.norm_sqr();
        }
        prefactor * total
    })
}

/// Sequential reference evaluation with the identical summation order.
pub fn time_distribution_seq(
    basis: &KernelBasis,
    phi: &EnergyChannels,
    times: &TimeGrid,
    sense: Sense,
    units: &UnitSystem,
) -> Vec<f64> {
    let s = match sense {
        Sense::Clock => 1.0,
        Sense::Arrival => -1.0,
    };
    let nc = basis.n_channels;
    let ne = basis.e.len();
    let prefactor = 1.0 / (2.0 * PI * units.hbar);
    par::map_collect_seq(times.times(), |&t| {
        let mut total = 0.0;
        for f in &basis.functions {
            let mut amp = C64::new(0.0, 0.0);
            for ei in 0..ne {
                let phase = C64::new(0.0, s * basis.e[ei] * t / units.hbar).exp();
                let mut ch = C64::new(0.0, 0.0);
                for c in 0..nc {
                    ch += f[ei * nc + c].conj() * phi.amplitude(ei, c);
                }
                amp += basis.w[ei] * phase * ch;
            }
            total += amp.norm_sqr();
        }
        prefactor * total
    })
}

/// Centered finite-difference derivative on a (possibly nonuniform)
/// ascending grid; one-sided at the ends. Exact for quadratics.
fn derivative_real(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    out[0] = (f[1] - f[0]) / (x[1] - x[0]);
    out[n - 1] = (f[n - 1] - f[n - 2]) / (x[n - 1] - x[n - 2]);
    for i in 1..n - 1 {
        let hl = x[i] - x[i - 1];
        let hr = x[i + 1] - x[i];
        out[i] = (f[i + 1] * (hl * hl) - f[i - 1] * (hr * hr) + f[i] * (hr * hr - hl * hl))
            / (hl * hr * (hl + hr));
    }
    out
}

/// Derivative of a complex column, differentiating magnitude and unwrapped
/// phase separately.
///
/// A plain centered difference of `f e^{i theta(x)}` underestimates fast
/// phases (`sin(theta' h)/h` dispersion); splitting off the phase removes
/// that, and makes multiplication by `e^{-i x t0}` shift the first-moment
/// formula by exactly `t0`.
fn derivative(x: &[f64], f: &[C64]) -> Vec<C64> {
    let n = x.len();
    let mag: Vec<f64> = f.iter().map(|a| a.norm()).collect();
    let mut phase = vec![0.0; n];
    let mut prev = 0.0;
    for j in 0..n {
        let raw = if mag[j] > 0.0 { f[j].im.atan2(f[j].re) } else { prev };
        let p = raw - 2.0 * PI * ((raw - prev) / (2.0 * PI)).round();
        phase[j] = p;
        prev = p;
    }
    let dmag = derivative_real(x, &mag);
    let dphase = derivative_real(x, &phase);
    (0..n)
        .map(|j| {
            let unit = if mag[j] > 0.0 {
                f[j] / mag[j]
            } else {
                C64::new(phase[j].cos(), phase[j].sin())
            };
            unit * dmag[j] + C64::new(0.0, dphase[j]) * f[j]
        })
        .collect()
}

fn check_grid_resolution(e: &[f64]) -> Result<()> {
    if e.len() < 3 {
        return Err(Error::Precondition(
            "energy grid too coarse for finite differences (need >= 3 nodes)".into(),
        ));
    }
    Ok(())
}

/// Spectral first moment `<T>` of the distribution (clock-sense formula;
/// arrival sense is handled by conjugation).
pub fn mean_time(
    basis: &KernelBasis,
    phi: &EnergyChannels,
    sense: Sense,
    units: &UnitSystem,
) -> Result<f64> {
    basis.check_shared_grid(phi)?;
    check_grid_resolution(&basis.e)?;
    // Pi_arrival[b, phi](t) = Pi_clock[conj b, conj phi](t) pointwise, so
    // arrival moments are clock moments of the conjugated pair.
    match sense {
        Sense::Clock => Ok(mean_time_clock(basis, phi, units)),
        Sense::Arrival => Ok(mean_time_clock(&basis.conjugate(), &phi.conjugate(), units)),
    }
}

fn mean_time_clock(basis: &KernelBasis, phi: &EnergyChannels, units: &UnitSystem) -> f64 {
    let nc = basis.n_channels;
    let ne = basis.e.len();
    let hbar = units.hbar;
    // first term: sum_E w sum_a conj(phi) i hbar d_E phi
    let mut first = C64::new(0.0, 0.0);
    for c in 0..nc {
        let col: Vec<C64> = (0..ne).map(|ei| phi.amplitude(ei, c)).collect();
        let dcol = derivative(&basis.e, &col);
        for ei in 0..ne {
            first += basis.w[ei] * col[ei].conj() * C64::new(0.0, hbar) * dcol[ei];
        }
    }
    // second term: sum_E w sum_{a a'} conj(phi_a) phi_a' sum_i b_i(E,a) i hbar d_E conj(b_i(E,a'))
    let mut second = C64::new(0.0, 0.0);
    for f in &basis.functions {
        let mut dcols: Vec<Vec<C64>> = Vec::with_capacity(nc);
        for c in 0..nc {
            let col: Vec<C64> = (0..ne).map(|ei| f[ei * nc + c].conj()).collect();
            dcols.push(derivative(&basis.e, &col));
        }
        for ei in 0..ne {
            for a in 0..nc {
                for ap in 0..nc {
                    second += basis.w[ei]
                        * phi.amplitude(ei, a).conj()
                        * phi.amplitude(ei, ap)
                        * f[ei * nc + a]
                        * C64::new(0.0, hbar)
                        * dcols[ap][ei];
                }
            }
        }
    }
    (first + second).re
}

/// Spectral second moment `hbar^2 sum_i sum_E w_E |d_E sum_a conj(b_i) phi|^2`.
///
/// Conjugation-invariant, hence the same for both senses.
pub fn second_moment(basis: &KernelBasis, phi: &EnergyChannels, units: &UnitSystem) -> Result<f64> {
    basis.check_shared_grid(phi)?;
    check_grid_resolution(&basis.e)?;
    let nc = basis.n_channels;
    let ne = basis.e.len();
    let mut acc = 0.0;
    for f in &basis.functions {
        let col: Vec<C64> = (0..ne)
            .map(|ei| {
                let mut s = C64::new(0.0, 0.0);
                for c in 0..nc {
                    s += f[ei * nc + c].conj() * phi.amplitude(ei, c);
                }
                s
            })
            .collect();
        let dcol = derivative(&basis.e, &col);
        for ei in 0..ne {
            acc += basis.w[ei] * dcol[ei].norm_sqr();
        }
    }
    Ok(units.hbar * units.hbar * acc)
}

/// Suggested time window: spectral mean +/- `n_sigma` temporal standard
/// deviations, with `n` samples.
pub fn suggest_time_window(
    basis: &KernelBasis,
    phi: &EnergyChannels,
    sense: Sense,
    units: &UnitSystem,
    n_sigma: f64,
    n: usize,
) -> Result<TimeGrid> {
    let m1 = mean_time(basis, phi, sense, units)?;
    let m2 = second_moment(basis, phi, units)?;
    let var = (m2 - m1 * m1).max(1e-30);
    let sigma = var.sqrt();
    TimeGrid::new(m1 - n_sigma * sigma, m1 + n_sigma * sigma, n)
}

/// Dense Hermitian PSD matrix over the product index `(E, alpha)`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    e: Vec<f64>,
    w: Vec<f64>,
    n_channels: usize,
    m: DMatrix<C64>,
}

impl KernelMatrix {
    /// Wraps a matrix after checking hermiticity.
    pub fn new(e: Vec<f64>, w: Vec<f64>, n_channels: usize, m: DMatrix<C64>) -> Result<Self> {
        let dim = e.len() * n_channels;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::GridMismatch(format!(
                "matrix is {}x{}, expected {dim}x{dim}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1e-300);
        for i in 0..dim {
            for j in 0..=i {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > 1e-12 * scale {
                    return Err(Error::Precondition(format!(
                        "matrix not Hermitian at ({i},{j}): asymmetry {:.3e}",
                        (m[(i, j)] - m[(j, i)].conj()).norm()
                    )));
                }
            }
        }
        Ok(Self { e, w, n_channels, m })
    }

    /// Kernel matrix induced by a basis, `(1/2 pi hbar) sum_i b_i conj(b_i)`.
    pub fn from_basis(basis: &KernelBasis, units: &UnitSystem) -> Self {
        let dim = basis.e.len() * basis.n_channels;
        let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
        for f in &basis.functions {
            for i in 0..dim {
                for j in 0..dim {
                    m[(i, j)] += f[i] * f[j].conj();
                }
            }
        }
        m /= C64::new(2.0 * PI * units.hbar, 0.0);
        Self { e: basis.e.clone(), w: basis.w.clone(), n_channels: basis.n_channels, m }
    }

    /// PSD matrix `(1/2 pi hbar) sum_i v_i conj(v_i)` from raw vectors.
    pub fn from_vectors(
        e: Vec<f64>,
        w: Vec<f64>,
        n_channels: usize,
        vectors: &[Vec<C64>],
        units: &UnitSystem,
    ) -> Result<Self> {
        let basis = KernelBasis::new(e, w, n_channels, vectors.to_vec())?;
        Ok(Self::from_basis(&basis, units))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Max deviation from hermiticity (diagnostic).
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim() {
            for j in 0..=i {
                dev = dev.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        dev
    }
}

/// Channel functions reconstructing a PSD kernel matrix via its Hermitian
/// eigendecomposition: `b_i = sqrt(2 pi hbar lambda_i) u_i`.
///
/// Eigenvalues below `1e-12 lambda_max` are dropped; an eigenvalue below
/// `-1e-10 ||K||` is a spectral error.
pub fn schmidt_basis(kernel: &KernelMatrix, units: &UnitSystem) -> Result<KernelBasis> {
    let dim = kernel.dim();
    if dim == 0 {
        return KernelBasis::new(kernel.e.clone(), kernel.w.clone(), kernel.n_channels, vec![]);
    }
    let eig = nalgebra::SymmetricEigen::new(kernel.m.clone());
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let norm_k = eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0_f64, f64::max);
    let neg_tol = 1e-10 * norm_k.max(1e-300);
    for &l in eig.eigenvalues.iter() {
        if l < -neg_tol {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: l, tolerance: neg_tol });
        }
    }
    let rank_floor = 1e-12 * lambda_max;
    let mut functions = Vec::new();
    for (idx, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= rank_floor {
            continue;
        }
        let scale = (2.0 * PI * units.hbar * l).sqrt();
        let col = eig.eigenvectors.column(idx);
        functions.push(col.iter().map(|z| z * scale).collect());
    }
    KernelBasis::new(kernel.e.clone(), kernel.w.clone(), kernel.n_channels, functions)
}
