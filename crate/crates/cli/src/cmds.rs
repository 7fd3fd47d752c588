//! Subcommand implementations.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempus_core::conditional::{
    arrival_distribution_raw, conditional_distribution, gram_operator, integral_identity_deviation,
    operator_normalized_distribution, propagate_with_absorber, total_arrival, AbsorberConfig, SpatialGrid,
};
use tempus_core::freearrival::{self, PlanePacket3D, TransverseNode};
use tempus_core::kernelcore::{self, KernelMatrix, Sense};
use tempus_core::partialwave3d::{clock_distribution_3d, spherical_well_phase_shifts, ChannelLm, PartialWaveState};
use tempus_core::scatter1d::{clock_kernel_scattering, delta_potential_amplitudes, square_well_amplitudes};
use tempus_core::state::{EnergyChannels, MomentumGrid, WavePacket};
use tempus_core::C64;

use crate::common::{
    build_packet, create_out, momentum_grid, packet_components, resolve_times, resolve_units, sibling, split_floats,
    RunManifest,
};
use crate::config::{Config, Section};
use crate::CliError;

fn io_err(e: std::io::Error) -> CliError {
    CliError::Config(format!("write failed: {e}"))
}

pub fn kijowski1d(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let units = resolve_units(cfg)?;
    let times = resolve_times(cfg)?;
    let grid = momentum_grid(cfg.section("grid")?)?;
    let packet = build_packet(cfg, &grid)?;
    let dist = freearrival::kijowski_1d(&packet, &times, &units)?;
    dist.write_csv(create_out(out)?).map_err(io_err)?;
    let mut manifest = RunManifest::new("kijowski1d", cfg);
    manifest.output(out);
    manifest.metric("total", dist.total());
    manifest.metric("mean", dist.mean() / dist.total());
    manifest.metric("min_value", dist.min_value());
    manifest.write(out)?;
    Ok(())
}

pub fn kijowski_plane(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let units = resolve_units(cfg)?;
    let times = resolve_times(cfg)?;
    let grid = momentum_grid(cfg.section("grid")?)?;
    let packet = build_packet(cfg, &grid)?;
    let a = cfg.section("plane")?.f64("a")?;
    let tsec = cfg.section("transverse")?;
    let mut nodes = Vec::new();
    let mut chi = Vec::new();
    for (idx, value) in tsec.numbered("node")? {
        let v = split_floats(value, &format!("node{idx}"), 3, 5)?;
        nodes.push(TransverseNode { k2: v[0], k3: v[1], weight: v[2] });
        chi.push(C64::new(v.get(3).copied().unwrap_or(1.0), v.get(4).copied().unwrap_or(0.0)));
    }
    if nodes.is_empty() {
        return Err(CliError::Config(
            "the [transverse] section needs 'nodeN = k2:k3:weight[:re[:im]]' lines".into(),
        ));
    }
    let t_norm: f64 = nodes.iter().zip(&chi).map(|(n, c)| n.weight * c.norm_sqr()).sum();
    if !(t_norm > 0.0) {
        return Err(CliError::Config("transverse factor has zero norm".into()));
    }
    for c in &mut chi {
        *c /= t_norm.sqrt();
    }
    let packet3 = PlanePacket3D::factorized(packet, nodes, chi)?;
    let dist = freearrival::kijowski_plane_3d(&packet3, &times, a, &units)?;
    dist.write_csv(create_out(out)?).map_err(io_err)?;
    let mut manifest = RunManifest::new("kijowski-plane", cfg);
    manifest.output(out);
    manifest.metric("total", dist.total());
    manifest.metric("plane_offset", a);
    manifest.write(out)?;
    Ok(())
}

pub fn current_compare(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let units = resolve_units(cfg)?;
    let times = resolve_times(cfg)?;
    let grid = momentum_grid(cfg.section("grid")?)?;
    let packet = build_packet(cfg, &grid)?;
    let dist = freearrival::kijowski_1d(&packet, &times, &units)?;
    let current = freearrival::current_at_plane(&packet, &times, 0.0, &units);
    let mut w = create_out(out)?;
    writeln!(w, "# arrival density vs probability current at x = 0").map_err(io_err)?;
    writeln!(w, "t,pi_kijowski,j_current").map_err(io_err)?;
    for ((t, p), j) in times.times().iter().zip(dist.values()).zip(&current) {
        writeln!(w, "{t:.12e},{p:.12e},{j:.12e}").map_err(io_err)?;
    }
    let (j_min, t_at_min) = current
        .iter()
        .zip(times.times())
        .fold((f64::INFINITY, 0.0), |(jm, tm), (&j, &t)| if j < jm { (j, t) } else { (jm, tm) });
    let mut manifest = RunManifest::new("current-compare", cfg);
    manifest.output(out);
    manifest.metric("total_pi", dist.total());
    manifest.metric("min_pi", dist.min_value());
    manifest.metric("min_current", j_min);
    manifest.metric("time_of_min_current", t_at_min);
    manifest.write(out)?;
    Ok(())
}

pub fn clock_scatter(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let units = resolve_units(cfg)?;
    let times = resolve_times(cfg)?;
    let grid = momentum_grid(cfg.section("grid")?)?;
    if !grid.is_sign_symmetric() {
        return Err(CliError::Config(
            "clock-scatter needs a sign-symmetric [grid] (kind = symmetric) for the parity channels".into(),
        ));
    }
    let packet = build_packet(cfg, &grid)?;
    let phi = EnergyChannels::from_packet(&packet, &units)?;
    // scattering data live on the positive half of the packet grid
    let k_bound = grid.k_max() + 0.5 * grid.spacing();
    let half = MomentumGrid::positive(0.0, k_bound, grid.len() / 2)?;
    let psec = cfg.section("potential")?;
    let amps = match psec.get("kind")? {
        "delta" => delta_potential_amplitudes(psec.f64("strength")?, &half, &units)?,
        "well" => square_well_amplitudes(psec.f64("v0")?, psec.f64("a")?, &half, &units)?,
        other => {
            return Err(CliError::Config(format!(
                "field 'kind' in [potential] must be delta or well, got '{other}'"
            )))
        }
    };
    let basis = clock_kernel_scattering(&amps, &units)?;
    let dist = kernelcore::time_distribution(&basis, &phi, &times, Sense::Clock, &units)?;
    dist.write_csv(create_out(out)?).map_err(io_err)?;
    let amps_path = sibling(out, "amplitudes");
    amps.write_csv(create_out(&amps_path)?).map_err(io_err)?;
    let (flux_dev, phase_dev) = amps.unitarity_deviation();
    let mut manifest = RunManifest::new("clock-scatter", cfg);
    manifest.output(out);
    manifest.output(&amps_path);
    manifest.metric("total", dist.total());
    manifest.metric("unitarity_flux_deviation", flux_dev);
    manifest.metric("unitarity_phase_deviation", phase_dev);
    manifest.write(out)?;
    Ok(())
}

pub fn partialwave(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let units = resolve_units(cfg)?;
    let times = resolve_times(cfg)?;
    let grid = momentum_grid(cfg.section("grid")?)?;
    let psec = cfg.section("potential")?;
    let l_max = psec.opt_usize("l_max", 8)? as u32;
    let shifts = spherical_well_phase_shifts(psec.f64("v0")?, psec.f64("a")?, l_max, &grid, &units)?;
    let ssec = cfg.section("state")?;
    let channel = ChannelLm { l: ssec.u32("l")?, m: ssec.i32("m")? };
    let state = PartialWaveState::single_channel_gaussian(&grid, channel, ssec.f64("k0")?, ssec.f64("sigma_k")?)?;
    let dist = clock_distribution_3d(&state, &shifts, &times, &units)?;
    dist.write_csv(create_out(out)?).map_err(io_err)?;
    let shifts_path = sibling(out, "phaseshifts");
    shifts.write_csv(create_out(&shifts_path)?).map_err(io_err)?;
    let mut manifest = RunManifest::new("partialwave", cfg);
    manifest.output(out);
    manifest.output(&shifts_path);
    manifest.metric("total", dist.total());
    manifest.write(out)?;
    Ok(())
}

/// Samples a square well/barrier on the spatial grid, half-valued exactly at
/// the edges so the effective width matches the nominal one.
fn sample_potential(grid: &SpatialGrid, sec: Option<&Section>) -> Result<Vec<f64>, CliError> {
    let Some(sec) = sec else {
        return Ok(vec![0.0; grid.len()]);
    };
    match sec.get("kind")? {
        "none" => Ok(vec![0.0; grid.len()]),
        "well" => {
            let v0 = sec.f64("v0")?;
            let a = sec.f64("a")?;
            let center = sec.opt_f64("center", 0.0)?;
            Ok((0..grid.len())
                .map(|j| {
                    let d = (grid.x(j) - center).abs() - a;
                    if d.abs() < 1e-9 {
                        0.5 * v0
                    } else if d < 0.0 {
                        v0
                    } else {
                        0.0
                    }
                })
                .collect())
        }
        other => Err(CliError::Config(format!(
            "field 'kind' in [potential] must be none or well, got '{other}'"
        ))),
    }
}

fn spatial_grid(sec: &Section) -> Result<SpatialGrid, CliError> {
    Ok(SpatialGrid::new(sec.f64("x_min")?, sec.f64("x_max")?, sec.usize("n")?)?)
}

fn absorber(sec: &Section) -> Result<AbsorberConfig, CliError> {
    Ok(AbsorberConfig {
        center: sec.f64("center")?,
        half_width: sec.f64("half_width")?,
        strength: sec.f64("strength")?,
        exponent: sec.opt_usize("exponent", 4)? as u32,
    })
}

pub fn conditional(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let units = resolve_units(cfg)?;
    let grid = spatial_grid(cfg.section("space")?)?;
    let comps = packet_components(cfg.section("packet")?)?;
    let kmax = comps.iter().map(|c| c.k0.abs() + 8.0 * c.sigma_k).fold(0.0_f64, f64::max);
    let kgrid = MomentumGrid::symmetric(kmax, 1024)?;
    let packet = WavePacket::superposition(&kgrid, &comps)?;
    let psi0 = grid.sample_packet(&packet, &units);
    let v = sample_potential(&grid, cfg.opt_section("potential"))?;
    let det = absorber(cfg.section("absorber")?)?;
    let rsec = cfg.section("run")?;
    let dt = rsec.f64("dt")?;
    let steps = rsec.usize("steps")?;
    let run = propagate_with_absorber(&grid, &psi0, &v, Some(&det), dt, steps, &units)?;
    let (raw, warn) = arrival_distribution_raw(&run)?;
    let eps_n = rsec.opt_f64("eps_n", 1e-6)?;
    let cond = conditional_distribution(&raw, eps_n)?;
    cond.write_csv(create_out(out)?).map_err(io_err)?;
    let run_path = sibling(out, "run");
    run.write_csv(create_out(&run_path)?).map_err(io_err)?;
    let mut manifest = RunManifest::new("conditional", cfg);
    manifest.output(out);
    manifest.output(&run_path);
    manifest.metric("total_arrival", total_arrival(&raw));
    manifest.metric("conditional_total", cond.total());
    manifest.metric("absorbed", run.absorbed());
    if let Some(w) = warn {
        manifest.metric("truncation_tail_estimate", w.tail_estimate);
    }
    manifest.write(out)?;
    Ok(())
}

pub fn opnorm(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let units = resolve_units(cfg)?;
    let grid = spatial_grid(cfg.section("space")?)?;
    let bsec = cfg.section("basis")?;
    let mut basis = Vec::new();
    for (idx, value) in bsec.numbered("packet")? {
        let v = split_floats(value, &format!("packet{idx}"), 3, 3)?;
        let kmax = v[0].abs() + 8.0 * v[1];
        let kgrid = MomentumGrid::symmetric(kmax, 1024)?;
        let packet = WavePacket::gaussian(&kgrid, v[0], v[1], v[2])?;
        basis.push(grid.sample_packet(&packet, &units));
    }
    if basis.is_empty() {
        return Err(CliError::Config("the [basis] section needs 'packetN = k0:sigma_k:x0' lines".into()));
    }
    let ssec = cfg.section("state")?;
    let mut coeffs = Vec::new();
    for (idx, value) in ssec.numbered("coeff")? {
        let v = split_floats(value, &format!("coeff{idx}"), 1, 2)?;
        coeffs.push(C64::new(v[0], v.get(1).copied().unwrap_or(0.0)));
    }
    if coeffs.len() != basis.len() {
        return Err(CliError::Config(format!(
            "[state] has {} coefficients for a {}-packet basis",
            coeffs.len(),
            basis.len()
        )));
    }
    let v = sample_potential(&grid, cfg.opt_section("potential"))?;
    let det = absorber(cfg.section("absorber")?)?;
    let rsec = cfg.section("run")?;
    let g = gram_operator(&grid, &basis, &v, &det, rsec.f64("dt")?, rsec.usize("steps")?, &units)?;
    let dist = operator_normalized_distribution(&g, &coeffs)?;
    dist.write_csv(create_out(out)?).map_err(io_err)?;
    let gram_path = sibling(out, "gram");
    g.write_csv(create_out(&gram_path)?).map_err(io_err)?;
    let eigs = g.eigenvalues();
    let mut manifest = RunManifest::new("opnorm", cfg);
    manifest.output(out);
    manifest.output(&gram_path);
    manifest.metric("total", dist.total());
    manifest.metric("gram_eig_min", eigs.iter().cloned().fold(f64::INFINITY, f64::min));
    manifest.metric("gram_eig_max", eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    manifest.metric("retained_rank", g.retained_rank() as f64);
    manifest.metric("integral_identity_deviation", integral_identity_deviation(&g));
    manifest.write(out)?;
    Ok(())
}

pub fn schmidt_demo(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let units = resolve_units(cfg)?;
    let ksec = cfg.section("kernel")?;
    let n_e = ksec.usize("n_energies")?;
    let n_c = ksec.opt_usize("n_channels", 1)?;
    let rank = ksec.usize("rank")?;
    let seed = ksec.usize("seed")? as u64;
    let e_min = ksec.opt_f64("e_min", 0.5)?;
    let e_max = ksec.opt_f64("e_max", 8.5)?;
    if n_e < 2 || !(e_max > e_min) {
        return Err(CliError::Config("need n_energies >= 2 and e_max > e_min in [kernel]".into()));
    }
    let de = (e_max - e_min) / (n_e - 1) as f64;
    let e: Vec<f64> = (0..n_e).map(|j| e_min + j as f64 * de).collect();
    let w = vec![de; n_e];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = n_e * n_c;
    let vectors: Vec<Vec<C64>> = (0..rank)
        .map(|_| (0..dim).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect())
        .collect();
    let kernel = KernelMatrix::from_vectors(e, w, n_c, &vectors, &units)?;
    let basis = kernelcore::schmidt_basis(&kernel, &units)?;
    let rebuilt = KernelMatrix::from_basis(&basis, &units);
    let scale = kernel.matrix().iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1e-300);
    let deviation = kernel
        .matrix()
        .iter()
        .zip(rebuilt.matrix().iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0_f64, f64::max)
        / scale;
    basis.write_csv(create_out(out)?).map_err(io_err)?;
    let mut manifest = RunManifest::new("schmidt-demo", cfg);
    manifest.output(out);
    manifest.seed = Some(seed);
    manifest.metric("rank", basis.n_functions() as f64);
    manifest.metric("reconstruction_deviation", deviation);
    manifest.write(out)?;
    Ok(())
}

pub fn backflow_scan(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let units = resolve_units(cfg)?;
    let times = resolve_times(cfg)?;
    let grid = momentum_grid(cfg.section("grid")?)?;
    let ssec = cfg.section("scan")?;
    let k1 = ssec.f64("k1")?;
    let k2 = ssec.f64("k2")?;
    let sigma_k = ssec.f64("sigma_k")?;
    let fixture = freearrival::backflow_scan(&grid, &times, (k1, k2), sigma_k, &units)?;
    // the fixture is itself a config consumable by current-compare
    let mut w = create_out(out)?;
    writeln!(w, "# backflow fixture: min current {:.6e} at t = {:.6e}", fixture.min_current, fixture.time_of_min)
        .map_err(io_err)?;
    for name in ["grid", "times", "units"] {
        if let Some(sec) = cfg.opt_section(name) {
            writeln!(w, "[{name}]").map_err(io_err)?;
            for (key, entry) in sec.entries() {
                writeln!(w, "{key} = {}", entry.value).map_err(io_err)?;
            }
            writeln!(w).map_err(io_err)?;
        }
    }
    writeln!(w, "[packet]").map_err(io_err)?;
    for (i, c) in fixture.components.iter().enumerate() {
        writeln!(w, "component{} = {:.12e}:{:.12e}:{:.12e}:{:.12e}:{:.12e}", i + 1, c.k0, c.sigma_k, c.x0, c.weight, c.phase)
            .map_err(io_err)?;
    }
    let mut manifest = RunManifest::new("backflow-scan", cfg);
    manifest.output(out);
    manifest.metric("min_current", fixture.min_current);
    manifest.metric("time_of_min", fixture.time_of_min);
    manifest.write(out)?;
    Ok(())
}
