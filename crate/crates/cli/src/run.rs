//! Command dispatch. Each command returns its artifacts; [`run`] checks the
//! targets up front, writes them and appends the manifest.

use std::time::Instant;

use btc_core::collision::{self, CollisionConfig, CollisionModel, OscillatorAncilla};
use btc_core::fluctuations::{self, coherent_covariance};
use btc_core::liouville::{self, EvolveOptions};
use btc_core::stochastic;
use btc_core::thermo::{self, Observables};
use btc_core::{dicke, meanfield, DensityMatrix, LindbladGenerator, MeanFieldState, SystemParams};
use rayon::prelude::*;

use crate::config::{CommandKind, InitialState, RunConfig, SweepMethod};
use crate::error::CliError;
use crate::output::{self, Artifact, Csv};

const THERMO_HEADER: [&str; 9] = [
    "t", "qdot", "udot", "wdot", "S", "Sdot", "phidot", "sigmadot", "bdot",
];

/// What a finished run produced.
#[derive(Debug)]
pub struct RunReport {
    pub written: Vec<std::path::PathBuf>,
    /// Human-readable summary lines for stdout.
    pub notes: Vec<String>,
}

pub fn output_names(command: CommandKind) -> &'static [&'static str] {
    match command {
        CommandKind::MeanField => &["meanfield.csv", "thermo.csv"],
        CommandKind::Fluct => &["fluct.csv", "thermo.csv"],
        CommandKind::Lindblad => &["lindblad.csv", "thermo.csv"],
        CommandKind::Steady => &["steady.csv"],
        CommandKind::SweepPower => &["sweep.csv"],
        CommandKind::CollisionCheck => &["collision.csv", "convergence.csv"],
        CommandKind::EpDist => &["ep_forward.csv", "ep_backward.csv", "ep_summary.json"],
        CommandKind::EntropyCompare => &["entropy_compare.csv"],
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let names = output_names(cfg.command);
    output::check_targets(&cfg.io.output, names, cfg.io.overwrite)?;

    let mut notes = Vec::new();
    let artifacts = match cfg.command {
        CommandKind::MeanField => mean_field(cfg)?,
        CommandKind::Fluct => fluct(cfg)?,
        CommandKind::Lindblad => lindblad(cfg, &mut notes)?,
        CommandKind::Steady => steady(cfg)?,
        CommandKind::SweepPower => sweep_power(cfg)?,
        CommandKind::CollisionCheck => collision_check(cfg, &mut notes)?,
        CommandKind::EpDist => ep_dist(cfg, &mut notes)?,
        CommandKind::EntropyCompare => entropy_compare(cfg)?,
    };
    debug_assert_eq!(artifacts.len(), names.len());

    let mut written = output::write_artifacts(&cfg.io.output, &artifacts)?;
    let manifest = output::manifest(cfg, names, start.elapsed().as_secs_f64());
    written.extend(output::write_artifacts(
        &cfg.io.output,
        &[Artifact {
            name: output::MANIFEST.into(),
            contents: manifest,
        }],
    )?);
    Ok(RunReport { written, notes })
}

fn initial_density(cfg: &RunConfig, params: &SystemParams) -> DensityMatrix {
    match cfg.initial {
        InitialState::GroundH => dicke::ground_state_h(params),
        InitialState::GroundVz => dicke::ground_state_vz(params),
        InitialState::Coherent { theta, phi } => dicke::coherent_state(params, theta, phi),
        InitialState::ThermalLadder => dicke::thermal_ladder_state(params),
    }
}

/// Mean-field image of the configured initial state.
fn initial_mean_field(cfg: &RunConfig) -> MeanFieldState {
    match cfg.initial {
        InitialState::GroundH => MeanFieldState::ground_state_h(),
        InitialState::GroundVz => MeanFieldState::ground_state_vz(),
        InitialState::Coherent { theta, phi } => MeanFieldState::from_angles(theta, phi),
        InitialState::ThermalLadder => {
            let m = dicke::magnetization(&cfg.params, &dicke::thermal_ladder_state(&cfg.params));
            MeanFieldState::new(m[0], m[1], m[2])
        }
    }
}

/// Maps `f` over the sweep on a pool of `jobs` threads; results keep the
/// order of `items`.
fn par_map<T, F>(jobs: usize, items: &[f64], f: F) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(f64) -> Result<T, CliError> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::config(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| items.par_iter().map(|&x| f(x)).collect())
}

fn mean_field(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let p = &cfg.params;
    let n = &cfg.numeric;
    let traj =
        meanfield::mf_integrate_sampled(p, &initial_mean_field(cfg), n.t_max, n.dt, n.save_every)?;
    let mut states = Csv::new("meanfield.csv", &["t", "mx", "my", "mz", "c"]);
    let mut thermo = Csv::new("thermo.csv", &THERMO_HEADER);
    for ((t, m), c) in traj.times.iter().zip(&traj.states).zip(&traj.c_values) {
        states.row(&[*t, m.x(), m.y(), m.z(), c.unwrap_or(f64::NAN)]);
        let (q, u, w) = thermo::mf_currents(p, m, None);
        thermo.row(&[
            *t,
            q,
            u,
            w,
            f64::NAN,
            f64::NAN,
            f64::NAN,
            f64::NAN,
            f64::NAN,
        ]);
    }
    Ok(vec![states.into(), thermo.into()])
}

fn fluct(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let p = &cfg.params;
    let n = &cfg.numeric;
    let m0 = initial_mean_field(cfg);
    let traj = fluctuations::joint_integrate_sampled(
        p,
        &m0,
        &coherent_covariance(&m0),
        n.t_max,
        n.dt,
        n.save_every,
    )?;
    let s_dot = thermo::finite_difference(&traj.times, &traj.entropies);
    let mut cov = Csv::new(
        "fluct.csv",
        &[
            "t", "mx", "my", "mz", "Gxx", "Gxy", "Gxz", "Gyy", "Gyz", "Gzz", "lambda", "S",
        ],
    );
    let mut th = Csv::new("thermo.csv", &THERMO_HEADER);
    for (k, st) in traj.states.iter().enumerate() {
        let (t, g, m) = (traj.times[k], &st.g, &st.m);
        cov.row(&[
            t,
            m.x(),
            m.y(),
            m.z(),
            g[(0, 0)],
            g[(0, 1)],
            g[(0, 2)],
            g[(1, 1)],
            g[(1, 2)],
            g[(2, 2)],
            traj.lambdas[k],
            traj.entropies[k],
        ]);
        let (q, u, w) = thermo::mf_currents(p, m, Some((g, p.n_spins)));
        th.row(&[
            t,
            q,
            u,
            w,
            traj.entropies[k],
            s_dot[k],
            f64::NAN,
            f64::NAN,
            f64::NAN,
        ]);
    }
    Ok(vec![cov.into(), th.into()])
}

/// Finite-N trajectory on the `dt · save_every` grid. The step is refined
/// below `dt` when the generator's rate bound requires it.
fn finite_n_trajectory(
    cfg: &RunConfig,
    gen: &LindbladGenerator,
) -> Result<(liouville::Trajectory, f64), CliError> {
    let n = &cfg.numeric;
    let stable = 0.5 / gen.rate_bound().max(1e-12);
    let sub = (n.dt / stable).ceil().max(1.0) as usize;
    let dt = n.dt / sub as f64;
    let traj = liouville::evolve_with(
        gen,
        &initial_density(cfg, gen.params()),
        &EvolveOptions::new(n.t_max, dt).save_every(n.save_every * sub),
    )?;
    Ok((traj, dt))
}

fn lindblad(cfg: &RunConfig, notes: &mut Vec<String>) -> Result<Vec<Artifact>, CliError> {
    let gen = LindbladGenerator::new(&cfg.params)?;
    let (traj, dt) = finite_n_trajectory(cfg, &gen)?;
    if dt < cfg.numeric.dt {
        notes.push(format!("step refined to {dt:e} for stability"));
    }
    let pi = liouville::steady_state(&gen)?;
    let records = thermo::thermo_series(&gen, &traj, Some(&pi), cfg.entropy_rate)?;
    let mut mag = Csv::new("lindblad.csv", &["t", "mx", "my", "mz"]);
    for (t, m) in traj.times.iter().zip(&traj.magnetization) {
        mag.row(&[*t, m[0], m[1], m[2]]);
    }
    let mut th = Csv::new("thermo.csv", &THERMO_HEADER);
    for r in &records {
        th.row(&[
            r.t,
            r.q_dot,
            r.u_dot,
            r.w_dot,
            r.s,
            r.s_dot,
            r.phi_dot,
            r.sigma_dot,
            r.b_dot,
        ]);
    }
    Ok(vec![mag.into(), th.into()])
}

fn steady(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let rows = par_map(cfg.sweep.jobs, &cfg.sweep.omegas, |om| {
        let p = cfg.params.with_omega(om);
        let gen = LindbladGenerator::new(&p)?;
        let pi = liouville::steady_state(&gen)?;
        let obs = Observables::new(&p);
        let nf = p.n_spins as f64;
        Ok([
            om,
            obs.work_power(&pi) / nf,
            obs.heat_current(&pi) / nf,
            thermo::vn_entropy(&pi)?,
        ])
    })?;
    let mut csv = Csv::new("steady.csv", &["omega", "wdot", "qdot", "S"]);
    for r in &rows {
        csv.row(r);
    }
    Ok(vec![csv.into()])
}

fn sweep_power(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let m0 = initial_mean_field(cfg);
    let n = &cfg.numeric;
    let rows = par_map(cfg.sweep.jobs, &cfg.sweep.omegas, |om| {
        let p = cfg.params.with_omega(om);
        let w = match cfg.sweep.method {
            SweepMethod::MeanField => thermo::mf_long_time_power(&p, &m0, n.t_max, n.dt)?.w_bar,
            SweepMethod::Lindblad => {
                let gen = LindbladGenerator::new(&p)?;
                thermo::work_power(&p, &liouville::steady_state(&gen)?) / p.n_spins as f64
            }
        };
        Ok([om, w])
    })?;
    let mut csv = Csv::new("sweep.csv", &["omega", "wbar_stationary"]);
    for r in &rows {
        csv.row(r);
    }
    Ok(vec![csv.into()])
}

struct CollisionRun {
    delta_t: f64,
    times: Vec<f64>,
    trace_distance: Vec<f64>,
    heat: Vec<f64>,
    heat_lindblad: Vec<f64>,
}

/// Collision run at `delta_t` next to a Lindblad run sampled on the same
/// grid (with `ceil(δt / dt)` RK4 substeps per collision).
fn collision_run(
    cfg: &RunConfig,
    rho0: &DensityMatrix,
    delta_t: f64,
) -> Result<CollisionRun, CliError> {
    let p = &cfg.params;
    let config = CollisionConfig::covering(cfg.numeric.t_max, delta_t)?;
    let run = match cfg.numeric.n_max {
        Some(n_max) => {
            let model = CollisionModel::new(p, &config, OscillatorAncilla::new(p, n_max))?;
            collision::run_collisions(&model, rho0, 1)?
        }
        None => collision::collision_trajectory(rho0, p, &config, 1)?,
    };

    let sub = (config.delta_t / cfg.numeric.dt).ceil().max(1.0) as usize;
    let t_end = config.n_collisions as f64 * config.delta_t;
    let gen = LindbladGenerator::new(p)?;
    let reference = liouville::evolve_with(
        &gen,
        rho0,
        &EvolveOptions::new(t_end, config.delta_t / sub as f64).check_positivity(false),
    )?;
    let obs = Observables::new(p);
    let q: Vec<f64> = reference
        .states
        .iter()
        .map(|r| obs.heat_current(r))
        .collect();
    let avg = thermo::time_avg_power(&reference.times, &q);
    let mut out = CollisionRun {
        delta_t: config.delta_t,
        times: Vec::new(),
        trace_distance: Vec::new(),
        heat: run.heat_cumulative.clone(),
        heat_lindblad: Vec::new(),
    };
    for (k, state) in run.trajectory.states.iter().enumerate() {
        let j = k * sub;
        out.times.push(run.trajectory.times[k]);
        out.trace_distance
            .push(state.trace_distance(&reference.states[j])?);
        out.heat_lindblad.push(avg[j] * reference.times[j]);
    }
    Ok(out)
}

fn collision_check(cfg: &RunConfig, notes: &mut Vec<String>) -> Result<Vec<Artifact>, CliError> {
    let rho0 = initial_density(cfg, &cfg.params);
    let runs = par_map(cfg.sweep.jobs, &cfg.deltas, |dt| {
        collision_run(cfg, &rho0, dt)
    })?;

    let mut table = Csv::new(
        "convergence.csv",
        &[
            "delta_t",
            "trace_distance",
            "heat_collision",
            "heat_lindblad",
            "heat_relative_error",
        ],
    );
    for r in &runs {
        let (d, h, hl) = (
            *r.trace_distance.last().unwrap(),
            *r.heat.last().unwrap(),
            *r.heat_lindblad.last().unwrap(),
        );
        table.row(&[r.delta_t, d, h, hl, (h - hl).abs() / hl.abs()]);
    }
    for w in runs.windows(2) {
        let order = |a: f64, b: f64| (a / b).ln() / (w[0].delta_t / w[1].delta_t).ln();
        let (a, b) = (&w[0], &w[1]);
        let ea = (a.heat.last().unwrap() - a.heat_lindblad.last().unwrap()).abs();
        let eb = (b.heat.last().unwrap() - b.heat_lindblad.last().unwrap()).abs();
        notes.push(format!(
            "δt {:e} → {:e}: trace-distance order {:.3}, heat-error order {:.3}",
            a.delta_t,
            b.delta_t,
            order(
                *a.trace_distance.last().unwrap(),
                *b.trace_distance.last().unwrap()
            ),
            order(ea, eb)
        ));
    }

    let finest = runs
        .iter()
        .min_by(|a, b| a.delta_t.total_cmp(&b.delta_t))
        .expect("at least one δt");
    let mut traj = Csv::new(
        "collision.csv",
        &[
            "k",
            "t",
            "trace_distance_to_lindblad",
            "heat_cumulative",
            "heat_lindblad_cumulative",
        ],
    );
    for k in 0..finest.times.len() {
        traj.indexed_row(
            k,
            &[
                finest.times[k],
                finest.trace_distance[k],
                finest.heat[k],
                finest.heat_lindblad[k],
            ],
        );
    }
    Ok(vec![traj.into(), table.into()])
}

fn ep_dist(cfg: &RunConfig, notes: &mut Vec<String>) -> Result<Vec<Artifact>, CliError> {
    let gen = LindbladGenerator::new(&cfg.params)?;
    let rho0 = initial_density(cfg, &cfg.params);
    let rho = if cfg.numeric.t_state > 0.0 {
        stochastic::evolved_state(&gen, &rho0, cfg.numeric.t_state)?
    } else {
        rho0
    };
    let s =
        stochastic::fluctuation_summary(&gen, &rho, cfg.numeric.dt_channel, cfg.numeric.bin_tol)?;
    let table = |name: &str, d: &stochastic::QuasiProbDistribution| {
        let mut csv = Csv::new(name, &["sigma", "weight"]);
        for &(sigma, w) in &d.atoms {
            csv.row(&[sigma, w]);
        }
        Artifact::from(csv)
    };
    let json = serde_json::json!({
        "negativity": s.forward.negativity,
        "integral_ft": s.integral_ft,
        "max_crooks_residual": s.crooks.max_residual(),
        "unmatched_atoms": s.crooks.unmatched.len(),
        "min_raw_term": s.forward.raw_min_real,
        "min_sigma": s.forward.atoms.first().map(|a| a.0),
        "excluded_weight": s.forward.excluded_weight,
        "imaginary_residue": s.forward.imaginary_residue,
    });
    notes.push(format!(
        "⟨e^-σ⟩ = {:.15}, max Crooks residual {:.3e}, negativity {:.3e}",
        s.integral_ft,
        s.crooks.max_residual(),
        s.forward.negativity
    ));
    let mut summary = serde_json::to_string_pretty(&json)
        .map_err(|e| CliError::io(format!("cannot encode summary: {e}")))?;
    summary.push('\n');
    Ok(vec![
        table("ep_forward.csv", &s.forward),
        table("ep_backward.csv", &s.backward),
        Artifact {
            name: "ep_summary.json".into(),
            contents: summary,
        },
    ])
}

fn entropy_compare(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let p = &cfg.params;
    let n = &cfg.numeric;
    let gen = LindbladGenerator::new(p)?;
    let (traj, _) = finite_n_trajectory(cfg, &gen)?;
    let m0 = initial_mean_field(cfg);
    let gauss = fluctuations::joint_integrate_sampled(
        p,
        &m0,
        &coherent_covariance(&m0),
        n.t_max,
        n.dt,
        n.save_every,
    )?;
    if gauss.len() != traj.len() {
        return Err(CliError::config(format!(
            "sample grids differ ({} vs {} points); choose t_max as a multiple of dt · save_every",
            traj.len(),
            gauss.len()
        )));
    }
    let mut csv = Csv::new("entropy_compare.csv", &["t", "S_N", "S_gauss"]);
    for (k, rho) in traj.states.iter().enumerate() {
        csv.row(&[traj.times[k], thermo::vn_entropy(rho)?, gauss.entropies[k]]);
    }
    Ok(vec![csv.into()])
}
