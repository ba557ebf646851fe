//! Experiment runners. Each writes its CSV tables into the output directory
//! and returns their paths.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use exciton_core::classical::{classical_enhancement, propagate_classical};
use exciton_core::dynamics::{propagate, Sampling, TransferRecord};
use exciton_core::model::mode_frequency;
use exciton_core::pool::WorkerPool;
use exciton_core::sweeps::{
    critical_dephasing_rate, dephasing_sweep, frequency_sweep, phase_ensemble, pulse_grid, pulse_refine,
    pulse_speed_optimum, refine_frequency, Baseline, EnhancementPoint, PulsePoint, Scenario,
};
use exciton_core::Error as CoreError;

use crate::config::{Experiment, ExperimentConfig, Grid, MotionKind, Series, TrajectoryModel};
use crate::error::RunError;
use crate::format::{fmt_num, Table};

/// Progress sink; receives one line per stage.
pub type Log<'a> = &'a mut dyn FnMut(&str);

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub wall_seconds: f64,
    pub manifest: PathBuf,
}

/// Validate `config`, run it on `pool` and write outputs plus a
/// `manifest.txt` that reproduces the run.
pub fn run(config: &ExperimentConfig, pool: &WorkerPool, out_dir: &Path, log: Log<'_>) -> Result<RunSummary, RunError> {
    let errors = config.validate();
    if !errors.is_empty() {
        return Err(RunError::Config(errors));
    }
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let started = Instant::now();
    let mut ctx = Context {
        config,
        pool,
        out_dir,
        outputs: Vec::new(),
        log,
    };
    (ctx.log)(&format!(
        "running {} on {} worker(s)",
        config.experiment,
        pool.workers()
    ));
    match config.experiment {
        Experiment::DimerSweep => ctx.dimer_sweep()?,
        Experiment::DimerPhaseEnsemble => ctx.phase_ensemble()?,
        Experiment::DimerAmplitude => ctx.amplitude()?,
        Experiment::ChainModes => ctx.chain_modes()?,
        Experiment::ChainLengthScan => ctx.length_scan()?,
        Experiment::DephasingScan => ctx.dephasing_scan()?,
        Experiment::PulseGrid => ctx.pulse_grid()?,
        Experiment::ClassicalCompare => ctx.classical_compare()?,
        Experiment::Trajectory => ctx.trajectory()?,
    }
    let wall_seconds = started.elapsed().as_secs_f64();
    let outputs = ctx.outputs;
    let manifest = out_dir.join("manifest.txt");
    let names: Vec<String> = outputs
        .iter()
        .map(|p| {
            p.file_name()
                .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
        })
        .collect();
    let text = format!(
        "# exciton {}\n# wall_time_s = {}\n# outputs = {}\n{}",
        env!("CARGO_PKG_VERSION"),
        fmt_num(wall_seconds),
        names.join(","),
        config.to_text()
    );
    fs::write(&manifest, text).map_err(|source| RunError::Io {
        path: manifest.clone(),
        source,
    })?;
    Ok(RunSummary {
        outputs,
        wall_seconds,
        manifest,
    })
}

const SWEEP_HEADER: [&str; 5] = ["param", "p_sink", "baseline_kind", "baseline_value", "delta"];

fn sweep_row(p: &EnhancementPoint) -> Vec<String> {
    vec![
        fmt_num(p.param),
        fmt_num(p.p_sink),
        p.baseline.kind().to_string(),
        fmt_num(p.p_static_ref),
        fmt_num(p.delta),
    ]
}

fn sweep_table(points: &[EnhancementPoint]) -> Table {
    let mut t = Table::new(SWEEP_HEADER);
    for p in points {
        t.push(sweep_row(p));
    }
    t
}

fn grid_values(key: &str, g: &Grid) -> Result<Vec<f64>, RunError> {
    g.values().map_err(|m| RunError::Config(vec![format!("{key}: {m}")]))
}

/// Spacing used as the refinement half-width around a grid point.
fn grid_step(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
}

/// Refined optimum, or the best grid point when the maximum sits on the
/// grid edge.
fn best_frequency(base: &Scenario, coarse: &[EnhancementPoint], log: Log<'_>) -> Result<EnhancementPoint, RunError> {
    match refine_frequency(base, coarse) {
        Ok(p) => Ok(p),
        Err(CoreError::NoMaximumInBracket { lo, hi }) => {
            log(&format!(
                "maximum lies on the edge of [{lo}, {hi}]; reporting the best grid point"
            ));
            let best = coarse
                .iter()
                .copied()
                .fold(coarse[0], |b, p| if p.p_sink > b.p_sink { p } else { b });
            Ok(best)
        }
        Err(e) => Err(e.into()),
    }
}

struct Context<'a, 'l> {
    config: &'a ExperimentConfig,
    pool: &'a WorkerPool,
    out_dir: &'a Path,
    outputs: Vec<PathBuf>,
    log: Log<'l>,
}

impl Context<'_, '_> {
    fn write(&mut self, name: &str, table: &Table) -> Result<(), RunError> {
        let path = table.write(&self.out_dir.join(name))?;
        (self.log)(&format!("wrote {}", path.display()));
        self.outputs.push(path);
        Ok(())
    }

    fn omega_grid(&self) -> Result<Vec<f64>, RunError> {
        grid_values("sweep.omega", &self.config.sweep.omega)
    }

    fn dimer_sweep(&mut self) -> Result<(), RunError> {
        let base = self.config.scenario()?;
        let grid = self.omega_grid()?;
        let baseline = self.config.sweep.reference;
        let points = frequency_sweep(&base, &grid, baseline, self.pool)?;
        self.write("sweep.csv", &sweep_table(&points))?;
        let best = best_frequency(&base, &points, self.log)?;
        (self.log)(&format!(
            "optimum omega = {} delta = {}",
            fmt_num(best.param),
            fmt_num(best.delta)
        ));
        self.write("optimum.csv", &sweep_table(&[best]))
    }

    fn phase_ensemble(&mut self) -> Result<(), RunError> {
        let base = self.config.scenario()?;
        let grid = self.omega_grid()?;
        let s = &self.config.sweep;
        let ens = phase_ensemble(&base, &grid, s.n_phases, s.phase_offset, self.pool)?;
        let mut t = Table::new(["omega", "mean", "env_min", "env_max"]);
        for i in 0..ens.omegas.len() {
            t.push(vec![
                fmt_num(ens.omegas[i]),
                fmt_num(ens.mean[i]),
                fmt_num(ens.env_min[i]),
                fmt_num(ens.env_max[i]),
            ]);
        }
        self.write("ensemble.csv", &t)?;
        let mut b = Table::new(["baseline_kind", "baseline_value"]);
        for kind in [Baseline::JMax, Baseline::JAvg, Baseline::J0] {
            b.push(vec![kind.kind().to_string(), fmt_num(base.static_reference(kind)?)]);
        }
        self.write("baselines.csv", &b)
    }

    fn amplitude(&mut self) -> Result<(), RunError> {
        let base = self.config.scenario()?;
        let grid = self.omega_grid()?;
        let amplitudes = grid_values("sweep.amplitudes", &self.config.sweep.amplitudes)?;
        let baseline = self.config.sweep.reference;
        let mut t = Table::new([
            "param",
            "omega_opt",
            "p_sink",
            "baseline_kind",
            "baseline_value",
            "delta",
        ]);
        for a in amplitudes {
            let scenario = base.with_profile(base.profile.with_amplitude(a)?);
            let coarse =
                frequency_sweep(&scenario, &grid, baseline, self.pool).map_err(|e| e.at(format!("a = {a}")))?;
            let best = best_frequency(&scenario, &coarse, self.log).map_err(|e| match e {
                RunError::Core(c) => RunError::Core(c.at(format!("a = {a}"))),
                other => other,
            })?;
            (self.log)(&format!("a = {} omega_opt = {}", fmt_num(a), fmt_num(best.param)));
            t.push(vec![
                fmt_num(a),
                fmt_num(best.param),
                fmt_num(best.p_sink),
                best.baseline.kind().to_string(),
                fmt_num(best.p_static_ref),
                fmt_num(best.delta),
            ]);
        }
        self.write("amplitude.csv", &t)
    }

    fn chain_modes(&mut self) -> Result<(), RunError> {
        let grid = self.omega_grid()?;
        let m = &self.config.motion;
        let k = m.modes.len();
        let amps = m
            .mode_amplitudes
            .expand(k, "motion.mode_amplitudes")
            .map_err(|e| RunError::Config(vec![e]))?;
        let phases = m
            .mode_phases
            .expand(k, "motion.mode_phases")
            .map_err(|e| RunError::Config(vec![e]))?;
        for (i, &q) in m.modes.clone().iter().enumerate() {
            let mut single = self.config.clone();
            single.motion.modes = vec![q];
            single.motion.mode_amplitudes = Series::Scalar(amps[i]);
            single.motion.mode_phases = Series::Scalar(phases[i]);
            let base = single.scenario()?;
            let points = frequency_sweep(&base, &grid, self.config.sweep.reference, self.pool)
                .map_err(|e| e.at(format!("mode {q}")))?;
            self.write(&format!("mode_q{q}.csv"), &sweep_table(&points))?;
        }
        Ok(())
    }

    /// Optimal `omega0` for an `n`-site chain, searched over the `omega`
    /// grid read as frequencies of the lowest excited mode.
    fn length_optimum(&mut self, n: usize) -> Result<(Scenario, EnhancementPoint, f64), RunError> {
        let base = self.config.scenario_for_length(n)?;
        let w1 = lowest_mode_ratio(self.config, n);
        let grid: Vec<f64> = self.omega_grid()?.iter().map(|w| w / w1).collect();
        let at = |e: CoreError| e.at(format!("N = {n}"));
        let coarse = frequency_sweep(&base, &grid, self.config.sweep.reference, self.pool).map_err(at)?;
        let best = best_frequency(&base, &coarse, self.log).map_err(|e| match e {
            RunError::Core(c) => RunError::Core(at(c)),
            other => other,
        })?;
        Ok((base, best, w1))
    }

    fn length_scan(&mut self) -> Result<(), RunError> {
        let mut t = Table::new([
            "n",
            "omega0_opt",
            "omega1_opt",
            "p_sink",
            "baseline_kind",
            "baseline_value",
            "delta",
        ]);
        for n in self.config.sweep.lengths.clone() {
            let (_, best, w1) = self.length_optimum(n)?;
            (self.log)(&format!(
                "N = {n} omega1_opt = {} delta = {}",
                fmt_num(best.param * w1),
                fmt_num(best.delta)
            ));
            t.push(vec![
                n.to_string(),
                fmt_num(best.param),
                fmt_num(best.param * w1),
                fmt_num(best.p_sink),
                best.baseline.kind().to_string(),
                fmt_num(best.p_static_ref),
                fmt_num(best.delta),
            ]);
        }
        self.write("length_scan.csv", &t)
    }

    fn dephasing_scan(&mut self) -> Result<(), RunError> {
        let rates = grid_values("sweep.gamma_deph", &self.config.sweep.gamma_deph)?;
        let baseline = self.config.sweep.reference;
        let mut critical = Table::new(["n", "omega0", "gamma_c"]);
        for n in self.config.sweep.lengths.clone() {
            let (base, best, _) = self.length_optimum(n)?;
            let tuned = base.with_profile(base.profile.with_frequency(best.param)?);
            let at = |e: CoreError| e.at(format!("N = {n}"));
            let points = dephasing_sweep(&tuned, &rates, baseline, self.pool).map_err(at)?;
            self.write(&format!("dephasing_n{n}.csv"), &sweep_table(&points))?;
            let gamma_c = match critical_dephasing_rate(&tuned, baseline) {
                Ok(g) => g,
                Err(CoreError::NoEnhancement { .. } | CoreError::NoSignChange { .. }) => f64::NAN,
                Err(e) => return Err(at(e).into()),
            };
            (self.log)(&format!("N = {n} gamma_c = {}", fmt_num(gamma_c)));
            critical.push(vec![n.to_string(), fmt_num(best.param), fmt_num(gamma_c)]);
        }
        self.write("critical.csv", &critical)
    }

    fn pulse_grid(&mut self) -> Result<(), RunError> {
        let base = self.config.scenario()?;
        let v = grid_values("sweep.v", &self.config.sweep.v)?;
        let sigma = grid_values("sweep.sigma", &self.config.sweep.sigma)?;
        let points = pulse_grid(&base, &v, &sigma, self.pool)?;
        let mut t = Table::new(["v", "sigma", "p_sink", "baseline_value", "delta"]);
        for p in &points {
            t.push(pulse_row(p)[1..].to_vec());
        }
        self.write("pulse_grid.csv", &t)?;

        let mut stages = Table::new(["stage", "v", "sigma", "p_sink", "baseline_value", "delta"]);
        let at_width = self.config.motion.sigma;
        match pulse_speed_optimum(&base, at_width, &v, self.pool) {
            Ok(p) => stages.push(pulse_row_named("speed_at_sigma", &p)),
            Err(CoreError::NoMaximumInBracket { .. }) => {
                (self.log)(&format!("no interior speed optimum at sigma = {}", fmt_num(at_width)))
            }
            Err(e) => return Err(e.into()),
        }
        let best = points
            .iter()
            .copied()
            .fold(points[0], |b, p| if p.p_sink > b.p_sink { p } else { b });
        stages.push(pulse_row_named("grid", &best));
        let refined = pulse_refine(
            &base,
            best,
            (grid_step(&v), grid_step(&sigma)),
            self.config.sweep.refine_rounds,
        )?;
        (self.log)(&format!(
            "pulse optimum v = {} sigma = {} delta = {}",
            fmt_num(refined.v),
            fmt_num(refined.sigma),
            fmt_num(refined.delta)
        ));
        stages.push(pulse_row_named("refined", &refined));
        self.write("pulse_optimum.csv", &stages)
    }

    fn classical_compare(&mut self) -> Result<(), RunError> {
        let base = self.config.scenario()?;
        let grid = self.omega_grid()?;
        let quantum = frequency_sweep(&base, &grid, Baseline::JMax, self.pool)?;
        self.write("quantum.csv", &sweep_table(&quantum))?;
        let classical = classical_enhancement(
            &base.spec,
            &base.profile,
            &base.channels,
            self.config.classical.hop_scale,
            &grid,
            &base.integrator,
            self.pool,
        )?;
        self.write("classical.csv", &sweep_table(&classical))
    }

    fn trajectory(&mut self) -> Result<(), RunError> {
        let s = self.config.scenario()?;
        let cfg = s
            .integrator
            .clone()
            .with_sampling(Sampling::Uniform(self.config.integrator.sample_dt));
        let record = match self.config.trajectory_model {
            TrajectoryModel::Quantum => propagate(&s.spec, &s.profile, &s.vib, &s.channels, &cfg, 1)?,
            TrajectoryModel::Classical => {
                propagate_classical(&s.spec, &s.profile, &s.channels, self.config.classical.hop_scale, &cfg)?
            }
        };
        self.write("trajectory.csv", &trajectory_table(&record))
    }
}

fn trajectory_table(record: &TransferRecord) -> Table {
    let n = record.n_sites();
    let header = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("p{i}")))
        .chain(["p_sink".to_string(), "loss".to_string()]);
    let mut t = Table::new(header);
    for k in 0..record.len() {
        let mut row = vec![fmt_num(record.times[k])];
        row.extend(record.site_populations[k].iter().map(|p| fmt_num(*p)));
        row.push(fmt_num(record.sink_population[k]));
        row.push(fmt_num(record.loss[k]));
        t.push(row);
    }
    t
}

fn pulse_row(p: &PulsePoint) -> Vec<String> {
    vec![
        String::new(),
        fmt_num(p.v),
        fmt_num(p.sigma),
        fmt_num(p.p_sink),
        fmt_num(p.baseline_value),
        fmt_num(p.delta),
    ]
}

fn pulse_row_named(stage: &str, p: &PulsePoint) -> Vec<String> {
    let mut row = pulse_row(p);
    row[0] = stage.to_string();
    row
}

/// Frequency of the lowest excited mode per unit `omega0` (1 for pairwise
/// motion, whose frequency is used directly).
fn lowest_mode_ratio(config: &ExperimentConfig, n: usize) -> f64 {
    match config.motion.kind {
        MotionKind::NormalMode => {
            let q = config.motion.modes.iter().copied().min().unwrap_or(1);
            mode_frequency(config.motion.boundary, n, q, 1.0)
        }
        _ => 1.0,
    }
}
