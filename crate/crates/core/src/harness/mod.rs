//! Commands behind the CLI: `verify`, `design`, `simulate` and `sweep`.

pub mod config;
pub mod fit;
pub mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    AlphaKeyword, AlphaSetting, ControlConfig, DomainConfig, InitialConfig, LawKind,
    LyapunovConfig, ModelConfig, OutputConfig, Preset, RunConfig, Setup, SteadyStateConfig,
    TimeConfig,
};
pub use fit::{fit_decay, DecayFit};
pub use report::{
    csv_header, csv_row, DesignReport, ModelSummary, Report, SimulationReport, SweepReport,
    SweepRow, VerifyReport, JSON_MARKER,
};

use crate::boundary::{check_admissible, BoundaryWeights, CoplanarGainBounds};
use crate::error::{Error, Result};
use crate::lyapunov;
use crate::model::{DiscreteVelocityModel, SteadyState};
use crate::solver::{cfl_number, write_snapshot, Parallelism, Record, SimulationState, Solver};
use crate::stability::decompose;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides `output.dir`.
    pub output_dir: Option<PathBuf>,
    pub parallelism: Parallelism,
    /// Write CSV, snapshot and report files.
    pub write_files: bool,
}

impl RunOptions {
    pub fn output_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| cfg.output.dir.clone())
    }
}

fn model_summary(model: &DiscreteVelocityModel) -> ModelSummary {
    ModelSummary {
        dim: model.dim(),
        n_species: model.n_species(),
        velocities: model.velocities().to_vec(),
        min_speed: model
            .velocities()
            .iter()
            .map(|u| u.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min),
        collision_channels: model.channels().len(),
    }
}

fn verify_parts(
    model: &DiscreteVelocityModel,
    steady: &SteadyState,
    start: Instant,
) -> Result<(VerifyReport, crate::stability::StabilityDecomposition)> {
    let d = decompose(model, steady)?;
    let residual = model
        .source_term(steady.values())?
        .iter()
        .fold(0.0f64, |m, q| m.max(q.abs()));
    let report = VerifyReport {
        model: model_summary(model),
        steady_state: steady.values().to_vec(),
        steady_residual: residual,
        rank: d.rank,
        lambda0: d.lambda0.clone(),
        lambda: d.lambda.clone(),
        p: d.p.clone(),
        similarity_residual: d.similarity_residual,
        symmetrizer_residual: d.symmetrizer_residual,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((report, d))
}

/// Structural-stability decomposition of the configured model.
pub fn verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let start = Instant::now();
    let (model, steady, _) = cfg.setup_model()?;
    Ok(verify_parts(&model, &steady, start)?.0)
}

fn configured_gains(c: &ControlConfig) -> Vec<(String, f64)> {
    [("k1", c.k1), ("k2", c.k2), ("k3", c.k3)]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
        .collect()
}

/// Certificate, alpha, closed-form gain limits and the admissibility verdict.
pub fn design(cfg: &RunConfig) -> Result<DesignReport> {
    let start = Instant::now();
    let (model, steady, domain) = cfg.setup_model()?;
    let law = cfg.build_law()?;
    let (verify, d) = verify_parts(&model, &steady, start)?;
    let constants = lyapunov::constants(&model, &domain, &d)?;
    let certificate =
        lyapunov::certificate(&model, &steady, &domain, &d, cfg.lyapunov.choice())?;
    let weights = BoundaryWeights::lyapunov(certificate.alpha, steady.values().to_vec());
    let admissibility = check_admissible(&law, &model, &domain, &weights)?;
    let gain_bounds = match cfg.control.law {
        LawKind::Zero => None,
        LawKind::Cross | LawKind::Mixed => Some(CoplanarGainBounds::lyapunov(
            steady.values(),
            certificate.alpha,
        )),
    };
    Ok(DesignReport {
        verify,
        constants,
        certificate,
        law: law.name.clone(),
        gains: configured_gains(&cfg.control),
        gain_bounds,
        admissibility,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

pub struct SimulationOutcome {
    pub report: SimulationReport,
    pub records: Vec<Record>,
    pub final_state: SimulationState,
}

struct CsvSink {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvSink {
    fn create(path: PathBuf, n_species: usize) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut sink = CsvSink {
            out: BufWriter::new(file),
            path,
        };
        sink.line(&csv_header(n_species))?;
        Ok(sink)
    }

    fn line(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs the solver to `t_end`. Inadmissible laws are simulated; the verdict
/// is part of the report. On divergence the CSV written so far is kept.
pub fn simulate(cfg: &RunConfig, opts: &RunOptions) -> Result<SimulationOutcome> {
    let start = Instant::now();
    let setup = cfg.setup()?;
    let n = setup.model.n_species();

    let (certificate, certificate_error, alpha) = match decompose(&setup.model, &setup.steady)
        .and_then(|d| {
            lyapunov::certificate(
                &setup.model,
                &setup.steady,
                &setup.domain,
                &d,
                cfg.lyapunov.choice(),
            )
        }) {
        Ok(c) => {
            let a = c.alpha;
            (Some(c), None, a)
        }
        Err(e) => match cfg.lyapunov.alpha {
            AlphaSetting::Value(a) if a >= 0.0 && !matches!(e, Error::Numerical(_)) => {
                (None, Some(e.to_string()), a)
            }
            _ => return Err(e),
        },
    };
    let weights = BoundaryWeights::lyapunov(alpha, setup.steady.values().to_vec());
    let admissibility = check_admissible(&setup.law, &setup.model, &setup.domain, &weights)?;
    let cfl = cfl_number(&setup.model, &setup.grid, cfg.time.dt);

    let solver = Solver::new(
        setup.model.clone(),
        &setup.steady,
        setup.grid.clone(),
        &setup.law,
        alpha,
        cfg.time.dt,
    )?
    .with_parallelism(opts.parallelism);
    let mut state = SimulationState::from_fn(&setup.grid, n, |k, x| {
        cfg.initial.value(&setup.domain, k, x)
    });

    let dir = opts.output_dir(cfg);
    let mut sink = if opts.write_files {
        ensure_dir(&dir)?;
        Some(CsvSink::create(dir.join(&cfg.output.csv), n)?)
    } else {
        None
    };
    let mut records = Vec::with_capacity(setup.steps / cfg.time.record_every + 1);
    let run = solver.run(&mut state, setup.steps, cfg.time.record_every, |r| {
        if let Some(s) = sink.as_mut() {
            s.line(&csv_row(r))?;
        }
        records.push(r.clone());
        Ok(())
    });
    if let Some(s) = sink.as_mut() {
        s.flush()?;
    }
    run?;

    if opts.write_files {
        if let Some(name) = &cfg.output.snapshot {
            write_snapshot(&dir.join(name), &setup.grid, n, &state)?;
        }
    }

    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    let norms: Vec<f64> = records.iter().map(|r| r.l2_norm).collect();
    let (fit, fit_error) = match fit_decay(&times, &norms, cfg.fit_window()) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let max_lyapunov_increase = records
        .windows(2)
        .filter(|w| w[0].lyapunov > 0.0)
        .map(|w| (w[1].lyapunov - w[0].lyapunov) / w[0].lyapunov)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_norm_increase = records
        .windows(2)
        .map(|w| w[1].l2_norm - w[0].l2_norm)
        .fold(f64::NEG_INFINITY, f64::max);

    let report = SimulationReport {
        config: cfg.clone(),
        alpha,
        certificate,
        certificate_error,
        admissibility,
        cfl,
        steps: setup.steps,
        records: records.len(),
        final_time: state.time,
        initial_norm: records.first().map_or(0.0, |r| r.l2_norm),
        final_norm: records.last().map_or(0.0, |r| r.l2_norm),
        max_lyapunov_increase: if records.len() > 1 { max_lyapunov_increase } else { 0.0 },
        max_norm_increase: if records.len() > 1 { max_norm_increase } else { 0.0 },
        fit,
        fit_error,
        csv: sink.map(|s| s.path),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(SimulationOutcome {
        report,
        records,
        final_state: state,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    K1,
    K2,
    K3,
    Alpha,
    Dt,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K1 => "k1",
            SweepParam::K2 => "k2",
            SweepParam::K3 => "k3",
            SweepParam::Alpha => "alpha",
            SweepParam::Dt => "dt",
        }
    }

    pub fn apply(self, cfg: &RunConfig, value: f64) -> RunConfig {
        let mut c = cfg.clone();
        match self {
            SweepParam::K1 => c.control.k1 = Some(value),
            SweepParam::K2 => c.control.k2 = Some(value),
            SweepParam::K3 => c.control.k3 = Some(value),
            SweepParam::Alpha => c.lyapunov.alpha = AlphaSetting::Value(value),
            SweepParam::Dt => c.time.dt = value,
        }
        c
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k1" => Ok(SweepParam::K1),
            "k2" => Ok(SweepParam::K2),
            "k3" => Ok(SweepParam::K3),
            "alpha" => Ok(SweepParam::Alpha),
            "dt" => Ok(SweepParam::Dt),
            other => Err(Error::Config(format!(
                "unknown sweep parameter {other:?}; expected k1, k2, k3, alpha or dt"
            ))),
        }
    }
}

/// `lo:hi:step` (inclusive of `hi` up to rounding) or a comma-separated list.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Config(format!("bad number {s:?} in range {text:?}")))
    };
    let values: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [lo, hi, step] = parts[..] else {
            return Err(Error::Config(format!("range {text:?} is not lo:hi:step")));
        };
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if step <= 0.0 {
            return Err(Error::Config(format!("range step {step} must be positive")));
        }
        let count = ((hi - lo) / step + 1e-9).floor();
        if count < 0.0 {
            Vec::new()
        } else {
            (0..=count as usize).map(|i| lo + i as f64 * step).collect()
        }
    } else {
        text.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(num)
            .collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(Error::Config(format!("range {text:?} is empty")));
    }
    Ok(values)
}

/// One simulation per value, rows in parallel on the current rayon pool.
pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[f64]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::Config("empty sweep range".into()));
    }
    let start = Instant::now();
    let opts = RunOptions::default();
    let rows = values
        .par_iter()
        .map(|&value| match simulate(&param.apply(cfg, value), &opts) {
            Ok(out) => SweepRow {
                value,
                admissible: Some(out.report.admissibility.is_admissible()),
                nu: out.report.fit.as_ref().map(|f| f.nu),
                r_squared: out.report.fit.as_ref().map(|f| f.r_squared),
                final_norm: Some(out.report.final_norm),
                error: out.report.fit_error,
            },
            Err(e) => SweepRow {
                value,
                admissible: None,
                nu: None,
                r_squared: None,
                final_norm: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(SweepReport {
        param: param.name().into(),
        rows,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Writes `report` to the output directory as `output.report` or
/// `<command>.txt`.
pub fn write_report<R: Report>(
    report: &R,
    cfg: &RunConfig,
    opts: &RunOptions,
    command: &str,
) -> Result<PathBuf> {
    let dir = opts.output_dir(cfg);
    ensure_dir(&dir)?;
    let name = cfg
        .output
        .report
        .clone()
        .unwrap_or_else(|| format!("{command}.txt"));
    let path = dir.join(name);
    report.write_to(&path)?;
    Ok(path)
}

/// Writes the sweep table as CSV next to the report.
pub fn write_sweep_table(report: &SweepReport, cfg: &RunConfig, opts: &RunOptions) -> Result<PathBuf> {
    let dir = opts.output_dir(cfg);
    ensure_dir(&dir)?;
    let path = dir.join(format!("sweep_{}.csv", report.param));
    std::fs::write(&path, report::sweep_csv(report)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
