//! Command reports: a human-readable block followed by a JSON section.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use super::fit::DecayFit;
use crate::boundary::{Admissibility, CoplanarGainBounds};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::lyapunov::{DecayConstants, LyapunovCertificate};
use crate::solver::Record;

/// Marker line separating the text and JSON parts of a report file.
pub const JSON_MARKER: &str = "--- json ---";

#[derive(Clone, Debug, Serialize)]
pub struct ModelSummary {
    pub dim: usize,
    pub n_species: usize,
    pub velocities: Vec<Vec<f64>>,
    /// Smallest velocity norm; positive means no velocity is the origin.
    pub min_speed: f64,
    pub collision_channels: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub model: ModelSummary,
    pub steady_state: Vec<f64>,
    /// `|Q(f_e)|_inf`.
    pub steady_residual: f64,
    pub rank: usize,
    pub lambda0: Vec<f64>,
    pub lambda: Vec<f64>,
    pub p: Matrix,
    pub similarity_residual: f64,
    pub symmetrizer_residual: f64,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DesignReport {
    pub verify: VerifyReport,
    pub constants: DecayConstants,
    pub certificate: LyapunovCertificate,
    pub law: String,
    pub gains: Vec<(String, f64)>,
    /// Closed-form coplanar gain limits at the selected alpha.
    pub gain_bounds: Option<CoplanarGainBounds>,
    pub admissibility: Admissibility,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub config: RunConfig,
    pub alpha: f64,
    pub certificate: Option<LyapunovCertificate>,
    pub certificate_error: Option<String>,
    pub admissibility: Admissibility,
    pub cfl: f64,
    pub steps: usize,
    pub records: usize,
    pub final_time: f64,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// Largest `(L_i - L_{i-1}) / L_{i-1}` between consecutive records.
    pub max_lyapunov_increase: f64,
    /// Largest `|f|_i - |f|_{i-1}` between consecutive records.
    pub max_norm_increase: f64,
    pub fit: Option<DecayFit>,
    pub fit_error: Option<String>,
    pub csv: Option<PathBuf>,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub admissible: Option<bool>,
    pub nu: Option<f64>,
    pub r_squared: Option<f64>,
    pub final_norm: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub param: String,
    pub rows: Vec<SweepRow>,
    pub elapsed_seconds: f64,
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(", "))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6e}"))
}

fn verdict(a: &Admissibility) -> String {
    match a {
        Admissibility::Admissible { margin } => format!("admissible (margin {margin:.6e})"),
        Admissibility::Inadmissible { margin, violation } => format!(
            "INADMISSIBLE (margin {margin:.6e}): f{} outgoing on the {} at {} needs {:.6e} but has budget {:.6e}",
            violation.species + 1,
            violation.face,
            fmt_vec(&violation.location),
            violation.demand,
            violation.budget
        ),
    }
}

pub trait Report: Serialize {
    fn text(&self) -> String;

    /// Text followed by the JSON section.
    fn full(&self) -> Result<String> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numerical(format!("report serialization failed: {e}")))?;
        Ok(format!("{}\n{JSON_MARKER}\n{json}\n", self.text()))
    }

    fn write_to(&self, path: &Path) -> Result<()> {
        let body = self.full()?;
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

impl Report for VerifyReport {
    fn text(&self) -> String {
        let mut s = String::new();
        let m = &self.model;
        let _ = writeln!(s, "model: d = {}, n = {}, {} collision channels", m.dim, m.n_species, m.collision_channels);
        let _ = writeln!(s, "velocities: {:?}", m.velocities);
        let _ = writeln!(s, "smallest velocity norm: {} (no velocity at the origin)", m.min_speed);
        let _ = writeln!(s, "steady state f_e = {}", fmt_vec(&self.steady_state));
        let _ = writeln!(s, "steady-state residual |Q(f_e)|_inf = {:.3e}", self.steady_residual);
        let _ = writeln!(s, "Lambda_0 = diag{}", fmt_vec(&self.lambda0));
        let _ = writeln!(s, "rank r = {} (null space dimension {})", self.rank, self.lambda0.len() - self.rank);
        let _ = writeln!(s, "Lambda = {}", fmt_vec(&self.lambda));
        let _ = writeln!(s, "similarity residual |P J P^-1 + diag(0, Lambda)| = {:.3e}", self.similarity_residual);
        let _ = writeln!(s, "symmetrizer residual |Lambda_0 J + P^T diag(0, Lambda) P| = {:.3e}", self.symmetrizer_residual);
        let _ = write!(s, "elapsed: {:.3} s", self.elapsed_seconds);
        s
    }
}

impl Report for DesignReport {
    fn text(&self) -> String {
        let mut s = self.verify.text();
        let c = &self.certificate;
        let _ = writeln!(s);
        let _ = writeln!(s, "lambda = {}, C1 = {:.6e}, C2 = {:.6e}", opt(c.lambda_small), c.c1, c.c2);
        let _ = writeln!(s, "alpha = {:.6e}", c.alpha);
        let _ = writeln!(s, "weight bounds: lambda_min = {:.6e}, lambda_max = {:.6e}, overshoot = {:.6e}", c.lambda_min, c.lambda_max, c.overshoot);
        let _ = writeln!(s, "dissipation = {:.6e}, functional decay rate = {:.6e}, norm decay rate = {:.6e}", c.dissipation, c.decay_rate, c.norm_decay_rate());
        let gains: Vec<String> = self.gains.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        let _ = writeln!(s, "law: {} {}", self.law, gains.join(", "));
        if let Some(b) = &self.gain_bounds {
            let _ = writeln!(s, "gain bounds: |k1| <= {:.12}, |k2| <= {:.12}, |k3| <= {:.12}", b.k1, b.k2, b.k3);
        }
        let _ = write!(s, "verdict: {}", verdict(&self.admissibility));
        s
    }
}

impl Report for SimulationReport {
    fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "law: {:?}, alpha = {:.6e}, cfl = {:.4}", self.config.control.law, self.alpha, self.cfl);
        if let Some(e) = &self.certificate_error {
            let _ = writeln!(s, "warning: no certificate: {e}");
        }
        let _ = writeln!(s, "boundary law: {}", verdict(&self.admissibility));
        let _ = writeln!(s, "steps = {}, records = {}, t = {}", self.steps, self.records, self.final_time);
        let _ = writeln!(s, "|f(0)| = {:.6e}, |f(t_end)| = {:.6e}", self.initial_norm, self.final_norm);
        let _ = writeln!(s, "largest relative Lyapunov increase per record: {:.3e}", self.max_lyapunov_increase);
        let _ = writeln!(s, "largest norm increase per record: {:.3e}", self.max_norm_increase);
        match (&self.fit, &self.fit_error) {
            (Some(f), _) => {
                let _ = writeln!(
                    s,
                    "fit on [{}, {}] ({} samples): nu = {:.6e}, R^2 = {:.6}",
                    f.window[0], f.window[1], f.samples, f.nu, f.r_squared
                );
            }
            (None, Some(e)) => {
                let _ = writeln!(s, "fit: undefined ({e})");
            }
            (None, None) => {}
        }
        if let Some(p) = &self.csv {
            let _ = writeln!(s, "csv: {}", p.display());
        }
        let _ = write!(s, "elapsed: {:.3} s", self.elapsed_seconds);
        s
    }
}

impl Report for SweepReport {
    fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>14} {:>11} {:>14} {:>10} {:>14}  error", self.param, "admissible", "nu_fit", "R^2", "final_norm");
        for r in &self.rows {
            let adm = r.admissible.map_or("-", |a| if a { "yes" } else { "no" });
            let _ = writeln!(
                s,
                "{:>14} {:>11} {:>14} {:>10} {:>14}  {}",
                format!("{}", r.value),
                adm,
                opt(r.nu),
                r.r_squared.map_or_else(|| "-".into(), |x| format!("{x:.6}")),
                opt(r.final_norm),
                r.error.as_deref().unwrap_or("")
            );
        }
        let _ = write!(s, "elapsed: {:.3} s", self.elapsed_seconds);
        s
    }
}

/// 17 significant digits.
pub fn fmt_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_header(n_species: usize) -> String {
    let mut h = String::from("t,l2_norm,lyapunov,boundary_form");
    for k in 1..=n_species {
        let _ = write!(h, ",norm_f{k}");
    }
    h
}

pub fn csv_row(r: &Record) -> String {
    let mut row = [r.t, r.l2_norm, r.lyapunov, r.boundary_form]
        .iter()
        .map(|&x| fmt_number(x))
        .collect::<Vec<_>>();
    row.extend(r.species_norms.iter().map(|&x| fmt_number(x)));
    row.join(",")
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut s = format!("{},admissible,nu_fit,r_squared,final_norm,error\n", report.param);
    let num = |v: Option<f64>| v.map_or_else(String::new, fmt_number);
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_number(r.value),
            r.admissible.map_or_else(String::new, |a| a.to_string()),
            num(r.nu),
            num(r.r_squared),
            num(r.final_norm),
            r.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_row_layout() {
        assert_eq!(
            csv_header(4),
            "t,l2_norm,lyapunov,boundary_form,norm_f1,norm_f2,norm_f3,norm_f4"
        );
        let r = Record {
            t: 0.1,
            l2_norm: 2.0,
            lyapunov: 1.0 / 3.0,
            boundary_form: -0.0,
            species_norms: vec![1.0, 1.0],
        };
        let row = csv_row(&r);
        assert_eq!(row.split(',').count(), 6);
        let third: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(third, 1.0 / 3.0);
        assert!(row.starts_with("1.0000000000000001e-1,"));
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [std::f64::consts::PI, 1e-300, 123456789.12345679, -2.5e-17] {
            let s = fmt_number(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }
}
