//! Batch runner: one subcommand per check family, CSV tables plus a JSON
//! manifest per run.
//!
//! Exit codes: 0 all checks pass, 1 a numerical check failed, 2 the
//! configuration is invalid (nothing is written), 3 a runtime failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::effective::{
    gamma_legendre, inverse_legendre, invert_mean_field, quantum_eom_residual, schwinger_dyson_residual,
    w_s_compute, ActionFunctional, Polynomial,
};
use crate::error::Error;
use crate::integrators::{
    integrate_analytic, integrate_localized_gaussian, integrate_localized_hermite, integrate_mc,
    hermite_orthogonality, orthogonality_exact, IntegratorSpec,
};
use crate::mc::McConfig;
use crate::measures::{DiracComb, IntegrableFunctional, ThetaKind};
use crate::parametrize::{change_of_variable_check, develop_path, Driver, LinearMapPair, VectorFieldSet};
use crate::qft::{free_field_twopoint, random_pairs, FoliatedLattice};
use crate::quadforms::{Localization, QuadFormPair};
use crate::scalar::Complex;
use crate::spaces::{Boundary, DomainGrid, DualVector};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Normcheck,
    Ortho,
    Definition3,
    Cov,
    Sd,
    Effective,
    Develop,
    Twopoint,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Normcheck => "normcheck",
            Subcommand::Ortho => "ortho",
            Subcommand::Definition3 => "definition3",
            Subcommand::Cov => "cov",
            Subcommand::Sd => "sd",
            Subcommand::Effective => "effective",
            Subcommand::Develop => "develop",
            Subcommand::Twopoint => "twopoint",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "funcint", about = "Functional-integration checks and experiments")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Subcommand,
    /// TOML configuration, or a previous run's manifest (`.json`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (0 = all cores); never changes results.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: 20240601, workers: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormcheckSection {
    pub max_n: usize,
    /// Explicit widths `W`; `random` more are drawn from `[0.2, 5]`.
    pub widths: Vec<f64>,
    pub random: usize,
    pub order: usize,
    pub tolerance: f64,
}

impl Default for NormcheckSection {
    fn default() -> Self {
        NormcheckSection { max_n: 8, widths: Vec::new(), random: 5, order: 32, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrthoSection {
    pub max_n: usize,
    pub widths: Vec<f64>,
    pub order: usize,
    pub diag_rel_tol: f64,
    pub off_abs_tol: f64,
}

impl Default for OrthoSection {
    fn default() -> Self {
        OrthoSection { max_n: 6, widths: vec![0.5, 1.0, 3.0], order: 32, diag_rel_tol: 1e-8, off_abs_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Definition3Section {
    pub instances: usize,
    pub sites: usize,
    pub max_points: usize,
    pub max_span: usize,
    pub samples: u64,
    pub order: usize,
    pub rel_tol: f64,
    pub sigmas: f64,
}

impl Default for Definition3Section {
    fn default() -> Self {
        Definition3Section {
            instances: 20,
            sites: 6,
            max_points: 5,
            max_span: 3,
            samples: 1_000_000,
            order: 40,
            rel_tol: 1e-8,
            sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovSection {
    pub instances: usize,
    pub max_sites: usize,
    pub points: usize,
    pub tolerance: f64,
}

impl Default for CovSection {
    fn default() -> Self {
        CovSection { instances: 10, max_sites: 8, points: 3, tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdSection {
    pub forms: usize,
    pub dims: Vec<usize>,
    pub max_degree: usize,
    pub order: usize,
    pub tolerance: f64,
}

impl Default for SdSection {
    fn default() -> Self {
        SdSection { forms: 10, dims: vec![1, 2], max_degree: 4, order: 24, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectiveSection {
    pub width: f64,
    pub lambdas: Vec<f64>,
    pub source_min: f64,
    pub source_max: f64,
    pub points: usize,
    pub tolerance: f64,
}

impl Default for EffectiveSection {
    fn default() -> Self {
        EffectiveSection {
            width: 1.0,
            lambdas: vec![0.0, 0.1],
            source_min: -1.0,
            source_max: 1.0,
            points: 21,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DevelopSection {
    pub steps: Vec<usize>,
    pub final_tol: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl Default for DevelopSection {
    fn default() -> Self {
        DevelopSection { steps: vec![625, 1250, 2500, 5000, 10000], final_tol: 1e-6, ratio_min: 3.5, ratio_max: 4.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwopointSection {
    pub lattice: FoliatedLattice,
    pub mass: f64,
    pub pairs: usize,
    pub min_separation: usize,
    pub samples: u64,
    /// Consecutive seeds starting at `run.seed`.
    pub seeds: u64,
    pub sigmas: f64,
    pub coverage: f64,
}

impl Default for TwopointSection {
    fn default() -> Self {
        TwopointSection {
            lattice: FoliatedLattice::square(6, 6),
            mass: 1.0,
            pairs: 10,
            min_separation: 2,
            samples: 1_000_000,
            seeds: 1,
            sigmas: 3.0,
            coverage: 0.99,
        }
    }
}

/// Fully resolved configuration; the manifest embeds it verbatim.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub normcheck: NormcheckSection,
    pub ortho: OrthoSection,
    pub definition3: Definition3Section,
    pub cov: CovSection,
    pub sd: SdSection,
    pub effective: EffectiveSection,
    pub develop: DevelopSection,
    pub twopoint: TwopointSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Resolved configuration embedded in a run manifest.
    pub fn from_manifest(text: &str) -> Result<Self, Error> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = v.get("config").ok_or_else(|| Error::Config("manifest has no config".into()))?;
        serde_json::from_value(cfg.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self, cmd: Subcommand) -> Result<(), Error> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        let pos = |x: f64| x > 0.0 && x.is_finite();
        match cmd {
            Subcommand::Normcheck => {
                let c = &self.normcheck;
                if c.widths.iter().any(|&w| !pos(w)) {
                    return bad("normcheck widths must be positive");
                }
                if c.widths.is_empty() && c.random == 0 {
                    return bad("normcheck needs at least one width");
                }
                if c.order == 0 || 2 * c.order < c.max_n + 2 {
                    return bad("normcheck order too low");
                }
            }
            Subcommand::Ortho => {
                let c = &self.ortho;
                if c.widths.is_empty() || c.widths.iter().any(|&w| !pos(w)) {
                    return bad("ortho widths must be positive and non-empty");
                }
                if 2 * c.order < 2 * c.max_n + 2 {
                    return bad("ortho order too low");
                }
            }
            Subcommand::Definition3 => {
                let c = &self.definition3;
                if c.samples < 2 || c.instances == 0 || c.sites == 0 || c.max_points == 0 {
                    return bad("definition3 needs samples ≥ 2 and positive instances, sites, points");
                }
                if c.max_span == 0 || c.max_span > 3 || c.max_span > c.sites {
                    return bad("definition3 max_span must lie in 1..=min(3, sites)");
                }
            }
            Subcommand::Cov => {
                if self.cov.instances == 0 || self.cov.max_sites == 0 || self.cov.points == 0 {
                    return bad("cov needs positive instances, sites and points");
                }
            }
            Subcommand::Sd => {
                let c = &self.sd;
                if c.dims.is_empty() || c.dims.iter().any(|&m| m == 0 || m > 3) {
                    return bad("sd dims must lie in 1..=3");
                }
                if c.max_degree > 6 || c.forms == 0 {
                    return bad("sd needs forms > 0 and degree ≤ 6");
                }
            }
            Subcommand::Effective => {
                let c = &self.effective;
                if !pos(c.width) || c.lambdas.iter().any(|&l| !(l >= 0.0)) {
                    return bad("effective needs width > 0 and λ ≥ 0");
                }
                if c.points < 5 || !(c.source_max > c.source_min) {
                    return bad("effective source grid needs ≥ 5 points on a proper interval");
                }
            }
            Subcommand::Develop => {
                let s = &self.develop.steps;
                if s.is_empty() || s.contains(&0) || s.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("develop steps must be positive and increasing");
                }
            }
            Subcommand::Twopoint => {
                let c = &self.twopoint;
                c.lattice.validate()?;
                if c.samples < 2 || c.seeds == 0 || c.pairs == 0 || !(c.mass >= 0.0) {
                    return bad("twopoint needs samples ≥ 2, seeds ≥ 1, pairs ≥ 1, mass ≥ 0");
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), pass: value <= tolerance, value, tolerance }
    }

    fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), pass: value >= tolerance, value, tolerance }
    }
}

/// One CSV file: name, header and rows already rendered as strings.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn to_bytes(&self) -> Result<Vec<u8>, Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))
    }
}

/// Results of one subcommand before anything is written.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn f(x: f64) -> String {
    format!("{x:e}")
}

fn u(x: impl ToString) -> String {
    x.to_string()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn random_spd(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(m, m) * 0.5
}

fn run_normcheck(cfg: &RunConfig) -> Result<Report, Error> {
    let c = &cfg.normcheck;
    let mut rng = rng_for(cfg.run.seed, 1);
    let mut widths = c.widths.clone();
    widths.extend((0..c.random).map(|_| rng.random_range(0.2..5.0)));
    let mut t = Table::new("normcheck", &["w", "n", "value_re", "value_im", "deviation"]);
    let mut worst = 0.0f64;
    for &w in &widths {
        let loc = Localization::scalar(w)?;
        for n in 0..=c.max_n {
            let v = integrate_localized_hermite(n, |_: &[Complex<f64>]| Complex::new(1.0, 0.0), &loc, None, c.order)?;
            let dev = (v - if n == 0 { 1.0 } else { 0.0 }).norm();
            worst = worst.max(dev);
            t.push(vec![f(w), u(n), f(v.re), f(v.im), f(dev)]);
        }
    }
    Ok(Report { tables: vec![t], checks: vec![Check::at_most("max |∫Dρ_n − δ_n0|", worst, c.tolerance)] })
}

fn run_ortho(cfg: &RunConfig) -> Result<Report, Error> {
    let c = &cfg.ortho;
    let mut t = Table::new("ortho", &["w", "n", "m", "value_re", "value_im", "exact", "error"]);
    let (mut diag, mut off) = (0.0f64, 0.0f64);
    for &w in &c.widths {
        let loc = Localization::scalar(w)?;
        for n in 0..=c.max_n {
            for m in 0..=c.max_n {
                let v = hermite_orthogonality(n, m, &loc, c.order)?;
                let e = orthogonality_exact(n, m, Complex::new(w, 0.0));
                let err = (v - e).norm();
                if n == m {
                    diag = diag.max(err / e.norm());
                } else {
                    off = off.max(err);
                }
                t.push(vec![f(w), u(n), u(m), f(v.re), f(v.im), f(e.re), f(err)]);
            }
        }
    }
    Ok(Report {
        tables: vec![t],
        checks: vec![
            Check::at_most("max diagonal relative error", diag, c.diag_rel_tol),
            Check::at_most("max off-diagonal absolute error", off, c.off_abs_tol),
        ],
    })
}

/// Random Gaussian spec and comb for instance `k` of the `definition3` run.
pub fn definition3_instance(
    seed: u64,
    k: usize,
    c: &Definition3Section,
) -> Result<(IntegratorSpec<f64>, DiracComb<f64>), Error> {
    let mut rng = rng_for(seed, 100 + k as u64);
    let n = c.sites;
    let grid = DomainGrid::line(n, 1.0 / (n as f64 + 1.0), Boundary::Dirichlet);
    let mass = rng.random_range(0.5..2.0);
    let stiffness = rng.random_range(0.05..0.5);
    let qf = Arc::new(QuadFormPair::from_action_density(grid.clone(), mass, stiffness)?);
    let s = if k % 2 == 0 { Complex::new(rng.random_range(0.5..2.0), 0.0) } else {
        Complex::new(rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0))
    };
    let spec = IntegratorSpec::gaussian(qf.clone(), s)?;
    let span = 1 + rng.random_range(0..c.max_span);
    let basis: Vec<Vec<f64>> = (0..span).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let npts = 1 + rng.random_range(0..c.max_points);
    let mut points = Vec::with_capacity(npts);
    let mut weights = Vec::with_capacity(npts);
    for _ in 0..npts {
        let coef: Vec<f64> = (0..span).map(|_| rng.random_range(-0.5..0.5)).collect();
        let raw: Vec<f64> = (0..n).map(|i| (0..span).map(|j| coef[j] * basis[j][i]).sum::<f64>() * 3.0).collect();
        points.push(DualVector::from_real(grid.clone(), &raw)?);
        weights.push(Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    }
    Ok((spec, DiracComb::new(grid, points, weights)?))
}

fn run_definition3(cfg: &RunConfig) -> Result<Report, Error> {
    let c = &cfg.definition3;
    let mut t = Table::new(
        "definition3",
        &[
            "instance", "s_re", "s_im", "points", "analytic_re", "analytic_im", "quadrature_re", "quadrature_im",
            "rel_error", "mc_re", "mc_im", "stderr", "z",
        ],
    );
    let (mut worst_rel, mut worst_z) = (0.0f64, 0.0f64);
    for k in 0..c.instances {
        let (spec, comb) = definition3_instance(cfg.run.seed, k, c)?;
        let s = spec.s().expect("gaussian");
        let a = integrate_analytic(&spec, &comb)?;
        let q = integrate_localized_gaussian(&spec, &comb, c.order)?;
        let scale = comb.iter().map(|(p, w)| (w * crate::integrators::z_eval(&spec, p).unwrap_or_default()).norm()).sum::<f64>();
        let rel = (a - q).norm() / scale.max(f64::MIN_POSITIVE);
        worst_rel = worst_rel.max(rel);
        let qf = spec.qf().expect("gaussian").clone();
        let func = IntegrableFunctional::new(comb.clone(), ThetaKind::PhaseOnly, qf)?;
        let mcfg = McConfig::new(c.samples, cfg.run.seed.wrapping_add(k as u64)).with_workers(cfg.run.workers);
        let est = integrate_mc(&spec, |b| func.eval(b), &mcfg)?;
        let z = est.z_score(a);
        worst_z = worst_z.max(z);
        let (mre, mim, se, z) = (f(est.mean.re), f(est.mean.im), f(est.stderr), f(z));
        t.push(vec![u(k), f(s.re), f(s.im), u(comb.len()), f(a.re), f(a.im), f(q.re), f(q.im), f(rel), mre, mim, se, z]);
    }
    let checks = vec![
        Check::at_most("max relative analytic/quadrature gap", worst_rel, c.rel_tol),
        Check::at_most("max Monte Carlo z-score", worst_z, c.sigmas),
    ];
    Ok(Report { tables: vec![t], checks })
}

fn run_cov(cfg: &RunConfig) -> Result<Report, Error> {
    let c = &cfg.cov;
    let mut t = Table::new("cov", &["instance", "sites", "logdet_m", "transpose_residual", "residual"]);
    let mut worst = 0.0f64;
    let mut worst_t = 0.0f64;
    for k in 0..c.instances {
        let mut rng = rng_for(cfg.run.seed, 200 + k as u64);
        let n = 1 + rng.random_range(0..c.max_sites);
        let grid = DomainGrid::line(n, 1.0 / (n as f64 + 1.0), Boundary::Dirichlet);
        let qf = Arc::new(QuadFormPair::from_action_density(grid.clone(), rng.random_range(0.5..2.0), 0.2)?);
        let spec = IntegratorSpec::gaussian(qf, Complex::new(rng.random_range(0.5..2.0), rng.random_range(-0.5..0.5)))?;
        let mut m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        while m.clone().lu().determinant().abs() < 0.1 {
            m += DMatrix::identity(n, n);
        }
        let shift = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let pair = LinearMapPair::affine(m, shift)?;
        let points = (0..c.points)
            .map(|_| DualVector::from_real(grid.clone(), &(0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>, _>>()?;
        let weights = (0..c.points).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let comb = DiracComb::new(grid, points, weights)?;
        let r = change_of_variable_check(&pair, &spec, &comb)?;
        let tr = pair.transpose_residual(8, k as u64);
        worst = worst.max(r);
        worst_t = worst_t.max(tr);
        t.push(vec![u(k), u(n), f(pair.logdet_m()), f(tr), f(r)]);
    }
    Ok(Report {
        tables: vec![t],
        checks: vec![
            Check::at_most("max change-of-variable residual", worst, c.tolerance),
            Check::at_most("max transpose residual", worst_t, c.tolerance),
        ],
    })
}

/// Monomials of total degree `≤ max_degree` on `ℝ^m`.
pub fn monomials(m: usize, max_degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut e = vec![0usize; m];
    loop {
        if e.iter().sum::<usize>() <= max_degree {
            out.push(e.clone());
        }
        let mut i = 0;
        loop {
            if i == m {
                return out;
            }
            e[i] += 1;
            if e[i] <= max_degree {
                break;
            }
            e[i] = 0;
            i += 1;
        }
    }
}

fn run_sd(cfg: &RunConfig) -> Result<Report, Error> {
    let c = &cfg.sd;
    let mut t = Table::new("sd", &["form", "m", "exponents", "residual"]);
    let mut worst = 0.0f64;
    for &m in &c.dims {
        for k in 0..c.forms {
            let mut rng = rng_for(cfg.run.seed, 300 + 10 * m as u64 + k as u64);
            let loc = Localization::from_real_form(&random_spd(&mut rng, m))?;
            for e in monomials(m, c.max_degree) {
                let label = e.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
                let p = Polynomial::new(m, vec![(1.0, e)])?;
                let r = schwinger_dyson_residual(&loc, &p, c.order)?;
                worst = worst.max(r);
                t.push(vec![u(k), u(m), label, f(r)]);
            }
        }
    }
    Ok(Report { tables: vec![t], checks: vec![Check::at_most("max Schwinger–Dyson residual", worst, c.tolerance)] })
}

fn run_effective(cfg: &RunConfig) -> Result<Report, Error> {
    let c = &cfg.effective;
    let grid: Vec<f64> = (0..c.points)
        .map(|k| c.source_min + (c.source_max - c.source_min) * k as f64 / (c.points - 1) as f64)
        .collect();
    let mut ws_t = Table::new("effective_ws", &["lambda", "uprime", "w_s", "mean_field"]);
    let mut g_t = Table::new("effective_gamma", &["lambda", "v", "gamma", "q"]);
    let mut checks = Vec::new();
    for &lambda in &c.lambdas {
        let action = ActionFunctional::new(Localization::scalar(c.width)?, lambda)?;
        let st = w_s_compute(action, 0, &grid)?;
        for ((t, w), mf) in st.uprime.iter().zip(&st.w_s).zip(&st.mean_field) {
            ws_t.push(vec![f(lambda), f(*t), f(*w), f(mf[0])]);
        }
        let table = gamma_legendre(&st)?;
        let k0 = table.v.iter().enumerate().fold(0, |b, (i, v)| if v.abs() < table.v[b].abs() { i } else { b });
        let g0 = table.gamma[k0];
        let mut quad_gap = 0.0f64;
        for (v, g) in table.v.iter().zip(&table.gamma) {
            let q = v * v / c.width;
            quad_gap = quad_gap.max((g - g0 - q).abs());
            g_t.push(vec![f(lambda), f(*v), f(*g), f(q)]);
        }
        if lambda == 0.0 {
            checks.push(Check::at_most("λ=0: max |Γ(v) − Γ(0) − Q(v)|", quad_gap, c.tolerance));
        }
        checks.push(Check::at_most(format!("λ={lambda}: quantum EOM residual"), quantum_eom_residual(&st)?, c.tolerance));
        let mut trip = 0.0f64;
        let mut back = 0.0f64;
        for k in 1..grid.len() - 2 {
            let mid = 0.5 * (grid[k] + grid[k + 1]);
            let direct = st.eval.w_s(&[mid])?;
            trip = trip.max((inverse_legendre(&st, &table, mid)? - direct).abs());
            back = back.max((invert_mean_field(&st, &table, st.slice_mean(mid)?)? - mid).abs());
        }
        checks.push(Check::at_most(format!("λ={lambda}: Legendre round trip"), trip, c.tolerance));
        checks.push(Check::at_most(format!("λ={lambda}: u′ → v → u′"), back, c.tolerance));
    }
    Ok(Report { tables: vec![ws_t, g_t], checks })
}

/// `‖p(1) − (cos 1, sin 1)‖` for circle development at `steps` midpoint steps.
pub fn circle_error(steps: usize) -> Result<f64, Error> {
    let vfs = VectorFieldSet::<f64>::circle()?;
    let sol = develop_path(&vfs, &Driver::linear(0.0, 1.0, 2, &[1.0])?, steps)?;
    let p = sol.end();
    Ok(((p[0] - 1f64.cos()).powi(2) + (p[1] - 1f64.sin()).powi(2)).sqrt())
}

fn run_develop(cfg: &RunConfig) -> Result<Report, Error> {
    let c = &cfg.develop;
    let mut t = Table::new("develop", &["steps", "error", "ratio"]);
    let errors = c.steps.iter().map(|&s| circle_error(s)).collect::<Result<Vec<_>, _>>()?;
    let mut ratios = Vec::new();
    for (i, (&s, &e)) in c.steps.iter().zip(&errors).enumerate() {
        let ratio = if i == 0 { String::new() } else {
            let r = errors[i - 1] / e;
            ratios.push(r);
            f(r)
        };
        t.push(vec![u(s), f(e), ratio]);
    }
    let mut checks = vec![Check::at_most("final global error", *errors.last().expect("steps non-empty"), c.final_tol)];
    if let (Some(lo), Some(hi)) = (ratios.iter().cloned().reduce(f64::min), ratios.iter().cloned().reduce(f64::max)) {
        checks.push(Check::at_least("min error ratio per doubling", lo, c.ratio_min));
        checks.push(Check::at_most("max error ratio per doubling", hi, c.ratio_max));
    }
    Ok(Report { tables: vec![t], checks })
}

fn run_twopoint(cfg: &RunConfig) -> Result<Report, Error> {
    let c = &cfg.twopoint;
    let pairs = random_pairs(&c.lattice, c.pairs, c.min_separation, cfg.run.seed);
    if pairs.len() < c.pairs {
        return Err(Error::Config("lattice too small for the requested pairs".into()));
    }
    let mut t = Table::new("twopoint", &["seed", "i", "j", "mc_re", "mc_im", "stderr", "exact", "z"]);
    let (mut covered, mut total) = (0usize, 0usize);
    for k in 0..c.seeds {
        let seed = cfg.run.seed.wrapping_add(k);
        let mcfg = McConfig::new(c.samples, seed).with_workers(cfg.run.workers);
        let res = free_field_twopoint::<f64>(&c.lattice, c.mass, &pairs, &mcfg)?;
        for ((&(i, j), est), &x) in res.pairs.iter().zip(&res.mc).zip(&res.exact) {
            let z = est.z_score(Complex::new(x, 0.0));
            covered += usize::from(z <= c.sigmas);
            total += 1;
            t.push(vec![u(seed), u(i), u(j), f(est.mean.re), f(est.mean.im), f(est.stderr), f(x), f(z)]);
        }
    }
    Ok(Report {
        tables: vec![t],
        checks: vec![Check::at_least("fraction within sigmas", covered as f64 / total as f64, c.coverage)],
    })
}

/// Runs a validated subcommand and returns its report.
pub fn execute(cmd: Subcommand, cfg: &RunConfig) -> Result<Report, Error> {
    let job = || match cmd {
        Subcommand::Normcheck => run_normcheck(cfg),
        Subcommand::Ortho => run_ortho(cfg),
        Subcommand::Definition3 => run_definition3(cfg),
        Subcommand::Cov => run_cov(cfg),
        Subcommand::Sd => run_sd(cfg),
        Subcommand::Effective => run_effective(cfg),
        Subcommand::Develop => run_develop(cfg),
        Subcommand::Twopoint => run_twopoint(cfg),
    };
    crate::mc::with_workers(cfg.run.workers, job)?
}

fn write_outputs(out: &Path, cmd: Subcommand, cfg: &RunConfig, report: &Report) -> Result<(), String> {
    fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let mut files = Vec::new();
    for t in &report.tables {
        let bytes = t.to_bytes().map_err(|e| e.to_string())?;
        let path = out.join(format!("{}.csv", t.name));
        fs::write(&path, &bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        files.push(serde_json::json!({
            "file": format!("{}.csv", t.name),
            "sha256": hex::encode(Sha256::digest(&bytes)),
            "rows": t.rows.len(),
        }));
    }
    let manifest = serde_json::json!({
        "subcommand": cmd.name(),
        "config_hash": cfg.hash(),
        "seed": cfg.run.seed,
        "config": cfg,
        "outputs": files,
        "checks": report.checks,
        "pass": report.passed(),
    });
    let path = out.join(format!("{}.manifest.json", cmd.name()));
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?;
    fs::write(&path, text + "\n").map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Loads and resolves the configuration for `args`.
pub fn resolve(args: &Args) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            if p.extension().is_some_and(|e| e == "json") {
                RunConfig::from_manifest(&text)?
            } else {
                RunConfig::parse(&text)?
            }
        }
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.run.workers = w;
    }
    cfg.validate(args.command)?;
    Ok(cfg)
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let report = match execute(args.command, &cfg) {
        Ok(r) => r,
        Err(Error::Config(msg)) => {
            eprintln!("config error: {msg}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("runtime failure: {e}");
            return EXIT_RUNTIME;
        }
    };
    if let Err(e) = write_outputs(&args.out, args.command, &cfg, &report) {
        eprintln!("runtime failure: {e}");
        return EXIT_RUNTIME;
    }
    for c in &report.checks {
        println!("{} {}: {:e} (tolerance {:e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        assert_eq!(cfg.hash(), RunConfig::parse(&text).unwrap().hash());
    }

    #[test]
    fn rejects_negative_samples_and_unknown_keys() {
        assert!(RunConfig::parse("[definition3]\nsamples = -5\n").is_err());
        assert!(RunConfig::parse("[ortho]\nwidth = 1.0\n").is_err());
    }

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(1, 4).len(), 5);
        assert_eq!(monomials(2, 4).len(), 15);
    }

    #[test]
    fn develop_report_passes() {
        let r = execute(Subcommand::Develop, &RunConfig::default()).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
    }
}
