use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Preset};
use super::output::{Dataset, Row};
use crate::dynamics::{
    build_liouvillian, schrodinger_evolve, solve_steady_state, steady_state, trajectory_average,
    Channel, TrajectorySimulator,
};
use crate::dynamics::steady::TAIL_LIMIT;
use crate::error::{Error, Result};
use crate::hilbert::{fock_number, StateVector, Tls};
use crate::model::{
    build_h_i, dressed, jc_eigensystem, omega_eff_jc, omega_eff_mollow, resonance_detuning_for,
    resonance_detuning_higher_for, resonant_transition, Branch, DressedData, EffectiveTwoLevel,
    ModelParams, Sign,
};
use crate::observables::{
    default_tau_grid, dressed_population, g_equal_time, normally_ordered_moment,
    photon_distribution, tau_min, BundleCorrelator,
};

/// Highest correlation order reported by steady-state presets.
const MAX_ORDER: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResonanceEntry {
    pub mu: u32,
    /// `+1`/`−1` for the two higher-order roots, `0` for the first-order one.
    pub sign: i8,
    pub delta_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Closed-form quantities at the configured parameter point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Derived {
    pub delta_sigma: f64,
    pub dressed: Option<DressedData>,
    pub effective_two_level: Option<EffectiveTwoLevel>,
    pub omega_eff_jc: Option<f64>,
    pub resonances: Vec<ResonanceEntry>,
    pub notes: Vec<String>,
}

pub fn derived_quantities(cfg: &ExperimentConfig) -> Result<Derived> {
    let p = cfg.params()?;
    let mut notes = Vec::new();
    fn keep<T>(notes: &mut Vec<String>, what: &str, r: Result<T>) -> Option<T> {
        r.map_err(|e| notes.push(format!("{what}: {e}"))).ok()
    }
    let dressed = keep(&mut notes, "dressed states", dressed(&p));
    let effective_two_level = keep(&mut notes, "effective two-level model", omega_eff_mollow(&p));
    let omega_eff_jc = keep(&mut notes, "JC-regime effective frequency", omega_eff_jc(&p));
    Ok(Derived {
        delta_sigma: p.delta_sigma(),
        dressed,
        effective_two_level,
        omega_eff_jc,
        resonances: resonance_table(&p, cfg.scan.mu_max),
        notes,
    })
}

fn resonance_table(p: &ModelParams, mu_max: u32) -> Vec<ResonanceEntry> {
    let entry = |mu, sign, r: Result<f64>| match r {
        Ok(v) => ResonanceEntry { mu, sign, delta_a: Some(v), error: None },
        Err(e) => ResonanceEntry { mu, sign, delta_a: None, error: Some(e.to_string()) },
    };
    let mut out = vec![entry(1, 0, resonance_detuning_for(p.n, p.delta_n, p.omega_l))];
    for mu in 2..=mu_max {
        for (s, sign) in [(1, Sign::Plus), (-1, Sign::Minus)] {
            out.push(entry(mu, s, resonance_detuning_higher_for(p.n, p.delta_n, p.omega_l, mu, sign)));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationReport {
    pub n_max: usize,
    pub limit: f64,
    /// Largest top-level population met during the run.
    pub max_tail: f64,
    /// Dataset rows flagged because of the tail check.
    pub flagged_rows: usize,
    pub ok: bool,
}

impl TruncationReport {
    fn new(n_max: usize) -> Self {
        Self { n_max, limit: TAIL_LIMIT, max_tail: 0.0, flagged_rows: 0, ok: true }
    }

    fn observe(&mut self, tail: f64) {
        self.max_tail = self.max_tail.max(tail);
        if tail >= TAIL_LIMIT {
            self.ok = false;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedReport {
    pub base_seed: u64,
    pub n_trajectories: usize,
    pub rule: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Units {
    pub rate: &'static str,
    pub time: &'static str,
}

/// Contents of the JSON sidecar written next to the datasets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub preset: Preset,
    pub units: Units,
    pub config: ExperimentConfig,
    /// The resolved configuration; feeding it back reproduces the run.
    pub config_toml: String,
    pub derived: Derived,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<SeedReport>,
    pub truncation: TruncationReport,
    pub datasets: Vec<String>,
    pub labels: BTreeMap<String, String>,
}

pub struct RunOutput {
    pub datasets: Vec<Dataset>,
    pub metadata: Metadata,
}

/// Runs the configured preset in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let preset = cfg
        .preset
        .ok_or_else(|| Error::Config("no preset selected".into()))?;
    let cfg = cfg.clone().for_preset(preset)?;
    let p = cfg.params()?;
    let mut trunc = TruncationReport::new(p.dims.n_max());
    let mut labels = BTreeMap::new();
    let mut seeds = None;
    info!("running preset {preset}");
    let datasets = match preset {
        Preset::Superrabi => vec![superrabi(&cfg, &p, &mut trunc)?],
        Preset::Steadyscan => vec![sweep_with_report(&cfg, &mut trunc)?],
        Preset::Custom => custom(&p, &mut trunc)?,
        Preset::Trajectory => {
            seeds = Some(SeedReport {
                base_seed: cfg.seeds.base_seed,
                n_trajectories: cfg.seeds.n_trajectories,
                rule: "seed_i = base_seed + i",
            });
            labels.insert("jumps.channel".into(), "0 = cavity, 1 = two-level system".into());
            trajectory(&cfg, &p, &mut trunc)?
        }
        Preset::G2tau => {
            labels.insert(
                "g2_summary.g_at_tau_min".into(),
                "approximate zero-delay value g_N(tau_min)".into(),
            );
            labels.insert("g2_summary.g_limit".into(), "long-delay limit, exactly 1".into());
            g2tau(&cfg, &p, &mut trunc)?
        }
        Preset::Jcregime => jcregime(&p, &mut trunc)?,
        Preset::Resonances => vec![resonances(&cfg, &p)],
    };
    let metadata = Metadata {
        tool: "bundlejc",
        version: env!("CARGO_PKG_VERSION"),
        preset,
        units: Units {
            rate: preset.rate_unit(),
            time: if preset.is_dissipative() { "1/kappa" } else { "1/J" },
        },
        config_toml: cfg.to_toml()?,
        derived: derived_quantities(&cfg)?,
        config: cfg,
        seeds,
        truncation: trunc,
        datasets: datasets.iter().map(|d| d.name.clone()).collect(),
        labels,
    };
    Ok(RunOutput { datasets, metadata })
}

/// Runs the preset and writes datasets, `metadata.json` and
/// `resolved_config.toml` into `out_dir`.
pub fn run_preset(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let run = execute(cfg)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for d in &run.datasets {
        written.extend(d.write(out_dir, &run.metadata.config.output.formats)?);
    }
    let meta = out_dir.join("metadata.json");
    fs::write(&meta, serde_json::to_string_pretty(&run.metadata)?)?;
    written.push(meta);
    let resolved = out_dir.join("resolved_config.toml");
    fs::write(&resolved, &run.metadata.config_toml)?;
    written.push(resolved);
    if run.metadata.truncation.flagged_rows > 0 {
        warn!(
            "{} rows flagged by the truncation check (max tail {:e})",
            run.metadata.truncation.flagged_rows, run.metadata.truncation.max_tail
        );
    }
    Ok(written)
}

fn time_grid(t_final: f64, sample_dt: f64) -> Vec<f64> {
    let n = (t_final / sample_dt + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * sample_dt).collect()
}

fn superrabi(cfg: &ExperimentConfig, p: &ModelParams, trunc: &mut TruncationReport) -> Result<Dataset> {
    let dd = dressed(p)?;
    let (b0, b1) = resonant_transition(p)?.branches();
    let w = omega_eff_mollow(p)?.omega_eff.abs();
    let n = p.n as usize;
    let psi0 = dd.state(p.dims, 0, b0)?;
    let target = dd.state(p.dims, n, b1)?;
    let grid = time_grid(cfg.integrator.t_final.unwrap(), cfg.integrator.sample_dt.unwrap());
    let states = schrodinger_evolve(&build_h_i(p)?, &psi0, &grid, &cfg.integrator.integrator())?;
    let mut d = Dataset::new(
        "superrabi",
        vec![
            "t".into(),
            format!("P_0_{}", branch_name(b0)),
            format!("P_{n}_{}", branch_name(b1)),
            "analytic".into(),
        ],
    );
    for (t, s) in grid.iter().zip(&states) {
        let tail = photon_distribution(s)[p.dims.n_max()];
        trunc.observe(tail);
        d.push(Row::ok(vec![
            *t,
            psi0.inner(s)?.norm_sqr(),
            target.inner(s)?.norm_sqr(),
            (w * t).sin().powi(2),
        ]));
    }
    if !trunc.ok {
        return Err(Error::Truncation { tail: trunc.max_tail, n_max: p.dims.n_max() });
    }
    Ok(d)
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Plus => "plus",
        Branch::Minus => "minus",
    }
}

fn steady_columns(variable: &str, n_max: usize) -> Vec<String> {
    let mut c = vec![variable.to_string()];
    c.extend((0..=n_max).map(|m| format!("P_{m}")));
    c.extend((2..=MAX_ORDER).map(|l| format!("g{l}")));
    c.push("mean_n".into());
    c.push("tail".into());
    c
}

/// Steady-state observables at one parameter point; failures become a
/// flagged row.
fn steady_row(x: f64, p: &ModelParams) -> Row {
    let width = 1 + (p.dims.n_max() + 1) + (MAX_ORDER - 1) + 2;
    let ss = match build_liouvillian(p).and_then(|l| solve_steady_state(&l)) {
        Ok(ss) => ss,
        Err(e) => return Row::failed(width, e.code()),
    };
    let mut values = vec![x];
    values.extend(photon_distribution(&ss.rho));
    let mut status = if ss.truncation_ok() { "ok" } else { "truncation" };
    for l in 2..=MAX_ORDER {
        match g_equal_time(&ss.rho, l) {
            Ok(g) => values.push(g),
            Err(e) => {
                values.push(f64::NAN);
                status = e.code();
            }
        }
    }
    values.push(normally_ordered_moment(&ss.rho, 1));
    values.push(ss.tail);
    Row { values, status: status.into() }
}

/// Steady-state scan over the configured grid. Rows come back in grid order
/// whatever the thread scheduling.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Dataset> {
    let p = cfg.params()?;
    let var = cfg.scan.variable;
    let grid = cfg.scan.grid();
    let rows: Vec<Row> = grid.par_iter().map(|&x| steady_row(x, &var.apply(p, x))).collect();
    let mut d = Dataset::new("steadyscan", steady_columns(var.name(), p.dims.n_max()));
    for r in rows {
        d.push(r);
    }
    Ok(d)
}

fn sweep_with_report(cfg: &ExperimentConfig, trunc: &mut TruncationReport) -> Result<Dataset> {
    let d = sweep(cfg)?;
    if let Some(tails) = d.column("tail") {
        for (t, r) in tails.iter().zip(&d.rows) {
            if t.is_finite() {
                trunc.observe(*t);
            }
            if r.status == "truncation" {
                trunc.flagged_rows += 1;
            }
        }
    }
    Ok(d)
}

fn custom(p: &ModelParams, trunc: &mut TruncationReport) -> Result<Vec<Dataset>> {
    let l = build_liouvillian(p)?;
    let ss = solve_steady_state(&l)?;
    trunc.observe(ss.tail);
    if !ss.truncation_ok() {
        return Err(Error::Truncation { tail: ss.tail, n_max: p.dims.n_max() });
    }
    let mut dist = Dataset::new("photon_distribution", vec!["m".into(), "P_m".into()]);
    for (m, v) in photon_distribution(&ss.rho).into_iter().enumerate() {
        dist.push(Row::ok(vec![m as f64, v]));
    }
    let mut summary = Dataset::new("steady_summary", steady_columns("delta_a", p.dims.n_max()));
    summary.push(steady_row(p.delta_a, p));
    let mut out = vec![dist, summary];
    if p.omega_l != 0.0 {
        let mut dressed_pops =
            Dataset::new("dressed_populations", vec!["m".into(), "P_plus".into(), "P_minus".into()]);
        for m in 0..=p.dims.n_max() {
            dressed_pops.push(Row::ok(vec![
                m as f64,
                dressed_population(&ss.rho, p, m, Branch::Plus)?,
                dressed_population(&ss.rho, p, m, Branch::Minus)?,
            ]));
        }
        out.push(dressed_pops);
    }
    Ok(out)
}

fn trajectory(cfg: &ExperimentConfig, p: &ModelParams, trunc: &mut TruncationReport) -> Result<Vec<Dataset>> {
    let l = build_liouvillian(p)?;
    let t_final = cfg.integrator.t_final.unwrap();
    let sample_dt = cfg.integrator.sample_dt.unwrap();
    let step = cfg
        .integrator
        .dt
        .map(|dt| sample_dt / (sample_dt / dt).ceil())
        .unwrap_or_else(|| TrajectorySimulator::default_step(&l, sample_dt));
    let sim = TrajectorySimulator::new(&l, step)?;
    let psi0 = StateVector::basis(p.dims, 0, Tls::Ground)?;
    let records = sim.run_ensemble(&psi0, t_final, sample_dt, cfg.seeds.base_seed, cfg.seeds.n_trajectories)?;
    for r in &records {
        for s in &r.states {
            trunc.observe(photon_distribution(s)[p.dims.n_max()]);
        }
    }
    if !trunc.ok {
        return Err(Error::Truncation { tail: trunc.max_tail, n_max: p.dims.n_max() });
    }
    let avg = trajectory_average(&records, &fock_number(p.dims))?;
    let mut ens = Dataset::new("ensemble", vec!["t".into(), "mean_n".into(), "stderr_n".into()]);
    for k in 0..avg.times.len() {
        ens.push(Row::ok(vec![avg.times[k], avg.mean[k], avg.stderr[k]]));
    }

    let mut out = vec![ens];
    let first = &records[0];
    if p.omega_l != 0.0 {
        let n = p.n as usize;
        let mut cols = vec!["t".to_string(), "n".to_string()];
        let mut series = Vec::new();
        for m in 0..=n {
            for b in [Branch::Plus, Branch::Minus] {
                cols.push(format!("P_{m}_{}", branch_name(b)));
                series.push(first.dressed_populations(p, m, b)?);
            }
        }
        let number = fock_number(p.dims);
        let mut d = Dataset::new("trajectory_0", cols);
        for (k, t) in first.times.iter().enumerate() {
            let s = &first.states[k];
            let mut row = vec![*t, crate::hilbert::expectation(&number, s)?.re];
            row.extend(series.iter().map(|v| v[k]));
            d.push(Row::ok(row));
        }
        out.push(d);
    }

    let mut jumps = Dataset::new("jumps", vec!["trajectory".into(), "seed".into(), "time".into(), "channel".into()]);
    for (i, r) in records.iter().enumerate() {
        for j in &r.jumps {
            let ch = match j.channel {
                Channel::Cavity => 0.0,
                Channel::Tls => 1.0,
            };
            jumps.push(Row::ok(vec![i as f64, r.seed as f64, j.time, ch]));
        }
    }
    out.push(jumps);
    Ok(out)
}

fn g2tau(cfg: &ExperimentConfig, p: &ModelParams, trunc: &mut TruncationReport) -> Result<Vec<Dataset>> {
    let l = build_liouvillian(p)?;
    let ss = steady_state(&l).inspect_err(|e| {
        if let Error::Truncation { tail, .. } = e {
            trunc.observe(*tail);
        }
    })?;
    trunc.observe(ss.tail);
    let icfg = cfg.integrator.integrator();
    let bundles = cfg.scan.bundle_sizes.clone().unwrap_or_else(|| vec![1]);
    let mut summary = Dataset::new(
        "g2_summary",
        vec!["N".into(), "tau_min".into(), "g_at_tau_min".into(), "g_limit".into(), "g1_equal_time".into()],
    );
    let g_eq = g_equal_time(&ss.rho, 2)?;
    let mut out = Vec::new();
    for &n in &bundles {
        let corr = BundleCorrelator::new(&l, &ss.rho, n, p.kappa)?;
        let taus = default_tau_grid(n, p.kappa)?;
        let curve = corr.curve(&taus, &icfg)?;
        let mut d = Dataset::new(format!("g2_N{n}"), vec!["tau".into(), "g".into()]);
        for (t, v) in curve.abscissa.iter().zip(&curve.values) {
            d.push(match v {
                Some(v) => Row::ok(vec![*t, *v]),
                None => Row { values: vec![*t, f64::NAN], status: "masked".into() },
            });
        }
        let tm = if n == 1 { 0.0 } else { tau_min(n, p.kappa)? };
        let at_min = corr.evaluate(&[tm], &icfg)?[0];
        summary.push(Row::ok(vec![n as f64, tm, at_min, 1.0, g_eq]));
        out.push(d);
    }
    out.insert(0, summary);
    Ok(out)
}

fn jcregime(p: &ModelParams, trunc: &mut TruncationReport) -> Result<Vec<Dataset>> {
    let sys = jc_eigensystem(p)?;
    let mut levels = Dataset::new(
        "jc_levels",
        ["m", "E_plus", "E_minus", "C_plus", "C_minus", "Omega_m"].iter().map(|s| s.to_string()).collect(),
    );
    for d in &sys.doublets {
        levels.push(Row::ok(vec![d.m as f64, d.e_plus, d.e_minus, d.c_plus, d.c_minus, d.omega_m]));
    }
    let mut out = vec![levels];
    if p.kappa > 0.0 || p.gamma > 0.0 {
        let l = build_liouvillian(p)?;
        let ss = solve_steady_state(&l)?;
        trunc.observe(ss.tail);
        if !ss.truncation_ok() {
            return Err(Error::Truncation { tail: ss.tail, n_max: p.dims.n_max() });
        }
        let mut dist = Dataset::new("photon_distribution", vec!["m".into(), "P_m".into()]);
        for (m, v) in photon_distribution(&ss.rho).into_iter().enumerate() {
            dist.push(Row::ok(vec![m as f64, v]));
        }
        out.push(dist);
    }
    Ok(out)
}

fn resonances(cfg: &ExperimentConfig, p: &ModelParams) -> Dataset {
    let mut d = Dataset::new("resonances", vec!["mu".into(), "sign".into(), "delta_a".into()]);
    for e in resonance_table(p, cfg.scan.mu_max) {
        d.push(match e.delta_a {
            Some(v) => Row::ok(vec![e.mu as f64, e.sign as f64, v]),
            None => Row { values: vec![e.mu as f64, e.sign as f64, f64::NAN], status: "no_resonance".into() },
        });
    }
    d
}
