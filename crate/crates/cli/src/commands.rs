//! Subcommand implementations. Flags take precedence over the config file,
//! which takes precedence over built-in defaults.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qdswap_core::cascade::{coherence_factor_dephased, gate_acceptance, pair_density_matrix};
use qdswap_core::device_stats::{
    fit_gaussian, resonance_probability, resonance_sweep, GaussianSpec, ParamDistributions,
};
use qdswap_core::mc::{
    run_with_samples, summarize, FidelityHistogram, McConfig, DEFAULT_BINS, DEFAULT_SAMPLES,
};
use qdswap_core::polarization::{bell_state, fidelity};
use qdswap_core::scenarios::scenario_preset;
use qdswap_core::swap::swap_fidelity_analytic;
use qdswap_core::tomography::{
    forward_counts, gate_sweep, reconstruct, CoincidenceRecord, MeasurementBasis, PairSource,
    Projector,
};
use qdswap_core::{BellKind, DensityMatrix, QdParams};

use crate::config::{fitted_spec, Grid, MonteCarloSection, RunConfig};
use crate::{
    CliError, FitArgs, McArgs, PairArgs, ResonanceArgs, SwapArgs, TomographyArgs, THREADS_ENV,
};

const DEFAULT_SHOTS: u64 = 1_000_000;
const DEFAULT_TUNE_NM: f64 = 1.0;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    let f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

/// File at `path`, or the given stdout.
fn sink<'a>(
    path: &Option<PathBuf>,
    stdout: &'a mut dyn Write,
) -> Result<Box<dyn Write + 'a>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(stdout),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn seed_required(cmd: &str) -> CliError {
    CliError::Config(format!("{cmd}: a seed is required (--seed or config)"))
}

pub fn pair_fidelity(
    a: &PairArgs,
    cfg: &RunConfig,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let sec = cfg.pair.clone().unwrap_or_default();
    let params = QdParams {
        fss_uev: a.fss.or(sec.fss_uev).unwrap_or(0.0),
        t1x_ns: a.t1x.or(sec.t1x_ns).unwrap_or(QdParams::default().t1x_ns),
        ..QdParams::default()
    };
    params.validate()?;
    let t2star = a.t2star.or(sec.t2star_ns);
    let gate = a.gate.or(sec.gate_ns);
    let target = a.target.or(sec.target).unwrap_or(BellKind::PhiPlus);
    let rho = pair_density_matrix(params.fss_uev, params.t1x_ns, gate, t2star)?;
    let f = fidelity(&rho, &bell_state(target))?;
    let c = coherence_factor_dephased(params.fss_uev, params.t1x_ns, gate, t2star)?;
    let acc = gate_acceptance(params.t1x_ns, gate);
    if a.csv {
        writeln!(
            stdout,
            "fss_uev,t1x_ns,t2star_ns,gate_ns,target,fidelity,coherence_abs,acceptance"
        )?;
        writeln!(
            stdout,
            "{},{},{},{},{},{},{},{}",
            params.fss_uev,
            params.t1x_ns,
            opt(t2star),
            opt(gate),
            target,
            f,
            c.norm(),
            acc
        )?;
    } else {
        writeln!(stdout, "target         {target}")?;
        writeln!(stdout, "fidelity       {f:.6}")?;
        writeln!(stdout, "coherence_abs  {:.6}", c.norm())?;
        writeln!(stdout, "acceptance     {acc:.6}")?;
    }
    Ok(())
}

pub fn swap(a: &SwapArgs, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let sec = cfg.swap.clone().unwrap_or_default();
    let apply = |base: QdParams, fss: Option<f64>| QdParams {
        fss_uev: fss.unwrap_or(base.fss_uev),
        t1x_ns: a.t1x.unwrap_or(base.t1x_ns),
        t1xx_ns: a.t1xx.unwrap_or(base.t1xx_ns),
        t2star_ns: a.t2star.unwrap_or(base.t2star_ns),
        ..base
    };
    let zero_fss = QdParams {
        fss_uev: 0.0,
        ..QdParams::default()
    };
    let pa = apply(sec.source_a.unwrap_or(zero_fss), a.fss_a);
    let pb = apply(sec.source_b.unwrap_or(zero_fss), a.fss_b);
    pa.validate()?;
    pb.validate()?;
    let mut model = sec.model.unwrap_or_default();
    model.ideal_bsm |= a.ideal_bsm;
    if a.no_cascade {
        model.include_cascade = false;
    }
    let detuning = a.detuning.or(sec.detuning_uev).unwrap_or(0.0);
    let grid = a.grid.or(cfg.sweep.as_ref().and_then(|s| s.fss_uev));
    if let Some(grid) = grid {
        let values = grid.values();
        let mut w = csv::Writer::from_writer(sink(&a.out, stdout)?);
        w.write_record(["fss_a_uev", "fss_b_uev", "fidelity"])?;
        for &sa in &values {
            for &sb in &values {
                let qa = QdParams { fss_uev: sa, ..pa };
                let qb = QdParams { fss_uev: sb, ..pb };
                let f = swap_fidelity_analytic(&qa, &qb, detuning, &model)?;
                w.write_record([sa.to_string(), sb.to_string(), f.to_string()])?;
            }
        }
        w.flush()?;
        return Ok(());
    }
    let f = swap_fidelity_analytic(&pa, &pb, detuning, &model)?;
    let mut out = sink(&a.out, stdout)?;
    if a.csv {
        writeln!(out, "fss_a_uev,fss_b_uev,detuning_uev,fidelity")?;
        writeln!(out, "{},{},{},{}", pa.fss_uev, pb.fss_uev, detuning, f)?;
    } else {
        writeln!(out, "fidelity  {f:.6}")?;
    }
    out.flush()?;
    Ok(())
}

/// Worker count from the flag, capped by `QDSWAP_THREADS`.
pub fn effective_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let env = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| {
                    CliError::Config(format!("{THREADS_ENV}='{v}' is not a positive integer"))
                })?,
        ),
        _ => None,
    };
    if flag == Some(0) {
        return Err(CliError::Config("--threads must be >= 1".into()));
    }
    Ok(match (flag, env) {
        (Some(f), Some(e)) => Some(f.min(e)),
        (f, e) => f.or(e),
    })
}

pub fn build_mc_config(a: &McArgs, sec: &MonteCarloSection) -> Result<McConfig, CliError> {
    let seed = a
        .seed
        .or(sec.seed)
        .ok_or_else(|| seed_required("montecarlo"))?;
    let scenario = match (a.scenario, &sec.scenario, sec.scenario_id) {
        (Some(id), _, _) => scenario_preset(id)?,
        (None, Some(s), _) => s.clone(),
        (None, None, Some(id)) => scenario_preset(id)?,
        (None, None, None) => {
            return Err(CliError::Config(
                "montecarlo: a scenario is required (--scenario or config)".into(),
            ))
        }
    };
    let mut swap = sec.model.unwrap_or_default();
    swap.ideal_bsm |= a.ideal_bsm;
    let cfg = McConfig {
        n_samples: a.samples.or(sec.n_samples).unwrap_or(DEFAULT_SAMPLES),
        seed,
        scenario,
        dists_a: sec.dists_a.unwrap_or_default(),
        dists_b: sec.dists_b.unwrap_or_default(),
        bins: a.bins.or(sec.bins).unwrap_or(DEFAULT_BINS),
        swap,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn summary_text(h: &FidelityHistogram) -> String {
    let s = &h.summary;
    let mut t = String::new();
    let _ = writeln!(t, "# qdswap montecarlo summary");
    let _ = writeln!(t, "version          {}", h.provenance.version);
    let _ = writeln!(t, "samples          {}", s.samples);
    let _ = writeln!(t, "bins             {}", h.bins());
    let _ = writeln!(t, "mean             {}", s.mean);
    let _ = writeln!(t, "median           {}", s.median);
    let _ = writeln!(t, "std_dev          {}", s.std_dev);
    let _ = writeln!(t, "min              {}", s.min);
    let _ = writeln!(t, "max              {}", s.max);
    for (p, v) in s.percentiles {
        let _ = writeln!(t, "{:<17}{}", format!("p{p}"), v);
    }
    for (lo, hi) in [(0.5, 0.75), (0.75, 0.9), (0.9, 0.99), (0.99, 1.0)] {
        let _ = writeln!(
            t,
            "{:<17}{}",
            format!("mass[{lo},{hi}]"),
            summarize(h, lo, hi)
        );
    }
    let _ = writeln!(t, "# config");
    let _ = writeln!(
        t,
        "{}",
        serde_json::to_string_pretty(&h.provenance.config).expect("config serializes")
    );
    t
}

fn default_summary_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".summary.txt");
    PathBuf::from(name)
}

pub fn montecarlo(a: &McArgs, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let sec = cfg.montecarlo.clone().unwrap_or_default();
    let mc = build_mc_config(a, &sec)?;
    let threads = effective_threads(a.threads)?;
    let (hist, samples) = run_with_samples(&mc, threads)?;
    let text = summary_text(&hist);
    {
        let mut w = csv::Writer::from_writer(sink(&a.out, stdout)?);
        w.write_record(["bin_lo", "bin_hi", "density"])?;
        for (lo, hi, d) in hist.rows() {
            w.write_record([lo.to_string(), hi.to_string(), d.to_string()])?;
        }
        w.flush()?;
    }
    let summary_path = a
        .summary
        .clone()
        .or_else(|| a.out.as_deref().map(default_summary_path));
    if let Some(p) = &summary_path {
        let mut f = create(p)?;
        f.write_all(text.as_bytes())?;
        f.flush()?;
    }
    if a.out.is_some() {
        stdout.write_all(text.as_bytes())?;
    }
    if let Some(p) = &a.samples_out {
        let mut w = csv::Writer::from_writer(create(p)?);
        w.write_record(["index", "fidelity"])?;
        for (i, f) in samples.iter().enumerate() {
            w.write_record([i.to_string(), f.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn resonance(
    a: &ResonanceArgs,
    cfg: &RunConfig,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let sweep_sec = cfg.sweep.clone().unwrap_or_default();
    if a.sweep {
        let dmu = a.dmu.or(sweep_sec.delta_mu_nm).unwrap_or(Grid {
            start: 0.0,
            stop: 10.0,
            points: 101,
        });
        let sigma = a.sigma.or(sweep_sec.sigma_nm).unwrap_or(Grid {
            start: 0.5,
            stop: 5.0,
            points: 10,
        });
        let tune = a.tune.or(sweep_sec.tune_nm).unwrap_or(DEFAULT_TUNE_NM);
        let rows = resonance_sweep(&dmu.values(), &sigma.values(), tune)?;
        let mut w = csv::Writer::from_writer(sink(&a.out, stdout)?);
        w.write_record(["delta_mu_nm", "sigma_nm", "probability"])?;
        for (d, s, p) in rows {
            w.write_record([d.to_string(), s.to_string(), p.to_string()])?;
        }
        w.flush()?;
        return Ok(());
    }
    let sec = cfg.resonance.clone().unwrap_or_default();
    let pop = ParamDistributions::default().wavelength_x_nm;
    let spec_a = GaussianSpec::new(
        a.mu_a.or(sec.mu_a_nm).unwrap_or(pop.mu),
        a.sigma_a.or(sec.sigma_a_nm).unwrap_or(pop.sigma),
    );
    let spec_b = GaussianSpec::new(
        a.mu_b.or(sec.mu_b_nm).unwrap_or(pop.mu),
        a.sigma_b.or(sec.sigma_b_nm).unwrap_or(pop.sigma),
    );
    let tune_a = a.tune_a.or(sec.tune_a_nm).unwrap_or(DEFAULT_TUNE_NM);
    let tune_b = a.tune_b.or(sec.tune_b_nm).unwrap_or(DEFAULT_TUNE_NM);
    let p = resonance_probability(&spec_a, &spec_b, tune_a, tune_b)?;
    let mut out = sink(&a.out, stdout)?;
    writeln!(out, "probability  {p}")?;
    out.flush()?;
    Ok(())
}

const PARAM_COLUMNS: [&str; 5] = [
    "wavelength_x_nm",
    "fss_uev",
    "t1x_ns",
    "t1xx_ns",
    "t2star_ns",
];

/// Fits each CSV column and emits a config whose `montecarlo` section uses
/// the fitted populations for both devices. Columns not present keep their
/// defaults.
pub fn fit(a: &FitArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&a.input)
        .map_err(|e| CliError::Config(format!("{}: {e}", a.input.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Config(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    for h in &headers {
        if !PARAM_COLUMNS.contains(&h.as_str()) {
            return Err(CliError::Config(format!(
                "unknown column '{h}'; expected any of {}",
                PARAM_COLUMNS.join(", ")
            )));
        }
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
        for (i, field) in rec.iter().enumerate() {
            if field.is_empty() {
                continue;
            }
            let x: f64 = field.parse().map_err(|_| {
                CliError::Config(format!("line {}: '{field}' is not a number", line + 2))
            })?;
            columns[i].push(x);
        }
    }
    let mut d = ParamDistributions::default();
    for (name, values) in headers.iter().zip(&columns) {
        let fit = fit_gaussian(values)?;
        let spec = fitted_spec(name, fit.spec.mu, fit.spec.sigma);
        match name.as_str() {
            "wavelength_x_nm" => d.wavelength_x_nm = spec,
            "fss_uev" => d.fss_uev = spec,
            "t1x_ns" => d.t1x_ns = spec,
            "t1xx_ns" => d.t1xx_ns = spec,
            _ => d.t2star_ns = spec,
        }
    }
    d.validate()?;
    let cfg = RunConfig {
        montecarlo: Some(MonteCarloSection {
            dists_a: Some(d),
            dists_b: Some(d),
            ..Default::default()
        }),
        ..Default::default()
    };
    let mut out = sink(&a.out, stdout)?;
    writeln!(out, "{}", cfg.to_json())?;
    out.flush()?;
    Ok(())
}

pub fn write_counts<W: Write>(w: W, records: &[CoincidenceRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["basis_label", "counts", "gate_ns"])?;
    for r in records {
        w.write_record([r.basis.to_string(), r.counts.to_string(), opt(r.gate_ns)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_counts(path: &Path) -> Result<Vec<CoincidenceRecord>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let basis: Projector = field(0).parse()?;
        let counts: f64 = field(1)
            .parse()
            .map_err(|_| CliError::Config(format!("counts '{}' is not a number", field(1))))?;
        let gate_ns = match field(2) {
            "" => None,
            g => Some(
                g.parse::<f64>()
                    .map_err(|_| CliError::Config(format!("gate '{g}' is not a number")))?,
            ),
        };
        out.push(CoincidenceRecord {
            basis,
            expected_rate: counts,
            counts,
            gate_ns,
        });
    }
    Ok(out)
}

pub fn write_matrix<W: Write>(w: W, rho: &DensityMatrix) -> Result<(), CliError> {
    const LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["part", "row", "HH", "HV", "VH", "VV"])?;
    for (part, take) in [("re", 0), ("im", 1)] {
        for (i, label) in LABELS.iter().enumerate() {
            let mut row = vec![part.to_string(), label.to_string()];
            for j in 0..4 {
                let z = rho.entry(i, j);
                row.push(if take == 0 { z.re } else { z.im }.to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn tomography(
    a: &TomographyArgs,
    cfg: &RunConfig,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let sec = cfg.tomography.clone().unwrap_or_default();
    let source = PairSource {
        fss_uev: a.fss.or(sec.fss_uev).unwrap_or(0.0),
        t1x_ns: a.t1x.or(sec.t1x_ns).unwrap_or(QdParams::default().t1x_ns),
        t2star_ns: a.t2star.or(sec.t2star_ns),
    };
    let gate = a.gate.or(sec.gate_ns);
    let shots = a.shots.or(sec.shots).unwrap_or(DEFAULT_SHOTS);
    let noise = a.noise || sec.noise.unwrap_or(false);
    let seed = a.seed.or(sec.seed);
    let seed = match (noise, seed) {
        (true, None) => return Err(seed_required("tomography --noise")),
        (_, s) => s.unwrap_or(0),
    };
    let basis = if a.full_basis {
        MeasurementBasis::Full36
    } else {
        sec.basis.unwrap_or_default()
    };
    let target = a.target.unwrap_or(BellKind::PhiPlus);

    let sweep = a
        .gate_sweep
        .clone()
        .or(cfg.sweep.as_ref().and_then(|s| s.gates_ns.clone()));
    if let Some(gates) = sweep {
        if let Some(bad) = gates.iter().find(|g| g.is_nan() || **g <= 0.0) {
            return Err(CliError::Config(format!(
                "gate windows must be > 0, got {bad}"
            )));
        }
        let gates: Vec<Option<f64>> = gates.into_iter().map(Some).collect();
        let pts = gate_sweep(&source, &gates, shots, noise, seed, basis, target)?;
        let mut w = csv::Writer::from_writer(sink(&a.out, stdout)?);
        w.write_record(["gate_ns", "fidelity", "accepted_counts"])?;
        for p in pts {
            w.write_record([
                opt(p.gate_ns),
                p.fidelity.to_string(),
                p.accepted_counts.to_string(),
            ])?;
        }
        w.flush()?;
        return Ok(());
    }

    let records = match &a.counts_in {
        Some(p) => read_counts(p)?,
        None => forward_counts(&source, gate, shots, noise, seed, basis)?,
    };
    if let Some(p) = &a.counts_out {
        write_counts(create(p)?, &records)?;
    }
    let rec = reconstruct(&records)?;
    if let Some(p) = &a.matrix_out {
        write_matrix(create(p)?, &rec.rho)?;
    }
    let total: f64 = records.iter().map(|r| r.counts).sum();
    let mut out = sink(&a.out, stdout)?;
    writeln!(out, "target              {target}")?;
    writeln!(out, "fidelity            {}", rec.fidelity(target)?)?;
    writeln!(out, "purity              {}", rec.rho.purity())?;
    writeln!(out, "min_raw_eigenvalue  {}", rec.min_raw_eigenvalue())?;
    writeln!(out, "total_counts        {total}")?;
    out.flush()?;
    Ok(())
}
