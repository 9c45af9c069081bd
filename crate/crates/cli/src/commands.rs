use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use mixnorm::experiments::{
    clt_statistic_samples, estimate_intersection_volume, fill_theta_moments, ks_distance, map_streams, pmb_check,
    threshold_sweep, KsThreshold, PmbTheorem, SweepConfig, CHUNK_SIZE,
};
use mixnorm::limits::{
    corollary_threshold, critical_volume_limit, limit_cdf, limit_law, Corollary, Regime, RegimeParams, Size,
};
use mixnorm::mixed_norm::{mixed_norm, mixed_norm_k, Matrix, MixedNormSpec, Tensor};
use mixnorm::samplers::{sample_mixed_ball, RandomStream};
use mixnorm::volumes::{
    mixed_ball_log_volume, mixed_ball_log_volume_k, mixed_ball_log_volume_k_explicit, normalized_radius_log,
};
use mixnorm::Exponent;
use serde::Serialize;
use serde_json::json;

use crate::cli::*;
use crate::output::{write_csv_preamble, Document, Format, SCHEMA_VERSION};
use crate::Outcome;

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Volume(a) => volume(a),
        Command::Norm(a) => norm(a),
        Command::Sample(a) => sample(a),
        Command::Threshold(a) => threshold(a),
        Command::Limit(a) => limit(a),
        Command::Critical(a) => critical(a),
        Command::Intersect(a) => intersect(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify(a),
    }
}

fn open_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(doc: &Document, out: &OutputArgs) -> anyhow::Result<()> {
    let mut w = open_output(out.output.as_deref())?;
    doc.write(out.format, &mut w)?;
    w.flush()?;
    Ok(())
}

fn e(v: f64) -> Exponent {
    Exponent::new(v).expect("default exponents are valid")
}

fn volume(a: VolumeArgs) -> anyhow::Result<Outcome> {
    let spec = match (&a.spec, a.m, a.n, a.p, a.q) {
        (Some(s), ..) => s.clone(),
        (None, Some(m), Some(n), Some(p), Some(q)) => MixedNormSpec::order_two(m as usize, n as usize, p, q)?,
        _ => bail!("volume needs either --spec or all of --m, --n, --p, --q"),
    };
    let log_volume = match (a.m, a.n, a.p, a.q) {
        (Some(m), Some(n), Some(p), Some(q)) if a.spec.is_none() => mixed_ball_log_volume(m, n, p, q)?.log_value(),
        _ => mixed_ball_log_volume_k(&spec).log_value(),
    };
    let log_radius = match (a.m, a.n, a.p, a.q) {
        (Some(m), Some(n), Some(p), Some(q)) if a.spec.is_none() => normalized_radius_log(m, n, p, q)?,
        _ => -log_volume / spec.total_dim() as f64,
    };
    let mut doc = Document::new("volume", &json!({ "spec": spec.to_string(), "log": a.log }))?;
    let mut row = if a.log {
        json!({ "log_volume": log_volume, "log_radius": log_radius })
    } else {
        json!({ "volume": log_volume.exp(), "radius": log_radius.exp() })
    };
    if a.verbose {
        let recursion = mixed_ball_log_volume_k(&spec).log_value();
        let explicit = mixed_ball_log_volume_k_explicit(&spec).log_value();
        let extra = row.as_object_mut().expect("row is an object");
        extra.insert("recursion_log_volume".into(), json!(recursion));
        extra.insert("explicit_log_volume".into(), json!(explicit));
        extra.insert("abs_difference".into(), json!((recursion - explicit).abs()));
    }
    doc.push(&row)?;
    emit(&doc, &a.out)?;
    Ok(Outcome::Pass)
}

fn parse_rows(text: &str, row_sep: char) -> anyhow::Result<Vec<Vec<f64>>> {
    text.split(row_sep)
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            line.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| anyhow!("bad matrix entry {v:?}")))
                .collect()
        })
        .collect()
}

fn norm(a: NormArgs) -> anyhow::Result<Outcome> {
    let (value, config) = if let Some(spec) = &a.spec {
        if a.matrix.is_some() || a.input.is_some() {
            bail!("--spec takes its entries from --values");
        }
        let tensor = Tensor::new(spec.dims(), a.values.clone())?;
        (mixed_norm_k(&tensor, spec)?, json!({ "spec": spec.to_string() }))
    } else {
        let (p, q) = a.p.zip(a.q).ok_or_else(|| anyhow!("norm needs --p and --q (or --spec)"))?;
        let rows = match (&a.matrix, &a.input) {
            (Some(m), None) => parse_rows(m, ';')?,
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                parse_rows(&text, '\n')?
            }
            _ => bail!("norm needs exactly one of --matrix or --input"),
        };
        let matrix = Matrix::from_rows(&rows)?;
        let config = json!({ "p": p, "q": q, "m": matrix.rows(), "n": matrix.cols() });
        (mixed_norm(&matrix, p, q), config)
    };
    let mut doc = Document::new("norm", &config)?;
    doc.push(&json!({ "norm": value }))?;
    emit(&doc, &a.out)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct SampleConfig {
    p: Exponent,
    q: Exponent,
    m: usize,
    n: usize,
    count: u64,
    #[serde(with = "mixnorm::experiments::seed_string")]
    seed: u64,
}

/// Streams draws in batches of `CHUNK_SIZE`; draw `i` uses stream
/// `child(i / CHUNK_SIZE).child(i % CHUNK_SIZE)` of the master seed.
fn sample(a: SampleArgs) -> anyhow::Result<Outcome> {
    if a.format == Format::Text {
        bail!("sample writes csv or json");
    }
    if a.m == 0 || a.n == 0 {
        bail!("m and n must be >= 1");
    }
    let config = SampleConfig { p: a.p, q: a.q, m: a.m, n: a.n, count: a.count, seed: a.run.seed };
    let config_value = serde_json::to_value(&config)?;
    let master = RandomStream::from_seed(a.run.seed);
    let mut w = open_output(a.output.as_deref())?;
    let csv_out = a.format == Format::Csv;
    match a.format {
        Format::Csv => {
            write_csv_preamble(&mut w, "sample", &config_value)?;
            let mut header = vec!["index".to_string(), "m".into(), "n".into()];
            for i in 1..=a.m {
                for j in 1..=a.n {
                    header.push(format!("x_{i}_{j}"));
                }
            }
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(&header)?;
            w.write_all(&writer.into_inner()?)?;
        }
        _ => {
            write!(w, "{{\"schema_version\":{SCHEMA_VERSION},\"command\":\"sample\",\"config\":{config_value},\"results\":[")?;
        }
    }
    let batches = a.count.div_ceil(CHUNK_SIZE as u64);
    for b in 0..batches {
        let start = b * CHUNK_SIZE as u64;
        let len = (a.count - start).min(CHUNK_SIZE as u64) as usize;
        let draws = map_streams(len, a.run.workers as usize, &master.child(b), |_, stream| {
            sample_mixed_ball(a.p, a.q, a.m, a.n, stream)
        })?;
        for (j, draw) in draws.into_iter().enumerate() {
            let index = start + j as u64;
            let values = draw?.values;
            if csv_out {
                let mut record = vec![index.to_string(), a.m.to_string(), a.n.to_string()];
                record.extend(values.data().iter().map(|v| json!(v).to_string()));
                let mut writer = csv::Writer::from_writer(Vec::new());
                writer.write_record(&record)?;
                w.write_all(&writer.into_inner()?)?;
            } else {
                let rows: Vec<&[f64]> = (0..values.rows()).map(|i| values.row(i)).collect();
                let record = json!({ "index": index, "m": a.m, "n": a.n, "values": rows });
                if index > 0 {
                    w.write_all(b",")?;
                }
                w.write_all(record.to_string().as_bytes())?;
            }
        }
    }
    if !csv_out {
        writeln!(w, "]}}")?;
    }
    w.flush()?;
    Ok(Outcome::Pass)
}

/// Fills `E‖Θ_1‖` from cone-measure draws when it is not exactly 1.
fn resolve_theta(params: &mut RegimeParams, theta: &ThetaArgs) -> anyhow::Result<()> {
    if params.fill_exact_theta() {
        return Ok(());
    }
    let Some(seed) = theta.seed else {
        bail!("E‖Θ_1‖ must be estimated for q1 != q2; pass --seed");
    };
    fill_theta_moments(params, &mut theta_stream(seed), theta.theta_samples)?;
    Ok(())
}

fn theta_stream(seed: u64) -> RandomStream {
    RandomStream::from_seed(seed).child(u64::MAX)
}

fn params_of(g: &Geometry, m: Size, n: Size) -> RegimeParams {
    RegimeParams::new(g.p1, g.q1, g.p2, g.q2, m, n)
}

fn threshold(a: ThresholdArgs) -> anyhow::Result<Outcome> {
    let mut params = params_of(&a.geometry, Size::Unbounded, a.n);
    if a.corollary == Corollary::Cor16 {
        resolve_theta(&mut params, &a.theta)?;
    }
    let est = corollary_threshold(a.corollary, &params)?;
    let mut doc = Document::new("threshold", &json!({ "corollary": a.corollary, "params": params }))?;
    doc.push(&json!({ "a": est.value, "a_stderr": est.stderr, "critical_t": 1.0 / est.value }))?;
    emit(&doc, &a.out)?;
    Ok(Outcome::Pass)
}

fn limit(a: LimitArgs) -> anyhow::Result<Outcome> {
    let mut params = params_of(&a.geometry, a.m, a.n);
    params.check(a.regime)?;
    if matches!(a.regime, Regime::ThmC | Regime::ThmEA) {
        resolve_theta(&mut params, &a.theta)?;
    }
    let law = limit_law(a.regime, &params)?;
    let mut doc = Document::new("limit", &json!({ "regime": a.regime, "params": params }))?;
    for &x in &a.x {
        doc.push(&json!({ "law": law.to_string(), "x": x, "cdf": limit_cdf(law, x) }))?;
    }
    emit(&doc, &a.out)?;
    Ok(Outcome::Pass)
}

fn critical(a: CriticalArgs) -> anyhow::Result<Outcome> {
    let mut params = params_of(&a.geometry, a.m, a.n);
    if a.corollary == Corollary::Cor16 {
        resolve_theta(&mut params, &a.theta)?;
    }
    let est = corollary_threshold(a.corollary, &params)?;
    let t = match (a.t, a.t_factor) {
        (Some(t), None) => t,
        (None, Some(f)) => f / est.value,
        _ => bail!("pass exactly one of --t and --t-factor"),
    };
    let value = critical_volume_limit(a.corollary, &params, t, a.big_m)?;
    let config = json!({ "corollary": a.corollary, "params": params, "t": t, "big_m": a.big_m });
    let mut doc = Document::new("critical", &config)?;
    doc.push(&json!({ "a": est.value, "a_stderr": est.stderr, "t": t, "t_times_a": t * est.value, "limit": value }))?;
    emit(&doc, &a.out)?;
    Ok(Outcome::Pass)
}

fn intersect(a: IntersectArgs) -> anyhow::Result<Outcome> {
    let g = &a.geometry;
    let master = RandomStream::from_seed(a.run.seed);
    let result =
        estimate_intersection_volume(g.p1, g.q1, g.p2, g.q2, a.m, a.n, a.t, a.samples, &master, a.run.workers as usize)?;
    let config = json!({
        "p1": g.p1, "q1": g.q1, "p2": g.p2, "q2": g.q2, "m": a.m, "n": a.n, "t": a.t,
        "samples": a.samples, "seed": a.run.seed.to_string(),
    });
    let mut doc = Document::new("intersect", &config)?;
    doc.push(&json!({ "m": a.m, "n": a.n, "t": a.t, "result": result }))?;
    emit(&doc, &a.out)?;
    Ok(Outcome::Pass)
}

fn sweep(a: SweepArgs) -> anyhow::Result<Outcome> {
    let g = &a.geometry;
    let config = SweepConfig {
        corollary: a.corollary,
        p1: g.p1,
        q1: g.q1,
        p2: g.p2,
        q2: g.q2,
        m_schedule: a.m.clone(),
        n_schedule: a.n.clone(),
        t_factors: a.t_factors.clone(),
        samples: a.samples,
        theta_samples: a.theta_samples,
        big_m: a.big_m,
    };
    let rows = threshold_sweep(&config, &RandomStream::from_seed(a.run.seed), a.run.workers as usize)?;
    let mut doc = Document::new("sweep", &json!({ "sweep": config, "seed": a.run.seed.to_string() }))?;
    for row in &rows {
        doc.push(row)?;
    }
    emit(&doc, &a.out)?;
    Ok(Outcome::Pass)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Target {
    Theorem(Regime),
    Corollary(Corollary),
    Pmb(PmbTheorem),
}

fn target(name: &str) -> anyhow::Result<Target> {
    match name.trim().to_ascii_lowercase().as_str() {
        "pmb-a" => Ok(Target::Pmb(PmbTheorem::RowNorms)),
        "pmb-b" => Ok(Target::Pmb(PmbTheorem::Entries)),
        other if other.starts_with("cor-") => Ok(Target::Corollary(other.parse()?)),
        other => Ok(Target::Theorem(other.parse()?)),
    }
}

/// Default `(p1, q1, p2, q2, m, n)` for each check; all satisfy its hypotheses.
fn verify_defaults(t: Target) -> ([f64; 4], usize, usize) {
    let inf = f64::INFINITY;
    match t {
        Target::Theorem(Regime::ThmC) => ([3.0, 1.0, 2.0, 2.0], 10_000, 3),
        Target::Theorem(Regime::ThmDA) => ([3.0, inf, 2.0, 2.0], 2, 65_536),
        Target::Theorem(Regime::ThmDB) => ([2.0, 2.0, 1.0, 2.0], 2, 1000),
        Target::Theorem(Regime::ThmDC) => ([inf, 2.0, 1.0, 2.0], 2, 4096),
        Target::Theorem(Regime::ThmEA) => ([3.0, 2.0, 1.0, 1.0], 200, 200),
        Target::Theorem(Regime::ThmEB) => ([2.0, 2.0, 1.0, 2.0], 10_000, 10_000),
        Target::Theorem(Regime::ThmEC) => ([inf, 2.0, 1.0, 2.0], 100, 100),
        Target::Theorem(Regime::PropSs) => ([1.0, 1.0, 1.0, 2.0], 1, 16_384),
        Target::Corollary(Corollary::Cor16) => ([2.0, 1.0, 1.0, 2.0], 4096, 4),
        Target::Corollary(Corollary::Cor17) => ([3.0, 1.0, 2.0, 2.0], 3, 4096),
        Target::Corollary(Corollary::Cor18) => ([3.0, 1.0, 2.0, 2.0], 256, 256),
        Target::Pmb(PmbTheorem::RowNorms) => ([2.0, 1.0, 1.0, 1.0], 4096, 3),
        Target::Pmb(PmbTheorem::Entries) => ([2.0, 1.0, 1.0, 1.0], 4096, 4096),
    }
}

/// One line of a verification report.
#[derive(Serialize)]
struct Check {
    check: String,
    statistic: f64,
    threshold: f64,
    n_samples: usize,
    pass: bool,
    detail: String,
}

fn verify(a: VerifyArgs) -> anyhow::Result<Outcome> {
    let tgt = target(&a.regime)?;
    let (exps, m_default, n_default) = verify_defaults(tgt);
    let p1 = a.p1.unwrap_or_else(|| e(exps[0]));
    let q1 = a.q1.unwrap_or_else(|| e(exps[1]));
    let p2 = a.p2.unwrap_or_else(|| e(exps[2]));
    let q2 = a.q2.unwrap_or_else(|| e(exps[3]));
    let m = a.m.unwrap_or(m_default);
    let n = a.n.unwrap_or(n_default);
    let workers = a.run.workers as usize;
    let master = RandomStream::from_seed(a.run.seed);
    let threshold = match a.ks_threshold {
        Some(v) => KsThreshold::fixed(v),
        None => KsThreshold::with_bias(a.ks_bias),
    };
    let mut checks = Vec::new();
    let mut config = json!({
        "regime": a.regime.trim().to_ascii_lowercase(), "p1": p1, "q1": q1, "p2": p2, "q2": q2, "m": m, "n": n,
        "samples": a.samples, "seed": a.run.seed.to_string(),
    });
    let extra = config.as_object_mut().expect("config is an object");
    match tgt {
        Target::Theorem(regime) => {
            let mut params = RegimeParams::new(p1, q1, p2, q2, Size::Finite(m as u64), Size::Finite(n as u64));
            params.check(regime)?;
            if !params.fill_exact_theta() && matches!(regime, Regime::ThmC | Regime::ThmEA) {
                fill_theta_moments(&mut params, &mut theta_stream(a.run.seed), a.theta_samples)?;
                extra.insert("theta_samples".into(), json!(a.theta_samples));
            }
            extra.insert("ks_threshold".into(), json!(threshold));
            let law = limit_law(regime, &params)?;
            let stats = clt_statistic_samples(regime, &params, a.samples, &master, workers)?;
            let r = ks_distance(&stats, |x| limit_cdf(law, x), law.to_string(), threshold)?;
            checks.push(Check {
                check: "ks".into(),
                statistic: r.statistic,
                threshold: r.threshold,
                n_samples: r.n_samples,
                pass: r.pass,
                detail: r.reference,
            });
        }
        Target::Corollary(corollary) => {
            let sweep = SweepConfig {
                corollary,
                p1,
                q1,
                p2,
                q2,
                m_schedule: vec![m],
                n_schedule: vec![n],
                t_factors: a.t_factors.clone(),
                samples: a.samples,
                theta_samples: a.theta_samples,
                big_m: a.big_m,
            };
            extra.insert("sweep".into(), json!(sweep));
            extra.insert("tolerance".into(), json!(a.tolerance));
            for row in threshold_sweep(&sweep, &master, workers)? {
                let est = row.result.estimate;
                let (statistic, pass, detail) = match row.limit {
                    Some(l) => ((est - l).abs(), (est - l).abs() <= a.tolerance, format!("V = {est}, limit {l}")),
                    None => (0.0, true, format!("V = {est}, limit not determined")),
                };
                checks.push(Check {
                    check: format!("t = {}/A", row.t_factor),
                    statistic,
                    threshold: a.tolerance,
                    n_samples: row.result.n_samples,
                    pass,
                    detail,
                });
            }
        }
        Target::Pmb(theorem) => {
            extra.insert("k".into(), json!(a.k));
            if theorem == PmbTheorem::Entries {
                extra.insert("l".into(), json!(a.l));
            }
            extra.insert("ks_threshold".into(), json!(threshold));
            let l = if theorem == PmbTheorem::Entries { a.l } else { 1 };
            let r = pmb_check(theorem, p1, q1, m, n, a.k, l, a.samples, &master, workers, threshold)?;
            for (c, ks) in r.reports.iter().enumerate() {
                let name = match theorem {
                    PmbTheorem::RowNorms => format!("ks row {}", c + 1),
                    PmbTheorem::Entries => format!("ks entry ({}, {})", c / l + 1, c % l + 1),
                };
                checks.push(Check {
                    check: name,
                    statistic: ks.statistic,
                    threshold: ks.threshold,
                    n_samples: ks.n_samples,
                    pass: ks.pass,
                    detail: ks.reference.clone(),
                });
            }
            checks.push(Check {
                check: "max abs correlation".into(),
                statistic: r.max_abs_correlation,
                threshold: r.correlation_threshold,
                n_samples: a.samples,
                pass: r.max_abs_correlation <= r.correlation_threshold,
                detail: "independence proxy".into(),
            });
        }
    }
    let mut doc = Document::new("verify", &config)?;
    for c in &checks {
        doc.push(c)?;
    }
    emit(&doc, &a.out)?;
    Ok(if checks.iter().all(|c| c.pass) { Outcome::Pass } else { Outcome::CheckFailed })
}
