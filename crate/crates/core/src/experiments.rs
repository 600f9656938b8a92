//! Named batch experiments. Each is a pure function of its config: the same
//! config and seed give byte-identical outputs.
//!
//! Reports hold evidence tables only. Every CSV starts with a provenance line
//! `# skewrec <version> experiment=<name> seed=<seed> config_sha256=<hex>`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::cocycle::{ergodic_sums, lyapunov_table, CirclePoint, CocycleSpec, StepCocycle};
use crate::contfrac::{parse_alpha, ContinuedFraction};
use crate::error::{Error, Result};
use crate::export::CsvTable;
use crate::iet::{
    birkhoff_sup_growth, iet_ergodic_sums, iet_omega, iet_sample_points, periodic_iet_from_loop,
    self_similarity_residual, RauzyLoop,
};
use crate::recurrence::{ck_iet, ck_rotation, divergence_series, rotation_scales, sample_point, zeta_partial, OmegaWeight};
use crate::staircase::{forge_alpha, zeta_certificate, zeta_prefix_check, BSpec, StaircaseParams};
use crate::VERSION;

/// `16, 32, …, 2^19` followed by `10^6`.
pub fn default_horizons() -> Vec<usize> {
    let mut h: Vec<usize> = (4..20).map(|k| 1usize << k).collect();
    h.push(1_000_000);
    h
}

/// `2^8, …, 2^20`.
pub fn iet_default_horizons() -> Vec<usize> {
    (8..=20).map(|k| 1usize << k).collect()
}

fn check_horizons(h: &[usize]) -> Result<()> {
    if h.is_empty() || h[0] == 0 || h.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("horizons must be positive and strictly increasing"));
    }
    Ok(())
}

/// A rotation number: digit-list / sampler string, explicit staircase pairs,
/// or pairs forged on the fly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Text(String),
    Staircase { staircase: StaircaseParams },
    Forge { forge: ForgeSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForgeSpec {
    pub eps: f64,
    #[serde(default = "half_geometric")]
    pub b: BSpec,
    #[serde(default = "one")]
    pub s: u64,
    #[serde(default = "three")]
    pub depth: usize,
}

fn half_geometric() -> BSpec {
    BSpec::Geometric { b0: 1.0, ratio: 0.5 }
}

fn one() -> u64 {
    1
}

fn three() -> usize {
    3
}

fn digit_label(params: &StaircaseParams) -> String {
    let d: Vec<String> = params.digits().iter().map(|x| x.to_string()).collect();
    format!("[{},...]", d.join(","))
}

impl AlphaSpec {
    pub fn text(s: &str) -> Self {
        AlphaSpec::Text(s.to_string())
    }

    /// Label and continued fraction.
    pub fn resolve(&self) -> Result<(String, ContinuedFraction)> {
        match self {
            AlphaSpec::Text(s) => Ok((s.clone(), parse_alpha(s)?)),
            AlphaSpec::Staircase { staircase } => {
                Ok((digit_label(staircase), staircase.continued_fraction()?))
            }
            AlphaSpec::Forge { forge } => {
                let r = forge_alpha(forge.eps, &forge.b, forge.s, forge.depth)?;
                Ok((
                    format!("forged(eps={}) {}", forge.eps, digit_label(&r.params)),
                    r.params.continued_fraction()?,
                ))
            }
        }
    }
}

/// `"staircase"`, `"constant:<c>"`, or explicit breakpoints and values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CocycleChoice {
    Named(String),
    Steps(CocycleSpec),
}

impl Default for CocycleChoice {
    fn default() -> Self {
        CocycleChoice::Named("staircase".into())
    }
}

impl CocycleChoice {
    pub fn resolve(&self, cf: &ContinuedFraction) -> Result<StepCocycle> {
        match self {
            CocycleChoice::Named(s) if s == "staircase" => Ok(StepCocycle::staircase()),
            CocycleChoice::Named(s) => match s.strip_prefix("constant:") {
                Some(c) => Ok(StepCocycle::constant(
                    c.trim()
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad constant in {s:?}")))?,
                )),
                None => Err(Error::invalid(format!(
                    "cocycle must be \"staircase\", \"constant:<c>\" or breakpoints/values, got {s:?}"
                ))),
            },
            CocycleChoice::Steps(spec) => StepCocycle::from_spec(spec, cf),
        }
    }
}

/// `"1/n"`, `"n^-z"`, `"z=..,m=..,iter=a..b"` or the object form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    Text(String),
    Weight(OmegaWeight),
}

impl Default for OmegaSpec {
    fn default() -> Self {
        OmegaSpec::Text("1/n".into())
    }
}

impl OmegaSpec {
    pub fn resolve(&self) -> Result<OmegaWeight> {
        match self {
            OmegaSpec::Text(s) => s.parse(),
            OmegaSpec::Weight(w) => Ok(w.clone()),
        }
    }
}

/// One output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Output {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub experiment: &'static str,
    pub outputs: Vec<Output>,
    /// Short human-readable lines for the terminal.
    pub summary: Vec<String>,
}

impl Report {
    pub fn output(&self, name: &str) -> Option<&str> {
        self.outputs
            .iter()
            .find(|o| o.name == name)
            .map(|o| o.contents.as_str())
    }
}

struct Provenance(String);

impl Provenance {
    fn new<C: Serialize>(name: &str, seed: u64, config: &C) -> Self {
        let canonical = serde_json::to_string(config).expect("config serialises");
        let hash = Sha256::digest(canonical.as_bytes());
        let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        Provenance(format!(
            "skewrec {VERSION} experiment={name} seed={seed} config_sha256={hex}"
        ))
    }

    fn csv(&self, name: &str, mut table: CsvTable) -> Output {
        table.prepend_comment(self.0.clone());
        Output {
            name: name.into(),
            contents: table.render(),
        }
    }

    fn json(&self, name: &str, mut value: serde_json::Value) -> Output {
        if let serde_json::Value::Object(map) = &mut value {
            map.insert("provenance".into(), json!(self.0));
        }
        Output {
            name: name.into(),
            contents: serde_json::to_string_pretty(&value).expect("json") + "\n",
        }
    }
}

/// Parses a config, naming the line and column of any schema error.
pub fn parse_config<C: DeserializeOwned>(text: &str) -> Result<C> {
    serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
}

fn check_name(given: &Option<String>, expected: &str) -> Result<()> {
    match given {
        Some(n) if n != expected => Err(Error::invalid(format!(
            "config is for experiment {n:?}, not {expected:?}"
        ))),
        _ => Ok(()),
    }
}

fn point_label(x: &CirclePoint) -> String {
    x.to_string()
}

fn zeta_rows(
    table: &mut CsvTable,
    label: &str,
    f: &StepCocycle,
    cf: &ContinuedFraction,
    w: &OmegaWeight,
    horizons: &[usize],
    points: &[CirclePoint],
) -> Result<()> {
    let n_max = *horizons.last().expect("nonempty");
    let rows = points
        .par_iter()
        .map(|x| {
            let trace = ergodic_sums(f, x, n_max, cf)?;
            horizons
                .iter()
                .map(|&n| {
                    Ok(vec![
                        label.to_string(),
                        point_label(x),
                        n.to_string(),
                        trace.zero_hits(n)?.to_string(),
                        zeta_partial(&trace, w, n)?.to_string(),
                    ])
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    for r in rows.into_iter().flatten() {
        table.push(r);
    }
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericRecurrenceConfig {
    #[serde(default)]
    pub experiment: Option<String>,
    #[serde(default = "silver")]
    pub alpha: Vec<AlphaSpec>,
    /// Extra Gauss-distributed rotation numbers drawn from the seed.
    #[serde(default)]
    pub alpha_samples: usize,
    #[serde(default)]
    pub omega: OmegaSpec,
    #[serde(default)]
    pub cocycle: CocycleChoice,
    #[serde(default = "forty")]
    pub levels: usize,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "four")]
    pub points: usize,
    pub seed: u64,
}

fn silver() -> Vec<AlphaSpec> {
    vec![AlphaSpec::text("[2,2,...]")]
}

fn forty() -> usize {
    40
}

fn four() -> usize {
    4
}

impl GenericRecurrenceConfig {
    pub fn new(seed: u64) -> Self {
        parse_config(&format!("{{\"seed\": {seed}}}")).expect("defaults")
    }
}

/// `C_k` tables, divergence partial sums for `N_k = q_k`, `ρ_k = a_1+…+a_k`,
/// and `ζ_N` curves at sampled points.
pub fn generic_recurrence(cfg: &GenericRecurrenceConfig) -> Result<Report> {
    const NAME: &str = "generic-recurrence";
    check_name(&cfg.experiment, NAME)?;
    check_horizons(&cfg.horizons)?;
    if cfg.levels == 0 {
        return Err(Error::invalid("levels must be >= 1"));
    }
    let prov = Provenance::new(NAME, cfg.seed, cfg);
    let w = cfg.omega.resolve()?;
    let mut alphas = cfg.alpha.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.alpha_samples {
        let child: u32 = rng.gen();
        alphas.push(AlphaSpec::Text(format!("gauss:{child}:{}", cfg.levels + 8)));
    }
    if alphas.is_empty() {
        return Err(Error::invalid("no rotation numbers configured"));
    }
    let points: Vec<CirclePoint> = (0..cfg.points as u64).map(|i| sample_point(cfg.seed, i)).collect();

    let mut ck = CsvTable::new(["alpha", "k", "C_k"]).operation("ck_rotation", &[("K", cfg.levels.to_string())]);
    let mut div = CsvTable::new(["alpha", "k", "N_k", "rho_k", "term", "partial"])
        .operation("divergence_series", &[("omega", w.to_string()), ("N_k", "q_k".into()), ("rho_k", "a_1+...+a_k".into())]);
    let mut zeta = CsvTable::new(["alpha", "x", "N", "zeros", "zeta_N"]).operation("zeta_partial", &[("omega", w.to_string())]);
    let mut summary = Vec::new();
    for spec in &alphas {
        let (label, cf) = spec.resolve()?;
        cf.ensure_depth(cfg.levels)?;
        for (k, c) in ck_rotation(&cf, cfg.levels)?.iter().enumerate() {
            ck.push([label.clone(), (k + 1).to_string(), c.to_string()]);
        }
        let (ns, rhos) = rotation_scales(&cf, cfg.levels)?;
        let partial = divergence_series(&ns, &rhos, &w, cfg.levels)?;
        let mut prev = 0.0;
        for k in 0..cfg.levels {
            div.push([
                label.clone(),
                (k + 1).to_string(),
                cf.q(k + 1)?.to_string(),
                cf.digit_sums(k + 1)?.to_string(),
                (partial[k] - prev).to_string(),
                partial[k].to_string(),
            ]);
            prev = partial[k];
        }
        summary.push(format!("{label}: divergence partial sum after {} levels = {}", cfg.levels, prev));
        let f = cfg.cocycle.resolve(&cf)?;
        zeta_rows(&mut zeta, &label, &f, &cf, &w, &cfg.horizons, &points)?;
    }
    Ok(Report {
        experiment: NAME,
        outputs: vec![prov.csv("ck.csv", ck), prov.csv("divergence.csv", div), prov.csv("zeta.csv", zeta)],
        summary,
    })
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefeatOmegaConfig {
    #[serde(default)]
    pub experiment: Option<String>,
    pub eps: f64,
    #[serde(default = "half_geometric")]
    pub b: BSpec,
    #[serde(default = "one")]
    pub s: u64,
    #[serde(default = "six")]
    pub depth: usize,
    /// Sampled base points checked against the certificate.
    #[serde(default = "fifty")]
    pub samples: usize,
    /// Orbit steps simulated exactly per point before the certified tail.
    #[serde(default = "simulation_budget")]
    pub budget: u64,
    #[serde(default = "silver_one")]
    pub comparison_alpha: AlphaSpec,
    #[serde(default = "twenty")]
    pub comparison_levels: usize,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "four")]
    pub comparison_points: usize,
    pub seed: u64,
}

fn six() -> usize {
    6
}

fn fifty() -> usize {
    50
}

fn twenty() -> usize {
    20
}

fn simulation_budget() -> u64 {
    1 << 22
}

fn silver_one() -> AlphaSpec {
    AlphaSpec::text("[2,2,...]")
}

impl DefeatOmegaConfig {
    pub fn new(eps: f64, seed: u64) -> Self {
        parse_config(&format!("{{\"eps\": {eps}, \"seed\": {seed}}}")).expect("defaults")
    }
}

/// Forges α for `ω(n) = n^{-ε}`, certifies `ζ_N(x) ≤ K` with `N = q_{2·depth}`,
/// checks sampled points against `K`, and runs the same ω on a comparison α.
pub fn defeat_omega(cfg: &DefeatOmegaConfig) -> Result<Report> {
    const NAME: &str = "defeat-omega";
    check_name(&cfg.experiment, NAME)?;
    check_horizons(&cfg.horizons)?;
    if cfg.depth == 0 || cfg.comparison_levels == 0 {
        return Err(Error::invalid("depth and comparison_levels must be >= 1"));
    }
    let prov = Provenance::new(NAME, cfg.seed, cfg);
    let forged = forge_alpha(cfg.eps, &cfg.b, cfg.s, cfg.depth)?;
    let params = &forged.params;
    let cf = params.continued_fraction()?;
    let horizon = cf
        .q(2 * cfg.depth)?
        .to_biguint()
        .ok_or(Error::Overflow("q_2d"))?;
    let w = OmegaWeight::power_law(cfg.eps)?;
    let cert = zeta_certificate(params, cfg.eps, &w, &horizon)?;
    let b_sum: f64 = forged.b.iter().sum();
    let margin = (cert.scales[0].bound - w.eval(1.0)).max(0.0);

    let points: Vec<CirclePoint> = (0..cfg.samples as u64).map(|i| sample_point(cfg.seed, i)).collect();
    let checks = points
        .par_iter()
        .map(|x| zeta_prefix_check(params, &cert, x, cfg.budget))
        .collect::<Result<Vec<_>>>()?;
    let all_hold = checks.iter().all(|c| c.holds(&cert));

    let mut cert_csv = CsvTable::new(["scale", "start", "end", "window", "per_window", "budget", "bound"])
        .operation("zeta_certificate", &[("eps", cfg.eps.to_string()), ("N", horizon.to_string())]);
    for t in &cert.scales {
        cert_csv.push([
            t.scale.to_string(),
            t.start.to_string(),
            t.end.to_string(),
            t.window.to_string(),
            t.per_window.to_string(),
            t.budget.to_string(),
            t.bound.to_string(),
        ]);
    }
    let mut zeta = CsvTable::new(["x", "simulated", "zeta_prefix", "upper_bound", "violations", "certificate", "within"])
        .operation("zeta_prefix_check", &[("budget", cfg.budget.to_string()), ("N", horizon.to_string())]);
    for (x, c) in points.iter().zip(&checks) {
        zeta.push([
            point_label(x),
            c.simulated.to_string(),
            c.zeta_prefix.to_string(),
            c.upper_bound.to_string(),
            c.violations.to_string(),
            cert.total.to_string(),
            c.holds(&cert).to_string(),
        ]);
    }

    let (clabel, ccf) = cfg.comparison_alpha.resolve()?;
    let (ns, rhos) = rotation_scales(&ccf, cfg.comparison_levels)?;
    let partial = divergence_series(&ns, &rhos, &w, cfg.comparison_levels)?;
    let mut comp = CsvTable::new(["alpha", "k", "N_k", "rho_k", "term", "partial", "certificate"])
        .operation("divergence_series", &[("omega", w.to_string())]);
    let mut prev = 0.0;
    let mut exceeds_at = None;
    for k in 0..cfg.comparison_levels {
        comp.push([
            clabel.clone(),
            (k + 1).to_string(),
            ccf.q(k + 1)?.to_string(),
            ccf.digit_sums(k + 1)?.to_string(),
            (partial[k] - prev).to_string(),
            partial[k].to_string(),
            cert.total.to_string(),
        ]);
        if exceeds_at.is_none() && partial[k] > cert.total {
            exceeds_at = Some(k + 1);
        }
        prev = partial[k];
    }
    let cpoints: Vec<CirclePoint> = (0..cfg.comparison_points as u64).map(|i| sample_point(cfg.seed, i)).collect();
    let mut czeta = CsvTable::new(["alpha", "x", "N", "zeros", "zeta_N"]).operation("zeta_partial", &[("omega", w.to_string())]);
    zeta_rows(&mut czeta, &clabel, &StepCocycle::staircase(), &ccf, &w, &cfg.horizons, &cpoints)?;

    let scales: Vec<serde_json::Value> = cert
        .scales
        .iter()
        .map(|t| {
            json!({
                "scale": t.scale,
                "start": t.start.to_string(),
                "end": t.end.to_string(),
                "window": t.window.to_string(),
                "per_window": t.per_window.to_string(),
                "budget": t.budget.to_string(),
                "bound": t.bound,
            })
        })
        .collect();
    let report = json!({
        "eps": cfg.eps,
        "s": cfg.s,
        "depth": cfg.depth,
        "params": params,
        "digits": params.digits().iter().map(|d| d.to_string()).collect::<Vec<_>>(),
        "b": forged.b,
        "scale_bounds": forged.scale_bounds,
        "horizon": horizon.to_string(),
        "certificate": {
            "total": cert.total,
            "omega_1": w.eval(1.0),
            "b_sum": b_sum,
            "scale0_margin": margin,
            "scales": scales,
        },
        "samples": cfg.samples,
        "all_within_certificate": all_hold,
        "comparison": {
            "alpha": clabel,
            "final_partial": prev,
            "exceeds_certificate_at_level": exceeds_at,
        },
    });
    let summary = vec![
        format!("forged digits: {}", digit_label(params)),
        format!("certificate K = {} for N = q_{} ({} bits)", cert.total, 2 * cfg.depth, horizon.bits()),
        format!("omega(1) + sum b_n + scale-0 margin = {}", w.eval(1.0) + b_sum + margin),
        format!("sampled points within K: {}/{}", checks.iter().filter(|c| c.holds(&cert)).count(), checks.len()),
        match exceeds_at {
            Some(k) => format!("{clabel}: divergence partial sum passes K at level {k}, reaches {prev}"),
            None => format!("{clabel}: divergence partial sum reaches {prev}"),
        },
    ];
    Ok(Report {
        experiment: NAME,
        outputs: vec![
            prov.json("forge.json", report),
            prov.csv("certificate.csv", cert_csv),
            prov.csv("zeta.csv", zeta),
            prov.csv("comparison.csv", comp),
            prov.csv("comparison_zeta.csv", czeta),
        ],
        summary,
    })
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IetRecurrenceConfig {
    #[serde(default)]
    pub experiment: Option<String>,
    #[serde(default = "RauzyLoop::golden", rename = "loop")]
    pub rauzy_loop: RauzyLoop,
    /// Cocycle value per label; alternating `+1, -1, …` when absent.
    #[serde(default)]
    pub phi: Option<Vec<i64>>,
    #[serde(default = "default_bits")]
    pub bits: u32,
    #[serde(default = "iet_default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "sixteen")]
    pub samples: usize,
    #[serde(default = "two")]
    pub gamma: f64,
    #[serde(default = "ck_levels")]
    pub ck_levels: usize,
    /// Deepest iterated logarithm in ω.
    #[serde(default = "two_u32")]
    pub iterated: u32,
    pub seed: u64,
}

fn default_bits() -> u32 {
    crate::iet::DEFAULT_BITS
}

fn sixteen() -> usize {
    16
}

fn two() -> f64 {
    2.0
}

fn two_u32() -> u32 {
    2
}

fn ck_levels() -> usize {
    256
}

impl IetRecurrenceConfig {
    pub fn new(seed: u64) -> Self {
        parse_config(&format!("{{\"seed\": {seed}}}")).expect("defaults")
    }
}

/// Spectrum, centred Birkhoff growth, `C_k` stabilisation and `ζ_N` curves
/// under the spectrum's ω for the periodic-type IET of a Rauzy loop.
pub fn iet_recurrence(cfg: &IetRecurrenceConfig) -> Result<Report> {
    const NAME: &str = "iet-recurrence";
    check_name(&cfg.experiment, NAME)?;
    check_horizons(&cfg.horizons)?;
    let prov = Provenance::new(NAME, cfg.seed, cfg);
    let lp = &cfg.rauzy_loop;
    let m = lp.size();
    let phi = cfg
        .phi
        .clone()
        .unwrap_or_else(|| (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect());
    if phi.len() != m {
        return Err(Error::invalid(format!("phi needs {m} values")));
    }
    let iet = periodic_iet_from_loop(lp, cfg.bits)?;
    let residual = self_similarity_residual(&iet, lp)?;
    let spec = lp.spectrum();
    let w = iet_omega(&spec, cfg.iterated)?;
    let growth = birkhoff_sup_growth(&iet, &phi, &cfg.horizons, cfg.samples, cfg.seed)?;
    let ck = ck_iet(spec.theta1, spec.theta2, spec.jordan, cfg.gamma, cfg.ck_levels)?;

    let mut spectrum = CsvTable::new(["m", "theta1", "theta2", "jordan", "perron_root", "second_modulus", "residual"])
        .operation("loop_spectrum", &[("moves", lp.moves().len().to_string())]);
    spectrum.push([
        m.to_string(),
        spec.theta1.to_string(),
        spec.theta2.to_string(),
        spec.jordan.to_string(),
        spec.eigenvalue_moduli[0].to_string(),
        spec.eigenvalue_moduli.get(1).copied().unwrap_or(0.0).to_string(),
        residual.to_string(),
    ]);
    let mut gt = CsvTable::new(["N", "max_centered_sum"]).operation(
        "birkhoff_sup_growth",
        &[
            ("samples", cfg.samples.to_string()),
            ("mean", growth.mean.to_string()),
            ("exponent", growth.exponent.to_string()),
        ],
    );
    for (n, v) in growth.horizons.iter().zip(&growth.max_abs) {
        gt.push([n.to_string(), v.to_string()]);
    }
    let mut ct = CsvTable::new(["k", "C_k"]).operation("ck_iet", &[("gamma", cfg.gamma.to_string())]);
    for (k, c) in ck.iter().enumerate() {
        ct.push([(k + 1).to_string(), c.to_string()]);
    }
    let n_max = *cfg.horizons.last().unwrap();
    let pts = iet_sample_points(cfg.samples.min(4), cfg.seed);
    let rows = pts
        .par_iter()
        .map(|x| {
            let trace = iet_ergodic_sums(&iet, &phi, x, n_max)?;
            cfg.horizons
                .iter()
                .map(|&n| {
                    Ok(vec![
                        x.to_string(),
                        n.to_string(),
                        trace.zero_hits(n)?.to_string(),
                        zeta_partial(&trace, &w, n)?.to_string(),
                    ])
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut zt = CsvTable::new(["x", "N", "zeros", "zeta_N"]).operation("zeta_partial", &[("omega", w.to_string())]);
    for r in rows.into_iter().flatten() {
        zt.push(r);
    }
    let summary = vec![
        format!("theta1 = {}, theta2 = {}, jordan = {}", spec.theta1, spec.theta2, spec.jordan),
        format!("self-similarity residual <= {residual:e}"),
        format!("centred Birkhoff growth exponent = {} (theta2/theta1 = {})", growth.exponent, spec.theta2 / spec.theta1),
        format!("omega: {w}"),
    ];
    Ok(Report {
        experiment: NAME,
        outputs: vec![
            prov.csv("spectrum.csv", spectrum),
            prov.csv("growth.csv", gt),
            prov.csv("ck.csv", ct),
            prov.csv("zeta.csv", zt),
            prov.json(
                "iet.json",
                serde_json::from_str(&iet.to_json()).expect("IET JSON"),
            ),
        ],
        summary,
    })
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    #[serde(default)]
    pub experiment: Option<String>,
    #[serde(default = "silver")]
    pub alpha: Vec<AlphaSpec>,
    #[serde(default)]
    pub cocycle: CocycleChoice,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "thirty_two")]
    pub samples: usize,
    pub seed: u64,
}

fn thirty_two() -> usize {
    32
}

impl LyapunovConfig {
    pub fn new(seed: u64) -> Self {
        parse_config(&format!("{{\"seed\": {seed}}}")).expect("defaults")
    }
}

/// Slope of `log max_x |S_n(x)|` against `log n` for each configured α.
pub fn lyapunov(cfg: &LyapunovConfig) -> Result<Report> {
    const NAME: &str = "lyapunov";
    check_name(&cfg.experiment, NAME)?;
    check_horizons(&cfg.horizons)?;
    if cfg.alpha.is_empty() {
        return Err(Error::invalid("no rotation numbers configured"));
    }
    let prov = Provenance::new(NAME, cfg.seed, cfg);
    let mut table = CsvTable::new(["alpha", "N", "max_abs_sum"])
        .operation("lyapunov_table", &[("samples", cfg.samples.to_string())]);
    let mut slopes = CsvTable::new(["alpha", "slope"]);
    let mut summary = Vec::new();
    for spec in &cfg.alpha {
        let (label, cf) = spec.resolve()?;
        let f = cfg.cocycle.resolve(&cf)?;
        let t = lyapunov_table(&f, &cf, &cfg.horizons, cfg.samples, cfg.seed)?;
        for (n, m) in t.horizons.iter().zip(&t.max_abs) {
            table.push([label.clone(), n.to_string(), m.to_string()]);
        }
        slopes.push([label.clone(), t.slope.to_string()]);
        summary.push(format!("{label}: slope {}", t.slope));
    }
    Ok(Report {
        experiment: NAME,
        outputs: vec![prov.csv("lyapunov.csv", table), prov.csv("slopes.csv", slopes)],
        summary,
    })
}

/// Slope for one α, as reported in `slopes.csv`.
pub fn slope_of(report: &Report, label_prefix: &str) -> Option<f64> {
    let text = report.output("slopes.csv")?;
    let mut rdr = text.lines().filter(|l| !l.starts_with('#')).skip(1);
    rdr.find_map(|line| {
        let (label, slope) = line.rsplit_once(',')?;
        let label = label.trim_matches('"');
        label.starts_with(label_prefix).then(|| slope.parse().ok()).flatten()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silver_divergence_partials_are_half_harmonic() {
        let mut cfg = GenericRecurrenceConfig::new(3);
        cfg.levels = 12;
        cfg.horizons = vec![16, 64, 256];
        cfg.points = 2;
        let r = generic_recurrence(&cfg).unwrap();
        let div = r.output("divergence.csv").unwrap();
        let mut h = 0.0;
        for (k, line) in div.lines().filter(|l| !l.starts_with('#')).skip(1).enumerate() {
            h += 0.5 / (k + 1) as f64;
            let partial: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert!((partial - h).abs() < 1e-12, "{line}");
        }
        // ζ_N columns are nondecreasing in N for each point
        let zeta = r.output("zeta.csv").unwrap();
        let mut last: Option<(String, f64)> = None;
        for line in zeta.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let cells: Vec<&str> = line.rsplitn(4, ',').collect();
            let (z, x) = (cells[0].parse::<f64>().unwrap(), cells[3].to_string());
            if let Some((px, pz)) = &last {
                if *px == x {
                    assert!(z >= *pz);
                }
            }
            last = Some((x, z));
        }
        assert_eq!(r, generic_recurrence(&cfg).unwrap());
    }

    #[test]
    fn constant_cocycle_has_slope_one() {
        let mut cfg = LyapunovConfig::new(1);
        cfg.cocycle = CocycleChoice::Named("constant:1".into());
        cfg.horizons = vec![16, 64, 256, 1024];
        cfg.samples = 2;
        let r = lyapunov(&cfg).unwrap();
        let s = slope_of(&r, "[2,2").unwrap();
        assert!((s - 1.0).abs() <= 0.01);
    }

    #[test]
    fn configs_reject_unknown_keys_with_position() {
        let e = parse_config::<LyapunovConfig>("{\n  \"seed\": 1,\n  \"sede\": 2\n}").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("sede") && msg.contains("line 3"), "{msg}");
        assert!(parse_config::<LyapunovConfig>("{}").unwrap_err().to_string().contains("seed"));
        let cfg = DefeatOmegaConfig::new(0.5, 1);
        assert!(matches!(defeat_omega(&cfg), Err(Error::Invalid(_))));
        let mut cfg = LyapunovConfig::new(1);
        cfg.experiment = Some("defeat-omega".into());
        assert!(lyapunov(&cfg).is_err());
    }

    #[test]
    fn provenance_heads_every_csv() {
        let mut cfg = IetRecurrenceConfig::new(9);
        cfg.horizons = vec![64, 256, 1024];
        cfg.samples = 2;
        cfg.ck_levels = 8;
        let r = iet_recurrence(&cfg).unwrap();
        for o in &r.outputs {
            if o.name.ends_with(".csv") {
                let first = o.contents.lines().next().unwrap();
                assert!(first.starts_with("# skewrec ") && first.contains("experiment=iet-recurrence seed=9 config_sha256="));
            }
        }
        let spectrum = r.output("spectrum.csv").unwrap();
        let row = spectrum.lines().last().unwrap();
        assert!(row.starts_with("2,0.96242365011920"));
    }
}
