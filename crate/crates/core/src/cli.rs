//! Run configuration and dispatch shared by the binary and the tests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cache::SeriesCache;
use crate::combinatorics::Perm;
use crate::envelope::{normalized_matrices, stab_matrix, Normalization, StabMatrix};
use crate::error::{Error, Result};
use crate::mirror::{kappa, TheoremForm};
use crate::numerics::{sample_params, Exact, ParamSet, ParamSpec, Real, Scalar, DEFAULT_PRECISION};
use crate::report::{csv_field, Report};
use crate::series::TruncatedSeries;
use crate::verify::{run_suite, Suite, SuiteOptions};
use crate::vertex::{vertex_limit, vertex_series};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    #[default]
    Float,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "float" => Ok(Backend::Float),
            _ => Err(Error::Parse(format!("unknown backend {s}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(Error::Parse(format!("unknown format {s}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Command {
    ComputeVertex { perm: Perm },
    ComputeStab { normalization: Normalization },
    ComputeLimit { perm: Perm },
    Verify { suite: Suite },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub degree: Option<usize>,
    pub theta_terms: Option<usize>,
    pub precision: u32,
    pub backend: Backend,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub form: TheoremForm,
    pub perm: Option<Perm>,
    pub no_cache: bool,
}

impl RunConfig {
    pub fn new(command: Command, n: usize) -> Self {
        RunConfig {
            command,
            n,
            seeds: vec![7],
            degree: None,
            theta_terms: None,
            precision: DEFAULT_PRECISION,
            backend: Backend::Float,
            output: None,
            format: Format::Json,
            form: TheoremForm::Overline,
            perm: None,
            no_cache: false,
        }
    }

    /// Values present in a TOML file replace the corresponding flags.
    pub fn apply_overrides(&mut self, file: &ConfigFile) -> Result<()> {
        if let Some(v) = file.n {
            self.n = v;
        }
        if let Some(v) = &file.seeds {
            self.seeds = v.clone();
        }
        if let Some(v) = file.seed {
            self.seeds = vec![v];
        }
        if file.degree.is_some() {
            self.degree = file.degree;
        }
        if file.theta_terms.is_some() {
            self.theta_terms = file.theta_terms;
        }
        if let Some(v) = file.precision {
            self.precision = v;
        }
        if let Some(v) = &file.backend {
            self.backend = v.parse()?;
        }
        if let Some(v) = &file.format {
            self.format = v.parse()?;
        }
        if let Some(v) = &file.form {
            self.form = v.parse()?;
        }
        if let Some(v) = &file.output {
            self.output = Some(v.clone());
        }
        if let Some(v) = file.no_cache {
            self.no_cache = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameters(format!("n = {} < 2", self.n)));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameters("no seeds".into()));
        }
        let check = |p: &Perm| {
            if p.n() != self.n {
                Err(Error::InvalidParameters(format!("permutation {p} does not have length {}", self.n)))
            } else {
                Ok(())
            }
        };
        match &self.command {
            Command::ComputeVertex { perm } | Command::ComputeLimit { perm } => check(perm)?,
            _ => {}
        }
        if let Some(p) = &self.perm {
            check(p)?;
        }
        Ok(())
    }

    fn spec(&self, seed: u64, default_degree: usize) -> Result<ParamSpec> {
        Ok(sample_params(
            self.n,
            seed,
            self.theta_terms.unwrap_or(crate::numerics::DEFAULT_THETA_TERMS),
            self.degree.unwrap_or(default_degree),
        )?
        .with_precision(self.precision))
    }

    fn suite_options(&self) -> SuiteOptions {
        SuiteOptions {
            n: self.n,
            seeds: self.seeds.clone(),
            degree: self.degree,
            theta_terms: self.theta_terms,
            precision: self.precision,
            form: self.form,
            perm: self.perm.clone(),
        }
    }
}

/// Contents of a `--config` TOML file. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub degree: Option<usize>,
    pub theta_terms: Option<usize>,
    pub precision: Option<u32>,
    pub backend: Option<String>,
    pub format: Option<String>,
    pub form: Option<String>,
    pub output: Option<PathBuf>,
    pub no_cache: Option<bool>,
}

impl ConfigFile {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Output of one run: the rendered text and whether every check passed.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub text: String,
    pub pass: bool,
    pub warnings: Vec<String>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let cache = if cfg.no_cache {
        SeriesCache::disabled()
    } else {
        SeriesCache::from_env()
    };
    run_with_cache(cfg, &cache)
}

pub fn run_with_cache(cfg: &RunConfig, cache: &SeriesCache) -> Result<RunOutput> {
    cfg.validate()?;
    let out = match &cfg.command {
        Command::Verify { suite } => {
            let claims = run_suite(*suite, &cfg.suite_options(), cache);
            let report = Report {
                config: serde_json::to_value(cfg).unwrap_or_default(),
                claims,
            };
            let text = match cfg.format {
                Format::Json => report.to_json(),
                Format::Csv => report.to_csv(),
                Format::Markdown => report.to_markdown(),
            };
            RunOutput {
                text,
                pass: report.all_pass(),
                warnings: Vec::new(),
            }
        }
        Command::ComputeVertex { perm } => {
            let text = match cfg.backend {
                Backend::Exact => series_output::<Exact>(cfg, perm, cache, false)?,
                Backend::Float => series_output::<Real>(cfg, perm, cache, false)?,
            };
            RunOutput { text, pass: true, warnings: Vec::new() }
        }
        Command::ComputeLimit { perm } => {
            let text = match cfg.backend {
                Backend::Exact => series_output::<Exact>(cfg, perm, cache, true)?,
                Backend::Float => series_output::<Real>(cfg, perm, cache, true)?,
            };
            RunOutput { text, pass: true, warnings: Vec::new() }
        }
        Command::ComputeStab { normalization } => {
            // theta functions are infinite products, so the stable envelope is
            // always evaluated in floating point
            let p = ParamSet::<Real>::from_spec(&cfg.spec(cfg.seeds[0], 1)?)?;
            let m = stab_output(&p, *normalization)?;
            RunOutput {
                text: render_matrix(cfg, &m),
                pass: true,
                warnings: Vec::new(),
            }
        }
    };
    let mut out = out;
    out.warnings = cache.take_warnings();
    if let Some(path) = &cfg.output {
        write_atomic(path, &out.text).map_err(|e| Error::InvalidParameters(format!("{}: {e}", path.display())))?;
    }
    Ok(out)
}

fn series_output<S: Scalar>(cfg: &RunConfig, perm: &Perm, cache: &SeriesCache, limit: bool) -> Result<String> {
    let p = ParamSet::<S>::from_spec(&cfg.spec(cfg.seeds[0], 4)?)?;
    let s = if limit {
        vertex_limit(perm, &p)?
    } else {
        cache.get_or_compute(&format!("vertex:{perm}"), &p, p.n() - 1, || vertex_series(perm, &p))?
    };
    Ok(render_series(cfg, &s))
}

fn render_series<S: Scalar>(cfg: &RunConfig, s: &TruncatedSeries<S>) -> String {
    let nv = s.nvars();
    let value = |c: &S| if S::EXACT { c.to_string() } else { c.to_sci_string(30) };
    match cfg.format {
        Format::Csv | Format::Markdown => {
            let names: Vec<String> = (1..=nv).map(|k| format!("d{k}")).collect();
            let mut out = String::new();
            if cfg.format == Format::Csv {
                let _ = writeln!(out, "{},coefficient", names.join(","));
            } else {
                let _ = writeln!(out, "| {} | coefficient |", names.join(" | "));
                let _ = writeln!(out, "|{}---|", "---|".repeat(nv));
            }
            for (d, c) in s.iter() {
                let ds: Vec<String> = d.iter().map(|x| x.to_string()).collect();
                if cfg.format == Format::Csv {
                    let _ = writeln!(out, "{},{}", ds.join(","), csv_field(&value(c)));
                } else {
                    let _ = writeln!(out, "| {} | {} |", ds.join(" | "), value(c));
                }
            }
            out
        }
        Format::Json => {
            let rows: Vec<_> = s.iter().map(|(d, c)| json!({ "degree": d, "coefficient": value(c) })).collect();
            serde_json::to_string_pretty(&json!({ "config": cfg, "coefficients": rows })).unwrap_or_default()
        }
    }
}

fn stab_output(p: &ParamSet<Real>, norm: Normalization) -> Result<StabMatrix<Real>> {
    let data = stab_matrix(p)?;
    Ok(match norm {
        Normalization::Raw => data.raw,
        Normalization::Stab => data.stab,
        _ => {
            let dual = kappa(p)?;
            let m = normalized_matrices(&data.stab, p, &dual)?;
            match norm {
                Normalization::S => m.s,
                Normalization::Bold => m.bold,
                Normalization::A => m.a,
                _ => m.overline,
            }
        }
    })
}

fn render_matrix(cfg: &RunConfig, m: &StabMatrix<Real>) -> String {
    let mut rows = Vec::new();
    for (a, i) in m.order.iter().enumerate() {
        for (b, j) in m.order.iter().enumerate() {
            rows.push((i.to_string(), j.to_string(), m.entries[a][b].to_sci_string(30)));
        }
    }
    match cfg.format {
        Format::Csv => {
            let mut out = String::from("I,J,value\n");
            for (i, j, v) in rows {
                let _ = writeln!(out, "{i},{j},{v}");
            }
            out
        }
        Format::Markdown => {
            let mut out = String::from("| I | J | value |\n|---|---|---|\n");
            for (i, j, v) in rows {
                let _ = writeln!(out, "| {i} | {j} | {v} |");
            }
            out
        }
        Format::Json => {
            let rows: Vec<_> = rows.into_iter().map(|(i, j, v)| json!({ "I": i, "J": j, "value": v })).collect();
            serde_json::to_string_pretty(&json!({
                "config": cfg,
                "normalization": format!("{:?}", m.normalization).to_lowercase(),
                "entries": rows,
            }))
            .unwrap_or_default()
        }
    }
}

/// Write through a temporary file in the same directory and rename.
pub fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)
}

/// Structured record printed when a run cannot start or aborts.
pub fn error_record(err: &Error) -> String {
    let kind = format!("{err:?}");
    let kind = kind.split(['(', ' ', '{']).next().unwrap_or("Error").to_string();
    serde_json::to_string(&json!({ "error": kind, "message": err.to_string() })).unwrap_or_default()
}
