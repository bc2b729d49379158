//! On-disk cache of computed series, keyed by a hash of everything the
//! series depends on.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::numerics::{ParamSet, Scalar};
use crate::series::TruncatedSeries;

/// Environment variable naming the cache directory.
pub const CACHE_DIR_ENV: &str = "FLAGMIRROR_CACHE_DIR";

const MAGIC: &str = "flagmirror-series v1";

#[derive(Debug, Default)]
pub struct SeriesCache {
    dir: Option<PathBuf>,
    warnings: Mutex<Vec<String>>,
}

impl SeriesCache {
    pub fn disabled() -> Self {
        SeriesCache::default()
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        SeriesCache {
            dir: Some(dir.into()),
            warnings: Mutex::new(Vec::new()),
        }
    }

    /// Directory from [`CACHE_DIR_ENV`], disabled when unset.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => SeriesCache::at(PathBuf::from(d)),
            _ => SeriesCache::disabled(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Drain the warnings collected so far (discarded entries, write failures).
    pub fn take_warnings(&self) -> Vec<String> {
        std::mem::take(&mut *self.warnings.lock().unwrap())
    }

    fn warn(&self, msg: String) {
        self.warnings.lock().unwrap().push(msg);
    }

    /// Cache key of the series `recipe` at `p`: covers the parameter point,
    /// both truncations, the precision and the backend.
    pub fn key<S: Scalar>(recipe: &str, p: &ParamSet<S>) -> String {
        let mut h = Sha256::new();
        h.update(MAGIC.as_bytes());
        h.update(recipe.as_bytes());
        h.update(p.spec().to_toml().as_bytes());
        h.update(format!("D={};N={};backend={}", p.max_degree(), p.theta_terms(), S::BACKEND).as_bytes());
        h.update(format!("{:?}", p.ctx()).as_bytes());
        hex::encode(h.finalize())
    }

    pub fn get_or_compute<S: Scalar>(
        &self,
        recipe: &str,
        p: &ParamSet<S>,
        nvars: usize,
        compute: impl FnOnce() -> Result<TruncatedSeries<S>>,
    ) -> Result<TruncatedSeries<S>> {
        let Some(dir) = &self.dir else {
            return compute();
        };
        let key = Self::key(recipe, p);
        let path = dir.join(format!("{key}.series"));
        if let Ok(text) = fs::read_to_string(&path) {
            match parse_entry(&text, &key, nvars, p) {
                Some(s) => return Ok(s),
                None => {
                    self.warn(format!("discarding corrupt cache entry {}", path.display()));
                    let _ = fs::remove_file(&path);
                }
            }
        }
        let s = compute()?;
        if let Err(e) = write_entry(dir, &path, &key, &s) {
            self.warn(format!("could not write cache entry {}: {e}", path.display()));
        }
        Ok(s)
    }
}

fn parse_entry<S: Scalar>(text: &str, key: &str, nvars: usize, p: &ParamSet<S>) -> Option<TruncatedSeries<S>> {
    let mut lines = text.lines();
    if lines.next()? != MAGIC || lines.next()? != key {
        return None;
    }
    let head: Vec<usize> = lines.next()?.split(' ').map(|t| t.parse().ok()).collect::<Option<_>>()?;
    if head.len() != 2 || head[0] != nvars || head[1] != p.max_degree() {
        return None;
    }
    let body: Vec<String> = lines.map(str::to_string).collect();
    TruncatedSeries::from_repr(nvars, head[1], p.ctx(), &body)
}

fn write_entry<S: Scalar>(dir: &Path, path: &Path, key: &str, s: &TruncatedSeries<S>) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = format!("{MAGIC}\n{key}\n{} {}\n", s.nvars(), s.bound());
    for l in s.to_repr() {
        text.push_str(&l);
        text.push('\n');
    }
    let tmp = dir.join(format!(".{key}.{}.tmp", std::process::id()));
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::Perm;
    use crate::numerics::{sample_params, Exact};
    use crate::vertex::vertex_series;

    #[test]
    fn roundtrip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SeriesCache::at(dir.path());
        let p = ParamSet::<Exact>::from_spec(&sample_params(2, 3, 10, 3).unwrap()).unwrap();
        let i = Perm::identity(2);
        let a = cache.get_or_compute("v", &p, 1, || vertex_series(&i, &p)).unwrap();
        let b = cache
            .get_or_compute("v", &p, 1, || panic!("should hit the cache"))
            .unwrap();
        assert_eq!(a, b);
        let key = SeriesCache::key("v", &p);
        fs::write(dir.path().join(format!("{key}.series")), "garbage").unwrap();
        let c = cache.get_or_compute("v", &p, 1, || vertex_series(&i, &p)).unwrap();
        assert_eq!(a, c);
        assert_eq!(cache.take_warnings().len(), 1);
    }

    #[test]
    fn key_depends_on_truncation() {
        let spec = sample_params(2, 3, 10, 3).unwrap();
        let p = ParamSet::<Exact>::from_spec(&spec).unwrap();
        let p2 = ParamSet::<Exact>::from_spec(&spec.with_truncation(11, 3)).unwrap();
        assert_ne!(SeriesCache::key("v", &p), SeriesCache::key("v", &p2));
    }
}
