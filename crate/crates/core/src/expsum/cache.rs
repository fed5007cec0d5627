//! Persistent JSON cache of compressed kernels.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde_json::Value;
use sha2::{Digest, Sha256};

use super::aaa::AaaStatus;
use super::compress::{compress_with_report, CompressOptions, CompressedKernel, CompressionReport, ExpTerm};
use crate::error::{Error, Result};
use crate::kernels::DOKernel;

pub const SCHEMA_VERSION: u64 = 2;

static WRITE_LOCK: Mutex<()> = Mutex::new(());

/// Decimal rendering with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Directory of cached compressions, one JSON file per key.
#[derive(Clone, Debug)]
pub struct KernelCache {
    dir: PathBuf,
}

impl KernelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(KernelCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// SHA-256 over kernel id, tolerance, precision, term cap and support set.
    pub fn key(kernel_id: &str, opts: &CompressOptions) -> String {
        let mut h = Sha256::new();
        h.update(format!("schema={SCHEMA_VERSION}\n").as_bytes());
        h.update(format!("kernel={kernel_id}\n").as_bytes());
        h.update(format!("tol={}\n", fmt17(opts.rel_tol)).as_bytes());
        h.update(format!("bits={}\n", opts.precision_bits).as_bytes());
        h.update(format!("max_terms={:?}\n", opts.max_terms).as_bytes());
        h.update(format!("quad={}\n", fmt17(opts.quad_factor)).as_bytes());
        h.update(format!("cleanup={}\n", opts.cleanup).as_bytes());
        h.update(
            format!(
                "l1=[{},{}] {} {}\n",
                fmt17(opts.l1.interval.0),
                fmt17(opts.l1.interval.1),
                fmt17(opts.l1.abs_tol),
                opts.l1.per_decade
            )
            .as_bytes(),
        );
        h.update(opts.support.fingerprint().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Cached entry, or `None` on a miss. Corrupt entries count as misses.
    pub fn load(&self, key: &str) -> Option<CompressedKernel> {
        let p = self.path(key);
        let text = fs::read_to_string(&p).ok()?;
        match from_json(&text) {
            Ok(c) => Some(c),
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {}: {e}", p.display());
                None
            }
        }
    }

    /// Write atomically (temporary file then rename).
    pub fn store(&self, key: &str, c: &CompressedKernel) -> Result<PathBuf> {
        let _guard = WRITE_LOCK.lock().unwrap_or_else(|e| e.into_inner());
        let p = self.path(key);
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(to_json(c).as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &p)?;
        Ok(p)
    }
}

/// JSON document with 17-significant-digit decimals.
pub fn to_json(c: &CompressedKernel) -> String {
    let mut s = String::new();
    s.push_str("{\n");
    s.push_str(&format!("  \"schema_version\": {SCHEMA_VERSION},\n"));
    s.push_str(&format!("  \"kernel_id\": {},\n", Value::String(c.kernel_id.clone())));
    s.push_str(&format!("  \"tolerance\": {},\n", fmt17(c.tolerance)));
    s.push_str(&format!("  \"precision_bits\": {},\n", c.precision_bits));
    s.push_str(&format!(
        "  \"interval\": [{}, {}],\n",
        fmt17(c.interval.0),
        fmt17(c.interval.1)
    ));
    s.push_str(&format!("  \"l1_error\": {},\n", fmt17(c.l1_error)));
    s.push_str(&format!("  \"l1_error_unrounded\": {},\n", fmt17(c.l1_error_unrounded)));
    s.push_str(&format!("  \"m\": {},\n", c.m()));
    s.push_str(&format!(
        "  \"status\": {},\n",
        serde_json::to_string(&c.status).expect("status serializes")
    ));
    s.push_str("  \"terms\": [");
    for (j, t) in c.terms.iter().enumerate() {
        if j > 0 {
            s.push(',');
        }
        s.push_str(&format!("\n    {{\"w\": {}, \"lambda\": {}}}", fmt17(t.w), fmt17(t.lambda)));
    }
    if !c.terms.is_empty() {
        s.push_str("\n  ");
    }
    s.push_str("]\n}\n");
    s
}

/// Parse and validate a cache document.
pub fn from_json(text: &str) -> Result<CompressedKernel> {
    let v: Value = serde_json::from_str(text)?;
    let bad = |what: &str| Error::Validation(format!("cache document: bad or missing {what}"));
    if v.get("schema_version").and_then(Value::as_u64) != Some(SCHEMA_VERSION) {
        return Err(bad("schema_version"));
    }
    let num = |k: &str| v.get(k).and_then(Value::as_f64).ok_or_else(|| bad(k));
    let interval = v
        .get("interval")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)))
        .ok_or_else(|| bad("interval"))?;
    let terms: Vec<ExpTerm> = v
        .get("terms")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("terms"))?
        .iter()
        .map(|t| {
            Some(ExpTerm {
                w: t.get("w")?.as_f64()?,
                lambda: t.get("lambda")?.as_f64()?,
            })
        })
        .collect::<Option<_>>()
        .ok_or_else(|| bad("terms"))?;
    let m = v.get("m").and_then(Value::as_u64).ok_or_else(|| bad("m"))?;
    if m as usize != terms.len() {
        return Err(bad("m"));
    }
    let status: AaaStatus = serde_json::from_value(v.get("status").cloned().ok_or_else(|| bad("status"))?)?;
    let c = CompressedKernel {
        kernel_id: v
            .get("kernel_id")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("kernel_id"))?
            .to_string(),
        tolerance: num("tolerance")?,
        precision_bits: v
            .get("precision_bits")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("precision_bits"))? as u32,
        interval,
        l1_error: num("l1_error")?,
        l1_error_unrounded: num("l1_error_unrounded")?,
        terms,
        status,
    };
    c.validate()?;
    Ok(c)
}

/// Result of a cached compression.
#[derive(Clone, Debug)]
pub struct CacheOutcome {
    pub kernel: CompressedKernel,
    pub hit: bool,
    pub path: Option<PathBuf>,
    pub report: Option<CompressionReport>,
}

/// Load from `cache` if present, otherwise compress and store.
pub fn compress_cached(k: &DOKernel, opts: &CompressOptions, cache: Option<&KernelCache>) -> Result<CacheOutcome> {
    let id = k.id();
    let Some(cache) = cache else {
        let (kernel, report) = compress_with_report(k, opts)?;
        return Ok(CacheOutcome {
            kernel,
            hit: false,
            path: None,
            report: Some(report),
        });
    };
    let key = KernelCache::key(&id, opts);
    if let Some(c) = cache.load(&key) {
        if c.kernel_id == id && c.tolerance == opts.rel_tol && c.precision_bits == opts.precision_bits {
            log::info!("{id}: cache hit ({})", cache.path(&key).display());
            return Ok(CacheOutcome {
                kernel: c,
                hit: true,
                path: Some(cache.path(&key)),
                report: None,
            });
        }
        log::warn!("cache entry {key} does not match {id}; recomputing");
    }
    let (kernel, report) = compress_with_report(k, opts)?;
    let path = cache.store(&key, &kernel)?;
    Ok(CacheOutcome {
        kernel,
        hit: false,
        path: Some(path),
        report: Some(report),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CompressedKernel {
        CompressedKernel {
            kernel_id: "rl(0.5)/K1".into(),
            tolerance: 1e-13,
            precision_bits: 256,
            interval: (1e-5, 1.0),
            l1_error: 3.25e-7,
            l1_error_unrounded: 3.2e-7,
            terms: vec![
                ExpTerm { w: 0.1, lambda: 0.0 },
                ExpTerm {
                    w: std::f64::consts::PI,
                    lambda: 1.0 / 3.0,
                },
                ExpTerm {
                    w: 1e300,
                    lambda: 7.123456789012345e11,
                },
            ],
            status: AaaStatus::Converged,
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let c = sample();
        let back = from_json(&to_json(&c)).unwrap();
        assert_eq!(back, c);
        for (a, b) in back.terms.iter().zip(&c.terms) {
            assert_eq!(a.w.to_bits(), b.w.to_bits());
            assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
        }
    }

    proptest::proptest! {
        #[test]
        fn round_trip_is_bit_exact(w in proptest::num::f64::POSITIVE | proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL, lambda in 0.0f64..1e12) {
            let mut c = sample();
            c.terms = vec![ExpTerm { w, lambda }];
            let back = from_json(&to_json(&c)).unwrap();
            proptest::prop_assert_eq!(back.terms[0].w.to_bits(), w.to_bits());
            proptest::prop_assert_eq!(back.terms[0].lambda.to_bits(), lambda.to_bits());
        }
    }

    #[test]
    fn store_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KernelCache::new(dir.path()).unwrap();
        let c = sample();
        cache.store("abc", &c).unwrap();
        assert_eq!(cache.load("abc").unwrap(), c);
        assert!(cache.load("missing").is_none());
        fs::write(cache.path("bad"), "{ not json").unwrap();
        assert!(cache.load("bad").is_none());
        let mut broken = to_json(&c);
        broken = broken.replace("\"m\": 3", "\"m\": 4");
        fs::write(cache.path("short"), broken).unwrap();
        assert!(cache.load("short").is_none());
    }

    #[test]
    fn key_depends_on_tolerance_and_precision() {
        let a = CompressOptions::new(1e-13);
        let b = CompressOptions::new(1e-14);
        assert_ne!(KernelCache::key("k", &a), KernelCache::key("k", &b));
        assert_ne!(
            KernelCache::key("k", &a),
            KernelCache::key("k", &a.clone().with_precision(512))
        );
        assert_eq!(KernelCache::key("k", &a), KernelCache::key("k", &a.clone()));
        assert_ne!(KernelCache::key("k", &a), KernelCache::key("j", &a));
    }

    #[test]
    fn negative_weights_fail_validation() {
        let mut c = sample();
        c.terms[1].w = -1.0;
        assert!(from_json(&to_json(&c)).is_err());
    }
}
