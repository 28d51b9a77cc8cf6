//! Run directories `runs/<id>/` with a JSON manifest written before any
//! result.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunManifest {
    pub run_id: String,
    pub timestamp: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    pub workers: usize,
    pub outputs: Vec<String>,
    pub duration_seconds: Option<f64>,
    /// `running`, then `pass` or `fail`.
    pub status: String,
}

/// `YYYY-MM-DDTHH:MM:SSZ` from Unix seconds.
pub fn utc_timestamp(secs: u64) -> String {
    let days = (secs / 86_400) as i64;
    let rem = secs % 86_400;
    // civil-from-days, proleptic Gregorian
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400 + i64::from(m <= 2);
    format!("{y:04}-{m:02}-{d:02}T{:02}:{:02}:{:02}Z", rem / 3600, rem / 60 % 60, rem % 60)
}

pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    /// Creates `root/<id>` and writes the manifest.
    pub fn create(root: &Path, command: &str, config: BTreeMap<String, String>, seed: u64, workers: usize) -> io::Result<Self> {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let stamp = utc_timestamp(now).replace([':', '-'], "");
        let hash = hyperwalk::stats::splitmix64(seed) as u32;
        fs::create_dir_all(root)?;
        let mut suffix = 0;
        let (dir, run_id) = loop {
            let id = match suffix {
                0 => format!("{stamp}-{hash:08x}"),
                k => format!("{stamp}-{hash:08x}-{k}"),
            };
            let dir = root.join(&id);
            match fs::create_dir(&dir) {
                Ok(()) => break (dir, id),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => suffix += 1,
                Err(e) => return Err(e),
            }
        };
        let manifest = RunManifest {
            run_id,
            timestamp: utc_timestamp(now),
            command: command.to_string(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            workers,
            outputs: Vec::new(),
            duration_seconds: None,
            status: "running".into(),
        };
        let run = Self { dir, manifest, started: Instant::now() };
        run.save()?;
        Ok(run)
    }

    fn save(&self) -> io::Result<()> {
        let json = serde_json::to_string_pretty(&self.manifest).map_err(io::Error::other)?;
        fs::write(self.dir.join("manifest.json"), json + "\n")
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.manifest.outputs.push(name.to_string());
        self.save()
    }

    pub fn finish(mut self, passed: bool) -> io::Result<PathBuf> {
        self.manifest.duration_seconds = Some(self.started.elapsed().as_secs_f64());
        self.manifest.status = if passed { "pass" } else { "fail" }.into();
        self.save()?;
        Ok(self.dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps() {
        assert_eq!(utc_timestamp(0), "1970-01-01T00:00:00Z");
        assert_eq!(utc_timestamp(951_782_400), "2000-02-29T00:00:00Z");
        assert_eq!(utc_timestamp(1_700_000_000), "2023-11-14T22:13:20Z");
    }

    #[test]
    fn manifest_comes_first_and_tracks_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let mut run = Run::create(tmp.path(), "pd", BTreeMap::from([("steps".into(), "5".into())]), 9, 1).unwrap();
        let dir = run.dir().to_path_buf();
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["status"], "running");
        assert_eq!(m["config"]["steps"], "5");
        run.write("a.csv", "x\n").unwrap();
        let again = Run::create(tmp.path(), "pd", BTreeMap::new(), 9, 1).unwrap();
        assert_ne!(again.dir(), dir);
        run.finish(true).unwrap();
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["outputs"][0], "a.csv");
        assert_eq!(m["status"], "pass");
        assert!(m["duration_seconds"].as_f64().unwrap() >= 0.0);
    }
}
