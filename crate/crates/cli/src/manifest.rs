use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory, with `/` separators.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one subcommand invocation and every file it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub args: Vec<String>,
    pub config_paths: Vec<String>,
    pub inputs: Vec<Artifact>,
    pub seeds: Vec<u64>,
    pub output_dir: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub artifacts: Vec<Artifact>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), CliError> {
    let mut f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut n = 0u64;
    loop {
        let k = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if k == 0 {
            break;
        }
        h.update(&buf[..k]);
        n += k as u64;
    }
    Ok((hex::encode(h.finalize()), n))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::io(dir, e))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn relative(root: &Path, p: &Path) -> String {
    let rel = p.strip_prefix(root).unwrap_or(p);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Hashes every file under `root` except the run manifest itself, sorted by path.
pub fn hash_tree(root: &Path) -> Result<Vec<Artifact>, CliError> {
    let mut files = Vec::new();
    walk(root, &mut files)?;
    files
        .into_iter()
        .filter(|p| p.file_name().is_none_or(|n| n != MANIFEST_FILE))
        .map(|p| {
            let (sha256, bytes) = sha256_file(&p)?;
            Ok(Artifact {
                path: relative(root, &p),
                sha256,
                bytes,
            })
        })
        .collect()
}

pub fn hash_inputs(paths: &[PathBuf]) -> Result<Vec<Artifact>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            for mut a in hash_tree(p)? {
                a.path = format!("{}/{}", p.display(), a.path);
                out.push(a);
            }
        } else {
            let (sha256, bytes) = sha256_file(p)?;
            out.push(Artifact {
                path: p.display().to_string(),
                sha256,
                bytes,
            });
        }
    }
    Ok(out)
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let p = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::io(&p, e))?;
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
    }

    /// Artifacts whose current hash under `dir` differs from the record.
    pub fn mismatches(&self, dir: &Path) -> Result<Vec<String>, CliError> {
        let mut bad = Vec::new();
        for a in &self.artifacts {
            let p = dir.join(&a.path);
            match sha256_file(&p) {
                Ok((h, _)) if h == a.sha256 => {}
                _ => bad.push(a.path.clone()),
            }
        }
        Ok(bad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        fs::write(&p, "abc").unwrap();
        let (h, n) = sha256_file(&p).unwrap();
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(n, 3);
    }

    #[test]
    fn tree_skips_manifest_and_sorts() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/b.txt"), "b").unwrap();
        fs::write(dir.path().join("a.txt"), "a").unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), "{}").unwrap();
        let arts = hash_tree(dir.path()).unwrap();
        let paths: Vec<&str> = arts.iter().map(|a| a.path.as_str()).collect();
        assert_eq!(paths, vec!["a.txt", "sub/b.txt"]);
    }
}
