//! Scheme pools on disk.
//!
//! Layout: `<root>/<n>x<m>x<p>/<ring>/<rank>/<hash>.json` with one
//! `manifest.json` per rank directory. Every file is written to a temporary
//! name and renamed into place, so readers never see partial files.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::Ring;
use crate::error::{Error, Result};
use crate::scheme::{read_scheme, scheme_to_json, Format, Scheme};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub hash: String,
    pub file: String,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolManifest {
    pub format: Format,
    pub ring: String,
    pub rank: usize,
    pub count: usize,
    pub entries: Vec<ManifestEntry>,
}

pub struct PoolStore {
    root: PathBuf,
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().expect("file inside a directory");
    let name = path.file_name().expect("file name").to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn parse_manifest(path: &Path) -> Result<PoolManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        field: "<manifest>".into(),
        message: e.to_string(),
    })
}

impl PoolStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<PoolStore> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(PoolStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ring_dir(&self, f: Format, ring: Ring) -> PathBuf {
        self.root.join(f.dir_name()).join(ring.name())
    }

    pub fn dir(&self, f: Format, ring: Ring, rank: usize) -> PathBuf {
        self.ring_dir(f, ring).join(rank.to_string())
    }

    fn manifest_path(&self, f: Format, ring: Ring, rank: usize) -> PathBuf {
        self.dir(f, ring, rank).join("manifest.json")
    }

    pub fn manifest(&self, f: Format, ring: Ring, rank: usize) -> Result<Option<PoolManifest>> {
        let path = self.manifest_path(f, ring, rank);
        if !path.exists() {
            return Ok(None);
        }
        parse_manifest(&path).map(Some)
    }

    /// Adds schemes to their rank directories, skipping ones already stored.
    /// Returns the number of new files.
    pub fn save(&self, schemes: &[Scheme], provenance: &str) -> Result<usize> {
        let mut added = 0;
        let mut keys: Vec<(Format, Ring, usize)> = schemes.iter().map(|s| (s.format(), s.ring(), s.rank())).collect();
        keys.sort_by_key(|(f, r, k)| (f.dims(), r.name(), *k));
        keys.dedup();
        for (f, ring, rank) in keys {
            let dir = self.dir(f, ring, rank);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut manifest = self.manifest(f, ring, rank)?.unwrap_or(PoolManifest {
                format: f,
                ring: ring.name(),
                rank,
                count: 0,
                entries: Vec::new(),
            });
            let mut known: BTreeSet<String> = manifest.entries.iter().map(|e| e.hash.clone()).collect();
            for s in schemes.iter().filter(|s| (s.format(), s.ring(), s.rank()) == (f, ring, rank)) {
                let hash = s.canonical_hash().0;
                if !known.insert(hash.clone()) {
                    continue;
                }
                let file = format!("{hash}.json");
                write_atomic(&dir.join(&file), &scheme_to_json(s))?;
                manifest.entries.push(ManifestEntry {
                    hash,
                    file,
                    provenance: provenance.to_string(),
                });
                added += 1;
            }
            manifest.count = manifest.entries.len();
            let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
            write_atomic(&self.manifest_path(f, ring, rank), &text)?;
        }
        Ok(added)
    }

    /// Loads and verifies every scheme listed in a rank's manifest.
    pub fn load(&self, f: Format, ring: Ring, rank: usize) -> Result<Vec<Scheme>> {
        let Some(manifest) = self.manifest(f, ring, rank)? else {
            return Ok(Vec::new());
        };
        let dir = self.dir(f, ring, rank);
        manifest
            .entries
            .iter()
            .map(|e| import_scheme(dir.join(&e.file), f, ring))
            .collect()
    }

    /// Stored ranks for a format, ascending.
    pub fn ranks(&self, f: Format, ring: Ring) -> Result<Vec<usize>> {
        let dir = self.ring_dir(f, ring);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut ranks: Vec<usize> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.parse().ok()))
            .filter(|&r| self.manifest_path(f, ring, r).exists())
            .collect();
        ranks.sort_unstable();
        Ok(ranks)
    }

    pub fn best_rank(&self, f: Format, ring: Ring) -> Result<Option<usize>> {
        Ok(self.ranks(f, ring)?.first().copied())
    }

    /// Whether the manifest's hash list matches the scheme files on disk and
    /// each file's content hashes to its name.
    pub fn check(&self, f: Format, ring: Ring, rank: usize) -> Result<bool> {
        let Some(manifest) = self.manifest(f, ring, rank)? else {
            return Ok(false);
        };
        let dir = self.dir(f, ring, rank);
        let on_disk: BTreeSet<String> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().map(String::from))
            .filter(|n| n.ends_with(".json") && n != "manifest.json" && !n.starts_with('.'))
            .collect();
        let listed: BTreeSet<String> = manifest.entries.iter().map(|e| e.file.clone()).collect();
        if on_disk != listed || manifest.count != manifest.entries.len() {
            return Ok(false);
        }
        for e in &manifest.entries {
            let s = read_scheme(dir.join(&e.file))?;
            if s.canonical_hash().0 != e.hash || s.rank() != rank {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Reads a scheme from outside the campaign, admitting it only if it has the
/// expected format and ring and verifies exactly.
pub fn import_scheme(path: impl AsRef<Path>, expected_format: Format, expected_ring: Ring) -> Result<Scheme> {
    let path = path.as_ref();
    let s = read_scheme(path)?;
    if s.format() != expected_format {
        return Err(Error::Structural(format!(
            "{}: format {} but {expected_format} expected",
            path.display(),
            s.format()
        )));
    }
    if s.ring() != expected_ring {
        return Err(Error::Structural(format!(
            "{}: ring {} but {expected_ring} expected",
            path.display(),
            s.ring()
        )));
    }
    s.verify().map_err(Error::NotVerified)?;
    Ok(s)
}
