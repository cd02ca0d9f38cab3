use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TocEntry {
    pub code: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentEntry {
    pub doc_id: String,
    pub title: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toc: Option<Vec<TocEntry>>,
}

impl DocumentEntry {
    /// Title followed by aliases.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.title.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

/// Corpus description: one entry per document, text paths relative to the
/// manifest file.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub documents: Vec<DocumentEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Case-insensitive, whitespace-collapsed form used for document names.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        let mut manifest: CorpusManifest = serde_json::from_slice(&bytes)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.check()?;
        Ok(manifest)
    }

    /// Doc ids unique; aliases not shared with any other document's name.
    pub fn check(&self) -> Result<()> {
        if self.documents.is_empty() {
            return Err(Error::Manifest("no documents".into()));
        }
        let mut ids = HashMap::new();
        for d in &self.documents {
            if d.doc_id.is_empty() || d.doc_id.contains(['#', '/']) {
                return Err(Error::Manifest(format!("invalid doc_id {:?}", d.doc_id)));
            }
            if ids.insert(d.doc_id.as_str(), ()).is_some() {
                return Err(Error::Manifest(format!("duplicate doc_id {}", d.doc_id)));
            }
        }
        let mut owners: HashMap<String, Vec<&str>> = HashMap::new();
        for d in &self.documents {
            for name in d.names() {
                let owned = owners.entry(normalize_name(name)).or_default();
                if !owned.contains(&d.doc_id.as_str()) {
                    owned.push(&d.doc_id);
                }
            }
        }
        for d in &self.documents {
            for alias in &d.aliases {
                let owned = &owners[&normalize_name(alias)];
                if owned.len() > 1 {
                    return Err(Error::Manifest(format!(
                        "alias {alias:?} is shared by documents {owned:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn resolve_path(&self, entry: &DocumentEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    pub fn read_text(&self, entry: &DocumentEntry) -> Result<String> {
        let path = self.resolve_path(entry);
        fs::read_to_string(&path).map_err(io_err(path))
    }

    /// SHA-256 over the manifest entries and every document's bytes; changes
    /// whenever any input of an index build changes.
    /// Hash of the manifest and every document's bytes. A missing document
    /// hashes as absent so partial ingests still get a fingerprint.
    pub fn corpus_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.documents)?);
        for d in &self.documents {
            let path = self.resolve_path(d);
            h.update(d.doc_id.as_bytes());
            match fs::read(&path) {
                Ok(bytes) => {
                    h.update([1u8]);
                    h.update((bytes.len() as u64).to_le_bytes());
                    h.update(&bytes);
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => h.update([0u8]),
                Err(e) => return Err(io_err(path)(e)),
            }
        }
        Ok(hex::encode(h.finalize()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, title: &str, aliases: &[&str]) -> DocumentEntry {
        DocumentEntry {
            doc_id: id.into(),
            title: title.into(),
            aliases: aliases.iter().map(|s| s.to_string()).collect(),
            path: format!("{id}.txt").into(),
            toc: None,
        }
    }

    #[test]
    fn alias_collision_rejected() {
        let m = CorpusManifest {
            documents: vec![doc("A", "Alpha", &["XS 1"]), doc("B", "Beta", &["xs  1"])],
            base_dir: PathBuf::new(),
        };
        assert!(matches!(m.check(), Err(Error::Manifest(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let m = CorpusManifest {
            documents: vec![doc("A", "Alpha", &[]), doc("A", "Beta", &[])],
            base_dir: PathBuf::new(),
        };
        assert!(m.check().is_err());
    }

    #[test]
    fn name_normalization() {
        assert_eq!(
            normalize_name("  ETSI EN\t301  489-1 "),
            "etsi en 301 489-1"
        );
    }
}
