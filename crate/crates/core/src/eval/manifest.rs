//! Corpus manifests: one `role path object-id` record per line.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the manifest's directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Db,
    Query,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Db => "db",
            Role::Query => "query",
        })
    }
}

impl FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "db" => Ok(Role::Db),
            "query" => Ok(Role::Query),
            other => Err(Error::Corpus(format!("unknown role {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub role: Role,
    pub path: PathBuf,
    pub object: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [role, path, object] = fields[..] else {
                return Err(Error::Corpus(format!(
                    "line {}: expected `role path object-id`, got {line:?}",
                    n + 1
                )));
            };
            let object = object
                .parse()
                .map_err(|_| Error::Corpus(format!("line {}: bad object id {object:?}", n + 1)))?;
            let path = Path::new(path);
            entries.push(ManifestEntry {
                role: role.parse()?,
                path: if path.is_absolute() {
                    path.to_path_buf()
                } else {
                    base.join(path)
                },
                object,
            });
        }
        Ok(Manifest { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# role path object\n");
        for e in &self.entries {
            out.push_str(&format!("{} {} {}\n", e.role, e.path.display(), e.object));
        }
        out
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.role == role)
    }
}
