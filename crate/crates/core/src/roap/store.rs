//! On-disk agent state: one canonical text file per RI context and per
//! installed rights object.

use super::agent::RiContext;
use super::ProtocolError;
use crate::objects::InstalledRo;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

const CONTEXTS: &str = "ri_contexts";
const INSTALLED: &str = "installed";

#[derive(Debug, Clone)]
pub struct AgentStore {
    root: PathBuf,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ProtocolError {
    ProtocolError::Store(format!("{}: {e}", path.display()))
}

impl AgentStore {
    /// Opens `root`, creating it and its subdirectories if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ProtocolError> {
        let root = root.into();
        for sub in [CONTEXTS, INSTALLED] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Write-then-rename so readers never see a partial file.
    fn write_atomic(&self, sub: &str, id: &str, text: &str) -> Result<(), ProtocolError> {
        let dir = self.root.join(sub);
        let dest = dir.join(format!("{id}.txt"));
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io_err(&dir, e))?;
        tmp.write_all(text.as_bytes()).map_err(|e| io_err(tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| io_err(tmp.path(), e))?;
        tmp.persist(&dest).map_err(|e| io_err(&dest, e.error))?;
        Ok(())
    }

    fn read_all(&self, sub: &str) -> Result<Vec<(PathBuf, String)>, ProtocolError> {
        let dir = self.root.join(sub);
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| io_err(&dir, e))? {
            let path = entry.map_err(|e| io_err(&dir, e))?.path();
            if path.extension().is_some_and(|x| x == "txt") {
                let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
                out.push((path, text));
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn save_context(&self, ctx: &RiContext) -> Result<(), ProtocolError> {
        self.write_atomic(CONTEXTS, &ctx.ri_id, &ctx.to_text())
    }

    pub fn save_installed(&self, ro: &InstalledRo) -> Result<(), ProtocolError> {
        self.write_atomic(INSTALLED, &ro.rights.ro_id, &ro.to_text())
    }

    pub fn load_contexts(&self) -> Result<Vec<RiContext>, ProtocolError> {
        self.read_all(CONTEXTS)?
            .into_iter()
            .map(|(path, text)| RiContext::from_text(&text).map_err(|e| io_err(&path, e)))
            .collect()
    }

    pub fn load_installed(&self) -> Result<Vec<InstalledRo>, ProtocolError> {
        self.read_all(INSTALLED)?
            .into_iter()
            .map(|(path, text)| InstalledRo::from_text(&text).map_err(|e| io_err(&path, e)))
            .collect()
    }

    /// Every stored file, for inspection.
    pub fn files(&self) -> Result<Vec<(PathBuf, String)>, ProtocolError> {
        let mut all = self.read_all(CONTEXTS)?;
        all.extend(self.read_all(INSTALLED)?);
        Ok(all)
    }
}
