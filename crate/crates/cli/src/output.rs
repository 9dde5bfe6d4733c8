use std::fs;
use std::path::{Path, PathBuf};

use tempfile::TempDir;

use crate::error::CliError;

/// Report files are written to a hidden staging directory inside the output
/// directory and moved into place only by [`Staging::commit`]. Dropping an
/// uncommitted stage deletes everything written so far.
pub struct Staging {
    out: PathBuf,
    dir: TempDir,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out)
            .map_err(|e| CliError::Failed(format!("cannot create {}: {e}", out.display())))?;
        let dir = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(out)
            .map_err(|e| CliError::Failed(format!("cannot stage in {}: {e}", out.display())))?;
        Ok(Staging {
            out: out.to_path_buf(),
            dir,
        })
    }

    /// Staged path for a file the caller writes itself (e.g. a checkpoint).
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| CliError::Failed(format!("cannot write {name}: {e}")))
    }

    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut moved = Vec::new();
        for entry in fs::read_dir(self.dir.path())? {
            let entry = entry?;
            let target = self.out.join(entry.file_name());
            fs::rename(entry.path(), &target)?;
            moved.push(target);
        }
        moved.sort();
        Ok(moved)
    }
}
