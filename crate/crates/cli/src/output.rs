//! All-or-nothing file output.
//!
//! Files are first written next to their destination under a temporary
//! name and only renamed into place by [`Staging::commit`]. Dropping an
//! uncommitted staging area removes the temporary files, so a failing
//! command leaves no partial output behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Default)]
pub struct Staging {
    staged: Vec<(PathBuf, PathBuf)>,
}

impl Staging {
    pub fn new() -> Self {
        Staging::default()
    }

    /// Writes `bytes` to a temporary sibling of `dest`.
    pub fn stage(&mut self, dest: &Path, bytes: &[u8]) -> std::io::Result<()> {
        let dir = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&dir)?;
        let name = dest
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "output".into());
        let tmp = dir.join(format!(".{name}.partial-{}", std::process::id()));
        let mut file = fs::File::create(&tmp)?;
        // registered before writing so that a failed write is cleaned up
        self.staged.push((tmp, dest.to_path_buf()));
        file.write_all(bytes)?;
        file.sync_all()?;
        Ok(())
    }

    pub fn commit(mut self) -> std::io::Result<Vec<PathBuf>> {
        let staged = std::mem::take(&mut self.staged);
        let mut done = Vec::with_capacity(staged.len());
        for (i, (tmp, dest)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, dest) {
                for (t, _) in &staged[i..] {
                    let _ = fs::remove_file(t);
                }
                return Err(e);
            }
            done.push(dest.clone());
        }
        Ok(done)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}
