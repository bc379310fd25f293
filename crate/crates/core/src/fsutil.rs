//! File helpers shared by every artifact writer.

use std::io::{self, BufWriter, Write};
use std::path::Path;

/// Writes `path` through a temporary sibling file that is renamed into place
/// only after `write` succeeded and the data hit the disk. A failed or
/// interrupted write never leaves a partial file under `path`.
pub fn write_atomic<F>(path: &Path, write: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        write(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
