use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use edgegov_core::{default_profile, DeviceProfile};

pub const PROFILE_DIR_VAR: &str = "EDGEGOV_PROFILE_DIR";

/// `builtin`, a path to a profile JSON, or a name looked up as `<name>` or
/// `<name>.json` under `$EDGEGOV_PROFILE_DIR`.
pub fn resolve(spec: &str) -> Result<DeviceProfile> {
    if spec == "builtin" {
        return Ok(default_profile());
    }
    let path = locate(spec)?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading profile {}", path.display()))?;
    DeviceProfile::from_json(&text).with_context(|| format!("profile {}", path.display()))
}

fn locate(spec: &str) -> Result<PathBuf> {
    let direct = Path::new(spec);
    if direct.is_file() {
        return Ok(direct.to_path_buf());
    }
    if let Some(dir) = std::env::var_os(PROFILE_DIR_VAR) {
        let dir = PathBuf::from(dir);
        for candidate in [dir.join(spec), dir.join(format!("{spec}.json"))] {
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
        bail!("profile {spec:?} not found (also searched {})", dir.display());
    }
    bail!("profile {spec:?} not found; pass a path, `builtin`, or set {PROFILE_DIR_VAR}")
}
