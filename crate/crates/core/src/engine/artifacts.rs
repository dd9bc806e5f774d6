use std::fs;
use std::path::PathBuf;

/// Turns a binding reference into artifact bytes.
pub trait ArtifactResolver: Send + Sync {
    fn load(&self, reference: &str) -> Result<Vec<u8>, String>;
}

/// `prebuilt:<entry>/<fixture>` resolves to a bundled fixture; anything
/// else is a file path, relative paths taken from `base` when set.
#[derive(Debug, Clone, Default)]
pub struct DefaultResolver {
    pub base: Option<PathBuf>,
}

impl DefaultResolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_base(base: impl Into<PathBuf>) -> Self {
        DefaultResolver {
            base: Some(base.into()),
        }
    }
}

impl ArtifactResolver for DefaultResolver {
    fn load(&self, reference: &str) -> Result<Vec<u8>, String> {
        if let Some(rest) = reference.strip_prefix(crate::prebuilt::REF_PREFIX) {
            return crate::prebuilt::resolve_fixture(rest)
                .map(<[u8]>::to_vec)
                .ok_or_else(|| "no such bundled fixture".to_string());
        }
        let path = PathBuf::from(reference);
        let path = match &self.base {
            Some(base) if path.is_relative() => base.join(path),
            _ => path,
        };
        fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))
    }
}
