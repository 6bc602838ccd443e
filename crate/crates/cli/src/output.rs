use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// SHA-256 over the JSON form of `args` followed by each input's bytes.
pub fn config_hash<T: Serialize>(args: &T, inputs: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(args).expect("arguments serialize"));
    for bytes in inputs {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    let mut s = String::with_capacity(64);
    for b in h.finalize().iter() {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Prefixes a CSV body with its `# config-hash:` line.
pub fn with_hash(hash: &str, csv: &str) -> String {
    format!("# config-hash: {hash}\n{csv}")
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(dir, name, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_args_and_inputs() {
        let a = config_hash(&("x", 1), &[b"abc"]);
        assert_eq!(a.len(), 64);
        assert_eq!(a, config_hash(&("x", 1), &[b"abc"]));
        assert_ne!(a, config_hash(&("x", 2), &[b"abc"]));
        assert_ne!(a, config_hash(&("x", 1), &[b"abd"]));
    }

    #[test]
    fn hash_line_comes_first() {
        let s = with_hash("ff", "a,b\n1,2\n");
        assert_eq!(s, "# config-hash: ff\na,b\n1,2\n");
    }
}
