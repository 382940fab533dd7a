//! Seed, configuration hash and source revision stamped on every output.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const GIT_REV: &str = env!("SKEWFSV_GIT_REV");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub git_rev: String,
}

impl Provenance {
    /// Hashes the canonical JSON form of `config`.
    pub fn new<C: Serialize>(seed: u64, config: &C) -> Self {
        Self { seed, config_hash: config_hash(config), git_rev: GIT_REV.to_string() }
    }

    /// Header comment line, without the trailing newline.
    pub fn header(&self) -> String {
        format!("# seed={} config_hash={} git_rev={}", self.seed, self.config_hash, self.git_rev)
    }

    /// Parses a line produced by [`header`](Self::header).
    pub fn parse(line: &str) -> Option<Self> {
        let rest = line.strip_prefix('#')?.trim();
        let (mut seed, mut hash, mut rev) = (None, None, None);
        for kv in rest.split_whitespace() {
            match kv.split_once('=')? {
                ("seed", v) => seed = v.parse().ok(),
                ("config_hash", v) => hash = Some(v.to_string()),
                ("git_rev", v) => rev = Some(v.to_string()),
                _ => {}
            }
        }
        Some(Self { seed: seed?, config_hash: hash?, git_rev: rev? })
    }
}

/// First 16 hex digits of the SHA-256 of the JSON serialization.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trips() {
        let p = Provenance::new(42, &vec![1.0, 2.0]);
        assert_eq!(p.config_hash.len(), 16);
        assert_eq!(Provenance::parse(&p.header()), Some(p));
        assert_eq!(Provenance::parse("date,a"), None);
    }

    #[test]
    fn hash_depends_on_content() {
        assert_ne!(config_hash(&[1.0]), config_hash(&[1.5]));
        assert_eq!(config_hash(&"x"), config_hash(&"x"));
    }
}
