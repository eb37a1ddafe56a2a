use std::collections::HashMap;
use std::env;

use crate::anon::{KeyMode, KeySpec};
use crate::error::{Error, Result};

/// Source of key material. Jobs name keys by reference; secrets never travel
/// in parameter documents.
pub trait KeyStore: Send + Sync {
    fn secret(&self, key_ref: &str) -> Result<Vec<u8>>;

    fn key(&self, key_ref: &str, mode: KeyMode) -> Result<KeySpec> {
        KeySpec::new(key_ref, self.secret(key_ref)?, mode)
    }
}

/// Reads `PC4PM_KEY_<REF>` as hex, where `<REF>` is the reference uppercased
/// with every non-alphanumeric character replaced by `_`.
#[derive(Debug, Default, Clone, Copy)]
pub struct EnvKeyStore;

impl EnvKeyStore {
    pub fn variable(key_ref: &str) -> String {
        let suffix: String = key_ref
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
            .collect();
        format!("PC4PM_KEY_{suffix}")
    }
}

impl KeyStore for EnvKeyStore {
    fn secret(&self, key_ref: &str) -> Result<Vec<u8>> {
        let var = EnvKeyStore::variable(key_ref);
        let raw = env::var(&var).map_err(|_| Error::InvalidKey(format!("no key material in ${var}")))?;
        hex::decode(raw.trim()).map_err(|_| Error::InvalidKey(format!("${var} is not hex")))
    }
}

#[derive(Debug, Default, Clone)]
pub struct MemoryKeyStore {
    secrets: HashMap<String, Vec<u8>>,
}

impl MemoryKeyStore {
    pub fn new() -> Self {
        MemoryKeyStore::default()
    }

    pub fn with(mut self, key_ref: impl Into<String>, secret: impl Into<Vec<u8>>) -> Self {
        self.secrets.insert(key_ref.into(), secret.into());
        self
    }
}

impl KeyStore for MemoryKeyStore {
    fn secret(&self, key_ref: &str) -> Result<Vec<u8>> {
        self.secrets
            .get(key_ref)
            .cloned()
            .ok_or_else(|| Error::InvalidKey(format!("unknown key `{key_ref}`")))
    }
}
