//! Keyed pseudonymization and recoverable value encryption.
//!
//! Deterministic mode replaces a value by the first 16 hex characters of
//! HMAC-SHA256 under the run's secret. Recoverable mode encrypts each value
//! with AES-256-GCM-SIV, a nonce-misuse-resistant AEAD, using a nonce derived
//! from the plaintext so that equal values still encrypt identically.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use aes_gcm_siv::aead::{Aead, KeyInit as _};
use aes_gcm_siv::{Aes256GcmSiv, Nonce};
use hmac::{Hmac, KeyInit, Mac};
use rayon::prelude::*;
use sha2::Sha256;

use crate::error::{Error, Result};
use crate::metadata::{parameter_digest, Level, OpContext, OperationKind, RecordFields};
use crate::model::{AttrRef, EventLog, TypedValue};

use super::{rewrite_values, sort_if_time};

pub const MIN_SECRET_LEN: usize = 16;
pub const TOKEN_LEN: usize = 16;
const ENCRYPTED_PREFIX: &str = "enc:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyMode {
    PseudonymizeDeterministic,
    EncryptRecoverable,
}

impl KeyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            KeyMode::PseudonymizeDeterministic => "pseudonymize-deterministic",
            KeyMode::EncryptRecoverable => "encrypt-recoverable",
        }
    }

    pub fn parse(raw: &str) -> Option<KeyMode> {
        match raw {
            "pseudonymize-deterministic" | "deterministic" => Some(KeyMode::PseudonymizeDeterministic),
            "encrypt-recoverable" | "recoverable" => Some(KeyMode::EncryptRecoverable),
            _ => None,
        }
    }
}

/// Key material for a cryptographic operation. The secret is never serialized
/// and is redacted from `Debug` output.
#[derive(Clone)]
pub struct KeySpec {
    key_id: String,
    secret: Vec<u8>,
    mode: KeyMode,
}

impl fmt::Debug for KeySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeySpec")
            .field("key_id", &self.key_id)
            .field("secret", &"<redacted>")
            .field("mode", &self.mode)
            .finish()
    }
}

type HmacSha256 = Hmac<Sha256>;

impl KeySpec {
    pub fn new(key_id: impl Into<String>, secret: impl Into<Vec<u8>>, mode: KeyMode) -> Result<Self> {
        let secret = secret.into();
        if secret.len() < MIN_SECRET_LEN {
            return Err(Error::InvalidKey(format!(
                "secret must be at least {MIN_SECRET_LEN} bytes, got {}",
                secret.len()
            )));
        }
        Ok(KeySpec {
            key_id: key_id.into(),
            secret,
            mode,
        })
    }

    pub fn key_id(&self) -> &str {
        &self.key_id
    }

    pub fn mode(&self) -> KeyMode {
        self.mode
    }

    pub fn with_mode(&self, mode: KeyMode) -> KeySpec {
        KeySpec {
            mode,
            ..self.clone()
        }
    }

    fn mac(&self, domain: &[u8], parts: &[&[u8]]) -> [u8; 32] {
        let mut mac = <HmacSha256 as KeyInit>::new_from_slice(&self.secret).expect("HMAC accepts any key length");
        mac.update(domain);
        for part in parts {
            mac.update(&(part.len() as u64).to_le_bytes());
            mac.update(part);
        }
        mac.finalize().into_bytes().into()
    }

    /// Deterministic keyed token for a label: 16 lowercase hex characters.
    pub fn token(&self, label: &str) -> String {
        let digest = self.mac(b"pc4pm/pseudonym", &[label.as_bytes()]);
        let mut hex = hex::encode(digest);
        hex.truncate(TOKEN_LEN);
        hex
    }

    fn cipher(&self) -> Aes256GcmSiv {
        let key = self.mac(b"pc4pm/aead-key", &[]);
        Aes256GcmSiv::new_from_slice(&key).expect("32-byte key")
    }

    fn encrypt(&self, plaintext: &[u8]) -> String {
        let nonce_material = self.mac(b"pc4pm/aead-nonce", &[plaintext]);
        let nonce = Nonce::from_slice(&nonce_material[..12]);
        let ciphertext = self
            .cipher()
            .encrypt(nonce, plaintext)
            .expect("AES-GCM-SIV encryption of in-memory data cannot fail");
        let mut out = nonce_material[..12].to_vec();
        out.extend_from_slice(&ciphertext);
        format!("{ENCRYPTED_PREFIX}{}", hex::encode(out))
    }

    fn decrypt(&self, token: &str) -> Option<Vec<u8>> {
        let raw = hex::decode(token.strip_prefix(ENCRYPTED_PREFIX)?).ok()?;
        if raw.len() < 12 {
            return None;
        }
        let (nonce, ciphertext) = raw.split_at(12);
        self.cipher().decrypt(Nonce::from_slice(nonce), ciphertext).ok()
    }
}

fn value_text<'v>(attribute: &AttrRef, value: &'v TypedValue) -> Result<&'v str> {
    value.as_str().ok_or_else(|| {
        Error::type_mismatch(
            &attribute.qualified(),
            format!("only string and id values can be pseudonymized, found {}", value.kind()),
        )
    })
}

fn encode_value(key: &KeySpec, value: &TypedValue, text: &str) -> String {
    match key.mode {
        KeyMode::PseudonymizeDeterministic => key.token(text),
        KeyMode::EncryptRecoverable => {
            let tag = if matches!(value, TypedValue::Id(_)) { b'i' } else { b's' };
            let mut plain = vec![tag];
            plain.extend_from_slice(text.as_bytes());
            key.encrypt(&plain)
        }
    }
}

fn rewrap(original: &TypedValue, text: String) -> TypedValue {
    match original {
        TypedValue::Id(_) => TypedValue::Id(text),
        _ => TypedValue::String(text),
    }
}

/// Replaces every value of the given attributes by a keyed pseudonym or ciphertext.
///
/// In deterministic mode equal plaintexts get equal tokens; two distinct
/// plaintexts sharing a token anywhere in the operation raise
/// [`Error::PseudonymCollision`].
pub fn pseudonymize(
    log: &EventLog,
    attributes: &[String],
    key: &KeySpec,
    ctx: &OpContext,
) -> Result<EventLog> {
    let targets = attributes
        .iter()
        .map(|a| log.resolve(a))
        .collect::<Result<Vec<_>>>()?;

    // first pass: distinct plaintexts per kind, so collisions are checked once
    let mut plaintexts: BTreeSet<(bool, String)> = BTreeSet::new();
    for target in &targets {
        for value in super::collect_values(log, target) {
            let text = value_text(target, &value)?;
            plaintexts.insert((matches!(value, TypedValue::Id(_)), text.to_owned()));
        }
    }
    let encoded: Vec<((bool, String), String)> = plaintexts
        .into_par_iter()
        .map(|(is_id, text)| {
            let probe = if is_id {
                TypedValue::Id(String::new())
            } else {
                TypedValue::String(String::new())
            };
            let token = encode_value(key, &probe, &text);
            ((is_id, text), token)
        })
        .collect();
    let mut by_token: HashMap<&str, &str> = HashMap::new();
    for ((_, text), token) in &encoded {
        if let Some(previous) = by_token.insert(token.as_str(), text.as_str()) {
            if previous != text {
                return Err(Error::PseudonymCollision {
                    first: previous.to_owned(),
                    second: text.clone(),
                });
            }
        }
    }
    let table: BTreeMap<(bool, String), String> = encoded.into_iter().collect();

    let mut out = log.clone();
    for target in &targets {
        rewrite_values(&mut out, target, |value| {
            let text = value_text(target, value)?;
            let token = &table[&(matches!(value, TypedValue::Id(_)), text.to_owned())];
            Ok(Some(rewrap(value, token.clone())))
        })?;
    }
    super::check_unique_cases(&out)?;

    let level = if targets.iter().all(|t| matches!(t, AttrRef::Trace(_))) {
        Level::Trace
    } else {
        Level::Event
    };
    let digest = parameter_digest(&[
        ("attributes", attributes.join(",")),
        ("key_id", key.key_id.clone()),
        ("mode", key.mode.as_str().to_owned()),
    ]);
    out.privacy_metadata.push(RecordFields::new(
        OperationKind::Cryptography,
        level,
        targets.iter().map(AttrRef::qualified),
        digest,
        ctx,
    ));
    Ok(out)
}

/// Inverts recoverable-mode [`pseudonymize`].
///
/// The attributes to decrypt are read from the cryptography records in the
/// log's privacy metadata. Only values carrying the ciphertext prefix are
/// touched, so deterministic pseudonyms in the same attributes stay as they
/// are. No record is appended because no anonymization operation is applied.
pub fn de_pseudonymize(log: &EventLog, key: &KeySpec) -> Result<EventLog> {
    if key.mode != KeyMode::EncryptRecoverable {
        return Err(Error::InvalidKey(
            "de-pseudonymization needs an encrypt-recoverable key".into(),
        ));
    }
    let attributes: BTreeSet<String> = log
        .privacy_metadata
        .records
        .iter()
        .filter(|r| r.operation_kind == OperationKind::Cryptography)
        .flat_map(|r| r.target_attributes.iter().cloned())
        .collect();

    let mut out = log.clone();
    for attribute in attributes {
        let Ok(target) = out.resolve(&attribute) else {
            continue;
        };
        rewrite_values(&mut out, &target, |value| {
            let Some(text) = value.as_str() else {
                return Ok(None);
            };
            if !text.starts_with(ENCRYPTED_PREFIX) {
                return Ok(None);
            }
            let plain = key
                .decrypt(text)
                .ok_or_else(|| Error::Decryption(target.qualified()))?;
            let (tag, body) = plain
                .split_first()
                .ok_or_else(|| Error::Decryption(target.qualified()))?;
            let body = String::from_utf8(body.to_vec())
                .map_err(|_| Error::Decryption(target.qualified()))?;
            Ok(Some(match tag {
                b'i' => TypedValue::Id(body),
                _ => TypedValue::String(body),
            }))
        })?;
        sort_if_time(&mut out, &target);
    }
    Ok(out)
}
