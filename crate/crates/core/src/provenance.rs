//! Content signing, publisher identities, and signed links.
//!
//! Every content object carries a signature binding its name to its payload,
//! so a cache can prove where a copy came from no matter which router served
//! it. Publishers are identified by the hash of their public key, which makes
//! identities cheap and disposable: [`make_ephemeral_identity`] derives a
//! fresh deterministic key pair from a seed, and [`SignedLink`] lets such a
//! throwaway identity vouch for existing content by digest without touching
//! the original object.
//!
//! # Canonical serialization
//!
//! Signatures and digests cover a pinned, bit-exact byte layout (all integers
//! big-endian):
//!
//! ```text
//! object:  u32 component count
//!          per component: u32 length, then the component bytes
//!          u64 payload length, then the payload bytes
//!          32-byte signer id
//! link:    the 4 ASCII bytes "LNK\0" (domain separation)
//!          link name, then target name (same name layout as above)
//!          32-byte target digest
//!          32-byte signer id
//! ```

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::names::{ContentObject, Name};

/// Publisher identity: SHA-256 of the publisher's public key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublisherId(pub [u8; 32]);

impl PublisherId {
    pub fn to_hex(self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl std::fmt::Debug for PublisherId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PublisherId({}..)", &self.to_hex()[..8])
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProvenanceError {
    #[error("malformed public key")]
    MalformedKey,
}

/// A deterministic signature scheme. Implementations must be pure functions
/// of their inputs: same seed, same keys; same message, same signature.
pub trait SignatureScheme {
    fn keygen(&self, seed: [u8; 32]) -> KeyPair;
    fn sign(&self, key: &KeyPair, message: &[u8]) -> Vec<u8>;
    /// `Ok(false)` means the signature does not verify; a key that cannot
    /// even be interpreted is an error, distinct from a failed check.
    fn verify(&self, public: &[u8], message: &[u8], signature: &[u8])
        -> Result<bool, ProvenanceError>;
}

/// Signing identity: raw key material plus the derived publisher id.
#[derive(Clone)]
pub struct KeyPair {
    pub public: Vec<u8>,
    pub secret: Vec<u8>,
    pub id: PublisherId,
}

/// Default scheme: Ed25519 (deterministic signatures, 128-bit security).
pub struct Ed25519Scheme;

impl SignatureScheme for Ed25519Scheme {
    fn keygen(&self, seed: [u8; 32]) -> KeyPair {
        let signing = SigningKey::from_bytes(&seed);
        let public = signing.verifying_key().to_bytes().to_vec();
        let id = PublisherId(Sha256::digest(&public).into());
        KeyPair { public, secret: seed.to_vec(), id }
    }

    fn sign(&self, key: &KeyPair, message: &[u8]) -> Vec<u8> {
        let secret: [u8; 32] = key.secret.as_slice().try_into().expect("ed25519 secret is 32 bytes");
        SigningKey::from_bytes(&secret).sign(message).to_vec()
    }

    fn verify(&self, public: &[u8], message: &[u8], signature: &[u8])
        -> Result<bool, ProvenanceError>
    {
        let bytes: [u8; 32] = public.try_into().map_err(|_| ProvenanceError::MalformedKey)?;
        let key = VerifyingKey::from_bytes(&bytes).map_err(|_| ProvenanceError::MalformedKey)?;
        let Ok(sig) = Signature::from_slice(signature) else {
            return Ok(false);
        };
        Ok(key.verify(message, &sig).is_ok())
    }
}

/// Derives a fresh signing identity from a seed. Deterministic: the same seed
/// always yields the same key pair, so ephemeral publishers are reproducible
/// in tests and simulations.
pub fn make_ephemeral_identity(seed: u64) -> KeyPair {
    let mut h = Sha256::new();
    h.update(b"conlab ephemeral key");
    h.update(seed.to_be_bytes());
    Ed25519Scheme.keygen(h.finalize().into())
}

fn push_name(out: &mut Vec<u8>, name: &Name) {
    out.extend((name.len() as u32).to_be_bytes());
    for comp in name.components() {
        out.extend((comp.len() as u32).to_be_bytes());
        out.extend(comp);
    }
}

/// The pinned byte layout an object signature covers (see module docs).
pub fn canonical_object_bytes(name: &Name, payload: &[u8], signer: PublisherId) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + payload.len());
    push_name(&mut out, name);
    out.extend((payload.len() as u64).to_be_bytes());
    out.extend(payload);
    out.extend(signer.0);
    out
}

fn canonical_link_bytes(link_name: &Name, target_name: &Name, digest: [u8; 32],
                        signer: PublisherId) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend(b"LNK\0");
    push_name(&mut out, link_name);
    push_name(&mut out, target_name);
    out.extend(digest);
    out.extend(signer.0);
    out
}

/// Signs `(name, payload)` under `key` and assembles the content object.
pub fn sign_object(name: &Name, payload: &[u8], key: &KeyPair) -> ContentObject {
    sign_object_with(&Ed25519Scheme, name, payload, key)
}

pub fn sign_object_with<S: SignatureScheme>(scheme: &S, name: &Name, payload: &[u8],
                                            key: &KeyPair) -> ContentObject {
    let message = canonical_object_bytes(name, payload, key.id);
    ContentObject {
        name: name.clone(),
        payload: payload.to_vec(),
        signature: scheme.sign(key, &message),
        signer: key.id,
    }
}

/// Checks the object's signature against an explicit public key (the signer
/// field is only a key *hash*, so the caller supplies the key itself).
/// Also confirms the key matches the object's claimed signer id.
pub fn verify_object(object: &ContentObject, public: &[u8]) -> Result<bool, ProvenanceError> {
    verify_object_with(&Ed25519Scheme, object, public)
}

pub fn verify_object_with<S: SignatureScheme>(scheme: &S, object: &ContentObject,
                                              public: &[u8]) -> Result<bool, ProvenanceError> {
    let message = canonical_object_bytes(&object.name, &object.payload, object.signer);
    // verify first so an unparseable key is always reported as an error,
    // never conflated with a mere id mismatch
    let sig_ok = scheme.verify(public, &message, &object.signature)?;
    let id_matches = PublisherId(Sha256::digest(public).into()) == object.signer;
    Ok(id_matches && sig_ok)
}

/// Digest of an object's canonical serialization; what links point at.
pub fn content_digest(object: &ContentObject) -> [u8; 32] {
    Sha256::digest(canonical_object_bytes(&object.name, &object.payload, object.signer)).into()
}

/// A signed binding from a (typically ephemeral) identity to existing content,
/// identified by name and canonical digest. Self-contained: carries the
/// signer's public key so it verifies without a key registry; the key is
/// cross-checked against the signer id.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SignedLink {
    pub link_name: Name,
    pub target_name: Name,
    pub target_digest: [u8; 32],
    pub signature: Vec<u8>,
    pub signer: PublisherId,
    pub signer_public: Vec<u8>,
}

/// Signs a link from `link_name` to `target` under `key`.
pub fn make_link(link_name: &Name, target: &ContentObject, key: &KeyPair) -> SignedLink {
    let digest = content_digest(target);
    let message = canonical_link_bytes(link_name, &target.name, digest, key.id);
    SignedLink {
        link_name: link_name.clone(),
        target_name: target.name.clone(),
        target_digest: digest,
        signature: Ed25519Scheme.sign(key, &message),
        signer: key.id,
        signer_public: key.public.clone(),
    }
}

/// Does `link` vouch for exactly this `target`? True iff the link signature
/// verifies under the embedded key, the key hashes to the claimed signer id,
/// the target's canonical digest matches, and the names agree.
///
/// Deliberately one hop: the target's own signer plays no part here, so a
/// link from a trusted identity confers nothing on anything the target in
/// turn refers to.
pub fn verify_link_target(link: &SignedLink, target: &ContentObject) -> bool {
    if PublisherId(Sha256::digest(&link.signer_public).into()) != link.signer {
        return false;
    }
    let message =
        canonical_link_bytes(&link.link_name, &link.target_name, link.target_digest, link.signer);
    let sig_ok = Ed25519Scheme
        .verify(&link.signer_public, &message, &link.signature)
        .unwrap_or(false);
    sig_ok && link.target_digest == content_digest(target) && target.name == link.target_name
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn n(parts: &[&str]) -> Name {
        Name::from_strs(parts)
    }

    #[test]
    fn canonical_bytes_are_pinned() {
        let name = n(&["a", "b"]);
        let bytes = canonical_object_bytes(&name, b"xyz", PublisherId([0x11; 32]));
        let mut expect = vec![
            0, 0, 0, 2, // two components
            0, 0, 0, 1, b'a',
            0, 0, 0, 1, b'b',
            0, 0, 0, 0, 0, 0, 0, 3, b'x', b'y', b'z',
        ];
        expect.extend([0x11; 32]);
        assert_eq!(bytes, expect);
    }

    #[test]
    fn keygen_is_deterministic() {
        let a = make_ephemeral_identity(7);
        let b = make_ephemeral_identity(7);
        let c = make_ephemeral_identity(8);
        assert_eq!(a.public, b.public);
        assert_eq!(a.id, b.id);
        assert_ne!(a.public, c.public);
    }

    #[test]
    fn sign_verify_round_trip() {
        let key = make_ephemeral_identity(1);
        let obj = sign_object(&n(&["doc", "1"]), b"hello", &key);
        assert_eq!(verify_object(&obj, &key.public), Ok(true));

        let other = make_ephemeral_identity(2);
        assert_eq!(verify_object(&obj, &other.public), Ok(false));
    }

    #[test]
    fn malformed_key_is_an_error_not_false() {
        let key = make_ephemeral_identity(1);
        let obj = sign_object(&n(&["doc"]), b"p", &key);
        assert_eq!(verify_object(&obj, &[0u8; 31]), Err(ProvenanceError::MalformedKey));
    }

    #[test]
    fn bit_flips_falsify_signature() {
        let key = make_ephemeral_identity(3);
        let name = n(&["site", "article", "2024"]);
        let payload: Vec<u8> = (0u8..=255).collect();
        let obj = sign_object(&name, &payload, &key);
        assert_eq!(verify_object(&obj, &key.public), Ok(true));

        let mut rng = ChaCha8Rng::seed_from_u64(0xF1A9);
        for _ in 0..1000 {
            let mut mutated = obj.clone();
            if rng.gen_bool(0.5) {
                let i = rng.gen_range(0..mutated.payload.len());
                mutated.payload[i] ^= 1 << rng.gen_range(0..8);
            } else {
                let mut comps: Vec<Vec<u8>> = mutated.name.components().to_vec();
                let c = rng.gen_range(0..comps.len());
                let i = rng.gen_range(0..comps[c].len());
                comps[c][i] ^= 1 << rng.gen_range(0..8);
                mutated.name = Name::new(comps).unwrap();
            }
            assert_eq!(verify_object(&mutated, &key.public), Ok(false));
        }
    }

    #[test]
    fn link_round_trip_and_rejections() {
        let publisher = make_ephemeral_identity(10);
        let ephemeral = make_ephemeral_identity(11);
        let target = sign_object(&n(&["data", "x"]), b"payload", &publisher);
        let link = make_link(&n(&["me", "pick"]), &target, &ephemeral);

        assert!(verify_link_target(&link, &target));

        // digest mismatch: same name, different payload
        let other = sign_object(&n(&["data", "x"]), b"tampered", &publisher);
        assert!(!verify_link_target(&link, &other));

        // signature tamper
        let mut bad = link.clone();
        bad.signature[0] ^= 1;
        assert!(!verify_link_target(&bad, &target));

        // retargeting the link name invalidates the signature
        let mut moved = link.clone();
        moved.link_name = n(&["you", "pick"]);
        assert!(!verify_link_target(&moved, &target));

        // swapped-in public key no longer hashes to the signer id
        let mut forged = link.clone();
        forged.signer_public = make_ephemeral_identity(12).public;
        assert!(!verify_link_target(&forged, &target));
    }

    #[test]
    fn link_trust_is_single_hop() {
        // the target's own signer is irrelevant to link verification
        let ephemeral = make_ephemeral_identity(20);
        let unknown = make_ephemeral_identity(21);
        let target = sign_object(&n(&["t"]), b"v", &unknown);
        let link = make_link(&n(&["l"]), &target, &ephemeral);
        assert!(verify_link_target(&link, &target));
    }

    /// Scheme pluggability: a deliberately weak test scheme drops in without
    /// touching the object plumbing.
    struct XorScheme;

    impl SignatureScheme for XorScheme {
        fn keygen(&self, seed: [u8; 32]) -> KeyPair {
            let public = seed.to_vec();
            let id = PublisherId(Sha256::digest(&public).into());
            KeyPair { public, secret: seed.to_vec(), id }
        }
        fn sign(&self, key: &KeyPair, message: &[u8]) -> Vec<u8> {
            let mut acc = key.secret.clone();
            for (i, b) in message.iter().enumerate() {
                acc[i % 32] ^= *b;
            }
            acc
        }
        fn verify(&self, public: &[u8], message: &[u8], signature: &[u8])
            -> Result<bool, ProvenanceError>
        {
            if public.len() != 32 {
                return Err(ProvenanceError::MalformedKey);
            }
            let key = KeyPair {
                public: public.to_vec(),
                secret: public.to_vec(),
                id: PublisherId(Sha256::digest(public).into()),
            };
            Ok(self.sign(&key, message) == signature)
        }
    }

    #[test]
    fn alternate_scheme_plugs_in() {
        let key = XorScheme.keygen([9; 32]);
        let obj = sign_object_with(&XorScheme, &n(&["x"]), b"p", &key);
        assert_eq!(verify_object_with(&XorScheme, &obj, &key.public), Ok(true));
        let mut bad = obj.clone();
        bad.payload[0] ^= 1;
        assert_eq!(verify_object_with(&XorScheme, &bad, &key.public), Ok(false));
    }

    #[test]
    fn ephemeral_ids_differ_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ids = std::collections::BTreeSet::new();
        for _ in 0..50 {
            ids.insert(make_ephemeral_identity(rng.gen()).id);
        }
        assert_eq!(ids.len(), 50);
    }
}
