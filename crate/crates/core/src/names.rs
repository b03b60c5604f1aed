//! Names, interests, and content objects.
//!
//! A [`Name`] is an ordered sequence of opaque byte components. The canonical
//! text form joins components with `/` and percent-encodes every byte that is
//! not URI-unreserved, so each name has exactly one rendering and
//! `parse_name(&render_name(&n))` returns `n` for arbitrary component bytes.
//!
//! Ordering on names is lexicographic over the component sequence. That order
//! is load-bearing: content-store lookups return the smallest matching name,
//! which is what makes exclusion-driven enumeration deterministic.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::provenance::PublisherId;

/// Hierarchical content name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Name {
    components: Vec<Vec<u8>>,
}

impl Name {
    /// Name with zero components; renders as `/` and is a prefix of everything.
    pub fn root() -> Name {
        Name { components: Vec::new() }
    }

    /// Builds a name from raw components. Components may hold arbitrary bytes
    /// but must be non-empty.
    pub fn new(components: Vec<Vec<u8>>) -> Result<Name, NameError> {
        if let Some(i) = components.iter().position(|c| c.is_empty()) {
            return Err(NameError::EmptyComponent { index: i });
        }
        Ok(Name { components })
    }

    /// Test/demo convenience: `Name::from_strs(&["a", "b"])` is `/a/b`.
    ///
    /// # Panics
    /// Panics on an empty component; intended for literals.
    pub fn from_strs(parts: &[&str]) -> Name {
        Name::new(parts.iter().map(|p| p.as_bytes().to_vec()).collect())
            .expect("literal name components must be non-empty")
    }

    pub fn components(&self) -> &[Vec<u8>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// First component, if any — the "routable prefix" used by FIB
    /// announcements and cache partitioning.
    pub fn first_component(&self) -> Option<&[u8]> {
        self.components.first().map(|c| c.as_slice())
    }

    /// The name truncated to its first `n` components.
    pub fn prefix(&self, n: usize) -> Name {
        Name { components: self.components[..n.min(self.components.len())].to_vec() }
    }

    /// New name with one more component appended.
    pub fn child(&self, component: &[u8]) -> Result<Name, NameError> {
        let mut components = self.components.clone();
        components.push(component.to_vec());
        Name::new(components)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_name(self))
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_name(self))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NameError {
    #[error("name text must start with '/'")]
    MissingLeadingSlash,
    #[error("empty name component at index {index}")]
    EmptyComponent { index: usize },
    #[error("bad percent escape at byte {pos}")]
    BadEscape { pos: usize },
}

/// Interest packet: a request for any content object whose name extends
/// `name` and is not in `exclusions`.
///
/// `scope` bounds how many routers the interest may traverse: it is
/// decremented on arrival at each router, and an interest whose remaining
/// scope is zero is served from that router's store or dropped, never
/// forwarded. `None` means unlimited. `hops` counts routers traversed so far;
/// it is transport metadata maintained by the forwarding plane (position
/// information for cache-placement policies), not part of request identity.
#[derive(Clone, PartialEq, Eq)]
pub struct Interest {
    pub name: Name,
    pub scope: Option<u32>,
    pub exclusions: BTreeSet<Name>,
    pub nonce: u64,
    pub hops: u32,
}

impl Interest {
    pub fn new(name: Name) -> Interest {
        Interest { name, scope: None, exclusions: BTreeSet::new(), nonce: 0, hops: 0 }
    }

    pub fn with_scope(mut self, scope: u32) -> Interest {
        self.scope = Some(scope);
        self
    }

    pub fn with_exclusions(mut self, exclusions: BTreeSet<Name>) -> Interest {
        self.exclusions = exclusions;
        self
    }
}

impl fmt::Debug for Interest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Interest({}", self.name)?;
        if let Some(s) = self.scope {
            write!(f, " scope={s}")?;
        }
        if !self.exclusions.is_empty() {
            write!(f, " excl={}", self.exclusions.len())?;
        }
        write!(f, ")")
    }
}

/// Named, signed unit of content.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ContentObject {
    pub name: Name,
    pub payload: Vec<u8>,
    pub signature: Vec<u8>,
    pub signer: PublisherId,
}

/// Prefix-or-equal test: every component of `p` matches the corresponding
/// component of `n`. Equal names count as prefixes, so an interest for a full
/// name matches exactly that object.
pub fn is_prefix_of(p: &Name, n: &Name) -> bool {
    p.components.len() <= n.components.len()
        && p.components.iter().zip(&n.components).all(|(a, b)| a == b)
}

/// Does object `o` satisfy interest `i`? Prefix-or-equal on the name, and the
/// object's full name must not be excluded. Exclusion is full-name equality
/// only: excluding `/a/1` does not exclude `/a/1/x`.
pub fn matches_interest(i: &Interest, o: &ContentObject) -> bool {
    is_prefix_of(&i.name, &o.name) && !i.exclusions.contains(&o.name)
}

fn is_unreserved(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~')
}

/// Canonical text form: `/`-joined components, each byte rendered literally if
/// URI-unreserved and as uppercase `%XX` otherwise. The root name renders as
/// `/`.
pub fn render_name(n: &Name) -> String {
    if n.components.is_empty() {
        return "/".to_string();
    }
    let mut out = String::new();
    for comp in &n.components {
        out.push('/');
        for &b in comp {
            if is_unreserved(b) {
                out.push(b as char);
            } else {
                out.push_str(&format!("%{b:02X}"));
            }
        }
    }
    out
}

/// Parses the canonical text form. Accepts lowercase hex in escapes and any
/// unescaped byte other than `/` and `%`, so it is a superset of what
/// [`render_name`] emits; rendering then parsing is the identity on names.
pub fn parse_name(text: &str) -> Result<Name, NameError> {
    if !text.starts_with('/') {
        return Err(NameError::MissingLeadingSlash);
    }
    if text == "/" {
        return Ok(Name::root());
    }
    let mut components = Vec::new();
    // byte offset of the character after the leading '/'
    let mut offset = 1usize;
    for (index, part) in text[1..].split('/').enumerate() {
        if part.is_empty() {
            return Err(NameError::EmptyComponent { index });
        }
        let bytes = part.as_bytes();
        let mut comp = Vec::with_capacity(bytes.len());
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] == b'%' {
                let hi = bytes.get(i + 1).and_then(|b| (*b as char).to_digit(16));
                let lo = bytes.get(i + 2).and_then(|b| (*b as char).to_digit(16));
                match (hi, lo) {
                    (Some(h), Some(l)) => {
                        comp.push((h as u8) << 4 | l as u8);
                        i += 3;
                    }
                    _ => return Err(NameError::BadEscape { pos: offset + i }),
                }
            } else {
                comp.push(bytes[i]);
                i += 1;
            }
        }
        components.push(comp);
        offset += part.len() + 1;
    }
    Name::new(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n(parts: &[&str]) -> Name {
        Name::from_strs(parts)
    }

    #[test]
    fn parse_basic() {
        let name = parse_name("/a/b/c").unwrap();
        assert_eq!(name.len(), 3);
        assert_eq!(name.components()[1], b"b");
    }

    #[test]
    fn root_round_trip() {
        assert_eq!(parse_name("/").unwrap(), Name::root());
        assert_eq!(render_name(&Name::root()), "/");
    }

    #[test]
    fn binary_components_escape() {
        let name = Name::new(vec![vec![0x00, 0x2F, b'a'], b"ok".to_vec()]).unwrap();
        assert_eq!(render_name(&name), "/%00%2Fa/ok");
        assert_eq!(parse_name("/%00%2fa/ok").unwrap(), name);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_name("a/b"), Err(NameError::MissingLeadingSlash));
        assert_eq!(parse_name("/a//b"), Err(NameError::EmptyComponent { index: 1 }));
        assert_eq!(parse_name("/a/%Z1"), Err(NameError::BadEscape { pos: 3 }));
        assert_eq!(parse_name("/a/b%2"), Err(NameError::BadEscape { pos: 4 }));
    }

    #[test]
    fn lexicographic_order() {
        let mut names = vec![n(&["b", "1"]), n(&["a", "2"]), n(&["a"]), n(&["a", "1"])];
        names.sort();
        assert_eq!(names, vec![n(&["a"]), n(&["a", "1"]), n(&["a", "2"]), n(&["b", "1"])]);
    }

    #[test]
    fn prefix_or_equal() {
        assert!(is_prefix_of(&Name::root(), &n(&["a"])));
        assert!(is_prefix_of(&n(&["a"]), &n(&["a", "1"])));
        assert!(is_prefix_of(&n(&["a"]), &n(&["a"])));
        assert!(!is_prefix_of(&n(&["a", "1"]), &n(&["a"])));
        assert!(!is_prefix_of(&n(&["ab"]), &n(&["a", "b"])));
    }

    #[test]
    fn exclusion_is_full_name_only() {
        let sig = crate::provenance::make_ephemeral_identity(1);
        let obj = |name: Name| crate::provenance::sign_object(&name, b"x", &sig);
        let mut i = Interest::new(n(&["a"]));
        i.exclusions.insert(n(&["a", "1"]));
        assert!(!matches_interest(&i, &obj(n(&["a", "1"]))));
        assert!(matches_interest(&i, &obj(n(&["a", "1", "x"]))));
        assert!(matches_interest(&i, &obj(n(&["a", "2"]))));
        assert!(!matches_interest(&i, &obj(n(&["b"]))));
    }

    fn arb_name() -> impl Strategy<Value = Name> {
        prop::collection::vec(prop::collection::vec(any::<u8>(), 1..8), 0..5)
            .prop_map(|c| Name::new(c).unwrap())
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(name in arb_name()) {
            prop_assert_eq!(parse_name(&render_name(&name)).unwrap(), name);
        }

        #[test]
        fn prefix_transitive(a in arb_name(), b in arb_name(), c in arb_name()) {
            if is_prefix_of(&a, &b) && is_prefix_of(&b, &c) {
                prop_assert!(is_prefix_of(&a, &c));
            }
        }

        #[test]
        fn prefix_antisymmetric(a in arb_name(), b in arb_name()) {
            if is_prefix_of(&a, &b) && is_prefix_of(&b, &a) {
                prop_assert_eq!(a, b);
            }
        }
    }
}
