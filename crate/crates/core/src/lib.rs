//! Deterministic laboratory for content-network cache privacy.
//!
//! Routers in a content-centric network answer interests out of in-network
//! caches, which leaks who-fetched-what through timing. This crate builds the
//! whole experiment end to end:
//!
//! - [`names`] / [`forwarding`]: hierarchical names and the router pipeline
//!   (content store → pending-interest table → longest-prefix routes);
//! - [`simnet`]: a deterministic discrete-event network simulator over that
//!   pipeline, with microsecond clocks and reproducible traces;
//! - [`attacks`]: cache probing — timing classification of cache state,
//!   periodic monitoring of a victim's fetches, and exclusion-driven
//!   enumeration of a neighbor cache's contents;
//! - [`defenses`]: reply-delay policies (wait-before-reply, delay-first-k),
//!   collaborative cache partitioning, and probabilistic placement;
//! - [`bloomfwd`]: Bloom-filter name obfuscation for forwarding state;
//! - [`covermix`]: XOR cover-file coding so caches hold only mixed blocks;
//! - [`provenance`]: ephemeral signing identities and signed name links;
//! - [`harness`]: scenario files, workloads, metrics, and report generation.
//!
//! Everything is seeded: the same scenario and seed produce byte-identical
//! traces.
//!
//! ```
//! use conlab::names::{Interest, Name};
//! use conlab::forwarding::{Action, FaceId, RouterState};
//! use conlab::provenance::{make_ephemeral_identity, sign_object};
//!
//! let mut r = RouterState::new(16, 4_000_000, 100, 1);
//! r.fib.add(Name::from_strs(&["movies"]), FaceId(0));
//!
//! let name = Name::from_strs(&["movies", "title"]);
//! let key = make_ephemeral_identity(7);
//! r.seed_cs(sign_object(&name, b"frame", &key), 0);
//!
//! let acts = r.on_interest(&Interest::new(name), FaceId(2), 1_000);
//! assert!(matches!(acts.as_slice(), [Action::SendData { from_cache: true, .. }]));
//! ```

pub mod attacks;
pub mod bloomfwd;
pub mod covermix;
pub mod defenses;
pub mod forwarding;
pub mod harness;
pub mod names;
pub mod provenance;
pub mod simnet;

pub use forwarding::{Action, FaceId, RouterState};
pub use names::{ContentObject, Interest, Name};
