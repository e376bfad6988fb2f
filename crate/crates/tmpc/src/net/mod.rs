//! Three-party process orchestration: the framed wire protocol, TCP mesh
//! formation with handshake, and an in-memory mesh for single-process runs.
//! All serialization for the protocol layer is defined here.

pub mod channel;
pub mod config;
pub mod mesh;

pub use channel::{Link, FRAME_HEADER_BYTES, WIRE_MAGIC, WIRE_VERSION};
pub use config::PartyConfig;
pub use mesh::{connect_mesh, local_mesh, run_parties, MeshKeys};
