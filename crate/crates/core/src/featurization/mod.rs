//! Ligand ingestion and representation.

pub mod fingerprint;
pub mod library;
pub mod morgan;
pub mod properties;
pub mod smiles;

pub use fingerprint::Fingerprint;
pub use library::{load_library_csv, Library, LibraryLoad, LibrarySchema, Ligand, SkippedRow};
pub use morgan::{morgan_codes, morgan_fingerprint, FingerprintParams};
pub use properties::{assemble_property_vector, Normalizer};
pub use smiles::{parse_smiles, write_smiles, Atom, Bond, BondOrder, MolecularGraph};
