//! Core library of an offline forensic GIS service: spatial primitives,
//! evidence parsers, the case store, investigative analyses and the tile
//! archive.

pub mod analysis;
pub mod evidence;
pub mod importer;
pub mod ingest;
pub mod spatial;
pub mod store;
pub mod synthetic;
pub mod tiles;
