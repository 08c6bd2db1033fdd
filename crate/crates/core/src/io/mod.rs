//! File formats: PLY point clouds, UDFG sparse grids, roundtrip reports.

pub mod grid;
pub mod ply;
pub mod report;

pub use grid::{encode_grid, parse_grid, read_grid, write_grid, GridFileHeader};
pub use ply::{encode_ply, parse_ply, read_ply, write_ply};
pub use report::{format_kind_table, format_sigma_table, write_jsonl};
