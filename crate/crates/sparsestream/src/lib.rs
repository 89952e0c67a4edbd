//! File formats, wall clock and command line for `sparsestream-core`.

pub mod cli;
pub mod clock;
pub mod csv_io;
pub mod error;
pub mod report;

pub use clock::WallClock;
pub use csv_io::{load_csv, read_table, write_table, CsvOptions, LabelColumn, Table};
pub use error::{Error, Result};
pub use report::{emit_reports, write_reports, EmitOptions, ReportFormat};
