//! File formats, IO and the `trlsum` command line on top of `trlsum-core`.

mod cli;
pub mod io;

pub use cli::run_cli;
