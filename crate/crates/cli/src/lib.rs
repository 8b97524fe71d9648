//! Command-line front end for the structent library: file formats,
//! commands and learning-curve plots.

pub mod commands;
pub mod error;
pub mod formats;
pub mod plot;
