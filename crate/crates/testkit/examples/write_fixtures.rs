//! Writes the synthetic fixtures under a directory (default
//! `fixtures/synthetic`): a three-language benchmark with its manifest and
//! four Apache-like corpora for `generalize`.
//!
//! ```text
//! cargo run -p athalang-testkit --example write_fixtures -- fixtures/synthetic
//! ```

use std::path::PathBuf;

use athalang_testkit::{
    write_apache_like, write_benchmark, ENGLISH_LIKE, NAVAJO_LIKE, POLISH_LIKE, SPANISH_LIKE,
};

fn main() -> std::io::Result<()> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fixtures/synthetic"));
    let manifest = write_benchmark(
        &dir.join("benchmark"),
        &[NAVAJO_LIKE, SPANISH_LIKE, POLISH_LIKE, ENGLISH_LIKE],
        200,
        7,
    )?;
    write_apache_like(&dir.join("apache"), 11)?;
    println!("{}", manifest.display());
    Ok(())
}
