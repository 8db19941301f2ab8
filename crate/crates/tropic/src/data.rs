//! Example documents compiled into the binary.
//!
//! A path that does not exist on disk but whose file name matches one of
//! these resolves to the bundled copy, so `tropic entropy examples/u6.json`
//! works from any directory.
use std::path::Path;

use crate::error::CliError;

pub const BUNDLED: &[(&str, &str)] = &[
    ("u2.json", include_str!("../data/u2.json")),
    ("u4.json", include_str!("../data/u4.json")),
    ("u6.json", include_str!("../data/u6.json")),
    ("u12.json", include_str!("../data/u12.json")),
    ("example1.json", include_str!("../data/example1.json")),
    ("example2.json", include_str!("../data/example2.json")),
    ("example3.json", include_str!("../data/example3.json")),
    ("binary_fan.json", include_str!("../data/binary_fan.json")),
    ("flip.json", include_str!("../data/flip.json")),
    ("iid.json", include_str!("../data/iid.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn read(path: &str) -> Result<String, CliError> {
    let p = Path::new(path);
    match std::fs::read_to_string(p) {
        Ok(text) => Ok(text),
        Err(err) => p
            .file_name()
            .and_then(|n| n.to_str())
            .filter(|_| !p.exists())
            .and_then(bundled)
            .map(str::to_string)
            .ok_or_else(|| CliError::Io { path: path.to_string(), reason: err.to_string() }),
    }
}
