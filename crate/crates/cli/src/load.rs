//! Config file loading with `path:line:col: message` diagnostics.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use sqkd_core::config::ConfigDocument;

use crate::Failure;

pub struct Loaded<A> {
    pub doc: ConfigDocument<A>,
    pub text: String,
}

pub fn load<A: DeserializeOwned>(path: &Path) -> Result<Loaded<A>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: cannot read config: {e}", path.display())))?;
    let doc: ConfigDocument<A> = serde_json::from_str(&text).map_err(|e| {
        let line = e.line().max(1);
        let col = e.column().max(1);
        Failure::Config(format!("{}:{line}:{col}: {}", path.display(), strip_position(&e.to_string())))
    })?;
    Ok(Loaded { doc, text })
}

/// serde_json appends " at line L column C"; the prefix already carries it.
fn strip_position(msg: &str) -> &str {
    match msg.rfind(" at line ") {
        Some(i) => &msg[..i],
        None => msg,
    }
}

/// Position of the first `"key"` in `text`, 1-based.
pub fn anchor(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    text.lines()
        .enumerate()
        .find_map(|(i, line)| line.find(&needle).map(|c| (i + 1, c + 1)))
        .unwrap_or((1, 1))
}

pub fn diagnostic(path: &Path, text: &str, key: &str, msg: impl std::fmt::Display) -> Failure {
    let (line, col) = anchor(text, key);
    Failure::Config(format!("{}:{line}:{col}: {msg}", path.display()))
}
