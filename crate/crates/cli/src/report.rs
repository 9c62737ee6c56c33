//! Report envelopes and text renderers.

use serde::Serialize;
use sqkd_core::SessionConfig;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
pub struct Report<'a, A: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub config: ConfigEcho<'a, A>,
    pub result: R,
}

/// The configuration as actually executed: seed after overrides, derived `N`.
#[derive(Serialize)]
pub struct ConfigEcho<'a, A: Serialize> {
    pub session: SessionConfig,
    #[serde(rename = "N")]
    pub photon_count: usize,
    pub attack: &'a A,
    pub attack_label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
}

pub fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| format!("cannot serialize report: {e}"))
}

pub fn csv_rows<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| format!("cannot write CSV: {e}"))?;
    }
    let bytes = w.into_inner().map_err(|e| format!("cannot write CSV: {e}"))?;
    String::from_utf8(bytes).map_err(|e| format!("cannot write CSV: {e}"))
}

#[derive(Serialize)]
struct KeyValue<'a> {
    quantity: &'a str,
    value: &'a str,
}

/// Two-column `quantity,value` CSV.
pub fn kv_csv(rows: &[(String, String)]) -> Result<String, String> {
    csv_rows(rows.iter().map(|(k, v)| KeyValue { quantity: k, value: v }))
}

/// Aligned `key  value` lines.
pub fn kv_table(title: &str, rows: &[(String, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut out = format!("{title}\n");
    for (k, v) in rows {
        let pad = width - k.chars().count();
        out.push_str(&format!("  {k}{}  {v}\n", " ".repeat(pad)));
    }
    out
}

/// Aligned columns with a header row and a rule under it.
pub fn grid(title: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        format!("  {}\n", padded.join("  ").trim_end())
    };
    let mut out = format!("{title}\n");
    out.push_str(&line(header.to_vec()));
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&line(rule.iter().map(String::as_str).collect()));
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

pub fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), fixed)
}
