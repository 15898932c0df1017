//! Config-file support. A TOML file whose keys are the long flag names of the
//! invoked subcommand (either `t0` or `t-0` style is accepted) is expanded into
//! command-line arguments placed before the real ones; since later
//! occurrences of a flag win, explicit flags override the file.

use std::ffi::OsString;
use std::path::Path;

use toml::{Table, Value};

fn render(value: &Value) -> Result<String, String> {
    Ok(match value {
        Value::String(s) => s.clone(),
        Value::Integer(i) => i.to_string(),
        Value::Float(f) => f.to_string(),
        Value::Boolean(b) => b.to_string(),
        Value::Array(items) => items.iter().map(render).collect::<Result<Vec<_>, _>>()?.join(","),
        other => return Err(format!("unsupported value {other}")),
    })
}

/// Expands a parsed config table into flag arguments.
///
/// `known` lists the long flags of the subcommand and `switches` those that
/// take no value.
pub fn table_to_args(table: &Table, known: &[String], switches: &[String]) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = key.replace('_', "-");
        if !known.contains(&flag) || flag == "config" {
            return Err(format!("unknown config key '{key}'"));
        }
        if switches.contains(&flag) {
            match value {
                Value::Boolean(true) => out.push(OsString::from(format!("--{flag}"))),
                Value::Boolean(false) => {}
                _ => return Err(format!("config key '{key}' must be true or false")),
            }
            continue;
        }
        out.push(OsString::from(format!("--{flag}")));
        out.push(OsString::from(render(value).map_err(|e| format!("config key '{key}': {e}"))?));
    }
    Ok(out)
}

pub fn read_table(path: &Path) -> Result<Table, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    text.parse::<Table>().map_err(|e| format!("invalid config {}: {e}", path.display()))
}

/// Finds `--config <path>` or `--config=<path>` in the raw arguments.
pub fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(OsString::from(p));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn expands_keys() {
        let table: Table = "t0 = 300\nblock_c = 1.5\nfwer = true\nmethods = [\"baws\", \"full\"]\n".parse().unwrap();
        let args = table_to_args(&table, &names(&["t0", "block-c", "fwer", "methods"]), &names(&["fwer"])).unwrap();
        let args: Vec<String> = args.into_iter().map(|a| a.into_string().unwrap()).collect();
        assert!(args.windows(2).any(|w| w == ["--t0", "300"]));
        assert!(args.windows(2).any(|w| w == ["--block-c", "1.5"]));
        assert!(args.windows(2).any(|w| w == ["--methods", "baws,full"]));
        assert!(args.contains(&"--fwer".to_string()));
    }

    #[test]
    fn rejects_unknown_keys() {
        let table: Table = "colour = 1\n".parse().unwrap();
        assert!(table_to_args(&table, &names(&["t0"]), &[]).is_err());
        let table: Table = "fwer = 3\n".parse().unwrap();
        assert!(table_to_args(&table, &names(&["fwer"]), &names(&["fwer"])).is_err());
    }

    #[test]
    fn finds_config_flag() {
        let a: Vec<OsString> = ["baws", "backtest", "--config", "x.toml"].iter().map(OsString::from).collect();
        assert_eq!(config_path(&a), Some(OsString::from("x.toml")));
        let a: Vec<OsString> = ["baws", "backtest", "--config=y.toml"].iter().map(OsString::from).collect();
        assert_eq!(config_path(&a), Some(OsString::from("y.toml")));
        assert_eq!(config_path(&a[..2]), None);
    }
}
