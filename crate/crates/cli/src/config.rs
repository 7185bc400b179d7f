//! `--config FILE` support: `key = value` lines become `--key value` flags
//! unless the same flag is already on the command line.

use std::ffi::OsString;
use std::fs;

use anyhow::{bail, Context, Result};

/// Position of `--config` and its value in `args`, if present.
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn has_flag(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_value = format!("--{key}=");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&with_value)
    })
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, found {raw:?}", i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            bail!("config line {}: invalid key {:?}", i + 1, k.trim());
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Appends config-file entries to `args` as flags. Boolean entries take
/// `true`/`false`; `false` adds nothing.
pub fn merge(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let mut merged = args.clone();
    for (key, value) in parse(&text)? {
        if has_flag(&args, &key) {
            continue;
        }
        match value.as_str() {
            "true" => merged.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                merged.push(format!("--{key}").into());
                merged.push(value.into());
            }
        }
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_comments() {
        let kv = parse("# header\nlr = 0.01\n\nbatch_size=50 # trailing\n").unwrap();
        assert_eq!(kv, vec![("lr".into(), "0.01".into()), ("batch-size".into(), "50".into())]);
        assert!(parse("novalue\n").is_err());
        assert!(parse("config = other\n").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "lr = 0.01\nbatch = 50\nbinarize = true\nstandardize = false\n").unwrap();
        let args = os(&["prog", "train", "--batch=10", "--config", path.to_str().unwrap()]);
        let merged = merge(args).unwrap();
        let tail: Vec<String> = merged[5..].iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(tail, vec!["--lr", "0.01", "--binarize"]);
    }

    #[test]
    fn no_config_is_identity() {
        let args = os(&["prog", "eval", "--binarize"]);
        assert_eq!(merge(args.clone()).unwrap(), args);
    }
}
