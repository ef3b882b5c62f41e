//! `--config` files: `key = value` lines whose keys are long flag names of
//! the chosen subcommand. Values from the file are spliced into the
//! argument list ahead of the real flags, so flags given on the command
//! line win. Repeatable flags accumulate.

use std::ffi::OsString;
use std::fs;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgAction, Command};

/// Parsed `key = value` pairs, in file order.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected `key = value`", n + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", n + 1);
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

/// Removes `--config <path>` / `--config=<path>` from `args` and inserts the
/// file's settings right after the subcommand name.
pub fn expand(mut args: Vec<OsString>, cli: &Command) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let arg = args[i].to_string_lossy().into_owned();
        if arg == "--" {
            break;
        }
        if arg == "--config" {
            if i + 1 >= args.len() {
                bail!("--config needs a file path");
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
            continue;
        }
        if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(OsString::from(p));
            args.remove(i);
            continue;
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(args);
    };

    let sub_pos = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
        .ok_or_else(|| anyhow!("--config given without a subcommand"))?;
    let sub_name = args[sub_pos].to_string_lossy().into_owned();
    let sub = cli
        .find_subcommand(&sub_name)
        .ok_or_else(|| anyhow!("unknown subcommand {sub_name:?}"))?;

    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let mut injected = Vec::new();
    for (key, value) in parse(&text)? {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| anyhow!("config key {key:?} is not a flag of `{sub_name}`"))?;
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "yes" | "on" | "1" => injected.push(OsString::from(format!("--{key}"))),
                "false" | "no" | "off" | "0" => {}
                other => bail!("config key {key:?}: expected a boolean, got {other:?}"),
            },
            _ => {
                injected.push(OsString::from(format!("--{key}")));
                injected.push(OsString::from(value));
            }
        }
    }
    let tail = args.split_off(sub_pos + 1);
    args.extend(injected);
    args.extend(tail);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs() {
        let pairs = parse("# comment\n\nduration = 700\nsim_log=/tmp/x.log\noverride = d1=7,10,0.5\n").unwrap();
        assert_eq!(
            pairs,
            [
                ("duration".to_string(), "700".to_string()),
                ("sim-log".to_string(), "/tmp/x.log".to_string()),
                ("override".to_string(), "d1=7,10,0.5".to_string()),
            ]
        );
        assert!(parse("novalue\n").is_err());
        assert!(parse(" = 3\n").is_err());
    }
}
