//! JSON config files turned into argument tokens.

use serde_json::Value;

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn value_token(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Array(items) => Ok(items.iter().map(value_token).collect::<Result<Vec<_>, _>>()?.join(",")),
        other => Err(format!("unsupported config value {other}")),
    }
}

/// Flag tokens for a JSON object; keys map to `--key` with `_` read as `-`.
pub fn tokens(obj: &serde_json::Map<String, Value>) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (key, v) in obj {
        if key == "command" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Bool(true) => out.push(flag),
            Value::Bool(false) | Value::Null => {}
            other => {
                out.push(flag);
                out.push(value_token(other)?);
            }
        }
    }
    Ok(out)
}

/// Inserts config tokens right after the subcommand so that later
/// command-line flags override them.
pub fn merge_config(args: &[String], cmd: &clap::Command) -> Result<Vec<String>, String> {
    let Some(path) = config_path(args) else {
        return Ok(args.to_vec());
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let json: Value = serde_json::from_str(&text).map_err(|e| format!("config {path} is not valid JSON: {e}"))?;
    let obj = json.as_object().ok_or_else(|| format!("config {path} must be a JSON object"))?;
    let names: Vec<String> = cmd.get_subcommands().map(|c| c.get_name().to_string()).collect();
    let mut out = args.to_vec();
    let pos = match out.iter().skip(1).position(|a| names.contains(a)) {
        Some(i) => i + 2,
        None => {
            let name = obj
                .get("command")
                .and_then(Value::as_str)
                .ok_or_else(|| "no subcommand on the command line and none in the config".to_string())?;
            out.push(name.to_string());
            out.len()
        }
    };
    let toks = tokens(obj)?;
    out.splice(pos..pos, toks);
    Ok(out)
}
