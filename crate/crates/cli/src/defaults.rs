use clap::Command;
use serde_json::{Map, Value};

/// Default values for every flag, keyed by subcommand and argument id.
pub const DEFAULTS_JSON: &str = include_str!("../defaults.json");

pub fn defaults() -> Map<String, Value> {
    match serde_json::from_str(DEFAULTS_JSON) {
        Ok(Value::Object(map)) => map,
        _ => panic!("defaults.json must hold a JSON object"),
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Install the defaults on `cmd` so that they show up in `--help`.
/// Top-level scalars belong to the global flags, objects to subcommands.
pub fn apply(mut cmd: Command) -> Command {
    for (key, value) in defaults() {
        match value {
            Value::Object(args) => {
                cmd = cmd.mut_subcommand(key, |mut sub| {
                    for (id, v) in &args {
                        let v = render(v);
                        sub = sub.mut_arg(id, |a| a.required(false).default_value(v));
                    }
                    sub
                });
            }
            v => {
                let v = render(&v);
                cmd = cmd.mut_arg(key, |a| a.required(false).default_value(v));
            }
        }
    }
    cmd
}
