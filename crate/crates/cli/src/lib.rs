//! Experiment runner for the critical-killing laboratory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod error;
pub mod output;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::args::{Cli, Command};
use crate::commands::{Context, Outcome};
pub use crate::error::{CliError, CliResult};
use crate::output::{read_header, write_plot, write_report, Format, Header};

/// Overlays the flags given on the command line onto the config file.
/// Unset flags (and false switches) leave the file's value in place.
pub fn merge_config<T>(file: Option<&Value>, flags: &T) -> CliResult<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let mut base = match file {
        None => serde_json::Map::new(),
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(CliError::Usage("config must be a JSON object".into())),
    };
    let known = match serde_json::to_value(T::default())? {
        Value::Object(m) => m,
        _ => unreachable!("argument structs serialize to objects"),
    };
    if let Some(k) = base.keys().find(|k| !known.contains_key(*k)) {
        return Err(CliError::Usage(format!("unknown config key {k:?}")));
    }
    if let Value::Object(over) = serde_json::to_value(flags)? {
        for (k, v) in over {
            if !(v.is_null() || v == Value::Bool(false)) {
                base.insert(k, v);
            }
        }
    }
    Ok(serde_json::from_value(Value::Object(base))?)
}

fn load_config(path: &Path) -> CliResult<Value> {
    let f = File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Splits an optional `command` key off a config object and checks it.
fn take_command(config: Option<Value>, name: &str) -> CliResult<Option<Value>> {
    let Some(mut v) = config else { return Ok(None) };
    if let Some(obj) = v.as_object_mut() {
        if let Some(c) = obj.remove("command") {
            if c != Value::String(name.into()) {
                return Err(CliError::Usage(format!("config is for command {c}, not {name:?}")));
            }
        }
    }
    Ok(Some(v))
}

fn blank(name: &str) -> CliResult<Command> {
    use crate::args::*;
    Ok(match name {
        "constants" => Command::Constants(ConstantsArgs::default()),
        "oracle" => Command::Oracle(OracleArgs::default()),
        "survival" => Command::Survival(SurvivalArgs::default()),
        "factorize" => Command::Factorize(FactorizeArgs::default()),
        "series" => Command::Series(SeriesArgs::default()),
        "threep" => Command::Threep(ThreepArgs::default()),
        other => return Err(CliError::Usage(format!("cannot replay command {other:?}"))),
    })
}

/// Runs one command; returns its name, the fully resolved config and the outcome.
pub fn execute(command: Command, config: Option<Value>, ctx: &Context) -> CliResult<(String, Value, Outcome)> {
    let name = command.name();
    let config = take_command(config, name)?;
    let file = config.as_ref();
    macro_rules! go {
        ($a:expr, $f:expr) => {{
            let mut a = merge_config(file, &$a)?;
            let out = $f(&mut a)?;
            (serde_json::to_value(&a)?, out)
        }};
    }
    let (resolved, outcome) = match command {
        Command::Constants(a) => go!(a, commands::constants),
        Command::Oracle(a) => go!(a, commands::oracle),
        Command::Survival(a) => go!(a, |a: &mut _| commands::survival(a, ctx)),
        Command::Factorize(a) => go!(a, |a: &mut _| commands::factorize(a, ctx)),
        Command::Series(a) => go!(a, commands::series),
        Command::Threep(a) => go!(a, |a: &mut _| commands::threep(a, ctx)),
        Command::Replay(r) => {
            let h = read_header(BufReader::new(File::open(&r.from)?))?;
            if h.version != output::VERSION {
                eprintln!("note: replaying a file written by version {}", h.version);
            }
            return execute(blank(&h.command)?, Some(h.config), ctx);
        }
    };
    Ok((name.to_string(), resolved, outcome))
}

pub fn run(cli: Cli) -> CliResult<()> {
    let ctx = Context {
        workers: cli.workers.unwrap_or(0),
    };
    let config = cli.config.as_deref().map(load_config).transpose()?;
    let (name, resolved, outcome) = execute(cli.command, config, &ctx)?;
    let header = Header::new(&name, resolved);
    let format = cli.format.unwrap_or_else(|| Format::for_path(cli.output.as_deref()));
    match &cli.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_report(&mut w, format, &header, &outcome.report)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            write_report(&mut w, format, &header, &outcome.report)?;
        }
    }
    if let Some(path) = &cli.plot {
        let mut w = BufWriter::new(File::create(path)?);
        write_plot(&mut w, &header, &outcome.report.plot)?;
        w.flush()?;
    }
    match outcome.failure {
        Some(msg) => Err(CliError::Tolerance(msg)),
        None => Ok(()),
    }
}
