use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::commands::Failure;

/// Where a command writes. A path ending in `.json` names the JSON file and
/// the CSV goes next to it; any other path is a directory receiving
/// `<stem>.json` and `<stem>.csv`. Without a path the JSON goes to stdout.
pub struct Sink {
    out: Option<PathBuf>,
    stem: &'static str,
}

impl Sink {
    pub fn new(out: Option<PathBuf>, stem: &'static str) -> Self {
        Sink { out, stem }
    }

    fn paths(&self) -> Option<(PathBuf, PathBuf)> {
        let out = self.out.as_ref()?;
        if out.extension().is_some_and(|e| e == "json") {
            Some((out.clone(), out.with_extension("csv")))
        } else {
            Some((out.join(format!("{}.json", self.stem)), out.join(format!("{}.csv", self.stem))))
        }
    }

    pub fn emit<T: Serialize>(&self, value: &T, csv: Option<String>) -> Result<(), Failure> {
        let json = serde_json::to_string_pretty(value).map_err(|e| Failure::Numeric(e.to_string()))?;
        match self.paths() {
            None => print_stdout(&json),
            Some((jp, cp)) => {
                write_atomic(&jp, json.as_bytes())?;
                if let Some(c) = csv {
                    write_atomic(&cp, c.as_bytes())?;
                }
                Ok(())
            }
        }
    }
}

/// Prints to stdout; a closed pipe ends output quietly.
pub fn print_stdout(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    let res = out
        .write_all(text.as_bytes())
        .and_then(|_| if text.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") })
        .and_then(|_| out.flush());
    match res {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Input(e.to_string())),
        _ => Ok(()),
    }
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Input(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}

/// `rho,value` rows, optionally prefixed by a label column.
pub fn pairs_csv<'a>(header: &str, rows: impl IntoIterator<Item = (String, f64, f64)> + 'a) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for (label, rho, v) in rows {
        if label.is_empty() {
            s.push_str(&format!("{rho},{v}\n"));
        } else {
            s.push_str(&format!("{label},{rho},{v}\n"));
        }
    }
    s
}
