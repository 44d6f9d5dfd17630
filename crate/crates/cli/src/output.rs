use std::io::Write;
use std::path::Path;

use schwarz_core::schwarz_bounds::format_float;

use crate::Failure;

pub fn json_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format_float(*v)).collect();
    format!("[{}]", items.join(","))
}

pub fn json_string(text: &str) -> String {
    serde_json::Value::String(text.to_string()).to_string()
}

pub fn csv_row<S: AsRef<str>>(fields: &[S]) -> String {
    let mut line = fields.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

/// Writes to stdout, or atomically to `path`: the document goes to a
/// temporary file in the same directory that is renamed only once complete.
pub fn write_output(path: Option<&Path>, doc: &str) -> Result<(), Failure> {
    let io_failure = |err: std::io::Error| Failure {
        code: 2,
        message: format!("cannot write output: {err}"),
    };
    match path {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(doc.as_bytes()).map_err(io_failure)?;
            stdout.flush().map_err(io_failure)
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_failure)?;
            tmp.write_all(doc.as_bytes()).map_err(io_failure)?;
            tmp.persist(path).map_err(|e| io_failure(e.error))?;
            Ok(())
        }
    }
}
