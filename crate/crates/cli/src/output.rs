//! CSV files with a provenance comment line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

/// First line of every output file.
pub fn header_line(command: &str, spec_hash: &str, seed: u64) -> String {
    format!("# adabias {command} spec_sha256={spec_hash} seed={seed}")
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &str, columns: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "{header}")?;
        let mut writer = csv::Writer::from_writer(buf);
        writer.write_record(columns)?;
        Ok(Self {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

/// Writes a whole text file with the provenance line prepended.
pub fn write_text(path: &Path, header: &str, body: &str) -> Result<(), CliError> {
    std::fs::write(path, format!("{header}\n{body}"))
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}
