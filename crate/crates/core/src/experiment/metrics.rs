use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub run_id: String,
    pub task: usize,
    pub epoch: usize,
    /// Test accuracy per task; `None` for tasks not yet seen.
    pub accuracies: Vec<Option<f64>>,
    pub loss: f64,
    pub seconds: f64,
}

impl MetricsRecord {
    pub fn summary(&self) -> String {
        let accs: Vec<String> = self
            .accuracies
            .iter()
            .flatten()
            .map(|a| format!("{:.2}", 100.0 * a))
            .collect();
        format!(
            "{} task {} epoch {}: loss {:.4} acc [{}] {:.0}s",
            self.run_id,
            self.task,
            self.epoch,
            self.loss,
            accs.join(" "),
            self.seconds
        )
    }
}

/// Writes `metrics.csv`, flushing after every row.
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
    columns: usize,
}

impl MetricsWriter {
    pub fn create(path: impl AsRef<Path>, config_hash: &str, columns: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = Self {
            path,
            out: BufWriter::new(file),
            columns,
        };
        let mut header = String::from("run_id,task,epoch");
        for t in 0..columns {
            write!(header, ",acc_task_{t}").unwrap();
        }
        header.push_str(",loss,seconds");
        w.line(&format!("# config_hash={config_hash}"))?;
        w.line(&header)?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, rec: &MetricsRecord) -> Result<()> {
        let mut row = format!("{},{},{}", rec.run_id, rec.task, rec.epoch);
        for t in 0..self.columns {
            match rec.accuracies.get(t).copied().flatten() {
                Some(a) => write!(row, ",{a:.6}").unwrap(),
                None => row.push(','),
            }
        }
        write!(row, ",{:.6},{:.3}", rec.loss, rec.seconds).unwrap();
        self.line(&row)
    }
}
