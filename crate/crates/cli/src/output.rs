//! Output files. Numbers are written with Rust's shortest round-trip
//! formatting, so identical runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bayes_ergm::{PosteriorSample, SummaryTable};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        Ok(OutDir { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(CliError::io(&p))?;
        log::info!("wrote {}", p.display());
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        self.write(name, text)
    }
}

const QUANTILE_HEADER: &str = "q2.5,q25,q50,q75,q97.5";

pub fn summary_csv(t: &SummaryTable) -> String {
    let mut s = format!("parameter,mean,sd,naive_se,ts_se,{QUANTILE_HEADER},acceptance_rate\n");
    for c in &t.coordinates {
        let _ = write!(s, "{},{},{},{},{}", c.name, c.mean, c.sd, c.naive_se, c.ts_se);
        for q in c.quantiles {
            let _ = write!(s, ",{q}");
        }
        let _ = writeln!(s, ",{}", t.acceptance_rate);
    }
    s
}

pub fn draws_csv(sample: &PosteriorSample) -> String {
    let mut s = String::from("chain,iter");
    for n in &sample.names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (r, row) in sample.draws.iter().enumerate() {
        let _ = write!(s, "{},{}", sample.chain_of(r), sample.iteration_of(r));
        for x in row {
            let _ = write!(s, ",{x}");
        }
        s.push('\n');
    }
    s
}

/// Reads a draws file written by [`draws_csv`].
pub fn read_draws(path: &Path) -> CliResult<PosteriorSample> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::malformed(path, e))?;
    let header = rdr.headers().map_err(|e| CliError::malformed(path, e))?.clone();
    if header.len() < 3 || &header[0] != "chain" || &header[1] != "iter" {
        return Err(CliError::malformed(path, "expected a `chain,iter,...` header"));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut draws = Vec::new();
    let mut nchains = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::malformed(path, e))?;
        let num = |i: usize| -> CliResult<f64> {
            rec.get(i)
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| CliError::malformed(path, format!("row {}: bad field {}", k + 2, i + 1)))
        };
        nchains = nchains.max(num(0)? as usize + 1);
        draws.push((2..header.len()).map(num).collect::<CliResult<Vec<f64>>>()?);
    }
    if draws.is_empty() {
        return Err(CliError::malformed(path, "no draws"));
    }
    let iterations = if draws.len() % nchains == 0 { draws.len() / nchains } else { draws.len() };
    Ok(PosteriorSample {
        names,
        nchains: if iterations == draws.len() { 1 } else { nchains },
        iterations,
        draws,
        acceptance_rate: f64::NAN,
        imputed_networks: Vec::new(),
    })
}
