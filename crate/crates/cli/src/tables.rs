//! CSV tables. Floats use Rust's shortest round-trip formatting, missing
//! values are written as `NA`.

use evtgan::dependence::{ChiMatrix, Site};
use evtgan::gev::{FitReport, GevParams};
use evtgan::margins::{MarginalModelGrid, SiteMargin};
use evtgan::pipeline::TracePoint;

use crate::error::{CliError, CliResult};

pub const NA: &str = "NA";

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        NA.to_string()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| NA.to_string())
}

/// In-memory CSV writer.
pub struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> CliResult<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(internal)?;
        Ok(Self { w })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields).map_err(internal)
    }

    pub fn into_bytes(self) -> CliResult<Vec<u8>> {
        self.w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
    }
}

fn internal(e: csv::Error) -> CliError {
    CliError::Internal(e.to_string())
}

pub const GEV_HEADER: [&str; 7] = ["site_row", "site_col", "mu", "sigma", "xi", "nll", "converged"];

/// One row per site; failed sites carry `NA` parameters and `converged = false`.
pub fn gev_table(margins: &MarginalModelGrid) -> CliResult<Vec<u8>> {
    let (_, w) = margins.shape();
    let mut t = Table::new(&GEV_HEADER)?;
    for (k, site) in margins.sites().iter().enumerate() {
        let (r, c) = (k / w, k % w);
        let mut row = vec![r.to_string(), c.to_string()];
        match site {
            SiteMargin::Fitted(rep) => {
                row.extend([num(rep.params.mu()), num(rep.params.sigma()), num(rep.params.xi()), num(rep.nll)]);
                row.push("true".into());
            }
            SiteMargin::Failed { .. } => {
                row.extend([NA, NA, NA, NA].map(String::from));
                row.push("false".into());
            }
        }
        t.row(row)?;
    }
    t.into_bytes()
}

fn data_err(msg: String) -> CliError {
    CliError::Core(evtgan::Error::Format(msg))
}

/// Parse a table written by [`gev_table`].
pub fn read_gev_table(bytes: &[u8]) -> CliResult<MarginalModelGrid> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(|e| data_err(format!("GEV table: {e}")))?.clone();
    if header.iter().collect::<Vec<_>>() != GEV_HEADER {
        return Err(data_err(format!(
            "GEV table header {:?}, expected {:?}",
            header.iter().collect::<Vec<_>>(),
            GEV_HEADER
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| data_err(format!("GEV table: {e}")))?;
        let at = |msg: &str| data_err(format!("GEV table row {}: {msg}", line + 1));
        let idx = |i: usize| rec[i].parse::<usize>().map_err(|_| at("bad site index"));
        let (r, c) = (idx(0)?, idx(1)?);
        let site = if &rec[6] == "true" {
            let f = |i: usize| rec[i].parse::<f64>().map_err(|_| at("bad number"));
            SiteMargin::Fitted(FitReport {
                params: GevParams::new(f(2)?, f(3)?, f(4)?)?,
                nll: f(5)?,
                iterations: 0,
                converged: true,
            })
        } else {
            SiteMargin::Failed {
                reason: "recorded as failed".into(),
                report: None,
            }
        };
        rows.push(((r, c), site));
    }
    let h = rows.iter().map(|((r, _), _)| r + 1).max().unwrap_or(0);
    let w = rows.iter().map(|((_, c), _)| c + 1).max().unwrap_or(0);
    if rows.len() != h * w {
        return Err(data_err(format!("GEV table has {} rows for a {h}x{w} grid", rows.len())));
    }
    for (k, ((r, c), _)) in rows.iter().enumerate() {
        if (*r, *c) != (k / w, k % w) {
            return Err(data_err("GEV table rows must be in row-major site order".into()));
        }
    }
    Ok(MarginalModelGrid::new(h, w, rows.into_iter().map(|(_, s)| s).collect())?)
}

pub fn site_index(s: Site, width: usize) -> usize {
    s.0 * width + s.1
}

/// Long-format χ estimates: one row per pair and source.
pub fn chi_long_table(sources: &[(&str, &ChiMatrix)], width: usize, seed: u64) -> CliResult<Vec<u8>> {
    let mut t = Table::new(&["i", "j", "chi", "q", "source", "seed"])?;
    for (name, m) in sources {
        for (&(a, b), chi) in m.pairs.iter().zip(&m.chi) {
            t.row([
                site_index(a, width).to_string(),
                site_index(b, width).to_string(),
                opt(*chi),
                num(m.q),
                name.to_string(),
                seed.to_string(),
            ])?;
        }
    }
    t.into_bytes()
}

pub const TRACE_HEADER: [&str; 8] = ["epoch", "c_tr", "c_te", "pairs_used_tr", "pairs_used_te", "n_train", "q", "seed"];

pub fn trace_table(trace: &[TracePoint], n_train: usize, q: f64, seed: u64) -> CliResult<Vec<u8>> {
    let mut t = Table::new(&TRACE_HEADER)?;
    for p in trace {
        t.row([
            p.epoch.to_string(),
            num(p.c_tr.value),
            opt(p.c_te.map(|e| e.value)),
            p.c_tr.used.to_string(),
            p.c_te.map(|e| e.used.to_string()).unwrap_or_else(|| NA.into()),
            n_train.to_string(),
            num(q),
            seed.to_string(),
        ])?;
    }
    t.into_bytes()
}

/// A parsed trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub c_tr: f64,
    pub c_te: Option<f64>,
}

pub fn read_trace_table(bytes: &[u8]) -> CliResult<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(|e| data_err(format!("trace table: {e}")))?.clone();
    if header.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(data_err("trace table header does not match the train output".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| data_err(format!("trace table: {e}")))?;
            let bad = || data_err(format!("trace table: bad row {:?}", rec.iter().collect::<Vec<_>>()));
            Ok(TraceRow {
                epoch: rec[0].parse().map_err(|_| bad())?,
                c_tr: rec[1].parse().map_err(|_| bad())?,
                c_te: match &rec[2] {
                    NA => None,
                    s => Some(s.parse().map_err(|_| bad())?),
                },
            })
        })
        .collect()
}
