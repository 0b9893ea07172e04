//! Dataset CSV files.
//!
//! ```text
//! # cutoff=15
//! id,arm,time,event,reason,covariate
//! S00001,0,3.25,1,admin,-0.41
//! S00002,1,15,0,admin,1.07
//! ```
//!
//! `arm` is 0 (control) or 1 (experimental), `event` is 0 or 1 and `reason`
//! is `admin` or `dropout`. The covariate column is optional and a blank cell
//! means no covariate. Lines starting with `#` are comments; a
//! `# cutoff=<months>` comment sets the data cut-off.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use tipping_core::survival::{Arm, CensorReason, SubjectRecord, TrialDataset};

const REQUIRED: [&str; 5] = ["id", "arm", "time", "event", "reason"];

fn cutoff_directive(text: &str) -> Result<Option<f64>> {
    let mut found = None;
    for (n, line) in text.lines().enumerate() {
        let Some(comment) = line.trim_start().strip_prefix('#') else {
            continue;
        };
        if let Some(value) = comment.trim().strip_prefix("cutoff=") {
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| anyhow!("line {}: cutoff directive is not a number: {value:?}", n + 1))?;
            found = Some(v);
        }
    }
    Ok(found)
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

/// Parse a dataset from CSV text. `cutoff` overrides any directive in the file.
pub fn parse_dataset(text: &str, cutoff: Option<f64>) -> Result<TrialDataset> {
    let cutoff = match (cutoff, cutoff_directive(text)?) {
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => bail!("no cutoff: add a '# cutoff=<months>' line or pass one explicitly"),
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().context("reading header")?.clone();
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(REQUIRED) {
        *slot = column(&headers, name).ok_or_else(|| anyhow!("header: missing column '{name}'"))?;
    }
    let cov = column(&headers, "covariate");

    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let rec = result.with_context(|| format!("row {}", row + 1))?;
        let line = rec.position().map_or(0, |p| p.line());
        let ctx = |msg: String| anyhow!("line {line} (row {}): {msg}", row + 1);
        let field = |i: usize| rec.get(i).unwrap_or("");

        let id = field(idx[0]);
        if id.is_empty() {
            return Err(ctx("empty id".into()));
        }
        let arm = match field(idx[1]) {
            "0" => Arm::Control,
            "1" => Arm::Experimental,
            other => return Err(ctx(format!("arm must be 0 or 1, got {other:?}"))),
        };
        let time: f64 = field(idx[2])
            .parse()
            .map_err(|_| ctx(format!("time is not a number: {:?}", field(idx[2]))))?;
        if !(time.is_finite() && time >= 0.0) {
            return Err(ctx(format!("time must be nonnegative, got {time}")));
        }
        if time > cutoff {
            return Err(ctx(format!("time {time} is past the cutoff {cutoff}")));
        }
        let event = match field(idx[3]) {
            "0" => false,
            "1" => true,
            other => return Err(ctx(format!("event must be 0 or 1, got {other:?}"))),
        };
        let reason = match field(idx[4]) {
            "admin" => CensorReason::Administrative,
            "dropout" => CensorReason::Dropout,
            other => return Err(ctx(format!("reason must be admin or dropout, got {other:?}"))),
        };
        let mut record = SubjectRecord::new(id, arm, time, event, reason);
        if let Some(c) = cov {
            let cell = field(c);
            if !cell.is_empty() {
                let x: f64 = cell
                    .parse()
                    .map_err(|_| ctx(format!("covariate is not a number: {cell:?}")))?;
                record = record.with_covariate(x);
            }
        }
        records.push(record);
    }
    Ok(TrialDataset::new(records, cutoff)?)
}

pub fn read_dataset(path: &Path, cutoff: Option<f64>) -> Result<TrialDataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dataset(&text, cutoff).with_context(|| path.display().to_string())
}

/// Serialize with the shortest representation that parses back to the same
/// bits.
pub fn format_dataset(dataset: &TrialDataset) -> String {
    let with_cov = dataset.records().iter().any(|r| r.covariate.is_some());
    let mut out = format!("# cutoff={}\n", dataset.cutoff());
    out.push_str(if with_cov {
        "id,arm,time,event,reason,covariate\n"
    } else {
        "id,arm,time,event,reason\n"
    });
    for r in dataset.records() {
        let reason = match r.reason {
            CensorReason::Administrative => "admin",
            CensorReason::Dropout => "dropout",
        };
        out.push_str(&format!(
            "{},{},{},{},{}",
            r.id,
            r.arm.indicator(),
            r.time,
            u8::from(r.event),
            reason
        ));
        if with_cov {
            out.push(',');
            if let Some(x) = r.covariate {
                out.push_str(&x.to_string());
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset(dataset: &TrialDataset, path: &Path) -> Result<()> {
    write_file(path, format_dataset(dataset).as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(bytes)
        .with_context(|| format!("writing {}", path.display()))
}
