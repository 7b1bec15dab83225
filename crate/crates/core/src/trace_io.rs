//! Persistence: CSV trace files and JSON result documents.
//!
//! A trace file is a block of `# key=value` header lines followed by a CSV
//! table:
//!
//! ```text
//! # format_version=1
//! # packet_duration_s=1.0000000000000000e-3
//! # source=simulated
//! # channel.mean_signal_per_packet=1.0000000000000000e1
//! # channel.background_per_packet=2.0000000000000000e0
//! # channel.intrinsic_qber=2.9999999999999999e-2
//! # channel.sigma_sq=1.0000000000000000e0
//! # channel.correlation=perfect
//! # seed=7
//! index,probe_voltage,sifted_count,error_count
//! 0,6.1031748236474366e-1,5,0
//! ```
//!
//! Reals are written with 17 significant digits so they read back exactly.
//! Header lines without `=` are free comments. Parsing is all-or-nothing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arts::{PacketRecord, PredictionCurve, SelectionOutcome, Trace};
use crate::channel::{ChannelSpec, Correlation};
use crate::error::{Error, Result};
use crate::fading::LognormalFade;
use crate::strategies::Comparison;

pub const FORMAT_VERSION: u32 = 1;

const COLUMNS: [&str; 4] = ["index", "probe_voltage", "sifted_count", "error_count"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    Experimental,
    Simulated,
}

impl TraceSource {
    fn as_str(&self) -> &'static str {
        match self {
            TraceSource::Experimental => "experimental",
            TraceSource::Simulated => "simulated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceFileHeader {
    pub format_version: u32,
    pub packet_duration_s: f64,
    pub source: TraceSource,
    /// Ground truth of a simulated trace.
    pub channel: Option<ChannelSpec>,
    /// Seed of a simulated trace.
    pub seed: Option<u64>,
}

impl TraceFileHeader {
    pub fn experimental(packet_duration_s: f64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            packet_duration_s,
            source: TraceSource::Experimental,
            channel: None,
            seed: None,
        }
    }

    pub fn simulated(spec: ChannelSpec, seed: u64, packet_duration_s: f64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            packet_duration_s,
            source: TraceSource::Simulated,
            channel: Some(spec),
            seed: Some(seed),
        }
    }
}

/// A trace together with its file header.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceFileHeader,
    pub trace: Trace,
}

impl TraceFile {
    pub fn experimental(trace: Trace) -> Self {
        Self {
            header: TraceFileHeader::experimental(trace.packet_duration()),
            trace,
        }
    }

    pub fn simulated(trace: Trace, spec: ChannelSpec, seed: u64) -> Self {
        Self {
            header: TraceFileHeader::simulated(spec, seed, trace.packet_duration()),
            trace,
        }
    }
}

/// Formats a real with 17 significant digits.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trace<W: Write>(mut out: W, file: &TraceFile) -> Result<()> {
    let io = |source| Error::Io {
        path: "<trace output>".into(),
        source,
    };
    let h = &file.header;
    let mut head = String::new();
    head.push_str(&format!("# format_version={}\n", h.format_version));
    head.push_str(&format!(
        "# packet_duration_s={}\n",
        format_real(file.trace.packet_duration())
    ));
    head.push_str(&format!("# source={}\n", h.source.as_str()));
    if let Some(c) = &h.channel {
        head.push_str(&format!(
            "# channel.mean_signal_per_packet={}\n",
            format_real(c.mean_signal_per_packet)
        ));
        head.push_str(&format!(
            "# channel.background_per_packet={}\n",
            format_real(c.background_per_packet)
        ));
        head.push_str(&format!("# channel.intrinsic_qber={}\n", format_real(c.intrinsic_qber)));
        head.push_str(&format!("# channel.sigma_sq={}\n", format_real(c.fade.sigma_sq())));
        head.push_str(&format!("# channel.correlation={}\n", c.correlation));
    }
    if let Some(seed) = h.seed {
        head.push_str(&format!("# seed={seed}\n"));
    }
    out.write_all(head.as_bytes()).map_err(io)?;

    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let csv_err = |e: csv::Error| Error::Io {
        path: "<trace output>".into(),
        source: e.into(),
    };
    csv.write_record(COLUMNS).map_err(csv_err)?;
    for p in file.trace.packets() {
        csv.write_record([
            p.index.to_string(),
            format_real(p.probe_voltage),
            p.sifted_count.to_string(),
            p.error_count.to_string(),
        ])
        .map_err(csv_err)?;
    }
    csv.flush().map_err(io)?;
    Ok(())
}

pub fn write_trace_path(path: &Path, file: &TraceFile) -> Result<()> {
    let f = File::create(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    write_trace(BufWriter::new(f), file).map_err(|e| with_path(e, path))
}

pub fn read_trace<R: Read>(mut input: R) -> Result<TraceFile> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(|source| Error::Io {
        path: "<trace input>".into(),
        source,
    })?;
    parse_trace(&text)
}

pub fn read_trace_path(path: &Path) -> Result<TraceFile> {
    let f = File::open(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    read_trace(BufReader::new(f)).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::Io {
            path: path.into(),
            source,
        },
        other => other,
    }
}

#[derive(Default)]
struct HeaderFields {
    version: Option<u32>,
    duration: Option<f64>,
    source: Option<TraceSource>,
    mu: Option<f64>,
    background: Option<f64>,
    qber: Option<f64>,
    sigma_sq: Option<f64>,
    correlation: Option<Correlation>,
    seed: Option<u64>,
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(line, key, format!("cannot parse `{value}`")))
}

fn parse_trace(text: &str) -> Result<TraceFile> {
    let mut fields = HeaderFields::default();
    let mut body_start = text.len();
    let mut header_lines = 0;
    let mut offset = 0;
    for raw in text.split_inclusive('\n') {
        let line_no = header_lines + 1;
        let line = raw.trim_end_matches(['\n', '\r']);
        let Some(comment) = line.strip_prefix('#') else {
            body_start = offset;
            break;
        };
        header_lines += 1;
        offset += raw.len();
        let Some((key, value)) = comment.split_once('=') else {
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "format_version" => {
                let v: u32 = parse_value(line_no, key, value)?;
                if v != FORMAT_VERSION {
                    return Err(Error::parse(
                        line_no,
                        key,
                        format!("unsupported version {v}, expected {FORMAT_VERSION}"),
                    ));
                }
                fields.version = Some(v);
            }
            "packet_duration_s" => {
                let d: f64 = parse_value(line_no, key, value)?;
                if !(d > 0.0) || !d.is_finite() {
                    return Err(Error::parse(line_no, key, "duration must be positive"));
                }
                fields.duration = Some(d);
            }
            "source" => {
                fields.source = Some(match value {
                    "experimental" => TraceSource::Experimental,
                    "simulated" => TraceSource::Simulated,
                    other => {
                        return Err(Error::parse(line_no, key, format!("unknown source `{other}`")))
                    }
                })
            }
            "channel.mean_signal_per_packet" => fields.mu = Some(parse_value(line_no, key, value)?),
            "channel.background_per_packet" => {
                fields.background = Some(parse_value(line_no, key, value)?)
            }
            "channel.intrinsic_qber" => fields.qber = Some(parse_value(line_no, key, value)?),
            "channel.sigma_sq" => fields.sigma_sq = Some(parse_value(line_no, key, value)?),
            "channel.correlation" => {
                fields.correlation = Some(
                    value
                        .parse()
                        .map_err(|e: Error| Error::parse(line_no, key, e.to_string()))?,
                )
            }
            "seed" => fields.seed = Some(parse_value(line_no, key, value)?),
            other => return Err(Error::parse(line_no, other, "unknown header key")),
        }
    }
    if body_start == text.len() && offset == text.len() {
        return Err(Error::parse(header_lines + 1, "header", "missing column header row"));
    }

    let version = fields
        .version
        .ok_or_else(|| Error::parse(1, "format_version", "missing header field"))?;
    let duration = fields
        .duration
        .ok_or_else(|| Error::parse(1, "packet_duration_s", "missing header field"))?;
    let source = fields
        .source
        .ok_or_else(|| Error::parse(1, "source", "missing header field"))?;
    let channel = match (fields.mu, fields.background, fields.qber, fields.sigma_sq) {
        (None, None, None, None) => None,
        (Some(mu), Some(nb), Some(q), Some(s2)) => {
            let mut spec = ChannelSpec {
                mean_signal_per_packet: mu,
                background_per_packet: nb,
                intrinsic_qber: q,
                fade: LognormalFade::normalized(s2)
                    .map_err(|e| Error::parse(1, "channel.sigma_sq", e.to_string()))?,
                correlation: Correlation::Perfect,
            };
            if let Some(c) = fields.correlation {
                spec.correlation = c;
            }
            spec.validate()
                .map_err(|e| Error::parse(1, "channel", e.to_string()))?;
            Some(spec)
        }
        _ => return Err(Error::parse(1, "channel", "incomplete channel description")),
    };

    let header = TraceFileHeader {
        format_version: version,
        packet_duration_s: duration,
        source,
        channel,
        seed: fields.seed,
    };
    let packets = parse_rows(&text[body_start..], header_lines)?;
    let trace = Trace::new(packets, duration)
        .map_err(|e| Error::parse(header_lines + 1, "trace", e.to_string()))?;
    Ok(TraceFile { header, trace })
}

fn parse_rows(body: &str, line_offset: usize) -> Result<Vec<PacketRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(body.as_bytes());
    let header_line = line_offset + 1;
    let columns = reader
        .headers()
        .map_err(|e| Error::parse(header_line, "header", e.to_string()))?
        .clone();
    if columns.iter().map(str::trim).ne(COLUMNS) {
        return Err(Error::parse(
            header_line,
            "header",
            format!("expected columns {}, found {}", COLUMNS.join(","), columns.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut packets: Vec<PacketRecord> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize) + line_offset;
            Error::parse(line, "row", e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize) + line_offset;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let index: u64 = parse_value(line, COLUMNS[0], field(0))?;
        let probe_voltage: f64 = parse_value(line, COLUMNS[1], field(1))?;
        let sifted_count: u64 = parse_value(line, COLUMNS[2], field(2))?;
        let error_count: u64 = parse_value(line, COLUMNS[3], field(3))?;
        if !(probe_voltage >= 0.0) || !probe_voltage.is_finite() {
            return Err(Error::parse(line, COLUMNS[1], "must be finite and non-negative"));
        }
        if error_count > sifted_count {
            return Err(Error::parse(
                line,
                COLUMNS[3],
                format!("{error_count} errors exceed {sifted_count} sifted counts"),
            ));
        }
        if let Some(prev) = packets.last() {
            if index <= prev.index {
                return Err(Error::parse(
                    line,
                    COLUMNS[0],
                    format!("index {index} does not follow {}", prev.index),
                ));
            }
        }
        packets.push(PacketRecord::new(index, probe_voltage, sifted_count, error_count));
    }
    if packets.is_empty() {
        return Err(Error::parse(header_line + 1, "row", "trace has no packets"));
    }
    Ok(packets)
}

/// JSON results written by the command-line front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub format_version: u32,
    #[serde(flatten)]
    pub body: ResultsBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResultsBody {
    Prediction(PredictionCurve),
    Selection(EmpiricalSweep),
    Comparison(Comparison),
}

/// Empirical selection sweep over a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSweep {
    /// Where the trace came from, as given on the command line.
    pub trace: String,
    pub header: TraceFileHeader,
    pub thresholds: Vec<f64>,
    pub outcomes: Vec<SelectionOutcome>,
}

impl ResultsDocument {
    pub fn new(body: ResultsBody) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            body,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Domain(format!(
                "unsupported results version {}",
                self.format_version
            )));
        }
        match &self.body {
            ResultsBody::Prediction(curve) => curve.validate(),
            ResultsBody::Comparison(cmp) => cmp.validate(),
            ResultsBody::Selection(sweep) => {
                if sweep.thresholds.len() != sweep.outcomes.len() {
                    return Err(Error::Domain("thresholds and outcomes differ in length".into()));
                }
                if sweep
                    .thresholds
                    .iter()
                    .zip(&sweep.outcomes)
                    .any(|(t, o)| *t != o.threshold)
                {
                    return Err(Error::Domain("outcome thresholds do not match the grid".into()));
                }
                Ok(())
            }
        }
    }
}

pub fn write_results<W: Write>(mut out: W, doc: &ResultsDocument) -> Result<()> {
    doc.validate()?;
    serde_json::to_writer_pretty(&mut out, doc)?;
    out.write_all(b"\n").map_err(|source| Error::Io {
        path: "<results output>".into(),
        source,
    })?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<ResultsDocument> {
    let doc: ResultsDocument = serde_json::from_reader(input)?;
    doc.validate()?;
    Ok(doc)
}
