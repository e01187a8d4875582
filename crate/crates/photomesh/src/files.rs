//! Versioned JSON documents and CSV exports.
//!
//! Every JSON file carries a top-level `schema` tag next to its fields, e.g.
//! `{"schema": "cal-v1", "metadata": {...}, "nodes": [...]}`. Readers reject
//! a file whose tag differs from the one they expect.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use photomesh_core::calibration::CalibrationRecord;
use photomesh_core::emu::{EmuConfig, VoltageFrame};
use photomesh_core::lattice::{ClusterGraph, QubitId};
use photomesh_core::mesh::NoiseSpec;
use photomesh_core::metrology::{LinkReport, PhaseSweepTrace, UnitaryEstimate};
use photomesh_core::MeshState;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MESH_V1: &str = "mesh-v1";
pub const EMU_V1: &str = "emu-v1";
pub const CAL_V1: &str = "cal-v1";
pub const CIRCUIT_V1: &str = "circuit-v1";
pub const MET_V1: &str = "met-v1";
pub const GRAPH_V1: &str = "graph-v1";
pub const PATTERN_V1: &str = "pattern-v1";
pub const MONTECARLO_V1: &str = "montecarlo-v1";
pub const MANIFEST_V1: &str = "manifest-v1";

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema: String,
    #[serde(flatten)]
    body: T,
}

/// A fabricated chip: the sampled mesh and the variation model it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub seed: u64,
    pub noise: NoiseSpec,
    pub mesh: MeshState,
}

/// Measurements of one circuit. `unitary` is absent for sweep-only runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetFile {
    pub circuit: String,
    pub links: Vec<LinkReport>,
    pub unitary: Option<UnitaryEstimate>,
    pub traces: Vec<PhaseSweepTrace>,
}

/// Qubits to measure in the Z basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternFile {
    pub nodes: Vec<QubitId>,
}

pub fn to_json<T: Serialize>(schema: &str, body: &T) -> Result<String, CliError> {
    let env = Envelope {
        schema: schema.to_string(),
        body,
    };
    let mut s = serde_json::to_string_pretty(&env)
        .map_err(|e| CliError::Usage(format!("serialize {schema}: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(
    schema: &str,
    text: &str,
    origin: &Path,
) -> Result<T, CliError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", origin.display())))?;
    let found = value
        .get("schema")
        .and_then(|s| s.as_str())
        .unwrap_or("<none>");
    if found != schema {
        return Err(CliError::Usage(format!(
            "{}: expected schema {schema}, found {found}",
            origin.display()
        )));
    }
    let env: Envelope<T> = serde_json::from_value(value)
        .map_err(|e| CliError::Usage(format!("{}: {e}", origin.display())))?;
    Ok(env.body)
}

pub fn read_json<T: DeserializeOwned>(schema: &str, path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    from_json(schema, &text, path)
}

pub fn write_json<T: Serialize>(schema: &str, path: &Path, body: &T) -> Result<(), CliError> {
    write_atomic(path, to_json(schema, body)?.as_bytes())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = PathBuf::from(path);
    tmp.set_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// In-memory CSV builder; `csv::Writer` handles quoting.
pub struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Self { w }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.w.into_inner().expect("in-memory flush")
    }

    pub fn write(self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, &self.into_bytes())
    }
}

/// Shortest round-trip float formatting.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// `alpha_index,period,output_port,power` rows for both outputs of each trace.
pub fn fringe_csv(traces: &[PhaseSweepTrace]) -> Table {
    let mut t = Table::new(&["alpha_index", "period", "output_port", "power"]);
    for tr in traces {
        for (port, samples) in [(tr.outputs.0, &tr.samples_n), (tr.outputs.1, &tr.samples_m)] {
            for (period, row) in samples.iter().enumerate() {
                for (k, &p) in row.iter().enumerate() {
                    t.row([k.to_string(), period.to_string(), port.to_string(), num(p)]);
                }
            }
        }
    }
    t
}

/// Period-averaged fringes with spread, one row per pair, output and sample.
pub fn fringe_plot_csv(traces: &[PhaseSweepTrace]) -> Table {
    let mut t = Table::new(&[
        "input_i",
        "input_j",
        "output_port",
        "alpha_index",
        "voltage",
        "alpha_rad",
        "mean_power",
        "std_power",
    ]);
    for tr in traces {
        for (port, samples) in [(tr.outputs.0, &tr.samples_n), (tr.outputs.1, &tr.samples_m)] {
            let periods = samples.len() as f64;
            for k in 0..tr.alpha.len() {
                let mean = samples.iter().map(|r| r[k]).sum::<f64>() / periods;
                let var = samples.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / periods;
                t.row([
                    tr.pair.0.to_string(),
                    tr.pair.1.to_string(),
                    port.to_string(),
                    k.to_string(),
                    num(tr.voltages[k]),
                    num(tr.alpha[k]),
                    num(mean),
                    num(var.sqrt()),
                ]);
            }
        }
    }
    t
}

pub fn links_csv(links: &[LinkReport]) -> Table {
    let mut t = Table::new(&[
        "input_i",
        "input_j",
        "output_n",
        "output_m",
        "c_plus",
        "c_minus",
        "f_plus",
        "f_minus",
        "f_minus_uncorrected",
        "phi_mj_rad",
        "gamma_nm",
        "reliable",
    ]);
    for l in links {
        t.row([
            l.pair.0.to_string(),
            l.pair.1.to_string(),
            l.outputs.0.to_string(),
            l.outputs.1.to_string(),
            num(l.c_plus),
            num(l.c_minus),
            num(l.f_plus),
            num(l.f_minus),
            num(l.f_minus_uncorrected),
            num(l.phi_mj),
            num(l.gamma_nm),
            l.reliable.to_string(),
        ]);
    }
    t
}

/// Long-form magnitudes: `kind` is `ideal` or `measured`.
pub fn unitary_csv(ideal: &photomesh_core::RMatrix, measured: &photomesh_core::RMatrix) -> Table {
    let mut t = Table::new(&["kind", "row", "col", "magnitude"]);
    for (kind, m) in [("ideal", ideal), ("measured", measured)] {
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                t.row([
                    kind.to_string(),
                    r.to_string(),
                    c.to_string(),
                    num(m[(r, c)]),
                ]);
            }
        }
    }
    t
}

pub fn extinction_csv(record: &CalibrationRecord) -> Table {
    let mut t = Table::new(&[
        "node",
        "input_port",
        "bar_v",
        "cross_v",
        "bar_extinction_db",
        "cross_extinction_db",
        "monitor_ratio",
    ]);
    for n in &record.nodes {
        t.row([
            n.node.to_string(),
            n.input_port.to_string(),
            num(n.bar_v),
            num(n.cross_v),
            num(n.bar_extinction_db),
            num(n.cross_extinction_db),
            num(n.monitor_ratio),
        ]);
    }
    t
}

pub fn groups_csv(record: &CalibrationRecord) -> Table {
    let mut t = Table::new(&[
        "circuit",
        "left",
        "right",
        "intermediates",
        "theta_l_v",
        "theta_r_v",
        "phi_r_v",
        "extinction_db",
        "stage2_extinction_db",
        "evaluations",
    ]);
    for g in &record.groups {
        let mids: Vec<String> = g.intermediates.iter().map(|n| n.to_string()).collect();
        t.row([
            g.circuit.clone(),
            g.left.to_string(),
            g.right.to_string(),
            mids.join(" "),
            num(g.theta_l_v),
            num(g.theta_r_v),
            num(g.phi_r_v),
            num(g.extinction_db),
            num(g.stage2_extinction_db),
            g.evaluations.to_string(),
        ]);
    }
    t
}

pub fn hadamards_csv(record: &CalibrationRecord) -> Table {
    let mut t = Table::new(&["circuit", "node", "input_i", "input_j", "split_v"]);
    for h in &record.hadamards {
        t.row([
            h.circuit.clone(),
            h.node.to_string(),
            h.inputs.0.to_string(),
            h.inputs.1.to_string(),
            num(h.split_v),
        ]);
    }
    t
}

/// `a_module,a_qubit,b_module,b_qubit,kind`, qubits 0-based.
pub fn edges_csv(g: &ClusterGraph) -> Table {
    let mut t = Table::new(&["a_module", "a_qubit", "b_module", "b_qubit", "kind"]);
    for e in g.edges() {
        let kind = match e.kind {
            photomesh_core::lattice::EdgeKind::Intra => "intra",
            photomesh_core::lattice::EdgeKind::Inter => "inter",
        };
        t.row([
            e.a.module.to_string(),
            e.a.qubit.to_string(),
            e.b.module.to_string(),
            e.b.qubit.to_string(),
            kind.to_string(),
        ]);
    }
    t
}

/// Loads a frame from `channel_id,volts` rows; unlisted channels stay at 0 V.
pub fn frame_from_csv(
    text: &str,
    channels: usize,
    origin: &Path,
) -> Result<VoltageFrame, CliError> {
    let bad = |msg: String| CliError::Usage(format!("{}: {msg}", origin.display()));
    let mut frame = VoltageFrame::zeros(channels);
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let (Some(ch), Some(v)) = (rec.get(0), rec.get(1)) else {
            return Err(bad(format!("row {} needs channel_id,volts", line + 2)));
        };
        let ch: usize = ch
            .parse()
            .map_err(|_| bad(format!("row {}: bad channel '{ch}'", line + 2)))?;
        let v: f64 = v
            .parse()
            .map_err(|_| bad(format!("row {}: bad voltage '{v}'", line + 2)))?;
        if ch >= channels {
            return Err(bad(format!(
                "row {}: channel {ch} outside 0..{channels}",
                line + 2
            )));
        }
        frame.volts[ch] = v;
    }
    frame.validate(channels).map_err(|e| bad(e.to_string()))?;
    Ok(frame)
}

pub fn read_emu(path: &Path) -> Result<EmuConfig, CliError> {
    read_json(EMU_V1, path)
}
