//! `photomesh` subcommands.
//!
//! Stages compose through files: `new-chip` writes a chip directory,
//! `calibrate` reads it and writes a calibration record, `run-circuit`,
//! `sweep` and `reconstruct` read both. Each command writes a
//! `manifest.json` that `replay` can execute again.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use photomesh_core::calibration::CalibrationRecord;
use photomesh_core::compiler::{format_pairs, CircuitId, CircuitSpec};
use photomesh_core::emu::{EmuConfig, EmulatedChip};
use photomesh_core::lattice::{
    assemble_grid, interconnect, link_schedule, unit_cell, z_measure, EdgeKind,
};
use photomesh_core::metrology::{
    ideal_unitary, reconstruct_unitary, run_phase_sweep, LinkReport, PhaseSweepTrace,
};
use serde::Serialize;

/// `println!` that stays quiet when stdout is closed early, e.g. piped into `head`.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

use crate::config::{LatticeConfig, RunConfig};
use crate::files::{self, MeshFile, MetFile, PatternFile, Table};
use crate::manifest::RunManifest;
use crate::pipeline::{self, EnsembleStats};
use crate::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "photomesh",
    version,
    about = "Emulate, calibrate and characterize programmable MZI meshes"
)]
struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a fabricated chip and write mesh.json and emu.json.
    NewChip(NewChipArgs),
    /// Calibrate every MZI, then the double-MZI groups and Hadamards of the chosen circuits.
    Calibrate(CalibrateArgs),
    /// Program a circuit, sweep all its pairs and reconstruct |U|.
    RunCircuit(CircuitArgs),
    /// Phase-sweep selected pairs of a programmed circuit.
    Sweep(SweepArgs),
    /// Reconstruct |U| from a previous sweep.
    Reconstruct(ReconstructArgs),
    /// Assemble cube cells, add links and apply Z measurements.
    Lattice(LatticeArgs),
    /// Calibrate and measure an ensemble of seeded chips.
    Montecarlo(MontecarloArgs),
    /// Run the command recorded in a manifest again.
    Replay {
        /// `manifest.json` written by an earlier run.
        manifest: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration JSON; defaults to the typical-chip model.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct NewChipArgs {
    #[command(flatten)]
    common: Common,
    /// Fabrication seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ignore the configured variation model and emit a perfect chip.
    #[arg(long)]
    ideal: bool,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    /// Chip directory from `new-chip`.
    #[arg(long)]
    chip: PathBuf,
    /// Circuits whose groups and Hadamards to calibrate, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4", value_parser = parse_circuit)]
    circuit: Vec<CircuitId>,
}

#[derive(Args, Debug)]
struct CircuitArgs {
    #[command(flatten)]
    common: Common,
    /// Chip directory from `new-chip`.
    #[arg(long)]
    chip: PathBuf,
    /// Calibration record from `calibrate`.
    #[arg(long)]
    cal: PathBuf,
    /// Circuit id: 1-4 or alt3-alt7.
    #[arg(long, value_parser = parse_circuit)]
    circuit: CircuitId,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    circuit: CircuitArgs,
    /// 1-based input pairs such as `1-2,3-4`; defaults to every pair of the circuit.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    pairs: Vec<(usize, usize)>,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[command(flatten)]
    common: Common,
    /// Chip directory from `new-chip`.
    #[arg(long)]
    chip: PathBuf,
    /// Calibration record from `calibrate`.
    #[arg(long)]
    cal: PathBuf,
    /// `met.json` from `sweep` covering every pair of its circuit.
    #[arg(long)]
    sweep: PathBuf,
}

#[derive(Args, Debug)]
struct LatticeArgs {
    /// Lattice configuration JSON; defaults to one unit cell.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Selection pattern JSON (`pattern-v1`) of qubits to measure.
    #[arg(long)]
    pattern: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MontecarloArgs {
    #[command(flatten)]
    common: Common,
    /// First chip seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of chips.
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Circuits to calibrate and measure on every chip.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4", value_parser = parse_circuit)]
    circuit: Vec<CircuitId>,
}

fn parse_circuit(s: &str) -> Result<CircuitId, String> {
    s.parse::<CircuitId>().map_err(|e| e.to_string())
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| format!("expected i-j, got '{s}'"))?;
    let p = |x: &str| {
        x.trim()
            .parse::<usize>()
            .ok()
            .filter(|&v| v >= 1)
            .ok_or_else(|| format!("bad port '{x}'"))
    };
    Ok((p(a)? - 1, p(b)? - 1))
}

/// Parses and runs; returns the process exit code.
pub fn main<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    let rest: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match run(cli.command, &rest) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command, args: &[String]) -> Result<(), CliError> {
    match command {
        Command::NewChip(a) => new_chip(a, args),
        Command::Calibrate(a) => calibrate(a, args),
        Command::RunCircuit(a) => run_circuit(a, args),
        Command::Sweep(a) => sweep(a, args),
        Command::Reconstruct(a) => reconstruct(a, args),
        Command::Lattice(a) => lattice(a, args),
        Command::Montecarlo(a) => montecarlo(a, args),
        Command::Replay { manifest } => replay(&manifest),
    }
}

fn replay(path: &Path) -> Result<(), CliError> {
    let m = RunManifest::read(path)?;
    let cli =
        Cli::try_parse_from(std::iter::once("photomesh".to_string()).chain(m.args.iter().cloned()))
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if matches!(cli.command, Command::Replay { .. }) {
        return Err(CliError::Usage(
            "a manifest cannot replay another replay".into(),
        ));
    }
    run(cli.command, &m.args)
}

fn manifest(command: &str, args: &[String], common: &Common) -> RunManifest {
    let mut m = RunManifest::new(command, args, &common.out);
    m.config = common.config.as_ref().map(|p| p.display().to_string());
    m
}

struct Chip {
    file: MeshFile,
    emu: EmuConfig,
}

impl Chip {
    fn load(dir: &Path, m: &mut RunManifest) -> Result<Self, CliError> {
        let mesh_path = dir.join("mesh.json");
        let emu_path = dir.join("emu.json");
        let file: MeshFile = files::read_json(files::MESH_V1, &mesh_path)?;
        let emu = files::read_emu(&emu_path)?;
        m.input(&mesh_path);
        m.input(&emu_path);
        m.seed = Some(emu.seed);
        Ok(Self { file, emu })
    }

    fn open(&self) -> Result<EmulatedChip, CliError> {
        Ok(EmulatedChip::new(self.file.mesh.clone(), &self.emu)?)
    }
}

fn load_cal(path: &Path, m: &mut RunManifest) -> Result<CalibrationRecord, CliError> {
    let rec: CalibrationRecord = files::read_json(files::CAL_V1, path)?;
    rec.validate()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    m.input(path);
    Ok(rec)
}

fn new_chip(a: NewChipArgs, args: &[String]) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    if a.ideal {
        cfg = RunConfig {
            n_modes: cfg.n_modes,
            timestamp_unix: cfg.timestamp_unix,
            ..RunConfig::ideal()
        };
    }
    let mut m = manifest("new-chip", args, &a.common);
    m.seed = Some(a.seed);
    let file = pipeline::sample_chip(&cfg, a.seed)?;
    let losses = pipeline::path_losses_db(&file.mesh);
    let out = &a.common.out;
    files::write_json(files::MESH_V1, &out.join("mesh.json"), &file)?;
    files::write_json(files::EMU_V1, &out.join("emu.json"), &cfg.emu(a.seed))?;
    m.output("mesh.json", files::MESH_V1);
    m.output("emu.json", files::EMU_V1);
    m.write(out)?;
    let (lo, hi) = losses
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| {
            (l.min(x), h.max(x))
        });
    say!(
        "chip seed {}: all-bar path loss {lo:.2} dB to {hi:.2} dB",
        a.seed
    );
    Ok(())
}

fn calibrate(a: CalibrateArgs, args: &[String]) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.common.config.as_deref())?;
    let mut m = manifest("calibrate", args, &a.common);
    let chip = Chip::load(&a.chip, &mut m)?;
    let mut emu = chip.open()?;
    let circuits: Vec<_> = cfg
        .circuits(emu.topology())?
        .into_iter()
        .filter(|(id, _)| a.circuit.contains(id))
        .collect();
    let (mut record, errors) = pipeline::calibrate_all(&mut emu, &cfg, &circuits, chip.emu.seed);
    record.sort(emu.topology());
    let out = &a.common.out;
    files::write_json(files::CAL_V1, &out.join("cal.json"), &record)?;
    files::extinction_csv(&record).write(&out.join("extinctions.csv"))?;
    files::groups_csv(&record).write(&out.join("groups.csv"))?;
    files::hadamards_csv(&record).write(&out.join("hadamards.csv"))?;
    m.output("cal.json", files::CAL_V1);
    m.output("extinctions.csv", "csv");
    m.output("groups.csv", "csv");
    m.output("hadamards.csv", "csv");
    m.write(out)?;
    say!(
        "calibrated {} nodes, {} double-MZI groups",
        record.nodes.len(),
        record.groups.len()
    );
    for g in &record.groups {
        say!(
            "  circuit {} group {}..{}: {:.1} dB",
            g.circuit,
            g.left,
            g.right,
            g.extinction_db
        );
    }
    let mut problems: Vec<String> = record
        .failures
        .iter()
        .map(|f| format!("{}: {}", f.node, f.reason))
        .collect();
    problems.extend(errors.iter().map(|(id, e)| format!("circuit {id}: {e}")));
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "calibration incomplete:\n  {}",
            problems.join("\n  ")
        )))
    }
}

/// Programs the circuit frame and returns the chip and spec.
fn programmed(
    a: &CircuitArgs,
    cfg: &RunConfig,
    m: &mut RunManifest,
) -> Result<(EmulatedChip, CalibrationRecord, CircuitSpec), CliError> {
    let chip = Chip::load(&a.chip, m)?;
    let record = load_cal(&a.cal, m)?;
    let mut emu = chip.open()?;
    let spec = cfg.circuit(emu.topology(), a.circuit)?;
    let frame = record.frame_for_circuit(&spec, emu.topology())?;
    emu.apply_frame(&frame)?;
    Ok((emu, record, spec))
}

fn write_traces(
    out: &Path,
    m: &mut RunManifest,
    traces: &[PhaseSweepTrace],
    links: &[LinkReport],
) -> Result<(), CliError> {
    files::fringe_csv(traces).write(&out.join("fringes.csv"))?;
    files::fringe_plot_csv(traces).write(&out.join("fringe_plot.csv"))?;
    files::links_csv(links).write(&out.join("links.csv"))?;
    m.output("fringes.csv", "csv");
    m.output("fringe_plot.csv", "csv");
    m.output("links.csv", "csv");
    Ok(())
}

fn print_links(links: &[LinkReport]) {
    say!(
        "{:>7} {:>7} {:>9} {:>9} {:>9}",
        "inputs",
        "outputs",
        "F+",
        "F-",
        "phi_mj"
    );
    for l in links {
        say!(
            "{:>7} {:>7} {:>9.5} {:>9.5} {:>9.4}{}",
            format!("{},{}", l.pair.0 + 1, l.pair.1 + 1),
            format!("{},{}", l.outputs.0 + 1, l.outputs.1 + 1),
            l.f_plus,
            l.f_minus,
            l.phi_mj,
            if l.reliable { "" } else { "  (weak fringe)" }
        );
    }
}

fn sweep_pairs(
    emu: &mut EmulatedChip,
    spec: &CircuitSpec,
    pairs: &[(usize, usize)],
    cfg: &RunConfig,
) -> Result<(Vec<PhaseSweepTrace>, Vec<LinkReport>), CliError> {
    let mut traces = Vec::new();
    for &p in pairs {
        traces.push(run_phase_sweep(emu, spec, p, &cfg.sweep)?);
    }
    let links = traces
        .iter()
        .map(LinkReport::from_trace)
        .collect::<photomesh_core::Result<Vec<_>>>()?;
    Ok((traces, links))
}

fn run_circuit(a: CircuitArgs, args: &[String]) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.common.config.as_deref())?;
    let mut m = manifest("run-circuit", args, &a.common);
    let (mut emu, _, spec) = programmed(&a, &cfg, &mut m)?;
    let pairs: Vec<_> = spec.pairs.iter().map(|p| p.inputs).collect();
    let (traces, links) = sweep_pairs(&mut emu, &spec, &pairs, &cfg)?;
    let unitary = reconstruct_unitary(&mut emu, &spec, &traces)?;
    let out = &a.common.out;
    let ideal = ideal_unitary(&spec, emu.fabricated())?.magnitudes();
    write_traces(out, &mut m, &traces, &links)?;
    files::unitary_csv(&ideal, &unitary.magnitudes).write(&out.join("unitary.csv"))?;
    files::write_json(files::CIRCUIT_V1, &out.join("circuit.json"), &spec)?;
    let fid = unitary.fidelity;
    let met = MetFile {
        circuit: spec.name.clone(),
        links: links.clone(),
        unitary: Some(unitary),
        traces,
    };
    files::write_json(files::MET_V1, &out.join("met.json"), &met)?;
    m.output("unitary.csv", "csv");
    m.output("circuit.json", files::CIRCUIT_V1);
    m.output("met.json", files::MET_V1);
    m.write(out)?;
    say!("circuit {}: pairs {}", spec.name, format_pairs(&pairs));
    print_links(&links);
    if let Some(f) = fid {
        say!("unitary fidelity F_N = {f:.4}");
    }
    Ok(())
}

fn sweep(a: SweepArgs, args: &[String]) -> Result<(), CliError> {
    let c = &a.circuit;
    let cfg = RunConfig::load(c.common.config.as_deref())?;
    let mut m = manifest("sweep", args, &c.common);
    let (mut emu, _, spec) = programmed(c, &cfg, &mut m)?;
    let pairs: Vec<_> = if a.pairs.is_empty() {
        spec.pairs.iter().map(|p| p.inputs).collect()
    } else {
        a.pairs.clone()
    };
    for &(i, j) in &pairs {
        if spec.pair_for_inputs(i, j).is_none() {
            return Err(CliError::Usage(format!(
                "circuit {} does not route inputs {}-{}",
                spec.name,
                i + 1,
                j + 1
            )));
        }
    }
    let (traces, links) = sweep_pairs(&mut emu, &spec, &pairs, &cfg)?;
    let out = &c.common.out;
    write_traces(out, &mut m, &traces, &links)?;
    let met = MetFile {
        circuit: spec.name.clone(),
        links: links.clone(),
        unitary: None,
        traces,
    };
    files::write_json(files::MET_V1, &out.join("met.json"), &met)?;
    m.output("met.json", files::MET_V1);
    m.write(out)?;
    print_links(&links);
    Ok(())
}

fn reconstruct(a: ReconstructArgs, args: &[String]) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.common.config.as_deref())?;
    let mut m = manifest("reconstruct", args, &a.common);
    let met: MetFile = files::read_json(files::MET_V1, &a.sweep)?;
    m.input(&a.sweep);
    let id: CircuitId = met
        .circuit
        .parse()
        .map_err(|e: photomesh_core::Error| CliError::Usage(e.to_string()))?;
    let circuit_args = CircuitArgs {
        common: Common {
            config: a.common.config.clone(),
            out: a.common.out.clone(),
        },
        chip: a.chip.clone(),
        cal: a.cal.clone(),
        circuit: id,
    };
    let (mut emu, _, spec) = programmed(&circuit_args, &cfg, &mut m)?;
    let unitary = reconstruct_unitary(&mut emu, &spec, &met.traces)?;
    let ideal = ideal_unitary(&spec, emu.fabricated())?.magnitudes();
    let out = &a.common.out;
    files::unitary_csv(&ideal, &unitary.magnitudes).write(&out.join("unitary.csv"))?;
    let fid = unitary.fidelity;
    let met = MetFile {
        unitary: Some(unitary),
        ..met
    };
    files::write_json(files::MET_V1, &out.join("met.json"), &met)?;
    m.output("unitary.csv", "csv");
    m.output("met.json", files::MET_V1);
    m.write(out)?;
    if let Some(f) = fid {
        say!("unitary fidelity F_N = {f:.4}");
    }
    Ok(())
}

fn lattice(a: LatticeArgs, args: &[String]) -> Result<(), CliError> {
    let cfg = LatticeConfig::load(a.config.as_deref())?;
    let mut m = RunManifest::new("lattice", args, &a.out);
    m.config = a.config.as_ref().map(|p| p.display().to_string());
    let mut measure = cfg.measure.clone();
    if let Some(p) = &a.pattern {
        let pat: PatternFile = files::read_json(files::PATTERN_V1, p)?;
        measure.extend(pat.nodes);
        m.input(p);
    }
    let base = if cfg.grid_links {
        let mut g = assemble_grid(cfg.dims, cfg.include_optional);
        for &(x, y) in &cfg.links {
            g.add_edge(x, y, EdgeKind::Inter)?;
        }
        g
    } else {
        let cells: Vec<_> = (0..cfg.dims.iter().product::<usize>())
            .map(|i| unit_cell(i as u32, cfg.include_optional))
            .collect();
        interconnect(&cells, &cfg.links)?
    };
    let reduced = z_measure(&base, &measure)?;
    let schedule = link_schedule(&unit_cell(0, cfg.include_optional).module_pairs(0))?;
    let out = &a.out;
    files::write_json(files::GRAPH_V1, &out.join("assembled.json"), &base)?;
    files::write_json(files::GRAPH_V1, &out.join("graph.json"), &reduced)?;
    files::edges_csv(&reduced).write(&out.join("edges.csv"))?;
    let mut t = Table::new(&["circuit", "input_i", "input_j"]);
    for s in &schedule {
        for &(i, j) in &s.pairs {
            t.row([s.circuit.to_string(), i.to_string(), j.to_string()]);
        }
    }
    t.write(&out.join("schedule.csv"))?;
    for (name, fmt) in [
        ("assembled.json", files::GRAPH_V1),
        ("graph.json", files::GRAPH_V1),
        ("edges.csv", "csv"),
        ("schedule.csv", "csv"),
    ] {
        m.output(name, fmt);
    }
    m.write(out)?;
    say!(
        "assembled {} nodes, {} edges ({} links); measured {}; remaining {} nodes, {} edges",
        base.node_count(),
        base.edge_count(),
        base.edge_count_of(EdgeKind::Inter),
        measure.len(),
        reduced.node_count(),
        reduced.edge_count()
    );
    let ids: Vec<String> = schedule.iter().map(|s| s.circuit.to_string()).collect();
    say!("cell schedule: {} circuits ({})", ids.len(), ids.join(", "));
    Ok(())
}

#[derive(Serialize)]
struct MontecarloFile<'a> {
    config: &'a RunConfig,
    first_seed: u64,
    circuits: &'a [CircuitId],
    stats: EnsembleStats,
    chips: &'a [pipeline::ChipSummary],
}

fn montecarlo(a: MontecarloArgs, args: &[String]) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.common.config.as_deref())?;
    let mut m = manifest("montecarlo", args, &a.common);
    m.seed = Some(a.seed);
    let chips = pipeline::montecarlo(&cfg, a.seed, a.trials, &a.circuit)?;
    let stats = EnsembleStats::from_summaries(&chips);
    let out = &a.common.out;
    let mut per_chip = Table::new(&[
        "seed",
        "complete",
        "calibration_failures",
        "mean_fidelity",
        "min_fidelity",
    ]);
    let mut links = Table::new(&["seed", "circuit", "input_i", "input_j", "f_plus", "f_minus"]);
    let mut unitary = Table::new(&["seed", "circuit", "unitary_fidelity"]);
    for c in &chips {
        let f: Vec<f64> = c.fidelities().collect();
        let mean = if f.is_empty() {
            f64::NAN
        } else {
            f.iter().sum::<f64>() / f.len() as f64
        };
        per_chip.row([
            c.seed.to_string(),
            c.is_complete().to_string(),
            c.calibration_failures.to_string(),
            files::num(mean),
            c.min_fidelity().map(files::num).unwrap_or_default(),
        ]);
        for l in &c.links {
            links.row([
                c.seed.to_string(),
                l.circuit.to_string(),
                l.pair.0.to_string(),
                l.pair.1.to_string(),
                files::num(l.f_plus),
                files::num(l.f_minus),
            ]);
        }
        for (id, f) in &c.unitary_fidelities {
            unitary.row([c.seed.to_string(), id.to_string(), files::num(*f)]);
        }
    }
    per_chip.write(&out.join("chips.csv"))?;
    links.write(&out.join("links.csv"))?;
    unitary.write(&out.join("unitary.csv"))?;
    let doc = MontecarloFile {
        config: &cfg,
        first_seed: a.seed,
        circuits: &a.circuit,
        stats: stats.clone(),
        chips: &chips,
    };
    files::write_json(files::MONTECARLO_V1, &out.join("summary.json"), &doc)?;
    for (name, fmt) in [
        ("chips.csv", "csv"),
        ("links.csv", "csv"),
        ("unitary.csv", "csv"),
        ("summary.json", files::MONTECARLO_V1),
    ] {
        m.output(name, fmt);
    }
    m.write(out)?;
    say!(
        "{} chips ({} complete): link fidelity {:.4} ± {:.4}, worst chip minimum {:.4}; F_N p5/p50/p95 {:.3}/{:.3}/{:.3}",
        stats.chips,
        stats.complete_chips,
        stats.mean_fidelity,
        stats.std_fidelity,
        stats.worst_chip_min,
        stats.unitary_fidelity_p05,
        stats.unitary_fidelity_p50,
        stats.unitary_fidelity_p95
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_syntax() {
        assert_eq!(parse_pair("3-7"), Ok((2, 6)));
        assert!(parse_pair("0-1").is_err());
        assert!(parse_pair("3").is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(
            main(["photomesh", "run-circuit", "--circuit", "9", "--out", "x"]),
            ExitCode::from(2)
        );
        assert_eq!(main(["photomesh", "bogus"]), ExitCode::from(2));
    }
}
