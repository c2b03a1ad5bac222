//! Command-line entry point: threshold analysis, potential curves, density
//! evolution traces, topology dumps, memory generation, recall runs, and
//! Monte Carlo experiment plans. Every file-writing subcommand also writes a
//! `<out>.manifest.json` that `repro` can replay and verify byte-for-byte.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use coupled_am::de::{self, DEModel, ErrorProfile, Mode};
use coupled_am::error::Error;
use coupled_am::manifest::RunManifest;
use coupled_am::memory::{
    nullspace_network, random_weights, GeneratorSpec, PatternState, WeightMode, WeightsBundle,
};
use coupled_am::montecarlo::{self, ExperimentPlan};
use coupled_am::poly::{default_dist, DistFile};
use coupled_am::recall::{coupled_correct, inject_noise, RecallConfig};
use coupled_am::topology::{build_topology, dump_topology, GridSpec};

#[derive(Parser)]
#[command(name = "coupled-am", version, about = "Coupled associative memory toolkit")]
struct Cli {
    /// Worker threads for parallel sections (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the uncoupled (p_dagger) and coupled (p_star) noise thresholds.
    Thresholds(ThresholdsArgs),
    /// Emit scalar potential curves U_s(z; p_e) as CSV columns.
    PotentialCurve(PotentialCurveArgs),
    /// Emit the coupled density-evolution profile per iteration.
    DeTrace(DeTraceArgs),
    /// Topology inspection.
    #[command(subcommand)]
    Topology(TopologyCmd),
    /// Stored-memory generation.
    #[command(subcommand)]
    Memory(MemoryCmd),
    /// Recall runs on generated networks.
    #[command(subcommand)]
    Recall(RecallCmd),
    /// Monte Carlo experiments.
    #[command(subcommand)]
    Mc(McCmd),
    /// Replay a manifest and verify outputs are byte-identical.
    Repro(ReproArgs),
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct ThresholdsArgs {
    /// Degree-distribution JSON ({"lambda": [...], "rho": [...], "e": n});
    /// defaults to the bundled distribution.
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Errors corrected per cluster; overrides the value in the dist file.
    #[arg(long)]
    e: Option<u32>,
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct PotentialCurveArgs {
    #[arg(long)]
    dist: Option<PathBuf>,
    #[arg(long)]
    e: Option<u32>,
    /// Noise levels, comma separated (e.g. --pe 0.35,0.394,0.45).
    #[arg(long, value_delimiter = ',', required = true)]
    pe: Vec<f64>,
    /// Number of z samples on [0, 1].
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct DeTraceArgs {
    #[arg(long)]
    dist: Option<PathBuf>,
    #[arg(long)]
    e: Option<u32>,
    /// Coupling half-width.
    #[arg(long)]
    omega: usize,
    /// Chain length (number of planes).
    #[arg(long = "L")]
    chain_len: usize,
    #[arg(long)]
    pe: f64,
    #[arg(long, value_enum, default_value = "unconstrained")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1000)]
    tmax: usize,
    /// Stop once every component is below this value.
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::ValueEnum, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Constrained,
    Unconstrained,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Constrained => Mode::Constrained,
            ModeArg::Unconstrained => Mode::Unconstrained,
        }
    }
}

#[derive(Subcommand)]
enum TopologyCmd {
    /// Write clusters, memberships, degree histogram, and the derived lambda.
    Dump(TopologyDumpArgs),
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct TopologyDumpArgs {
    /// Grid spec JSON: {"height": 64, "width": 64, "window": 8, "stride": 2}.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum MemoryCmd {
    /// Generate a dataset and per-cluster weight matrices.
    Gen(MemoryGenArgs),
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct MemoryGenArgs {
    /// Memory spec JSON; see the README for the schema.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum RecallCmd {
    /// Run coupled recall on a generated network under fresh noise.
    Run(RecallRunArgs),
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct RecallRunArgs {
    /// Directory produced by `memory gen`.
    #[arg(long)]
    weights: PathBuf,
    #[arg(long = "noise-pe")]
    noise_pe: f64,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.999)]
    phi: f64,
    /// Iteration budget, applied to both the inner and outer loops.
    #[arg(long, default_value_t = 10)]
    tmax: usize,
    #[arg(long)]
    seed: u64,
    /// Which stored pattern to recall (index into patterns.bin).
    #[arg(long, default_value_t = 0)]
    pattern_index: usize,
    /// Corner patch side frozen in constrained mode.
    #[arg(long, default_value_t = 3)]
    frozen_patch: usize,
    /// Trace CSV: sweep,plane,cluster,committed,residual_errors.
    #[arg(long)]
    trace: PathBuf,
    /// Optional recalled pattern, clamped into the alphabet (i32 LE).
    #[arg(long)]
    out_pattern: Option<PathBuf>,
}

#[derive(Subcommand)]
enum McCmd {
    /// Run an experiment plan and write the PER curve.
    Run(McRunArgs),
    /// Join several plan results into one table for plotting.
    Compare(McCompareArgs),
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct McRunArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct McCompareArgs {
    /// Plan JSON files, one per architecture/mode.
    #[arg(long, num_args = 1.., required = true)]
    plans: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct ReproArgs {
    #[arg(long)]
    manifest: PathBuf,
}

/// On-disk memory spec consumed by `memory gen`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MemorySpec {
    mode: WeightMode,
    grid: GridSpec,
    /// Required for nullspace mode.
    generator: Option<GeneratorSpec>,
    m_per_cluster: Option<usize>,
    #[serde(default = "default_row_degree")]
    mean_row_degree: f64,
    #[serde(default = "default_pattern_limit")]
    pattern_limit: usize,
}

fn default_row_degree() -> f64 {
    8.0
}

fn default_pattern_limit() -> usize {
    1024
}

/// Serialized weights bundle plus everything recall needs.
#[derive(Debug, Serialize, Deserialize)]
struct WeightsFile {
    seed: u64,
    spec_sha256: String,
    grid: GridSpec,
    mode: WeightMode,
    alphabet: u32,
    clusters: Vec<ClusterWeightsFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClusterWeightsFile {
    plane: usize,
    cluster: usize,
    neuron_map: Vec<usize>,
    /// Dense rows over the cluster's local indices.
    rows: Vec<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        // Ignore failure: the global pool may already exist.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::InvalidDistribution(_)
        | Error::Domain { .. }
        | Error::DimensionMismatch { .. }
        | Error::Json(_) => 2,
        Error::Infeasible(_) | Error::Degenerate(_) => 3,
        Error::Io(_) => 1,
    }
}

fn dispatch(cmd: Cmd) -> Result<ExitCode, Error> {
    match cmd {
        Cmd::Thresholds(a) => run_thresholds(&a),
        Cmd::PotentialCurve(a) => {
            let out = a.out.clone();
            run_potential_curve(&a, &out)
        }
        Cmd::DeTrace(a) => {
            let out = a.out.clone();
            run_de_trace(&a, &out)
        }
        Cmd::Topology(TopologyCmd::Dump(a)) => {
            let out = a.out.clone();
            run_topology_dump(&a, &out)
        }
        Cmd::Memory(MemoryCmd::Gen(a)) => {
            let out = a.out.clone();
            run_memory_gen(&a, &out)
        }
        Cmd::Recall(RecallCmd::Run(a)) => {
            let out = a.trace.clone();
            run_recall(&a, &out)
        }
        Cmd::Mc(McCmd::Run(a)) => {
            let out = a.out.clone();
            run_mc(&a, &out)
        }
        Cmd::Mc(McCmd::Compare(a)) => {
            let out = a.out.clone();
            run_mc_compare(&a, &out)
        }
        Cmd::Repro(a) => run_repro(&a),
    }
}

fn load_dist(path: &Option<PathBuf>) -> Result<DistFile, Error> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config {
                field: "dist",
                message: format!("cannot read {}: {e}", p.display()),
            })?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(default_dist()),
    }
}

fn model_from(
    dist: &DistFile,
    e_override: Option<u32>,
    omega: usize,
    chain_len: usize,
) -> Result<DEModel, Error> {
    let e = e_override.unwrap_or(dist.e);
    DEModel::new(dist.lambda_poly()?, dist.rho_poly()?, e, omega, chain_len)
}

fn run_thresholds(a: &ThresholdsArgs) -> Result<ExitCode, Error> {
    let dist = load_dist(&a.dist)?;
    let model = model_from(&dist, a.e, 0, 1)?;
    let t = de::thresholds(&model)?;
    println!("p_dagger={:.6} p_star={:.6}", t.p_dagger, t.p_star);
    Ok(ExitCode::SUCCESS)
}

fn run_potential_curve(a: &PotentialCurveArgs, out: &Path) -> Result<ExitCode, Error> {
    let dist = load_dist(&a.dist)?;
    let model = model_from(&dist, a.e, 0, 1)?;
    if a.samples < 2 {
        return Err(Error::Config {
            field: "samples",
            message: "need at least 2 samples".into(),
        });
    }
    for &pe in &a.pe {
        if !(0.0..=1.0).contains(&pe) {
            return Err(Error::Config {
                field: "pe",
                message: format!("noise level {pe} outside [0, 1]"),
            });
        }
    }
    let mut csv = String::from("z");
    for pe in &a.pe {
        csv.push_str(&format!(",{pe}"));
    }
    csv.push('\n');
    for i in 0..=a.samples {
        let z = i as f64 / a.samples as f64;
        csv.push_str(&format!("{z:.6}"));
        for &pe in &a.pe {
            csv.push_str(&format!(",{:.12e}", de::potential_scalar(&model, z, pe)?));
        }
        csv.push('\n');
    }
    fs::write(out, csv)?;
    let mut man = RunManifest::new("potential-curve", serde_json::to_value(a)?);
    if let Some(p) = &a.dist {
        man.record_input(p)?;
    }
    man.record_output(out)?;
    man.write_alongside(out)?;
    Ok(ExitCode::SUCCESS)
}

fn run_de_trace(a: &DeTraceArgs, out: &Path) -> Result<ExitCode, Error> {
    let dist = load_dist(&a.dist)?;
    let model = model_from(&dist, a.e, a.omega, a.chain_len)?;
    if !(0.0..=1.0).contains(&a.pe) {
        return Err(Error::Config {
            field: "pe",
            message: format!("noise level {} outside [0, 1]", a.pe),
        });
    }
    let mut csv = String::from("iter");
    for l in 1..=a.chain_len {
        csv.push_str(&format!(",z{l}"));
    }
    csv.push('\n');
    let mut profile = ErrorProfile::uniform(a.pe, a.chain_len)?;
    if ModeArg::Constrained == a.mode {
        profile.pin_boundary(a.omega);
    }
    fn render(csv: &mut String, it: usize, p: &ErrorProfile) {
        csv.push_str(&it.to_string());
        for v in p.values() {
            csv.push_str(&format!(",{v:.9e}"));
        }
        csv.push('\n');
    }
    render(&mut csv, 0, &profile);
    {
        let mut sink = |it: usize, p: &ErrorProfile| render(&mut csv, it, p);
        de::iterate_coupled(
            &model,
            a.pe,
            &profile,
            a.mode.into(),
            a.eps,
            a.tmax,
            Some(&mut sink),
        )?;
    }
    fs::write(out, csv)?;
    let mut man = RunManifest::new("de-trace", serde_json::to_value(a)?);
    if let Some(p) = &a.dist {
        man.record_input(p)?;
    }
    man.record_output(out)?;
    man.write_alongside(out)?;
    Ok(ExitCode::SUCCESS)
}

fn run_topology_dump(a: &TopologyDumpArgs, out: &Path) -> Result<ExitCode, Error> {
    let text = fs::read_to_string(&a.spec).map_err(|e| Error::Config {
        field: "spec",
        message: format!("cannot read {}: {e}", a.spec.display()),
    })?;
    let spec: GridSpec = serde_json::from_str(&text)?;
    let topo = build_topology(&spec)?;
    let dump = dump_topology(&topo)?;
    fs::write(out, serde_json::to_string_pretty(&dump)?)?;
    let mut man = RunManifest::new("topology-dump", serde_json::to_value(a)?);
    man.record_input(&a.spec)?;
    man.record_output(out)?;
    man.write_alongside(out)?;
    Ok(ExitCode::SUCCESS)
}

fn run_memory_gen(a: &MemoryGenArgs, out_dir: &Path) -> Result<ExitCode, Error> {
    let text = fs::read_to_string(&a.spec).map_err(|e| Error::Config {
        field: "spec",
        message: format!("cannot read {}: {e}", a.spec.display()),
    })?;
    let spec: MemorySpec = serde_json::from_str(&text)?;
    let spec_hash = coupled_am::manifest::sha256_hex(text.as_bytes());
    fs::create_dir_all(out_dir)?;
    let topo = build_topology(&spec.grid)?;
    let m_default = |n_c: usize| ((0.75 * n_c as f64).round() as usize).max(1);

    let (bundle, patterns, alphabet) = match spec.mode {
        WeightMode::Random => {
            let window_sq = spec.grid.window * spec.grid.window;
            let m = spec.m_per_cluster.unwrap_or_else(|| m_default(window_sq));
            let bundle = random_weights(&topo, m, spec.mean_row_degree, a.seed);
            (bundle, vec![PatternState::zeros(spec.grid.neurons(), 2)], 2)
        }
        WeightMode::Nullspace => {
            let gen_spec = spec.generator.ok_or(Error::Config {
                field: "generator",
                message: "nullspace mode requires a generator spec".into(),
            })?;
            if gen_spec.n != spec.grid.neurons() {
                return Err(Error::Config {
                    field: "generator.n",
                    message: format!(
                        "generator length {} must equal grid neurons {}",
                        gen_spec.n,
                        spec.grid.neurons()
                    ),
                });
            }
            let window_sq = spec.grid.window * spec.grid.window;
            let m = spec.m_per_cluster.unwrap_or_else(|| m_default(window_sq));
            let (ds, bundle) = nullspace_network(&gen_spec, &topo, m, spec.pattern_limit, a.seed)?;
            let gen_out = out_dir.join("generator.json");
            fs::write(
                &gen_out,
                serde_json::to_string_pretty(&serde_json::json!({
                    "seed": a.seed,
                    "spec_sha256": spec_hash,
                    "spec": gen_spec,
                    "rank": ds.rank,
                    "rows": ds.generator,
                }))?,
            )?;
            let alphabet = gen_spec.alphabet;
            (bundle, ds.patterns, alphabet)
        }
    };

    // patterns.bin: row-major i32, little endian, one pattern after another.
    let mut bytes = Vec::with_capacity(patterns.len() * spec.grid.neurons() * 4);
    for p in &patterns {
        for &v in &p.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(out_dir.join("patterns.bin"), bytes)?;
    fs::write(
        out_dir.join("patterns.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "seed": a.seed,
            "spec_sha256": spec_hash,
            "count": patterns.len(),
            "n": spec.grid.neurons(),
            "alphabet": alphabet,
            "encoding": "row-major i32 little-endian",
        }))?,
    )?;

    let wf = WeightsFile {
        seed: a.seed,
        spec_sha256: spec_hash,
        grid: spec.grid,
        mode: spec.mode,
        alphabet,
        clusters: bundle
            .clusters
            .iter()
            .map(|cw| ClusterWeightsFile {
                plane: cw.plane,
                cluster: cw.cluster,
                neuron_map: cw.neuron_map.clone(),
                rows: cw
                    .rows
                    .iter()
                    .map(|r| r.to_dense(cw.n_neurons()))
                    .collect(),
            })
            .collect(),
    };
    fs::write(
        out_dir.join("weights.json"),
        serde_json::to_string_pretty(&wf)?,
    )?;

    let mut man = RunManifest::new("memory-gen", serde_json::to_value(a)?);
    man.record_input(&a.spec)?;
    for name in ["weights.json", "patterns.bin", "patterns.json"] {
        man.record_output(&out_dir.join(name))?;
    }
    if out_dir.join("generator.json").exists() {
        man.record_output(&out_dir.join("generator.json"))?;
    }
    man.write_alongside(&out_dir.join("memory"))?;
    println!(
        "wrote {} clusters, {} patterns to {}",
        wf.clusters.len(),
        patterns.len(),
        out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_weights(dir: &Path) -> Result<(WeightsFile, WeightsBundle), Error> {
    let text = fs::read_to_string(dir.join("weights.json")).map_err(|e| Error::Config {
        field: "weights",
        message: format!("cannot read {}/weights.json: {e}", dir.display()),
    })?;
    let wf: WeightsFile = serde_json::from_str(&text)?;
    let clusters = wf
        .clusters
        .iter()
        .map(|c| coupled_am::memory::ClusterWeights {
            plane: c.plane,
            cluster: c.cluster,
            neuron_map: c.neuron_map.clone(),
            rows: c
                .rows
                .iter()
                .map(|dense| coupled_am::memory::SparseRow::from_dense(dense))
                .collect(),
        })
        .collect();
    let bundle = WeightsBundle {
        mode: wf.mode,
        seed: wf.seed,
        m_per_cluster: 0,
        mean_row_degree: f64::NAN,
        clusters,
    };
    Ok((wf, bundle))
}

fn load_pattern(dir: &Path, index: usize, n: usize, alphabet: u32) -> Result<PatternState, Error> {
    let bytes = fs::read(dir.join("patterns.bin")).map_err(|e| Error::Config {
        field: "weights",
        message: format!("cannot read {}/patterns.bin: {e}", dir.display()),
    })?;
    let per = n * 4;
    let count = bytes.len() / per;
    if index >= count {
        return Err(Error::Config {
            field: "pattern_index",
            message: format!("index {index} out of range; {count} patterns stored"),
        });
    }
    let chunk = &bytes[index * per..(index + 1) * per];
    let values = chunk
        .chunks_exact(4)
        .map(|b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(PatternState { values, alphabet })
}

fn corner_patches(grid: &GridSpec, patch: usize) -> HashSet<usize> {
    let (h, w) = (grid.height, grid.width);
    let mut frozen = HashSet::new();
    for (r0, c0) in [(0, 0), (0, w - patch), (h - patch, 0), (h - patch, w - patch)] {
        for r in r0..r0 + patch {
            for c in c0..c0 + patch {
                frozen.insert(r * w + c);
            }
        }
    }
    frozen
}

fn run_recall(a: &RecallRunArgs, out: &Path) -> Result<ExitCode, Error> {
    let (wf, bundle) = load_weights(&a.weights)?;
    let reference = load_pattern(&a.weights, a.pattern_index, wf.grid.neurons(), wf.alphabet)?;
    let frozen = match a.mode {
        ModeArg::Constrained => corner_patches(&wf.grid, a.frozen_patch),
        ModeArg::Unconstrained => HashSet::new(),
    };
    let cfg = RecallConfig {
        phi: a.phi,
        t_max_inner: a.tmax,
        t_max_outer: a.tmax,
        mode: a.mode.into(),
        frozen: frozen.clone(),
    };
    let noisy = inject_noise(&reference, a.noise_pe, a.seed, &frozen)?;
    let (final_state, trace) = coupled_correct(&bundle, &noisy, &reference, &cfg)?;
    let mut csv = String::from("sweep,plane,cluster,committed,residual_errors\n");
    for r in &trace {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.sweep, r.plane, r.cluster, r.committed as u8, r.residual_errors
        ));
    }
    fs::write(out, csv)?;
    if let Some(pat_out) = &a.out_pattern {
        // recall states may leave the alphabet transiently; outputs are clamped
        let clamped = final_state.clamped();
        let mut bytes = Vec::with_capacity(clamped.len() * 4);
        for &v in &clamped.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(pat_out, bytes)?;
    }
    let residual = final_state
        .values
        .iter()
        .zip(&reference.values)
        .filter(|(x, y)| x != y)
        .count();
    println!(
        "recall {} after {} visits; residual_errors={residual}",
        if residual == 0 { "succeeded" } else { "FAILED" },
        trace.len(),
    );
    let mut man = RunManifest::new("recall-run", serde_json::to_value(a)?);
    man.record_input(&a.weights.join("weights.json"))?;
    man.record_input(&a.weights.join("patterns.bin"))?;
    man.record_output(out)?;
    if let Some(pat_out) = &a.out_pattern {
        man.record_output(pat_out)?;
    }
    man.write_alongside(out)?;
    Ok(ExitCode::SUCCESS)
}

fn run_mc(a: &McRunArgs, out: &Path) -> Result<ExitCode, Error> {
    let text = fs::read_to_string(&a.plan).map_err(|e| Error::Config {
        field: "plan",
        message: format!("cannot read {}: {e}", a.plan.display()),
    })?;
    let plan: ExperimentPlan = serde_json::from_str(&text)?;
    let result = montecarlo::run_plan(&plan)?;
    fs::write(out, montecarlo::per_csv(&result))?;
    let violations = montecarlo::nonmonotonic_violations(&result.points);
    if !violations.is_empty() {
        eprintln!("warning: PER decreases beyond the 95% bands at point pairs {violations:?}");
    }
    let mut man = RunManifest::new("mc-run", serde_json::to_value(a)?);
    man.record_input(&a.plan)?;
    man.record_output(out)?;
    man.write_alongside(out)?;
    Ok(ExitCode::SUCCESS)
}

fn run_mc_compare(a: &McCompareArgs, out: &Path) -> Result<ExitCode, Error> {
    let mut results = Vec::new();
    for path in &a.plans {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            field: "plans",
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let plan: ExperimentPlan = serde_json::from_str(&text)?;
        results.push(montecarlo::run_plan(&plan)?);
    }
    let grid: Vec<f64> = results[0].points.iter().map(|p| p.pe).collect();
    for r in &results[1..] {
        let g: Vec<f64> = r.points.iter().map(|p| p.pe).collect();
        if g != grid {
            return Err(Error::Config {
                field: "plans",
                message: "plans must share the same pe grid for a joined table".into(),
            });
        }
    }
    let mut csv = String::from("pe");
    for r in &results {
        let label = format!("{:?}_{:?}", r.arch, r.mode).to_lowercase();
        csv.push_str(&format!(",{label}_per,{label}_lo,{label}_hi"));
    }
    csv.push('\n');
    for (i, pe) in grid.iter().enumerate() {
        csv.push_str(&format!("{pe}"));
        for r in &results {
            let p = &r.points[i];
            csv.push_str(&format!(
                ",{:.6},{:.6},{:.6}",
                p.per, p.wilson_lo, p.wilson_hi
            ));
        }
        csv.push('\n');
    }
    fs::write(out, csv)?;
    let mut man = RunManifest::new("mc-compare", serde_json::to_value(a)?);
    for p in &a.plans {
        man.record_input(p)?;
    }
    man.record_output(out)?;
    man.write_alongside(out)?;
    Ok(ExitCode::SUCCESS)
}

fn run_repro(a: &ReproArgs) -> Result<ExitCode, Error> {
    let man = RunManifest::load(&a.manifest)?;
    let tmp = std::env::temp_dir().join(format!("coupled-am-repro-{}", std::process::id()));
    fs::create_dir_all(&tmp)?;
    let replay_out = |orig: &Path| tmp.join(orig.file_name().unwrap_or_default());

    for input in &man.inputs {
        let now = coupled_am::manifest::digest_file(&input.path)?;
        if now.sha256 != input.sha256 {
            eprintln!(
                "input changed since the original run: {}",
                input.path.display()
            );
            return Ok(ExitCode::FAILURE);
        }
    }
    let cfg = man.config.clone();
    match man.subcommand.as_str() {
        "potential-curve" => {
            let args: PotentialCurveArgs = serde_json::from_value(cfg)?;
            run_potential_curve(&args, &replay_out(&args.out))?;
        }
        "de-trace" => {
            let args: DeTraceArgs = serde_json::from_value(cfg)?;
            run_de_trace(&args, &replay_out(&args.out))?;
        }
        "topology-dump" => {
            let args: TopologyDumpArgs = serde_json::from_value(cfg)?;
            run_topology_dump(&args, &replay_out(&args.out))?;
        }
        "memory-gen" => {
            let args: MemoryGenArgs = serde_json::from_value(cfg)?;
            run_memory_gen(&args, &tmp)?;
        }
        "recall-run" => {
            let mut args: RecallRunArgs = serde_json::from_value(cfg)?;
            if let Some(p) = &args.out_pattern {
                args.out_pattern = Some(replay_out(p));
            }
            let out = replay_out(&args.trace);
            run_recall(&args, &out)?;
        }
        "mc-run" => {
            let args: McRunArgs = serde_json::from_value(cfg)?;
            run_mc(&args, &replay_out(&args.out))?;
        }
        "mc-compare" => {
            let args: McCompareArgs = serde_json::from_value(cfg)?;
            run_mc_compare(&args, &replay_out(&args.out))?;
        }
        other => {
            return Err(Error::Config {
                field: "manifest",
                message: format!("subcommand `{other}` is not replayable"),
            });
        }
    }

    let mut ok = true;
    for output in &man.outputs {
        let candidate = replay_out(&output.path);
        match coupled_am::manifest::digest_file(&candidate) {
            Ok(d) if d.sha256 == output.sha256 => {
                println!("ok: {}", output.path.display());
            }
            Ok(d) => {
                println!(
                    "MISMATCH: {} (recorded {}, replayed {})",
                    output.path.display(),
                    &output.sha256[..12],
                    &d.sha256[..12]
                );
                ok = false;
            }
            Err(e) => {
                println!("MISSING: {} ({e})", output.path.display());
                ok = false;
            }
        }
    }
    let _ = fs::remove_dir_all(&tmp);
    if ok {
        println!("repro verified: outputs are byte-identical");
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::FAILURE)
    }
}
