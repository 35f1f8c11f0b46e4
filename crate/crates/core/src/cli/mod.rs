//! Batch front end. Exit codes: 0 success, 1 usage or config error, 2 numeric
//! or fit failure.

pub mod config;
pub mod table;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{
    self, build_signature, lambda_star, synthesize_specialized, AnalysisError, CurvePoint,
    SignatureMode, SignaturePlot,
};
use crate::matcher::WeightFamily;
use crate::montecarlo::{self, CellSpec, SimError, SweepCell};
use crate::noise::NoiseModel;
use crate::oracle;
use crate::pilot;
use config::{ConfigError, ExperimentConfig, Overrides};
use table::ResultRow;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::FitFailure { .. }
            | AnalysisError::Unphysical { .. }
            | AnalysisError::NonPositive => CliError::Numeric(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "adaptive-toric",
    version,
    about = "Toric-code decoding under correlated noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunFlags {
    /// Overrides run.master_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; overrides run.threads.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides run.trials.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Output file; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            threads: self.threads,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Failure rate for every cell of the config grid.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Keep rows already in --out and simulate only the missing cells.
        #[arg(long, requires = "out")]
        resume: bool,
    },
    /// Finite-size-scaling fit per (model, xi, family, lambda) group of a sweep CSV.
    Threshold {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Signature plot over the config's lambda list, with the λ* estimates.
    Signature {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Also write the underlying sweep rows here.
        #[arg(long)]
        cells: Option<PathBuf>,
    },
    /// Compares standard, fixed-weight λ* and the synthesised multi-peak
    /// decoder on the noise of the config.
    Specialize {
        signature: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Placement counts and the ratio bound.
    Oracle {
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        xi: Vec<usize>,
        #[arg(long = "L", value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep {
            config,
            flags,
            resume,
        } => cmd_sweep(&config, &flags, resume),
        Command::Threshold { csv, out } => cmd_threshold(&csv, out.as_deref()),
        Command::Signature {
            config,
            flags,
            cells,
        } => cmd_signature(&config, &flags, cells.as_deref()),
        Command::Specialize {
            signature,
            config,
            flags,
        } => cmd_specialize(&signature, &config, &flags),
        Command::Oracle { k, xi, sizes, out } => cmd_oracle(&k, &xi, &sizes, out.as_deref()),
    }
}

fn load_config(path: &Path, flags: &RunFlags) -> Result<ExperimentConfig, CliError> {
    let cfg = ExperimentConfig::load(path, flags.overrides())?;
    if let Some(n) = cfg.threads {
        // Fails harmlessly if a pool already exists (e.g. in tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(cfg)
}

/// Writes to `path` through a temporary sibling, or to stdout.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let tmp = p.with_extension("tmp");
            fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
            fs::rename(&tmp, p).map_err(|e| io_err(p, e))
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Usage(e.to_string())),
    }
}

fn results_bytes(rows: &[ResultRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    table::write_results(&mut buf, rows).expect("writing to memory");
    buf
}

/// Grid cells in output order: ξ, then p, then L, then decoder.
pub fn grid(cfg: &ExperimentConfig) -> Vec<CellSpec> {
    let mut cells = Vec::new();
    for &xi in &cfg.xis {
        for &p in &cfg.ps {
            let model = NoiseModel::new(cfg.kind, p, xi).expect("validated");
            for &size in &cfg.sizes {
                for f in &cfg.families {
                    cells.push(CellSpec::new(size, model, f.clone()));
                }
            }
        }
    }
    cells
}

fn cmd_sweep(path: &Path, flags: &RunFlags, resume: bool) -> Result<(), CliError> {
    let cfg = load_config(path, flags)?;
    cfg.require_families()?;
    cfg.require_ps()?;
    let cells = grid(&cfg);

    let mut done: Vec<Option<ResultRow>> = vec![None; cells.len()];
    let out = flags.out.as_deref();
    if let (true, Some(out)) = (resume, out) {
        if out.exists() {
            let text = fs::read_to_string(out).map_err(|e| io_err(out, e))?;
            let rows = table::read_partial_results(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
            for row in rows {
                let cell = row
                    .to_cell()
                    .map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
                let Some(i) = cells
                    .iter()
                    .position(|c| c.cell_id() == cell.spec.cell_id())
                else {
                    continue;
                };
                if row.trials != cfg.trials || row.seed != cfg.master_seed {
                    return Err(CliError::Usage(format!(
                        "{} was produced with different trials or seed; remove it or drop --resume",
                        out.display()
                    )));
                }
                done[i] = Some(row);
            }
        }
    }
    let todo: Vec<CellSpec> = cells
        .iter()
        .zip(&done)
        .filter(|(_, d)| d.is_none())
        .map(|(c, _)| c.clone())
        .collect();

    // Progress goes to the output file as each noise point finishes, so an
    // interrupted run can resume.
    let mut progress = match out {
        Some(p) => {
            let present: Vec<ResultRow> = done.iter().flatten().cloned().collect();
            fs::write(p, results_bytes(&present)).map_err(|e| io_err(p, e))?;
            Some(
                fs::OpenOptions::new()
                    .append(true)
                    .open(p)
                    .map_err(|e| io_err(p, e))?,
            )
        }
        None => None,
    };
    let mut write_err = None;
    let fresh = montecarlo::sweep_with(&todo, cfg.trials, cfg.master_seed, |group| {
        if let Some(f) = progress.as_mut() {
            let rows: Vec<ResultRow> = group.iter().map(ResultRow::from_cell).collect();
            if let Err(e) = table::append_results(f, &rows).and_then(|_| f.flush()) {
                write_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(CliError::Usage(format!("writing progress: {e}")));
    }
    let mut fresh = fresh.into_iter();
    let rows: Vec<ResultRow> = done
        .into_iter()
        .map(|d| {
            d.unwrap_or_else(|| ResultRow::from_cell(&fresh.next().expect("one per missing cell")))
        })
        .collect();
    emit(out, &results_bytes(&rows))
}

/// Groups of rows that share everything but L and p.
fn curve_groups(cells: &[SweepCell]) -> Vec<(String, Vec<&SweepCell>)> {
    let mut groups: Vec<(String, Vec<&SweepCell>)> = Vec::new();
    for c in cells {
        let d = &c.spec.decoder;
        let key = format!(
            "{},{},{},{},{}",
            c.spec.model.kind,
            c.spec.model.xi,
            d.family,
            d.lambda_label(),
            d.delta.map_or(String::new(), |x| x.to_string())
        );
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(c),
            None => groups.push((key, vec![c])),
        }
    }
    groups
}

fn cmd_threshold(csv: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let text = fs::read_to_string(csv).map_err(|e| io_err(csv, e))?;
    let cells = table::read_results(&text)
        .and_then(|rows| {
            rows.iter()
                .map(ResultRow::to_cell)
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(|e| CliError::Usage(format!("{}: {e}", csv.display())))?;
    if cells.is_empty() {
        return Err(CliError::Usage(format!("{}: no rows", csv.display())));
    }
    let mut report = String::from(
        "model,xi,family,lambda,delta,p_th,p_th_stderr,mu,mu_stderr,a0,a1,a2,residual,reduced_chi2,rows,iterations,degenerate,out_of_range\n",
    );
    for (key, members) in curve_groups(&cells) {
        let pts: Vec<CurvePoint> = members
            .iter()
            .map(|c| analysis::signature::curve_point(c))
            .collect();
        let fit = analysis::fit_threshold(&pts)?;
        report.push_str(&format!(
            "{key},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fit.p_th,
            fit.p_th_stderr,
            fit.mu,
            fit.mu_stderr,
            fit.coeffs[0],
            fit.coeffs[1],
            fit.coeffs[2],
            fit.residual,
            fit.reduced_chi2,
            fit.rows,
            fit.iterations,
            fit.degenerate,
            fit.out_of_range
        ));
    }
    emit(out, report.as_bytes())
}

/// Signature cells for one ξ: a threshold grid over sizes × p, or one
/// (L, p) in failure mode with p fixed or calibrated.
fn signature_cells(
    cfg: &ExperimentConfig,
    xi_index: usize,
    families: &[WeightFamily],
) -> Result<Vec<SweepCell>, CliError> {
    let xi = cfg.xis[xi_index];
    let cells: Vec<CellSpec> = match cfg.mode {
        SignatureMode::Threshold => {
            cfg.require_ps()?;
            let mut v = Vec::new();
            for &p in &cfg.ps {
                for &size in &cfg.sizes {
                    for f in families {
                        v.push(CellSpec::new(
                            size,
                            NoiseModel::new(cfg.kind, p, xi).expect("validated"),
                            f.clone(),
                        ));
                    }
                }
            }
            v
        }
        SignatureMode::Failure => {
            let [size] = cfg.sizes[..] else {
                return Err(ConfigError::Invalid {
                    field: "lattice.L",
                    reason: "failure mode uses a single lattice size".into(),
                }
                .into());
            };
            let p = match &cfg.operating_p {
                Some(op) => {
                    let pt = pilot::calibrate_operating_p(
                        size,
                        cfg.kind,
                        xi,
                        families,
                        op.target,
                        (op.bracket[0], op.bracket[1]),
                        op.pilot_trials,
                        op.steps,
                        cfg.master_seed ^ 0x5eed,
                    )?;
                    eprintln!("xi={xi}: calibrated operating p = {}", pt.p);
                    pt.p
                }
                None => cfg.fixed_p_for(xi_index)?,
            };
            let model =
                NoiseModel::new(cfg.kind, p, xi).map_err(|e| CliError::Numeric(e.to_string()))?;
            families
                .iter()
                .map(|f| CellSpec::new(size, model, f.clone()))
                .collect()
        }
    };
    Ok(montecarlo::sweep(&cells, cfg.trials, cfg.master_seed)?)
}

fn star_report(plot: &SignaturePlot, window: usize) -> String {
    match lambda_star(plot, window) {
        Ok(s) => format!(
            "xi={} lambda_star={} continuous={:.4} window={} boundary={}",
            plot.xi,
            s.discrete,
            s.continuous,
            s.window
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join("+"),
            s.boundary
        ),
        Err(e) => format!("xi={} lambda_star=unavailable ({e})", plot.xi),
    }
}

fn cmd_signature(path: &Path, flags: &RunFlags, cells_out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_config(path, flags)?;
    cfg.require_families()?;
    let mut plots = Vec::new();
    let mut all_rows = Vec::new();
    for i in 0..cfg.xis.len() {
        let cells = signature_cells(&cfg, i, &cfg.families)?;
        all_rows.extend(cells.iter().map(ResultRow::from_cell));
        let plot = build_signature(&cells, cfg.mode)?;
        println!("{}", star_report(&plot, cfg.fit_window));
        plots.push(plot);
    }
    if let Some(p) = cells_out {
        emit(Some(p), &results_bytes(&all_rows))?;
    }
    let mut buf = Vec::new();
    table::write_plots(&mut buf, cfg.mode, &plots).expect("writing to memory");
    emit(flags.out.as_deref(), &buf)
}

/// λ* for the fixed-weight decoder: the best measured λ, ties to the smaller.
fn fixed_lambda(plot: &SignaturePlot) -> u32 {
    let mut best = &plot.points[0];
    for p in &plot.points {
        if p.value > best.value || (p.value == best.value && p.lambda < best.lambda) {
            best = p;
        }
    }
    best.lambda
}

fn cmd_specialize(signature: &Path, config: &Path, flags: &RunFlags) -> Result<(), CliError> {
    let text = fs::read_to_string(signature).map_err(|e| io_err(signature, e))?;
    let plots = table::read_plots(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", signature.display())))?;
    let mut cfg = load_config(config, flags)?;
    let mut out = format!(
        "{}\nxi,role,family,lambda,value,error\n",
        table::SPECIALIZE_SCHEMA
    );
    for plot in &plots {
        let lam = fixed_lambda(plot);
        let special = synthesize_specialized(plot)?;
        let roles = [
            ("standard", WeightFamily::standard()),
            ("fixed", WeightFamily::single_weight(lam)),
            ("specialised", special),
        ];
        let families: Vec<WeightFamily> = roles.iter().map(|r| r.1.clone()).collect();
        for f in &families {
            for &s in &cfg.sizes {
                f.validate(s).map_err(|e| ConfigError::Invalid {
                    field: "decoder",
                    reason: format!("L = {s}: {e}"),
                })?;
            }
        }
        cfg.xis = vec![plot.xi];
        let cells = signature_cells(&cfg, 0, &families)?;
        for (role, fam) in &roles {
            let mine: Vec<SweepCell> = cells
                .iter()
                .filter(|c| &c.spec.decoder == fam)
                .cloned()
                .collect();
            let (value, error) = match cfg.mode {
                SignatureMode::Threshold => {
                    let pts: Vec<CurvePoint> =
                        mine.iter().map(analysis::signature::curve_point).collect();
                    let fit = analysis::fit_threshold(&pts)?;
                    (fit.p_th, fit.p_th_stderr)
                }
                SignatureMode::Failure => (1.0 - mine[0].estimate.rate, mine[0].estimate.stderr),
            };
            out.push_str(&format!(
                "{},{role},{},{},{value},{error}\n",
                plot.xi,
                fam.family,
                fam.lambda_label()
            ));
        }
    }
    emit(flags.out.as_deref(), out.as_bytes())
}

fn cmd_oracle(
    ks: &[usize],
    xis: &[usize],
    sizes: &[usize],
    out: Option<&Path>,
) -> Result<(), CliError> {
    if ks.is_empty() && sizes.is_empty() {
        return Err(CliError::Usage("give --k and/or --L".into()));
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for &xi in xis {
        for &k in ks {
            pairs.push((k, xi));
        }
        for &l in sizes {
            if xi == 0 || l % (2 * xi) != 0 {
                return Err(CliError::Usage(
                    oracle::OracleError::IncompatibleSize { size: l, xi }.to_string(),
                ));
            }
            pairs.push((l / xi, xi));
        }
    }
    let mut text = format!("{}\nk,xi,N_st,N_sp,ratio,bound\n", table::ORACLE_SCHEMA);
    for (k, xi) in pairs {
        if k == 0 || k % 2 == 1 {
            return Err(CliError::Usage(oracle::OracleError::OddK(k).to_string()));
        }
        let r = oracle::ratio_bound(k * xi, xi).map_err(|e| CliError::Usage(e.to_string()))?;
        text.push_str(&format!(
            "{k},{xi},{},{},{:.4},{:.4}\n",
            r.n_standard,
            r.n_special,
            r.exact_f64(),
            r.bound_f64()
        ));
    }
    emit(out, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_rows() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o.csv");
        cmd_oracle(&[2, 4], &[3], &[], Some(&out)).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "k,xi,N_st,N_sp,ratio,bound");
        assert_eq!(lines[2], "2,3,6,6,1.0000,1.3333");
        assert_eq!(lines[3], "4,3,42,18,0.4286,0.8889");
        assert!(cmd_oracle(&[3], &[3], &[], None).is_err());
        assert_eq!(
            cmd_oracle(&[3], &[3], &[], None).unwrap_err().exit_code(),
            1
        );
        assert!(cmd_oracle(&[], &[3], &[9], None).is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_from(["adaptive-toric", "frobnicate"]), 1);
        assert_eq!(
            run_from(["adaptive-toric", "sweep", "/nonexistent.toml"]),
            1
        );
        assert_eq!(run_from(["adaptive-toric", "--help"]), 0);
    }
}
