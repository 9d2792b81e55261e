use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use repso::config::{ConfigError, RunConfig};
use repso::engine::{init_preview_csv, run_with_registry, EngineError};
use repso::output::{format_float, grid_csv};
use repso::problems::ProblemRegistry;
use repso::trajectory::{dominant_root_grid, BehaviourKind, GridSpec, CONVERGENCE_TRIANGLE};

const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 4;
const OUTPUT_DIR_VAR: &str = "REPSO_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "repso", version, about = "Particle swarm optimizer with per-particle attributes")]
struct Cli {
    /// Directory for relative output paths [env: REPSO_OUTPUT_DIR]
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimizer described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        t_max: Option<u64>,
        /// Trace CSV path (default: the config's, else trace.csv).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Full trajectory dump CSV path.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Tabulate dominant-root magnitude and behaviour over an (omega, phi) grid.
    Analyze {
        #[arg(long, default_value = "-1:2", allow_hyphen_values = true, value_parser = parse_range)]
        omega: (f64, f64),
        #[arg(long, default_value = "0:5", allow_hyphen_values = true, value_parser = parse_range)]
        phi: (f64, f64),
        /// N for an N×N grid, or NxM (omega steps × phi steps).
        #[arg(long, default_value = "300", value_parser = parse_resolution)]
        res: (usize, usize),
        #[arg(long, default_value = "grid.csv")]
        out: PathBuf,
    },
    /// Write the initial swarm (x1, x0, xm per particle) without running.
    InitPreview {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "init.csv")]
        out: PathBuf,
    },
    /// List the registered problems.
    ListProblems {
        #[arg(long, default_value_t = 2)]
        dimension: usize,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound {lo:?}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound {hi:?}: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("range needs finite LO < HI, got {s}"));
    }
    Ok((lo, hi))
}

fn parse_resolution(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad resolution {t:?}: {e}"));
    let (a, b) = match s.split_once(['x', 'X']) {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    if a < 2 || b < 2 {
        return Err("resolution must be at least 2 per axis".into());
    }
    Ok((a, b))
}

struct Failure {
    code: u8,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { code: EXIT_CONFIG, message: e.to_string() }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = if matches!(e, EngineError::Config(_)) { EXIT_CONFIG } else { EXIT_RUNTIME };
        Failure { code, message: e.to_string() }
    }
}

fn runtime(message: String) -> Failure {
    Failure { code: EXIT_RUNTIME, message }
}

fn resolve(dir: &Option<PathBuf>, path: &Path) -> PathBuf {
    match dir {
        Some(d) if path.is_relative() => d.join(path),
        _ => path.to_path_buf(),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let dir = cli.output_dir.clone().or_else(|| std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from));
    match execute(cli.command, &dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn execute(command: Command, dir: &Option<PathBuf>) -> Result<(), Failure> {
    let registry = ProblemRegistry::builtin();
    match command {
        Command::Run { config, seed, t_max, trace, dump } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.swarm.seed = s;
            }
            if let Some(t) = t_max {
                cfg.termination.t_max = Some(t);
            }
            if trace.is_some() {
                cfg.output.trace = trace;
            }
            if dump.is_some() {
                cfg.output.dump = dump;
            }
            let result = run_with_registry(&cfg, &registry)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            let trace_path = resolve(dir, cfg.output.trace.as_deref().unwrap_or(Path::new("trace.csv")));
            write(&trace_path, &result.trace_csv())?;
            if let (Some(p), Some(csv)) = (&cfg.output.dump, result.dump_csv()) {
                write(&resolve(dir, p), &csv)?;
            }
            print!("{}", result.summary());
            println!("trace: {}", trace_path.display());
        }
        Command::Analyze { omega, phi, res, out } => {
            let spec = GridSpec { omega, phi, omega_steps: res.0, phi_steps: res.1 };
            let cells = dominant_root_grid(&spec).map_err(|e| Failure { code: 2, message: e.to_string() })?;
            let path = resolve(dir, &out);
            write(&path, &grid_csv(&cells))?;
            let count = |k: BehaviourKind| cells.iter().filter(|c| c.kind == k).count();
            let convergent = cells.iter().filter(|c| c.convergent).count();
            println!("cells: {}", cells.len());
            println!("convergent: {convergent}");
            println!(
                "oscillatory: {}\nmonotonic: {}\nzigzagging: {}",
                count(BehaviourKind::Oscillatory),
                count(BehaviourKind::Monotonic),
                count(BehaviourKind::Zigzagging)
            );
            if let Some(min) = cells.iter().min_by(|a, b| a.rate.total_cmp(&b.rate)) {
                println!("min_rate: {} at omega {} phi {}", format_float(min.rate), format_float(min.omega), format_float(min.phi));
            }
            let v: Vec<String> = CONVERGENCE_TRIANGLE.iter().map(|(w, p)| format!("({w}, {p})")).collect();
            println!("triangle_vertices (omega, phi): {}", v.join(" "));
            println!("triangle_edges: omega = 1; phi = 0; omega = phi/2 - 1");
            println!("grid: {}", path.display());
        }
        Command::InitPreview { config, out } => {
            let cfg = RunConfig::from_file(&config)?;
            let csv = init_preview_csv(&cfg, &registry)?;
            let path = resolve(dir, &out);
            write(&path, &csv)?;
            println!("particles: {}", csv.lines().count() - 1);
            println!("preview: {}", path.display());
        }
        Command::ListProblems { dimension } => {
            for name in registry.names() {
                match registry.build(name, dimension) {
                    Ok(p) => {
                        let optimum = p.known_optimum.as_ref().map_or("unknown".to_string(), |(_, v)| format_float(*v));
                        println!(
                            "{name}\tbounds [{}, {}]\tconstraints {}\toptimum {optimum}",
                            format_float(p.bounds.lower()[0]),
                            format_float(p.bounds.upper()[0]),
                            p.constraints.len()
                        );
                    }
                    Err(e) => println!("{name}\t({e})"),
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("-1:2"), Ok((-1.0, 2.0)));
        assert_eq!(parse_range("-1.5:-0.5"), Ok((-1.5, -0.5)));
        assert!(parse_range("2:1").is_err());
        assert!(parse_range("1").is_err());
        assert!(parse_range("a:1").is_err());
    }

    #[test]
    fn resolutions() {
        assert_eq!(parse_resolution("300"), Ok((300, 300)));
        assert_eq!(parse_resolution("40x60"), Ok((40, 60)));
        assert!(parse_resolution("1").is_err());
        assert!(parse_resolution("x").is_err());
    }

    #[test]
    fn output_dir_applies_to_relative_paths_only() {
        let d = Some(PathBuf::from("/tmp/out"));
        assert_eq!(resolve(&d, Path::new("a.csv")), PathBuf::from("/tmp/out/a.csv"));
        assert_eq!(resolve(&d, Path::new("/abs/a.csv")), PathBuf::from("/abs/a.csv"));
        assert_eq!(resolve(&None, Path::new("a.csv")), PathBuf::from("a.csv"));
    }
}
