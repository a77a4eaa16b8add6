//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::assembly::{Discretization, Options};
use crate::cell_vem::{EdgeStab, FaceSpaceProduct};
use crate::error::{Result, VemError};
use crate::face_vem::Mode;
use crate::mesh::{check_quality, gen_cube_mesh, load_mesh, Mesh};
use crate::problems::{Case, Problem};
use crate::solve_post::{convergence_study, fmt12, gain_study, run as run_solve, solve, GainReport};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "POLYVEM_THREADS";

#[derive(Parser, Debug)]
#[command(name = "polyvem", version, about = "Virtual element solver for 3D magnetostatics on polyhedral meshes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check mesh validity and shape regularity.
    Validate {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one problem on one mesh.
    Solve {
        #[command(flatten)]
        src: MeshSource,
        #[command(flatten)]
        disc: DiscArgs,
        /// Write the assembled matrix in Matrix Market format.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve on a mesh sequence and fit convergence rates.
    Converge {
        #[command(flatten)]
        src: MeshSource,
        #[command(flatten)]
        disc: DiscArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Skeleton DOF gain of the serendipity reduction.
    Gain {
        #[command(flatten)]
        src: MeshSource,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// DOF counts of the discrete spaces.
    Dofstats {
        #[command(flatten)]
        src: MeshSource,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Serendipity)]
        mode: ModeArg,
    },
}

#[derive(Args, Debug)]
pub struct MeshSource {
    /// Mesh files (comma separated).
    #[arg(long, value_delimiter = ',', conflicts_with = "gen")]
    pub mesh: Vec<PathBuf>,
    /// Built-in generator.
    #[arg(long, value_enum)]
    pub gen: Option<GenArg>,
    /// Subdivisions per axis for the generator (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub n: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct DiscArgs {
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Serendipity)]
    pub mode: ModeArg,
    /// 1, 2 or patch[:degree].
    #[arg(long, default_value = "1")]
    pub case: String,
    /// Use the projection-based face inner product instead of the DOF one.
    #[arg(long)]
    pub full_face_product: bool,
    /// Stabilize the edge inner product with face traces.
    #[arg(long)]
    pub face_stab: bool,
    /// Keep cell-interior DOFs in the global system.
    #[arg(long)]
    pub no_condense: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GenArg {
    Cube,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Standard,
    Serendipity,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Standard => Mode::Standard,
            ModeArg::Serendipity => Mode::Serendipity,
        }
    }
}

impl DiscArgs {
    fn options(&self) -> Result<Options> {
        if !(1..=3).contains(&self.k) {
            return Err(VemError::InvalidArgument(format!("k must be 1, 2 or 3, got {}", self.k)));
        }
        let mut o = Options::new(self.k, self.mode.into());
        o.condense = !self.no_condense;
        if self.full_face_product {
            o.face_product = FaceSpaceProduct::Full;
        }
        if self.face_stab {
            o.edge_stab = EdgeStab::Faces;
        }
        Ok(o)
    }

    fn problem(&self) -> Result<Problem> {
        let case: Case = self.case.parse()?;
        let case = match case {
            Case::Patch { seed, .. } if !self.case.contains(':') => Case::Patch { degree: self.k, seed },
            c => c,
        };
        Ok(Problem::new(case))
    }
}

impl MeshSource {
    fn load(&self) -> Result<Vec<(String, Mesh)>> {
        match self.gen {
            Some(GenArg::Cube) => {
                if self.n.contains(&0) {
                    return Err(VemError::InvalidArgument("n must be positive".into()));
                }
                Ok(self.n.iter().map(|&n| (format!("cube{n}"), gen_cube_mesh(n))).collect())
            }
            None if self.mesh.is_empty() => Err(VemError::InvalidArgument("give --mesh or --gen".into())),
            None => self.mesh.iter().map(|p| Ok((mesh_name(p), load_mesh(p)?))).collect(),
        }
    }

    fn single(&self) -> Result<(String, Mesh)> {
        let mut v = self.load()?;
        if v.len() != 1 {
            return Err(VemError::InvalidArgument("exactly one mesh expected".into()));
        }
        Ok(v.remove(0))
    }
}

fn mesh_name(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

fn write_out(dir: &Option<PathBuf>, name: &str, content: &str) -> Result<()> {
    if let Some(d) = dir {
        std::fs::create_dir_all(d).map_err(|e| VemError::Io { path: d.display().to_string(), source: e })?;
        let p = d.join(name);
        std::fs::write(&p, content).map_err(|e| VemError::Io { path: p.display().to_string(), source: e })?;
    }
    Ok(())
}

/// Configures the global thread pool from the environment, once.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Runs a parsed command and returns the plain-text summary.
pub fn execute(cli: &Cli) -> Result<String> {
    let mut s = String::new();
    match &cli.command {
        Command::Validate { mesh, gamma, out } => {
            let m = load_mesh(mesh)?;
            let (v, e, f, c) = (m.num_vertices(), m.num_edges(), m.num_faces(), m.num_cells());
            let euler = v as i64 - e as i64 + f as i64 - c as i64;
            let q = check_quality(&m, *gamma);
            let _ = writeln!(s, "mesh {}: {v} vertices, {e} edges, {f} faces, {c} cells", mesh.display());
            let _ = writeln!(s, "euler characteristic {euler}{}", if euler == 1 { " (ok)" } else { " (expected 1)" });
            let _ = writeln!(s, "h = {}", fmt12(m.mesh_size));
            let _ = writeln!(s, "min shape ratio {} ({} entities below gamma = {gamma})", fmt12(q.min_ratio()), q.violations().count());
            write_out(out, "quality.csv", &q.to_csv())?;
            if euler != 1 {
                return Err(VemError::InvalidMesh(format!("euler characteristic {euler}, expected 1")));
            }
        }
        Command::Solve { src, disc, dump_matrix, out } => {
            let (name, m) = src.single()?;
            let (opts, problem) = (disc.options()?, disc.problem()?);
            if let Some(p) = dump_matrix {
                let d = Discretization::new(&m, opts)?;
                let sys = d.assemble(&m, &problem)?;
                sys.write_matrix_market(p)?;
                let _ = solve(&sys)?;
            }
            let (r, ..) = run_solve(&m, &name, opts, &problem)?;
            let table = crate::solve_post::ConvergenceTable { rows: vec![r.clone()], rate_l2: f64::NAN, rate_curl: f64::NAN };
            write_out(out, "solve.csv", &table.to_csv())?;
            let _ = writeln!(s, "mesh {name}: N_P = {}, h = {}", r.n_cells, fmt12(r.h));
            let _ = writeln!(s, "dofs total {}, skeleton {}", r.dofs_total, r.dofs_skeleton);
            let _ = writeln!(s, "relative L2 error {}", fmt12(r.errors.l2_rel()));
            let _ = writeln!(s, "relative curl error {}", fmt12(r.errors.curl_rel()));
            let _ = writeln!(s, "relative p norm {}", fmt12(r.errors.p_rel()));
            let _ = writeln!(s, "residual {}", fmt12(r.residual));
        }
        Command::Converge { src, disc, out } => {
            let meshes = src.load()?;
            let t = convergence_study(&meshes, disc.options()?, &disc.problem()?)?;
            let csv = t.to_csv();
            write_out(out, "convergence.csv", &csv)?;
            s.push_str(&csv);
            let _ = writeln!(s, "L2 rate {:.3}", t.rate_l2);
            let _ = writeln!(s, "curl rate {:.3}", t.rate_curl);
        }
        Command::Gain { src, k, out } => {
            let mut csv = GainReport::csv_header().to_string();
            for (name, m) in src.load()? {
                let g = gain_study(&m, &name, *k)?;
                let _ = writeln!(s, "{name} k={k}: dof_f = {}, dof_f^S = {}, gain = {:.1}%", g.dof_f, g.dof_f_s, g.gain_pct());
                csv.push_str(&g.csv_row());
            }
            write_out(out, "gain.csv", &csv)?;
        }
        Command::Dofstats { src, k, mode } => {
            for (name, m) in src.load()? {
                let d = Discretization::new(&m, Options::new(*k, (*mode).into()))?;
                let _ = writeln!(s, "{name} k={k} {mode:?}");
                for (label, map) in [("nodal", &d.nodal), ("edge", &d.edge), ("face", &d.face)] {
                    let _ = writeln!(
                        s,
                        "  {label:5}: total {}, skeleton {}, boundary {}",
                        map.n,
                        map.n_skeleton(),
                        map.n_boundary()
                    );
                }
                let _ = writeln!(s, "  volume: total {}", d.n_volume());
            }
        }
    }
    Ok(s)
}

/// Parses `argv`, runs, prints; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_threads();
    match execute(&cli) {
        Ok(s) => {
            print!("{s}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
