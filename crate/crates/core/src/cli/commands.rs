use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array1;

use super::format::{self, CoresetFile, CsvOptions, Header, ProblemKind, RowReader};
use super::{
    CliError, Construction, CoresetArgs, EvalArgs, InputOpts, OnError, OutFormat, OutputOpts, QueryKind, SolveArgs,
    SolveProblem, StreamArgs, StreamKindArg,
};
use crate::clustering::{kmeans_coreset_with, small_kmeans_coreset_with};
use crate::coreset::derive_seed;
use crate::dimred::{approx_solution_with, ApproxOptions, ExactSolver, LloydSolver, Problem, Solver};
use crate::exec::Exec;
use crate::linalg::{dist2, PointSet, QueryShape};
use crate::queries::{agreement_with, center_grid, random_subspaces, true_costs};
use crate::sensitivity::SensitivityConfig;
use crate::streaming::{StreamConfig, StreamKind, StreamState};
use crate::subspace_coreset::{affine_subspace_coreset_weighted, linear_subspace_coreset};

type CmdResult = Result<i32, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn open(path: &Path) -> Result<Box<dyn Read>, CliError> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    let f = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(f)))
}

fn csv_opts(o: &InputOpts) -> CsvOptions {
    CsvOptions {
        weighted: o.weighted,
        header: o.header,
    }
}

fn read_input(path: &Path, opts: &InputOpts) -> Result<PointSet, CliError> {
    Ok(format::read_points(open(path)?, csv_opts(opts))?)
}

fn sensitivity(sample_size: Option<usize>, reduced_dim: Option<usize>) -> SensitivityConfig {
    SensitivityConfig {
        sample_size,
        reduced_dim,
        ..SensitivityConfig::default()
    }
}

fn output_format(out: &OutputOpts) -> OutFormat {
    match (out.format, &out.output) {
        (Some(f), _) => f,
        (None, None) => OutFormat::Csv,
        (None, Some(p)) if p.extension().is_some_and(|e| e == "csv") => OutFormat::Csv,
        (None, Some(_)) => OutFormat::Binary,
    }
}

fn write_coreset_to(file: &CoresetFile, path: Option<&Path>, fmt: OutFormat) -> Result<(), CliError> {
    let mut buf = Vec::new();
    match fmt {
        OutFormat::Binary => format::write_binary(file, &mut buf)?,
        OutFormat::Csv => format::write_csv(file, &mut buf)?,
    }
    match path {
        Some(p) => std::fs::write(p, &buf).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(&buf)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn summarize(file: &CoresetFile, elapsed: std::time::Duration) {
    let c = &file.coreset;
    eprintln!(
        "{}: n={} m={} d={} delta={} total_weight={} elapsed_ms={:.1}",
        file.header.construction,
        file.header.n,
        c.len(),
        c.d(),
        c.delta(),
        c.total_weight(),
        elapsed.as_secs_f64() * 1e3
    );
}

pub(super) fn coreset(a: &CoresetArgs) -> CmdResult {
    let randomized = matches!(a.construction, Construction::Kmeans | Construction::SmallKmeans);
    let (kind, name) = match a.construction {
        Construction::Subspace => (ProblemKind::Subspace, "linear-subspace"),
        Construction::Affine => (ProblemKind::Affine, "affine-subspace"),
        Construction::Kmeans => (ProblemKind::KMeans, "kmeans-sensitivity"),
        Construction::SmallKmeans => (ProblemKind::KMeans, "small-kmeans"),
    };
    if randomized {
        if a.k.is_none() || a.seed.is_none() {
            return usage("kmeans constructions need --k and --seed");
        }
        if a.j.is_some() {
            return usage("--j applies to subspace constructions only");
        }
    } else {
        if a.j.is_none() {
            return usage("subspace constructions need --j");
        }
        if a.k.is_some() || a.delta.is_some() || a.sample_size.is_some() || a.reduced_dim.is_some() {
            return usage("--k, --delta, --sample-size and --reduced-dim apply to kmeans constructions only");
        }
    }
    if a.reduced_dim.is_some() && a.construction != Construction::SmallKmeans {
        return usage("--reduced-dim applies to small-kmeans only");
    }
    let points = read_input(&a.input, &a.input_opts)?;
    let start = Instant::now();
    let seed = a.seed.unwrap_or(0);
    let delta = a.delta.unwrap_or(0.1);
    let config = sensitivity(a.sample_size, a.reduced_dim);
    let coreset = match a.construction {
        Construction::Subspace => linear_subspace_coreset(&points, a.j.unwrap(), a.epsilon)?,
        Construction::Affine => affine_subspace_coreset_weighted(&points, a.j.unwrap(), a.epsilon)?,
        Construction::Kmeans => kmeans_coreset_with(&points, a.k.unwrap(), a.epsilon, delta, seed, &config)?,
        Construction::SmallKmeans => small_kmeans_coreset_with(&points, a.k.unwrap(), a.epsilon, delta, seed, &config)?,
    };
    let file = CoresetFile {
        header: Header {
            version: format::VERSION,
            n: points.n() as u64,
            kind,
            eps: a.epsilon,
            seed,
            construction: name.to_string(),
        },
        coreset,
    };
    summarize(&file, start.elapsed());
    write_coreset_to(&file, a.out.output.as_deref(), output_format(&a.out))?;
    Ok(0)
}

fn checkpoint_path(out: &Path, count: u64) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(format!(".ckpt-{count}"));
    PathBuf::from(s)
}

pub(super) fn stream(a: &StreamArgs) -> CmdResult {
    let (kind, pkind, name) = match a.kind {
        StreamKindArg::Subspace | StreamKindArg::Affine => {
            let Some(j) = a.j else {
                return usage("subspace streams need --j");
            };
            if a.k.is_some() {
                return usage("--k applies to kmeans streams only");
            }
            if a.kind == StreamKindArg::Subspace {
                (StreamKind::Subspace { j }, ProblemKind::Subspace, "stream-subspace")
            } else {
                (StreamKind::Affine { j }, ProblemKind::Affine, "stream-affine")
            }
        }
        StreamKindArg::Kmeans => {
            let (Some(k), Some(_)) = (a.k, a.seed) else {
                return usage("kmeans streams need --k and --seed");
            };
            if a.j.is_some() {
                return usage("--j applies to subspace streams only");
            }
            (StreamKind::KMeans { k }, ProblemKind::KMeans, "stream-kmeans")
        }
    };
    if a.checkpoint == Some(0) {
        return usage("--checkpoint must be positive");
    }
    let seed = a.seed.unwrap_or(0);
    let config = StreamConfig::new(kind, a.epsilon)
        .delta(a.delta)
        .seed(seed)
        .sensitivity(sensitivity(a.sample_size, a.reduced_dim));
    let source = match &a.input {
        Some(p) => open(p)?,
        None => Box::new(io::stdin().lock()),
    };
    let mut reader = RowReader::new(
        source,
        CsvOptions {
            weighted: false,
            header: a.header,
        },
    );
    let fmt = output_format(&a.out);
    let header = |n: u64| Header {
        version: format::VERSION,
        n,
        kind: pkind,
        eps: a.epsilon,
        seed,
        construction: name.to_string(),
    };
    let start = Instant::now();
    let mut state: Option<StreamState> = None;
    let mut skipped = 0u64;
    loop {
        let row = match reader.next_row() {
            Ok(Some((line, row, _))) => {
                if let Some(s) = &state {
                    if row.len() != s.dim() {
                        let e = format::FormatError(format!("line {line}: expected {} fields, found {}", s.dim(), row.len()));
                        if a.on_error == OnError::Abort {
                            return Err(e.into());
                        }
                        log::warn!("skipping {e}");
                        skipped += 1;
                        continue;
                    }
                }
                row
            }
            Ok(None) => break,
            Err(e) if a.on_error == OnError::Skip => {
                log::warn!("skipping {e}");
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let s = match &mut state {
            Some(s) => s,
            None => state.insert(StreamState::new(config.clone(), row.len())?),
        };
        s.insert(Array1::from(row).view())?;
        let seen = s.stats().points_seen;
        if a.checkpoint.is_some_and(|c| seen % c == 0) {
            let file = CoresetFile {
                header: header(seen),
                coreset: s.query()?,
            };
            eprintln!(
                "checkpoint: points={seen} live={} summary={} delta={}",
                s.stats().live_points,
                file.coreset.len(),
                file.coreset.delta()
            );
            if let Some(out) = &a.out.output {
                write_coreset_to(&file, Some(&checkpoint_path(out, seen)), fmt)?;
            }
        }
    }
    let Some(state) = state else {
        return Err(CliError::Data("empty input".into()));
    };
    let file = CoresetFile {
        header: header(state.stats().points_seen),
        coreset: state.query()?,
    };
    let st = state.stats();
    eprintln!(
        "stream: points={} skipped={skipped} reduce_calls={} max_depth={} peak_live_points={}",
        st.points_seen, st.reduce_calls, st.max_depth, st.peak_live_points
    );
    summarize(&file, start.elapsed());
    write_coreset_to(&file, a.out.output.as_deref(), fmt)?;
    Ok(0)
}

pub(super) fn eval(a: &EvalArgs) -> CmdResult {
    let shapes_need_j = matches!(a.queries, QueryKind::Subspace | QueryKind::Affine);
    if shapes_need_j && a.j.is_none() {
        return usage("subspace queries need --j");
    }
    if !shapes_need_j && a.k.is_none() {
        return usage("center queries need --k");
    }
    if a.count == 0 {
        return usage("--count must be positive");
    }
    let bytes = std::fs::read(&a.coreset).map_err(|e| CliError::Data(format!("{}: {e}", a.coreset.display())))?;
    let file = format::read_coreset(&bytes)?;
    let points = read_input(&a.data, &a.input_opts)?;
    if points.d() != file.coreset.d() {
        return Err(CliError::Data(format!(
            "dimension mismatch: coreset has {} columns, data has {}",
            file.coreset.d(),
            points.d()
        )));
    }
    let eps = a.epsilon.unwrap_or(file.header.eps);
    let streamed = a.streamed || file.is_streamed();
    let tol = if streamed { 3.0 * eps } else { eps };
    let shapes = match a.queries {
        QueryKind::Subspace => random_subspaces(points.d(), a.j.unwrap(), false, a.count, a.seed)?,
        QueryKind::Affine => random_subspaces(points.d(), a.j.unwrap(), true, a.count, a.seed)?,
        QueryKind::Centers => center_grid(&points, a.k.unwrap(), a.count, a.seed)?,
    };
    let truths = true_costs(&points, &shapes, Exec::default())?;
    let agreement = agreement_with(&truths, &file.coreset, &shapes)?;
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "query,true_cost,coreset_cost,ratio")?;
    for (i, q) in agreement.costs.iter().enumerate() {
        writeln!(out, "{i},{},{},{}", q.truth, q.estimate, q.ratio())?;
    }
    let max_dev = agreement.max_deviation();
    let pass = max_dev <= tol;
    writeln!(
        out,
        "# max_deviation={max_dev} mean_ratio={} tolerance={tol} result={}",
        agreement.mean_ratio(),
        if pass { "pass" } else { "fail" }
    )?;
    out.flush()?;
    Ok(if pass { 0 } else { 1 })
}

pub(super) fn solve(a: &SolveArgs) -> CmdResult {
    let problem = match a.problem {
        SolveProblem::Kmeans => {
            if a.j.is_some() {
                return usage("--j applies to affine problems only");
            }
            Problem::KMeans { k: a.k }
        }
        SolveProblem::Affine => {
            let Some(j) = a.j else {
                return usage("affine problems need --j");
            };
            Problem::AffineFlats { j, k: a.k }
        }
    };
    if a.trials == 0 {
        return usage("--trials must be positive");
    }
    let points = read_input(&a.input, &a.input_opts)?;
    let start = Instant::now();
    let runs = Exec::default().map(a.trials, |t| -> crate::Result<(f64, QueryShape)> {
        let seed = derive_seed(a.seed, t as u64);
        let options = ApproxOptions {
            seed,
            delta: a.delta,
            sensitivity: sensitivity(a.sample_size, a.reduced_dim),
        };
        let lloyd = LloydSolver {
            seed,
            ..LloydSolver::default()
        };
        let solver: &dyn Solver = if a.exact { &ExactSolver } else { &lloyd };
        let shape = approx_solution_with(&points, problem, a.epsilon, solver, &options)?;
        Ok((dist2(&points, &shape)?, shape))
    });
    let mut best: Option<(f64, QueryShape)> = None;
    for r in runs {
        let (cost, shape) = r?;
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, shape));
        }
    }
    let (cost, shape) = best.expect("at least one trial");
    eprintln!("solve: trials={} cost={cost} elapsed_ms={:.1}", a.trials, start.elapsed().as_secs_f64() * 1e3);
    let mut buf = Vec::new();
    writeln!(buf, "# cost={cost}")?;
    match &shape {
        QueryShape::Centers(c) => {
            writeln!(buf, "# centers={}", c.k())?;
            format::write_rows(c.centers(), &mut buf)?;
        }
        QueryShape::Subspace(s) => write_flat(&mut buf, 0, s)?,
        QueryShape::Flats(flats) => {
            for (i, s) in flats.iter().enumerate() {
                write_flat(&mut buf, i, s)?;
            }
        }
    }
    match &a.output {
        Some(p) => std::fs::write(p, &buf).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(&buf)?;
            out.flush()?;
        }
    }
    Ok(0)
}

/// Offset row followed by the basis vectors as rows.
fn write_flat(out: &mut Vec<u8>, i: usize, s: &crate::linalg::Subspace) -> io::Result<()> {
    writeln!(out, "# flat={i} dim={}", s.dim())?;
    let offset = s.offset().cloned().unwrap_or_else(|| Array1::zeros(s.ambient_dim()));
    format::write_rows(offset.view().insert_axis(ndarray::Axis(0)), out)?;
    format::write_rows(s.basis().t(), out)
}

