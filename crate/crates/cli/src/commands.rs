use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use certibif::bifurcation::{
    approximate_ns, approximate_sn, certify_ns, certify_sn, transcritical_analysis, BifCertificate, NsPoint, SnPoint,
};
use certibif::cift::ValidationOptions;
use certibif::continuation::{classify_stability, continue_branch, BranchRun, ContinuationConfig, CoralBranch, Termination};
use certibif::dynamics::{angle_profile, farey_min_denominator, iterate, iterate_plane, parse_rational, rotation_number_plane, Rounding};
use certibif::interval::{decimal_to_f64, f64_to_decimal};
use certibif::{CoralModel, CoralParams, DynamicsError, ModelError};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::{BranchArgs, Cli, Command, DiagramArgs, FareyArgs, Precondition, RotationArgs, SimulateArgs, TranscriticalArgs, ValidateArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
    #[error("cannot read {path}: {source}")]
    Input { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Dynamics(_) => 1,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let model = match &cli.params {
        Some(p) => CoralModel::new(CoralParams::from_file(p)?)?,
        None => CoralModel::default(),
    };
    match cli.command {
        Command::Simulate(a) => simulate(&model, a),
        Command::Branch(a) => branch(&model, a),
        Command::ValidateNs(a) => validate(&model, a, true),
        Command::ValidateSn(a) => validate(&model, a, false),
        Command::Transcritical(a) => transcritical(&model, a),
        Command::Rotation(a) => rotation(&model, a),
        Command::Farey(a) => farey(a),
        Command::Diagram(a) => diagram(&model, a),
    }
}

/// Opens an output file, or stdout when no path is given.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|source| CliError::Output { path: p.to_path_buf(), source })?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    Ok(csv::Writer::from_writer(output(path)?))
}

fn csv_err(path: Option<&Path>) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Output { path: path.map(Path::to_path_buf).unwrap_or_else(|| "<stdout>".into()), source: io::Error::other(e.to_string()) }
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> CliError + '_ {
    move |source| CliError::Output { path: path.map(Path::to_path_buf).unwrap_or_else(|| "<stdout>".into()), source }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn sci(x: f64) -> String {
    f64_to_decimal(x)
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Input { path: path.to_path_buf(), source })?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::Usage(format!("{}: `{s}` is not a number", path.display()))))
        .collect()
}

fn simulate(model: &CoralModel, a: SimulateArgs) -> Result<()> {
    let base = if a.x0 == "y" { model.state_with_density(1500.0) } else { read_vector(Path::new(&a.x0))? };
    if base.len() != model.dim() {
        return Err(CliError::Usage(format!("initial state has {} entries, expected {}", base.len(), model.dim())));
    }
    let x0: Vec<f64> = base.iter().map(|v| v * a.scale).collect();
    let path = a.out.as_deref();
    let mut w = csv_writer(path)?;
    let orbit = iterate(model, model.r_to_lambda(a.r), &x0, a.years, a.skip)?;
    let coral = model.view::<f64>();
    let mut header = vec!["t".to_string()];
    header.extend((1..=model.dim()).map(|k| format!("x{k}")));
    header.push("P".into());
    w.write_record(&header).map_err(csv_err(path))?;
    for (i, x) in orbit.points.iter().enumerate() {
        let mut row = vec![(a.skip + i + 1).to_string()];
        row.extend(x.iter().map(|&v| num(v)));
        row.push(num(coral.density(x)));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn run_branch(model: &CoralModel, a: &BranchArgs) -> Result<(CoralBranch, BranchRun)> {
    if !(a.alpha_frac > 0.0 && a.alpha_frac < 1.0) {
        return Err(CliError::Usage("--alpha-frac must lie in (0, 1)".into()));
    }
    let br = match a.precondition {
        Precondition::Auto => CoralBranch::preconditioned(model.clone(), a.from_r)?,
        Precondition::None => CoralBranch::unpreconditioned(model.clone()),
    };
    let start = br
        .start_point(a.from_r)
        .ok_or_else(|| CliError::Usage(format!("no nontrivial fixed point at R = {}", a.from_r)))?;
    let config = ContinuationConfig {
        max_steps: a.max_steps,
        alpha_frac: a.alpha_frac,
        target_param: a.to_r.map(|r| br.param_of_r(r)),
        folds_before_target: a.folds_before_target,
        initial_direction: if a.increasing { 1.0 } else { -1.0 },
        ..ContinuationConfig::default()
    };
    let run = continue_branch(&br, &start, &config)
        .map_err(|e| CliError::Validation(format!("validation failed at stage `first box`: {e}")))?;
    Ok((br, run))
}

fn branch(model: &CoralModel, a: BranchArgs) -> Result<()> {
    // fail on unwritable outputs before the long computation
    let csv_path = a.csv.clone();
    let mut w = csv_writer(Some(&csv_path))?;
    let mut json_out = match &a.json {
        Some(p) => Some(output(Some(p))?),
        None => None,
    };
    let (br, run) = run_branch(model, &a)?;
    let coral = model.view::<f64>();
    let mut header = vec!["R".to_string(), "lambda".into()];
    header.extend((1..=model.dim()).map(|k| format!("x{k}")));
    header.extend(["P", "delta_alpha", "delta_u", "delta_min", "stability", "linked"].map(String::from));
    let p = Some(csv_path.as_path());
    w.write_record(&header).map_err(csv_err(p))?;
    for b in &run.boxes {
        let (r, x) = br.to_original(&b.base);
        let lambda = br.lambda(&b.base);
        let mut row = vec![num(r), num(lambda)];
        row.extend(x.iter().map(|&v| num(v)));
        row.push(num(coral.density(&x)));
        row.extend([sci(b.delta_alpha), sci(b.delta_u), sci(b.delta_min)]);
        row.push(classify_stability(model, lambda, &x).to_string());
        row.push(b.linked_to_previous.to_string());
        w.write_record(&row).map_err(csv_err(p))?;
    }
    w.flush().map_err(io_err(p))?;
    if let (Some(out), Some(path)) = (json_out.as_mut(), a.json.as_deref()) {
        let pre = br.preconditioner();
        let doc = json!({
            "preconditioner": { "scale": pre.scale.iter().map(|&s| sci(s)).collect::<Vec<_>>(), "r_scale": sci(pre.r_scale) },
            "run": run,
        });
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        writeln!(out).and_then(|_| out.flush()).map_err(io_err(Some(path)))?;
    }
    let last = run.boxes.last().expect("a run has at least one box");
    let (r_last, x_last) = br.to_original(&last.base);
    let dmin = run.boxes.iter().map(|b| b.delta_min).fold(0.0, f64::max);
    println!(
        "boxes {}  folds {}  max delta_min {}  last box R = {r_last}, P = {}",
        run.boxes.len(),
        run.folds,
        sci(dmin),
        coral.density(&x_last)
    );
    match run.termination {
        // without a target the branch runs until validation degenerates
        Termination::Failed { step, reason } if a.to_r.is_none() => {
            println!("branch ended at box {step}: {reason}");
            Ok(())
        }
        Termination::Failed { step, reason } => {
            Err(CliError::Validation(format!("validation failed at stage `box {step}`: {reason}")))
        }
        t => {
            println!("termination {t:?}");
            Ok(())
        }
    }
}

fn load_anchor(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Input { path: path.to_path_buf(), source })?;
    let v: Value = serde_json::from_str(&text)?;
    let arr = match &v {
        Value::Array(a) => a,
        Value::Object(_) => v
            .pointer("/validation/anchor")
            .or_else(|| v.pointer("/anchor"))
            .and_then(Value::as_array)
            .ok_or_else(|| CliError::Usage(format!("{}: no anchor array found", path.display())))?,
        _ => return Err(CliError::Usage(format!("{}: expected a JSON array or certificate", path.display()))),
    };
    arr.iter()
        .map(|e| match e {
            Value::Number(n) => n.as_f64().ok_or_else(|| CliError::Usage("bad number in anchor".into())),
            Value::String(s) => decimal_to_f64(s).map_err(|e| CliError::Usage(e.to_string())),
            _ => Err(CliError::Usage("anchor entries must be numbers or decimal strings".into())),
        })
        .collect()
}

fn validate(model: &CoralModel, a: ValidateArgs, ns: bool) -> Result<()> {
    if !(a.ell > 0.0) {
        return Err(CliError::Usage("--ell must be positive".into()));
    }
    let mut out = output(a.out.as_deref())?;
    let opts = ValidationOptions { ell: a.ell, ..ValidationOptions::default() };
    let d = model.dim();
    let fail = |e: certibif::BifurcationError| CliError::Validation(e.to_string());
    let cert: BifCertificate = if ns {
        let approx = match &a.anchor {
            Some(p) => {
                let z = load_anchor(p)?;
                if z.len() != 3 * d + 3 {
                    return Err(CliError::Usage(format!("anchor has {} entries, expected {}", z.len(), 3 * d + 3)));
                }
                NsPoint::from_vector(&z, d)
            }
            None => approximate_ns(model, a.r_lo, a.r_hi).map_err(fail)?,
        };
        certify_ns(model, &approx, &opts).map_err(fail)?
    } else {
        let approx = match &a.anchor {
            Some(p) => {
                let z = load_anchor(p)?;
                if z.len() != 2 * d + 1 {
                    return Err(CliError::Usage(format!("anchor has {} entries, expected {}", z.len(), 2 * d + 1)));
                }
                SnPoint::from_vector(&z, d)
            }
            None => approximate_sn(model).map_err(fail)?,
        };
        certify_sn(model, &approx, &opts).map_err(fail)?
    };
    serde_json::to_writer_pretty(&mut out, &cert)?;
    writeln!(out).and_then(|_| out.flush()).map_err(io_err(a.out.as_deref()))?;
    eprintln!(
        "certified: R in {}, delta_accuracy {}, delta_uniqueness {}",
        cert.r,
        sci(cert.delta_accuracy),
        sci(cert.delta_uniqueness)
    );
    Ok(())
}

fn transcritical(model: &CoralModel, a: TranscriticalArgs) -> Result<()> {
    let t = transcritical_analysis(model);
    println!("R* = {}  {}", t.r_star.mid(), t.r_star);
    println!("lambda* = {}  {}", t.lambda_star.mid(), t.lambda_star);
    println!("eigen residual <= {}", sci(t.eigen_residual.hi()));
    println!("nd1 = {}", t.nd1);
    println!("nd2 = {}", t.nd2);
    println!("det slope = {}", t.det_slope);
    if let Some(p) = a.out.as_deref() {
        let mut out = output(Some(p))?;
        serde_json::to_writer_pretty(&mut out, &json!({ "analysis": t, "certificate": t.certificate(model) }))?;
        writeln!(out).and_then(|_| out.flush()).map_err(io_err(Some(p)))?;
    }
    if t.nd1.contains_zero() || t.nd2.contains_zero() {
        return Err(CliError::Validation("validation failed at stage `nondegeneracy`: an interval contains 0".into()));
    }
    Ok(())
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::Usage(format!("--R-range `{s}` must be a:b:n"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n == 0 || !(a <= b) {
        return Err(bad());
    }
    Ok((0..n).map(|i| if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect())
}

fn parse_center(s: &str) -> Result<[f64; 2]> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--center `{s}` must be x,y")))?;
    match v[..] {
        [x, y] => Ok([x, y]),
        _ => Err(CliError::Usage(format!("--center `{s}` must be x,y"))),
    }
}

fn rotation(model: &CoralModel, a: RotationArgs) -> Result<()> {
    let rs = parse_range(&a.r_range)?;
    let center = parse_center(&a.center)?;
    if a.bins == 0 || a.iterates < 3 || a.stride == 0 {
        return Err(CliError::Usage("--bins, --stride must be positive and --iterates at least 3".into()));
    }
    let mut w = csv_writer(a.out.as_deref())?;
    let mut prof = a.profile_out.as_deref().map(|p| csv_writer(Some(p))).transpose()?;
    let mut pts = a.points_out.as_deref().map(|p| csv_writer(Some(p))).transpose()?;
    let x0: Vec<f64> = model.state_with_density(1500.0).iter().map(|v| v * a.scale).collect();
    let results: Vec<_> = rs
        .par_iter()
        .map(|&r| {
            let orbit = iterate_plane(model, model.r_to_lambda(r), &x0, a.iterates, a.skip);
            let analysis = orbit.as_ref().map_err(Clone::clone).and_then(|p| {
                Ok((rotation_number_plane(p, center)?, angle_profile(p, center, a.bins)?))
            });
            (r, orbit, analysis)
        })
        .collect();
    let op = a.out.as_deref();
    w.write_record(["R", "lambda", "rho", "convergence_gap", "iterates", "profile_min_angle", "profile_min_increment", "status"])
        .map_err(csv_err(op))?;
    if let Some(pw) = prof.as_mut() {
        pw.write_record(["R", "angle", "mean_increment", "count", "interpolated"]).map_err(csv_err(a.profile_out.as_deref()))?;
    }
    if let Some(pw) = pts.as_mut() {
        pw.write_record(["R", "x1", "x2"]).map_err(csv_err(a.points_out.as_deref()))?;
    }
    for (r, orbit, analysis) in &results {
        let lambda = num(model.r_to_lambda(*r));
        match analysis {
            Ok((rot, profile)) => {
                w.write_record([
                    num(*r),
                    lambda,
                    num(rot.rho),
                    sci(rot.convergence_gap),
                    rot.iterates_used.to_string(),
                    num(profile.min_angle),
                    sci(profile.min_increment),
                    "ok".into(),
                ])
                .map_err(csv_err(op))?;
                if let Some(pw) = prof.as_mut() {
                    for b in &profile.bins {
                        pw.write_record([num(*r), num(b.angle), num(b.mean_increment), b.count.to_string(), b.interpolated.to_string()])
                            .map_err(csv_err(a.profile_out.as_deref()))?;
                    }
                }
            }
            Err(e) => {
                w.write_record([num(*r), lambda, String::new(), String::new(), String::new(), String::new(), String::new(), e.to_string()])
                    .map_err(csv_err(op))?;
            }
        }
        if let (Some(pw), Ok(p)) = (pts.as_mut(), orbit) {
            for q in p.iter().step_by(a.stride) {
                pw.write_record([num(*r), num(q[0]), num(q[1])]).map_err(csv_err(a.points_out.as_deref()))?;
            }
        }
    }
    w.flush().map_err(io_err(op))?;
    if let Some(mut pw) = prof {
        pw.flush().map_err(io_err(a.profile_out.as_deref()))?;
    }
    if let Some(mut pw) = pts {
        pw.flush().map_err(io_err(a.points_out.as_deref()))?;
    }
    Ok(())
}

fn farey(a: FareyArgs) -> Result<()> {
    let lo = a.lo.or(a.lo_pos).ok_or_else(|| CliError::Usage("missing lower bound".into()))?;
    let hi = a.hi.or(a.hi_pos).ok_or_else(|| CliError::Usage("missing upper bound".into()))?;
    let usage = |e: DynamicsError| CliError::Usage(e.to_string());
    let lo = parse_rational(&lo, Rounding::Down).map_err(usage)?;
    let hi = parse_rational(&hi, Rounding::Up).map_err(usage)?;
    let (p, q) = farey_min_denominator(lo, hi).map_err(usage)?;
    println!("{p}/{q}");
    Ok(())
}

fn diagram(model: &CoralModel, a: DiagramArgs) -> Result<()> {
    let path = Some(a.out.as_path());
    let mut w = csv_writer(path)?;
    if !(a.r_max > 0.0) {
        return Err(CliError::Usage("--R-max must be positive".into()));
    }
    let (br, run) = run_branch(model, &a.branch)?;
    if let Termination::Failed { step, reason } = &run.termination {
        eprintln!("note: branch ended at box {step}: {reason}");
    }
    let coral = model.view::<f64>();
    w.write_record(["branch", "R", "P", "stability", "delta_u"]).map_err(csv_err(path))?;
    for b in &run.boxes {
        let (r, x) = br.to_original(&b.base);
        let s = classify_stability(model, br.lambda(&b.base), &x);
        w.write_record(["nontrivial".into(), num(r), num(coral.density(&x)), s.to_string(), sci(b.delta_u)])
            .map_err(csv_err(path))?;
    }
    let zero = vec![0.0; model.dim()];
    let r_star = transcritical_analysis(model).r_star.mid();
    let n = 600;
    let mut grid: Vec<f64> = (0..=n).map(|i| a.r_max * i as f64 / n as f64).collect();
    if r_star < a.r_max {
        grid.push(r_star);
        grid.sort_by(f64::total_cmp);
    }
    for r in grid {
        let s = classify_stability(model, model.r_to_lambda(r), &zero);
        w.write_record(["trivial".into(), num(r), num(0.0), s.to_string(), String::new()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}
