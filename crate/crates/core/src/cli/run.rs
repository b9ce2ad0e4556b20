use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use super::config::{Command, ExperimentConfig, InitChoice};
use crate::descent::{run_online, ObservationStream, OptimizerKind, StepSchedule};
use crate::efficiency::{interior_prefix, run_efficiency, EfficiencyConfig, InitMode};
use crate::equivalence::{self, verify_cross_parameterization, verify_equivalence, DEFAULT_TOLERANCE};
use crate::families::ExponentialFamily;
use crate::geometry::identities::{check_identities, IdentityTolerances};
use crate::seeding::SeedTree;

/// Separates the echoed config from the results in `summary.txt`.
pub const SUMMARY_SEPARATOR: &str = "---";

const CONJUGATE_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub details: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// 0 iff every check passed.
    pub exit_code: i32,
}

impl RunOutcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// `prefix` + `name`; a prefix naming a directory (existing, or ending in
/// `/`) gets `name` joined beneath it.
fn artifact_path(prefix: &str, name: &str) -> PathBuf {
    if prefix.is_empty() {
        return PathBuf::from(name);
    }
    if prefix.ends_with('/') || Path::new(prefix).is_dir() {
        return Path::new(prefix).join(name);
    }
    PathBuf::from(format!("{prefix}{name}"))
}

fn write_file(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)
}

fn invalid(e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidInput, e.to_string())
}

struct Artifacts<'a> {
    prefix: &'a str,
    files: Vec<PathBuf>,
}

impl Artifacts<'_> {
    fn write(&mut self, name: &str, contents: &str, partial: bool) -> io::Result<()> {
        let name = if partial { format!("{name}.partial") } else { name.to_string() };
        let path = artifact_path(self.prefix, &name);
        write_file(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

/// Executes `config`, writing CSVs and `summary.txt` under `out_prefix`
/// (falling back to the config's `out`, then the working directory).
pub fn run(config: &ExperimentConfig, out_prefix: Option<&str>) -> io::Result<RunOutcome> {
    let prefix = out_prefix.or(config.out.as_deref()).unwrap_or("");
    let mut art = Artifacts {
        prefix,
        files: Vec::new(),
    };
    let family = config.build_family().map_err(invalid)?;
    let mut checks = Vec::new();
    let mut body = String::new();

    match config.command {
        Command::Identities => identities(config, &family, &mut art, &mut checks, &mut body)?,
        Command::Equiv | Command::CrossEquiv => equiv(config, &family, &mut art, &mut checks, &mut body)?,
        Command::Efficiency => efficiency(config, &family, &mut art, &mut checks, &mut body)?,
        Command::Trajectory => trajectory(config, &family, &mut art, &mut checks, &mut body)?,
    }

    let mut summary = String::new();
    summary.push_str("# mdng experiment summary\n");
    summary.push_str(&config.to_config_text());
    summary.push_str(SUMMARY_SEPARATOR);
    summary.push('\n');
    summary.push_str(&body);
    for c in &checks {
        let _ = writeln!(
            summary,
            "CHECK {}: {} {}",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.details
        );
    }
    art.write("summary.txt", &summary, false)?;

    let exit_code = if checks.iter().all(|c| c.pass) { 0 } else { 1 };
    Ok(RunOutcome {
        checks,
        files: art.files,
        summary,
        exit_code,
    })
}

/// The config echoed at the top of a `summary.txt`.
pub fn config_text_from_summary(summary: &str) -> &str {
    match summary.find(&format!("\n{SUMMARY_SEPARATOR}\n")) {
        Some(i) => &summary[..i + 1],
        None => summary,
    }
}

fn mu_true(config: &ExperimentConfig) -> io::Result<DVector<f64>> {
    config.mu.clone().ok_or_else(|| invalid("missing mu"))
}

fn schedule(config: &ExperimentConfig) -> io::Result<StepSchedule> {
    StepSchedule::new(config.schedule, config.scale).map_err(invalid)
}

fn identities(
    config: &ExperimentConfig,
    family: &ExponentialFamily,
    art: &mut Artifacts<'_>,
    checks: &mut Vec<Check>,
    body: &mut String,
) -> io::Result<()> {
    let mut tol = IdentityTolerances::default();
    if let Some(t) = config.tolerance {
        tol.duality_gap = t;
    }
    let report = check_identities(family.pair(), config.samples, CONJUGATE_SAMPLES, config.seed, tol).map_err(invalid)?;
    let mut csv = String::from("check,max_error,tolerance,pass\n");
    for c in &report.checks {
        let _ = writeln!(csv, "{},{},{},{}", c.name, c.max_error, c.tolerance, u8::from(c.pass));
        let _ = writeln!(body, "{}_max_error={}", c.name, c.max_error);
        checks.push(Check {
            name: c.name.clone(),
            pass: c.pass,
            details: format!("max_error={} tolerance={}", c.max_error, c.tolerance),
        });
    }
    art.write("identities.csv", &csv, false)
}

fn equiv(
    config: &ExperimentConfig,
    family: &ExponentialFamily,
    art: &mut Artifacts<'_>,
    checks: &mut Vec<Check>,
    body: &mut String,
) -> io::Result<()> {
    let mu = mu_true(config)?;
    let obs = family
        .sample_stream(&mu, &SeedTree::new(config.seed).replicate(0), config.horizon)
        .map_err(invalid)?;
    let init_theta = match &config.init {
        InitChoice::Fixed(v) => family.pair().inverse_mirror_map(v),
        InitChoice::FirstObservation => DVector::zeros(family.dim()),
    };
    let tol = config.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    let sched = schedule(config)?;
    let mut report = if config.command == Command::Equiv {
        verify_equivalence(family, &obs, sched, &init_theta, tol)
    } else {
        verify_cross_parameterization(family, &obs, sched, &init_theta, tol)
    }
    .map_err(invalid)?;
    report.seed = Some(config.seed);

    let name = format!("{}.csv", report.variant.name());
    art.write(&name, &report.to_csv(), report.aborted.is_some())?;

    let _ = writeln!(body, "max_deviation={}", report.max_deviation);
    let _ = writeln!(body, "final_deviation={}", report.final_deviation);
    let _ = writeln!(body, "projections_md={}", report.projections_md);
    let _ = writeln!(body, "projections_ngd={}", report.projections_ngd);
    if let Some(a) = &report.aborted {
        let _ = writeln!(body, "aborted={a}");
    }
    let mut details = format!(
        "max_deviation={} tolerance={} projections_md={} projections_ngd={}",
        report.max_deviation, tol, report.projections_md, report.projections_ngd
    );
    if !report.probative() {
        details.push_str(" non-probative");
    }
    checks.push(Check {
        name: "equivalence".into(),
        pass: report.pass,
        details,
    });
    Ok(())
}

fn efficiency(
    config: &ExperimentConfig,
    family: &ExponentialFamily,
    art: &mut Artifacts<'_>,
    checks: &mut Vec<Check>,
    body: &mut String,
) -> io::Result<()> {
    let mu = mu_true(config)?;
    let mut cfg = EfficiencyConfig::new(mu, config.horizon, config.replicates, config.seed);
    cfg.parallel = config.parallel;
    cfg.init = match &config.init {
        InitChoice::FirstObservation => InitMode::FirstObservation,
        InitChoice::Fixed(v) => InitMode::Fixed(v.clone()),
    };
    if matches!(config.optimizer, OptimizerKind::Mirror) {
        cfg.optimizer = OptimizerKind::Mirror;
    }
    let report = run_efficiency(family, &cfg).map_err(invalid)?;
    art.write("efficiency.csv", &report.to_csv(), false)?;
    if config.per_replicate {
        art.write("efficiency_replicates.csv", &report.replicates_csv(), false)?;
    }
    for e in &report.entries {
        let _ = writeln!(
            body,
            "scaled_cov[{},{}]={} bound={} ratio={}",
            e.i, e.j, e.scaled_cov, e.bound, e.ratio
        );
        checks.push(Check {
            name: format!("efficiency[{},{}]", e.i, e.j),
            pass: e.pass,
            details: format!("ratio={} se={} band=3se", e.ratio, e.se),
        });
    }
    for note in &report.notes {
        let _ = writeln!(body, "note: {note}");
    }
    checks.push(Check {
        name: "dropped".into(),
        pass: report.dropped as f64 <= crate::efficiency::MAX_DROP_FRACTION * report.replicates as f64,
        details: format!("dropped={} of {}", report.dropped, report.replicates),
    });
    Ok(())
}

fn trajectory(
    config: &ExperimentConfig,
    family: &ExponentialFamily,
    art: &mut Artifacts<'_>,
    checks: &mut Vec<Check>,
    body: &mut String,
) -> io::Result<()> {
    let mu = mu_true(config)?;
    let obs = family
        .sample_stream(&mu, &SeedTree::new(config.seed).replicate(0), config.horizon)
        .map_err(invalid)?;
    let pair = family.pair();
    let init_mu = match &config.init {
        InitChoice::Fixed(v) => v.clone(),
        InitChoice::FirstObservation => interior_prefix(family, &obs)
            .map(|(_, m)| m)
            .unwrap_or_else(|| crate::efficiency::fallback_init(family)),
    };
    let init = match config.optimizer.space() {
        crate::error::Space::Primal => pair.inverse_mirror_map(&init_mu),
        crate::error::Space::Dual => init_mu,
    };
    let stream = ObservationStream::new(family, &obs).map_err(invalid)?;
    let (traj, aborted) = match run_online(config.optimizer, pair, &stream, schedule(config)?, &init, config.horizon) {
        Ok(t) => (t.with_seed(config.seed), None),
        Err(a) => (a.partial, Some(a.error.to_string())),
    };

    let mut csv = String::from("t,theta,mu,loss,cumulative_loss,projected\n");
    for it in &traj.iterates {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            it.t,
            it.theta.as_ref().map(equivalence::join).unwrap_or_default(),
            it.mu.as_ref().map(equivalence::join).unwrap_or_default(),
            it.loss,
            it.cumulative_regret_sum,
            u8::from(it.projected)
        );
    }
    art.write("trajectory.csv", &csv, aborted.is_some())?;

    let _ = writeln!(body, "steps={}", traj.len());
    let _ = writeln!(body, "cumulative_loss={}", traj.cumulative_regret_sum());
    let _ = writeln!(body, "projections={}", traj.projections());
    if let Some(p) = &traj.final_point {
        let _ = writeln!(body, "final_point={}", equivalence::join(p));
    }
    checks.push(Check {
        name: "completed".into(),
        pass: aborted.is_none(),
        details: match &aborted {
            None => format!("steps={}", traj.len()),
            Some(e) => format!("aborted: {e}"),
        },
    });
    let recomputed: f64 = traj.iterates.iter().map(|i| i.loss).sum();
    let recorded = traj.cumulative_regret_sum();
    checks.push(Check {
        name: "regret_bookkeeping".into(),
        pass: (recomputed - recorded).abs() <= 1e-9 * recomputed.abs().max(1.0),
        details: format!("recorded={recorded} recomputed={recomputed}"),
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn artifact_paths() {
        assert_eq!(artifact_path("", "a.csv"), PathBuf::from("a.csv"));
        assert_eq!(artifact_path("out/", "a.csv"), PathBuf::from("out/a.csv"));
        assert_eq!(artifact_path("out/run1_", "a.csv"), PathBuf::from("out/run1_a.csv"));
    }

    #[test]
    fn summary_header_extraction() {
        let s = "# x\ncommand=equiv\n---\nCHECK a: PASS\n";
        assert_eq!(config_text_from_summary(s), "# x\ncommand=equiv\n");
    }
}
