//! Configuration-driven experiment runner.
//!
//! Every experiment produces a list of [`Artifact`]s and report rows in
//! memory; [`write_outputs`] puts them on disk together with `summary.json`.
//! Nothing written depends on the number of worker threads.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::acceptance::{compare_with_exact, report, run_all, Artifact, CriterionRow, SuiteOptions};
use crate::config::{Experiment, OutputFormat, RunConfig};
use crate::edgeworth::{standardized_log_z, write_cdf_table, CdfComparison, EdgeworthSeries};
use crate::envmodel::{check_hypotheses, EnvironmentModel, HypothesisReport};
use crate::error::{Error, Result};
use crate::fourier::{convergence_fit_with_floor, estimate_phi_at, lambda_band_sup, phi_deriv0, write_fit_csv, ConvergenceFit};
use crate::limits::{clt_statistic, decay_scan, renewal_estimate, write_renewal_csv, DecayKind};
use crate::oracle::{exact_distributions, exact_survival_curve};
use crate::simulate::{raw_ensemble, survivor_ensemble, Ensemble, EnsembleSpec};

/// Moment indices used when the configuration has no `[edgeworth]` block.
const DEFAULT_Q: f64 = 4.0;
const DEFAULT_P: f64 = 2.0;

/// Window of the exact oracle.
const ORACLE_K_MAX: usize = 4096;

/// Reference ensemble size of the acceptance suite; `sim.trajectories`
/// rescales it for `full-acceptance`.
const SUITE_REFERENCE_SIZE: f64 = 1e6;

/// Command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

/// Everything an experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub experiment: Experiment,
    pub rows: Vec<CriterionRow>,
    pub artifacts: Vec<Artifact>,
    pub warnings: Vec<String>,
}

impl RunSummary {
    fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            rows: Vec::new(),
            artifacts: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn file(&mut self, name: impl Into<String>, body: Vec<u8>) {
        self.artifacts.push(Artifact {
            name: name.into(),
            body: String::from_utf8(body).expect("ascii output"),
        });
    }

    /// Consolidated table and the exit code it implies.
    pub fn table(&self) -> (String, i32) {
        report(&self.rows)
    }

    /// `summary.json`: a list of `{criterion, anchor, value, threshold, pass}`.
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("rows serialize") + "\n"
    }
}

/// Run the configured experiment on a pool of `threads` workers.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.sim.seed = seed;
    }
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| dispatch(&cfg))
}

/// Output directory: `--out`, else `output.directory`, else `./out`.
pub fn output_dir(cfg: &RunConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|o| o.directory.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Write artifacts (CSV) and `summary.json` (JSON) per the configured formats.
pub fn write_outputs(cfg: &RunConfig, summary: &RunSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if cfg.writes(OutputFormat::Csv) {
        for a in &summary.artifacts {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.body)?;
            written.push(path);
        }
    }
    if cfg.writes(OutputFormat::Json) {
        let path = dir.join("summary.json");
        std::fs::write(&path, summary.summary_json())?;
        written.push(path);
    }
    Ok(written)
}

fn dispatch(cfg: &RunConfig) -> Result<RunSummary> {
    match cfg.experiment {
        Experiment::FullAcceptance => full_acceptance(cfg),
        e => {
            let model = cfg.model()?;
            let mut s = RunSummary::new(e);
            match e {
                Experiment::Simulate => simulate(cfg, &model, &mut s)?,
                Experiment::OracleCheck => oracle_check(cfg, &model, &mut s)?,
                Experiment::Charfn => charfn(cfg, &model, &mut s)?,
                Experiment::Clt => clt(cfg, &model, &mut s)?,
                Experiment::Edgeworth => edgeworth(cfg, &model, &mut s)?,
                Experiment::Renewal => renewal(cfg, &model, &mut s)?,
                Experiment::Diagnostics => diagnostics(cfg, &model, &mut s)?,
                Experiment::FullAcceptance => unreachable!(),
            }
            Ok(s)
        }
    }
}

fn hypotheses(cfg: &RunConfig, model: &EnvironmentModel) -> Result<HypothesisReport> {
    let (q, p) = cfg.edgeworth.as_ref().map_or((DEFAULT_Q, DEFAULT_P), |e| (e.q, e.p));
    check_hypotheses(model, q, p).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::Config(m),
        other => other,
    })
}

fn lattice_warning(h: &HypothesisReport, s: &mut RunSummary) {
    if !h.strongly_nonlattice {
        s.warnings.push(
            "log A lies on a shifted lattice a + hZ: |lambda(s)| returns to 1, so lattice effects of order n^{-1/2} remain in the CDF of log Z_n"
                .into(),
        );
    }
}

fn survivors(cfg: &RunConfig, model: &EnvironmentModel, checkpoints: Vec<usize>) -> Result<Ensemble> {
    let spec = EnsembleSpec::new(cfg.sim.max_n(), cfg.sim.trajectories, cfg.sim.seed).checkpoints(checkpoints);
    survivor_ensemble(model, &spec, &cfg.sim.policy()?)
}

fn info_row(criterion: &str, anchor: &str, value: f64, detail: String) -> CriterionRow {
    CriterionRow::new(criterion, anchor, value, f64::NAN, true, detail)
}

fn simulate(cfg: &RunConfig, model: &EnvironmentModel, s: &mut RunSummary) -> Result<()> {
    let ens = survivors(cfg, model, cfg.sim.n.clone())?;
    let mut buf = Vec::new();
    ens.write_csv(&mut buf)?;
    s.file("ensemble.csv", buf);
    s.rows.push(info_row(
        "survivor ensemble",
        "fraction of paths with Z_{n+m} > 0",
        ens.survival_ratio(),
        format!(
            "{} survivors from {} attempts, margin {}",
            ens.len(),
            ens.counts.attempted,
            ens.margin
        ),
    ));
    Ok(())
}

fn oracle_check(cfg: &RunConfig, model: &EnvironmentModel, s: &mut RunSummary) -> Result<()> {
    let max_n = cfg.sim.max_n();
    let laws = exact_distributions(model, max_n, ORACLE_K_MAX)?;
    let ens = raw_ensemble(model, max_n, cfg.sim.trajectories, cfg.sim.seed, &cfg.sim.policy()?, Some(&cfg.sim.n))?;
    for &n in &cfg.sim.n {
        let c = compare_with_exact(&laws[n], &ens.states_at(n)?);
        s.file(format!("oracle_law_n{n}.csv"), c.csv.into_bytes());
        s.rows.push(CriterionRow::new(
            &format!("law of Z_{n}"),
            "offspring recursion: simulated law equals the exact law",
            c.tv,
            c.bound,
            c.tv < c.bound,
            format!("TV over N = {}, exact tail mass {:.2e}", c.sample_size, laws[n].tail_mass),
        ));
    }
    let curve = exact_survival_curve(model, max_n, ORACLE_K_MAX.min(1024))?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    s.file("survival.csv", buf);
    Ok(())
}

fn charfn(cfg: &RunConfig, model: &EnvironmentModel, s: &mut RunSummary) -> Result<()> {
    let grid = cfg.grid.as_ref().expect("validated").grid()?;
    let ens = survivors(cfg, model, cfg.sim.n.clone())?;
    let mut ns = cfg.sim.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut buf = Vec::new();
    let mut estimates = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let est = estimate_phi_at(&ens, model, &grid, n)?;
        est.write_csv(&mut buf, i == 0)?;
        estimates.push(est);
    }
    s.file("charfn.csv", buf);

    let consecutive = ns.windows(2).all(|w| w[1] == w[0] + 1);
    if consecutive && ns.len() >= 5 {
        let mut fits: Vec<(f64, ConvergenceFit)> = Vec::new();
        for &x in grid.nonnegative() {
            let pts: Vec<_> = estimates.iter().map(|e| *e.at(x).expect("grid point")).collect();
            if pts.iter().any(|p| !p.usable) {
                continue;
            }
            let values: Vec<Complex64> = pts.iter().map(|p| p.value()).collect();
            // Increments below two standard errors are noise.
            let floor: Vec<f64> = pts.windows(2).map(|w| 2.0 * (w[0].std_error + w[1].std_error)).collect();
            fits.push((x, convergence_fit_with_floor(&values, ns[0], &floor)?));
        }
        let mut buf = Vec::new();
        write_fit_csv(&mut buf, &fits)?;
        s.file("convergence_fit.csv", buf);
        let worst = fits.iter().map(|(_, f)| f.rho).fold(0.0, f64::max);
        s.rows.push(CriterionRow::new(
            "geometric convergence of phi_n",
            "phi_n(s) -> phi(s) at geometric rate near s = 0",
            worst,
            1.0,
            fits.iter().all(|(_, f)| f.rho < 1.0),
            format!("{} usable grid points; increments within 2 SE are skipped", fits.len()),
        ));

        let inputs: Vec<(usize, &Ensemble)> = ns.iter().map(|&n| (n, &ens)).collect();
        for j in 1..=2 {
            let seq = phi_deriv0(&inputs, model, j)?;
            let mut buf = Vec::new();
            seq.write_csv(&mut buf)?;
            s.file(format!("phi_deriv_j{j}.csv"), buf);
            let v = seq.best_value();
            s.rows.push(info_row(
                &format!("phi^({j})(0)"),
                "limit of phi_n^(j)(0)",
                v.re.hypot(v.im),
                format!(
                    "{:.6}{:+.6}i, {}",
                    v.re,
                    v.im,
                    if seq.limit.is_some() { "extrapolated" } else { "last term, extrapolation refused" }
                ),
            ));
        }
    } else {
        s.warnings.push("sim.n is not a run of at least 5 consecutive generations: convergence fit skipped".into());
    }
    Ok(())
}

fn clt(cfg: &RunConfig, model: &EnvironmentModel, s: &mut RunSummary) -> Result<()> {
    lattice_warning(&hypotheses(cfg, model)?, s);
    let ens = survivors(cfg, model, cfg.sim.n.clone())?;
    let mut ns = cfg.sim.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut csv = String::from("n,ks,dkw,sample_size\n");
    let mut stats = Vec::new();
    for &n in &ns {
        let c = clt_statistic(&ens, model, n)?;
        let _ = writeln!(csv, "{},{},{},{}", c.n, c.ks, c.dkw, c.sample_size);
        stats.push(c);
    }
    s.file("clt.csv", csv.into_bytes());
    let (first, last) = (stats.first().unwrap(), stats.last().unwrap());
    s.rows.push(CriterionRow::new(
        &format!("KS distance to Phi at n = {}", last.n),
        "normal limit of (log Z_n - n mu)/(sigma sqrt n) on survival",
        last.ks,
        first.ks,
        stats.len() == 1 || last.ks < first.ks,
        format!("KS({}) = {:.5}, DKW band {:.5}", first.n, first.ks, last.dkw),
    ));
    Ok(())
}

/// Longest generation of the pilot ensemble used to estimate `phi^{(j)}(0)`.
const PILOT_HORIZON: usize = 30;

fn edgeworth(cfg: &RunConfig, model: &EnvironmentModel, s: &mut RunSummary) -> Result<()> {
    let e = cfg.edgeworth.as_ref().expect("validated");
    let h = hypotheses(cfg, model)?;
    if !h.h1_holds() {
        return Err(Error::Hypothesis(format!("H1 (q = {}, p = {})", e.q, e.p)));
    }
    if !h.h2_holds() {
        return Err(Error::H2Violated { gamma: h.gamma });
    }
    if !h.nonlattice {
        return Err(Error::LatticeEnvironment);
    }
    if e.r >= 4 && !h.cramer {
        return Err(Error::Hypothesis("pp1 (Cramer condition, needed for r >= 4)".into()));
    }
    lattice_warning(&h, s);
    let policy = cfg.sim.policy()?;

    // phi^{(1..=r-2)}(0) from a separate pilot sample recorded at every generation.
    let pilot_n = cfg.sim.max_n().min(PILOT_HORIZON);
    let pilot_size = (cfg.sim.trajectories / 5).max(1000);
    let pilot = survivor_ensemble(
        model,
        &EnsembleSpec::new(pilot_n, pilot_size, cfg.sim.seed.wrapping_add(1)),
        &policy,
    )?;
    let inputs: Vec<(usize, &Ensemble)> = (1..=pilot_n).map(|n| (n, &pilot)).collect();
    let mut derivs = Vec::new();
    let mut errors = Vec::new();
    for j in 1..=e.r - 2 {
        let seq = phi_deriv0(&inputs, model, j)?;
        let mut buf = Vec::new();
        seq.write_csv(&mut buf)?;
        s.file(format!("phi_deriv_j{j}.csv"), buf);
        derivs.push(seq.best_value());
        errors.push(if seq.limit.is_some() {
            seq.limit_uncertainty
        } else {
            seq.points.last().expect("nonempty").std_error
        });
    }
    let series = EdgeworthSeries::for_model(model, &derivs, e.r)?.with_phi_uncertainty(&errors)?;

    let ens = survivors(cfg, model, cfg.sim.n.clone())?;
    let grid: Vec<f64> = (0..=120).map(|k| -3.0 + 0.05 * k as f64).collect();
    let mut summary = String::from("n,r,sup_phi,sup_gr,dkw\n");
    let mut ns = cfg.sim.n.clone();
    ns.sort_unstable();
    ns.dedup();
    for &n in &ns {
        let xs = standardized_log_z(&ens, model, n)?;
        let c = CdfComparison::from_sorted(&xs, &series, n)?;
        let mut buf = Vec::new();
        write_cdf_table(&mut buf, &xs, &series, n, &grid)?;
        s.file(format!("cdf_n{n}.csv"), buf);
        let _ = writeln!(summary, "{},{},{},{},{}", c.n, c.r, c.sup_phi, c.sup_gr, c.dkw);
        let distinguishable = c.sup_phi > 3.0 * c.dkw;
        s.rows.push(CriterionRow::new(
            &format!("G_{} against Phi at n = {n}", e.r),
            "Edgeworth expansion of the CDF of log Z_n on survival",
            c.sup_gr,
            c.sup_phi,
            !distinguishable || c.sup_gr < c.sup_phi,
            format!(
                "sup|F-Phi| = {:.5}, DKW band {:.5}{}",
                c.sup_phi,
                c.dkw,
                if distinguishable { "" } else { ", indistinguishable from Phi" }
            ),
        ));
    }
    s.file("edgeworth_summary.csv", summary.into_bytes());
    Ok(())
}

fn renewal(cfg: &RunConfig, model: &EnvironmentModel, s: &mut RunSummary) -> Result<()> {
    if model.is_lattice() {
        return Err(Error::LatticeEnvironment);
    }
    let r = cfg.renewal.as_ref().expect("validated");
    let policy = cfg.sim.policy()?;
    let mut rows = Vec::new();
    for (i, &y) in r.y_list.iter().enumerate() {
        let est = renewal_estimate(model, r.b, r.c, y, cfg.sim.trajectories, cfg.sim.seed.wrapping_add(i as u64), &policy)?;
        s.rows.push(CriterionRow::new(
            &format!("renewal measure at y = {y}"),
            "E #{n: log Z_n in y + [B, C]} -> (C - B)/mu",
            est.relative_error(),
            0.05,
            est.relative_error() < 0.05,
            format!("{:.5} +- {:.5} vs {:.5}", est.estimate, est.std_error, est.target),
        ));
        rows.push(est);
    }
    let mut buf = Vec::new();
    write_renewal_csv(&mut buf, &rows)?;
    s.file("renewal.csv", buf);
    Ok(())
}

fn diagnostics(cfg: &RunConfig, model: &EnvironmentModel, s: &mut RunSummary) -> Result<()> {
    let h = hypotheses(cfg, model)?;
    s.file(
        "hypotheses.json",
        (serde_json::to_string_pretty(&h).expect("report serializes") + "\n").into_bytes(),
    );
    for (name, holds) in [
        ("supercriticality", h.supercritical),
        ("H1", h.h1_holds()),
        ("H2", h.h2_holds()),
        ("nonlattice", h.nonlattice),
        ("strongly nonlattice", h.strongly_nonlattice),
        ("pp1 (Cramer)", h.cramer),
    ] {
        s.rows.push(info_row(name, "standing hypotheses", holds as u8 as f64, String::new()));
    }
    let band = lambda_band_sup(model, 0.5, 20.0, 2000)?;
    s.rows.push(info_row(
        "sup |lambda(s)| on [0.5, 20]",
        "separation of |lambda| from 1 away from s = 0",
        band,
        String::new(),
    ));

    let policy = cfg.sim.policy()?;
    let mut ns = cfg.sim.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let kinds = [
        DecayKind::SmallPop { theta: model.mu() / 2.0 },
        DecayKind::NegMoment { delta: 0.5 },
        DecayKind::SurvivalGap { m: 10 },
        DecayKind::LogMoment { k: 2 },
    ];
    for (i, kind) in kinds.into_iter().enumerate() {
        let scan = decay_scan(model, kind, &ns, cfg.sim.trajectories, cfg.sim.seed.wrapping_add(i as u64), &policy)?;
        let mut buf = Vec::new();
        scan.write_csv(&mut buf)?;
        s.file(format!("decay_{}.csv", kind.name()), buf);
        let row = match scan.log_moment_max {
            Some((at, max)) => info_row(
                "log_moment",
                "E[(log Z_n)^k; Z_n > 0] = O(n^k)",
                max,
                format!("max of values[n]/n^2 attained at n = {at}"),
            ),
            None => CriterionRow::new(
                kind.name(),
                "exponential decay in n",
                scan.beta_hat.unwrap_or(f64::NAN),
                0.0,
                scan.decays(),
                if scan.below_noise {
                    "below noise at every n".into()
                } else {
                    format!("R2 {:.4}", scan.r_squared.unwrap_or(f64::NAN))
                },
            ),
        };
        s.rows.push(row);
    }
    Ok(())
}

fn full_acceptance(cfg: &RunConfig) -> Result<RunSummary> {
    let scale = if cfg.sim.trajectories == 0 {
        1.0
    } else {
        cfg.sim.trajectories as f64 / SUITE_REFERENCE_SIZE
    };
    let opts = SuiteOptions { seed: cfg.sim.seed, scale };
    let mut s = RunSummary::new(Experiment::FullAcceptance);
    for o in run_all(&opts)? {
        s.artifacts.extend(o.artifacts);
        s.rows.push(o.row);
    }
    let (table, _) = report(&s.rows);
    let mut body = table;
    for r in &s.rows {
        body.push_str(&r.line());
        body.push('\n');
    }
    s.artifacts.push(Artifact {
        name: "acceptance.txt".into(),
        body,
    });
    Ok(s)
}
