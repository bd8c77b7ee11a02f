use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fpca_core::dataio::{self, CenteredDataset, GroupSpec};
use fpca_core::eigopt::{self, EigOptConfig, EigOptSolution, Phi};
use fpca_core::numrange::{self, DiagonalIntersection, Point};
use fpca_core::pca;
use fpca_core::report::{
    self, BasisMetrics, CompareReport, ConfigEcho, Format, Method, PhiSample, RunReport, SolverSummary, Timings,
};
use fpca_core::{EigSettings, FpcaError, LossOperator, Result};
use serde::Serialize;

use crate::Common;

struct Prepared {
    data: CenteredDataset,
    la: LossOperator,
    lb: LossOperator,
    cfg: EigOptConfig,
    timings: Timings,
}

impl Prepared {
    fn load(c: &Common) -> Result<Self> {
        if c.rank == 0 {
            return Err(FpcaError::Argument("--rank must be at least 1".into()));
        }
        if !(c.tol > 0.0 && c.tol < 1.0) {
            return Err(FpcaError::Argument(format!("--tol must lie in (0, 1), got {}", c.tol)));
        }
        let mut timings = Timings::default();
        let clock = Instant::now();
        let spec = GroupSpec {
            column: c.group_column.clone(),
            a_value: c.group_a.clone(),
            b_value: c.group_b.clone(),
        };
        let raw = dataio::load_csv(&c.input, &spec, c.features.as_deref())?;
        let data = dataio::center_and_split(&raw, c.center, c.standardize)?;
        timings.push("load", clock.elapsed().as_secs_f64());
        let n = data.n_features();
        if c.rank >= n {
            return Err(FpcaError::Argument(format!("--rank must be below the feature count {n}")));
        }
        let (m1, m2) = (data.group_a.len(), data.group_b.len());
        if c.rank > m1.min(m2) {
            return Err(FpcaError::Argument(format!(
                "--rank {} exceeds a group size ({m1} / {m2})",
                c.rank
            )));
        }

        let cfg = EigOptConfig {
            tol_t: c.tol,
            eig: EigSettings {
                mode: c.eig_mode,
                seed: c.seed,
                ..EigSettings::default()
            },
            ..EigOptConfig::default()
        };
        let clock = Instant::now();
        let la = LossOperator::from_owned(data.a(), c.rank, false, &cfg.eig)?;
        let lb = LossOperator::from_owned(data.b(), c.rank, false, &cfg.eig)?;
        timings.push("svd", clock.elapsed().as_secs_f64());
        Ok(Self {
            data,
            la,
            lb,
            cfg,
            timings,
        })
    }

    fn echo(&self, c: &Common, grid: usize) -> ConfigEcho {
        ConfigEcho {
            rank: c.rank,
            tol: c.tol,
            eig_mode: c.eig_mode,
            seed: c.seed,
            grid,
            provenance: self.data.provenance.clone(),
        }
    }

    fn report(&self, c: &Common, method: Method, u: &nalgebra::DMatrix<f64>, grid: usize) -> Result<RunReport> {
        Ok(RunReport {
            method,
            rank: c.rank,
            n_features: self.data.n_features(),
            rows_a: self.data.group_a.len(),
            rows_b: self.data.group_b.len(),
            metrics: BasisMetrics::compute(&self.data.matrix, &self.la, &self.lb, u)?,
            variances: None,
            solver: None,
            phi_profile: Vec::new(),
            config: self.echo(c, grid),
        })
    }

    fn phi(&self) -> Result<Phi<'_>> {
        Phi::new(&self.la, &self.lb, self.la.rank(), &self.cfg.eig)
    }

    fn run_pca(&mut self, c: &Common) -> Result<(RunReport, nalgebra::DMatrix<f64>)> {
        let clock = Instant::now();
        let basis = pca::principal_basis(&self.data.matrix, c.rank, &self.cfg.eig)?;
        self.timings.push("pca", clock.elapsed().as_secs_f64());
        let mut rep = self.report(c, Method::Pca, &basis.basis, 0)?;
        rep.variances = Some(basis.variances);
        Ok((rep, basis.basis))
    }

    fn run_fpca(&mut self, c: &Common, grid: usize) -> Result<(RunReport, EigOptSolution)> {
        let sol = eigopt::solve_losses(&self.la, &self.lb, &self.cfg)?;
        let t = &sol.diagnostics.timings;
        self.timings.push("brent", t.brent_seconds);
        self.timings.push("polish", t.polish_seconds);
        self.timings.push("final_eig", t.final_eig_seconds);
        let mut rep = self.report(c, Method::FpcaEigopt, &sol.u_star, grid)?;
        rep.solver = Some(SolverSummary::from(&sol));
        if grid > 0 {
            let clock = Instant::now();
            rep.phi_profile = profile(&self.phi()?, grid)?;
            self.timings.push("profile", clock.elapsed().as_secs_f64());
        }
        Ok((rep, sol))
    }

    fn finish(&self, c: &Common) -> Result<()> {
        if !c.quiet {
            let stages: Vec<String> = self
                .timings
                .stages
                .iter()
                .map(|(name, s)| format!("{name} {s:.3}s"))
                .collect();
            eprintln!("timings: {}", stages.join(", "));
        }
        if let Some(path) = &c.timings {
            write_text(path, &report::to_json_string(&self.timings)?)?;
        }
        Ok(())
    }
}

fn profile(phi: &Phi<'_>, grid: usize) -> Result<Vec<PhiSample>> {
    if grid < 2 {
        return Err(FpcaError::Argument("--grid must be at least 2".into()));
    }
    Ok(phi
        .profile(grid)?
        .into_iter()
        .map(|(t, phi)| PhiSample { t, phi })
        .collect())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| FpcaError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit<T: Serialize>(c: &Common, value: &T) -> Result<()> {
    match &c.output {
        Some(path) => report::save_report(value, path, c.format),
        None => {
            let text = match c.format {
                Format::Json => report::to_json_string(value)?,
                Format::Csv => {
                    let mut s = String::from("name,value\n");
                    for (k, v) in report::flatten(value)? {
                        s.push_str(&format!("{k},{v}\n"));
                    }
                    s
                }
            };
            std::io::stdout().write_all(text.as_bytes()).map_err(|source| FpcaError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })
        }
    }
}

fn emit_csv(c: &Common, text: &str) -> Result<()> {
    match &c.output {
        Some(path) => write_text(path, text),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|source| FpcaError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn say(c: &Common, line: impl AsRef<str>) {
    if !c.quiet {
        eprintln!("{}", line.as_ref());
    }
}

fn describe(rep: &RunReport) -> String {
    let m = &rep.metrics;
    let ratio = m
        .fairness_ratio_error
        .map_or_else(|| "undefined".to_string(), |r| format!("{r:.3e}"));
    format!(
        "loss_A {:.6e}  loss_B {:.6e}  error {:.6e}  ratio error {ratio}",
        m.loss_a, m.loss_b, m.error_overall
    )
}

pub fn pca(c: &Common, basis: Option<&Path>) -> Result<()> {
    let mut prep = Prepared::load(c)?;
    let (rep, u) = prep.run_pca(c)?;
    if let Some(path) = basis {
        report::save_matrix(&u, path)?;
    }
    emit(c, &rep)?;
    say(c, format!("pca: {}", describe(&rep)));
    prep.finish(c)
}

pub fn fpca(c: &Common, basis: Option<&Path>, grid: usize) -> Result<()> {
    if grid == 1 {
        return Err(FpcaError::Argument("--grid must be 0 or at least 2".into()));
    }
    let mut prep = Prepared::load(c)?;
    let (rep, sol) = prep.run_fpca(c, grid)?;
    if let Some(path) = basis {
        report::save_matrix(&sol.u_star, path)?;
    }
    emit(c, &rep)?;
    say(
        c,
        format!("fpca: t* {:.12}  {}  phi evaluations {}", sol.t_star, describe(&rep), sol.diagnostics.total_evaluations()),
    );
    prep.finish(c)
}

pub fn phi(c: &Common, grid: usize) -> Result<()> {
    let prep = Prepared::load(c)?;
    let samples = profile(&prep.phi()?, grid)?;
    let sol = eigopt::solve_losses(&prep.la, &prep.lb, &prep.cfg)?;
    let mut text = String::from("t,phi,kind\n");
    for s in &samples {
        text.push_str(&format!("{},{},grid\n", report::format_float(s.t), report::format_float(s.phi)));
    }
    text.push_str(&format!(
        "{},{},t_star\n",
        report::format_float(sol.t_star),
        report::format_float(sol.phi_star)
    ));
    emit_csv(c, &text)?;
    say(c, format!("phi: t* {:.12}  phi* {:.6e}", sol.t_star, sol.phi_star));
    prep.finish(c)
}

#[derive(Serialize)]
struct RangeDiagnostics {
    samples: usize,
    rank: usize,
    scale: f64,
    hull: Vec<Point>,
    area: f64,
    min_y1: f64,
    min_y2: f64,
    set_valued_samples: usize,
    diagonal: DiagonalIntersection,
    overlay: Option<Overlay>,
}

#[derive(Serialize)]
struct Overlay {
    t_star: f64,
    y_star: Point,
    /// Negative inside the hull.
    signed_distance: f64,
    distance_to_diagonal: f64,
}

pub fn numrange(c: &Common, samples: usize, diagnostics: Option<&Path>, overlay: bool) -> Result<()> {
    if samples < 3 {
        return Err(FpcaError::Argument("--samples must be at least 3".into()));
    }
    let mut prep = Prepared::load(c)?;
    let clock = Instant::now();
    let poly = numrange::sample_range(&prep.la, &prep.lb, c.rank, samples, &prep.cfg.eig)?;
    prep.timings.push("numrange", clock.elapsed().as_secs_f64());
    let diagonal = numrange::diagonal_intersection(&poly);

    let overlay = if overlay {
        let sol = eigopt::solve_losses(&prep.la, &prep.lb, &prep.cfg)?;
        Some(Overlay {
            t_star: sol.t_star,
            y_star: sol.y_star,
            signed_distance: poly.signed_distance(sol.y_star),
            distance_to_diagonal: diagonal.distance(sol.y_star),
        })
    } else {
        None
    };

    let mut text = String::from("theta,y1,y2,on_hull\n");
    for (i, s) in poly.samples.iter().enumerate() {
        text.push_str(&format!(
            "{},{},{},{}\n",
            report::format_float(s.theta),
            report::format_float(s.y[0]),
            report::format_float(s.y[1]),
            u8::from(poly.on_hull(i))
        ));
    }
    emit_csv(c, &text)?;

    let summary = RangeDiagnostics {
        samples,
        rank: c.rank,
        scale: poly.scale,
        min_y1: poly.hull.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        min_y2: poly.hull.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min),
        area: poly.area(),
        set_valued_samples: poly.samples.iter().filter(|s| s.set_valued).count(),
        hull: poly.hull.clone(),
        diagonal,
        overlay,
    };
    let target = diagnostics
        .map(Path::to_path_buf)
        .or_else(|| c.output.as_ref().map(|o| o.with_extension("diagnostics.json")));
    if let Some(path) = target {
        write_text(&path, &report::to_json_string(&summary)?)?;
    }
    say(
        c,
        format!(
            "numrange: {} hull vertices, area {:.6e}, diagonal {:?}",
            summary.hull.len(),
            summary.area,
            summary.diagonal
        ),
    );
    prep.finish(c)
}

pub fn compare(c: &Common, grid: usize) -> Result<()> {
    let mut prep = Prepared::load(c)?;
    let (pca_rep, _) = prep.run_pca(c)?;
    let (fpca_rep, _) = prep.run_fpca(c, grid)?;
    let rep = CompareReport::new(pca_rep, fpca_rep);
    emit(c, &rep)?;

    let secs = |name: &str| -> f64 {
        prep.timings.stages.iter().filter(|(n, _)| n == name).map(|(_, s)| s).sum()
    };
    let eigopt = secs("svd") + secs("brent") + secs("polish") + secs("final_eig");
    let ratio = eigopt / secs("pca").max(f64::MIN_POSITIVE);
    prep.timings.eigopt_over_pca = Some(ratio);
    say(c, format!("pca:  {}", describe(&rep.pca)));
    say(c, format!("fpca: {}", describe(&rep.fpca)));
    let increase = rep
        .error_increase_percent
        .map_or_else(|| "undefined".to_string(), |p| format!("{p:.4}%"));
    say(c, format!("error increase {increase}, wall-clock EigOpt/PCA {ratio:.2}"));
    prep.finish(c)
}
