//! `ssrlab`: dataset generation, contraction sweeps, slope surfaces, and
//! invariant verification for graph-based Bayesian semi-supervised
//! regression. Worker count follows `RAYON_NUM_THREADS`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ssr_core::contraction::{slope_surface, GridAxis, SlopeSurface};
use ssr_core::graph::{self, PerturbationFamily, WeightMatrix};
use ssr_core::inference::LabelSet;
use ssr_core::spectral::{self, set_functions, GapBound};
use ssr_core::io as core_io;

use ssr_exp::csvio::{read_sweep_csv, write_mc_check_csv, write_slope_csv, write_sweep_csv};
use ssr_exp::error::{Error, Result};
use ssr_exp::mnist;
use ssr_exp::svg::write_heatmap_svg;
use ssr_exp::sweep::{
    self, coupling_exponent, parse_decades, run_sweep, SweepDataset, SweepSpec,
    ValueField,
};
use ssr_exp::synthetic::{generate_synthetic, SyntheticSpec};

#[derive(Parser)]
#[command(
    name = "ssrlab",
    about = "Graph-based Bayesian SSR: posterior contraction experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic weakly connected family and write it as CSV.
    Synth(SynthArgs),
    /// Ingest IDX image/label files and emit the experiment graph.
    Mnist(MnistArgs),
    /// Run the (eps, gamma, alpha) contraction sweep.
    Sweep(SweepArgs),
    /// Post-process a sweep CSV into slope surfaces.
    Slopes(SlopesArgs),
    /// Run assumption checks and the invariant suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 100)]
    size: usize,
    #[arg(long, default_value_t = 3)]
    hmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample correction entries on inter-cluster positions only.
    #[arg(long)]
    offblock_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MnistArgs {
    /// IDX image file (uncompressed, magic 0x00000803).
    #[arg(long)]
    images: PathBuf,
    /// IDX label file (uncompressed, magic 0x00000801).
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "1,4,7", value_delimiter = ',')]
    digits: Vec<u8>,
    #[arg(long, default_value_t = 100)]
    per_digit: usize,
    #[arg(long, default_value_t = 15)]
    knn: usize,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Directory produced by `synth` or `mnist`; defaults to an in-process
    /// synthetic family.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "0.5,1,5", value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, default_value = "-1:-15:0.25", allow_hyphen_values = true)]
    eps_decades: String,
    #[arg(long, default_value = "-1:-7.5:0.25", allow_hyphen_values = true)]
    gamma_decades: String,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Choose the labeled vertex per cluster at random with this seed.
    #[arg(long)]
    label_seed: Option<u64>,
    /// Cross-check a subsample of cells against the Rao-Blackwellized
    /// Monte-Carlo estimator with this many samples.
    #[arg(long)]
    mc_check: Option<usize>,
    /// Suppress metadata comment lines (timestamps) in the CSV.
    #[arg(long)]
    no_meta: bool,
    /// Emit SVG heatmaps next to the slope CSVs.
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ValueArg {
    I,
    Trace,
    Variance,
    Bias,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AxisArg {
    Eps,
    Gamma,
    Tau,
    Both,
}

#[derive(Args)]
struct SlopesArgs {
    /// Sweep CSV produced by `sweep`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ValueArg::I)]
    value: ValueArg,
    #[arg(long, value_enum, default_value_t = AxisArg::Both)]
    axis: AxisArg,
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cluster size of the synthetic family used for the checks.
    #[arg(long, default_value_t = 40)]
    size: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Synth(args) => cmd_synth(args),
        Cmd::Mnist(args) => cmd_mnist(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Slopes(args) => cmd_slopes(args),
        Cmd::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    ensure_dir(&args.out)?;
    let spec = SyntheticSpec {
        clusters: args.clusters,
        cluster_size: args.size,
        h_max: args.hmax,
        seed: args.seed,
        offblock_only: args.offblock_only,
    };
    let (family, clustering) = generate_synthetic(&spec)?;
    core_io::write_dense_matrix(&args.out.join("family_w0.csv"), family.base().as_matrix())
        .map_err(Error::Core)?;
    for (idx, c) in family.corrections().iter().enumerate() {
        core_io::write_dense_matrix(&args.out.join(format!("family_w{}.csv", idx + 1)), c)
            .map_err(Error::Core)?;
    }
    core_io::write_clustering(&args.out.join("clustering.csv"), &clustering)
        .map_err(Error::Core)?;
    println!(
        "synth: N = {}, K = {}, h_max = {} -> {}",
        family.size(),
        clustering.cluster_count(),
        family.order(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_mnist(args: MnistArgs) -> Result<ExitCode> {
    ensure_dir(&args.out)?;
    let raw = mnist::read_idx_images(&args.images)?;
    let labels = mnist::read_idx_labels(&args.labels)?;
    if raw.count != labels.len() {
        return Err(Error::IdxCountMismatch {
            images: raw.count,
            labels: labels.len(),
        });
    }
    let matrix = raw.to_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let subset = mnist::select_subset(&matrix, &labels, &args.digits, args.per_digit, &mut rng)?;
    let exp = mnist::build_mnist_experiment(&subset, args.knn, args.p)?;
    core_io::write_dense_matrix(&args.out.join("weights.csv"), exp.weights.as_matrix())
        .map_err(Error::Core)?;
    core_io::write_clustering(&args.out.join("clustering.csv"), &exp.clustering)
        .map_err(Error::Core)?;
    core_io::write_matrix_with_ids(
        &args.out.join("truth.csv"),
        exp.truth.as_matrix(),
        &(0..exp.weights.size()).collect::<Vec<_>>(),
    )
    .map_err(Error::Core)?;
    let label_rows = DMatrix::from_fn(1, exp.labels.count(), |_, j| exp.labels.indices()[j] as f64);
    core_io::write_matrix_with_ids(
        &args.out.join("labels.csv"),
        &label_rows,
        exp.labels.indices(),
    )
    .map_err(Error::Core)?;
    println!(
        "mnist: {} vertices, {} clusters, labels at {:?} -> {}",
        exp.weights.size(),
        exp.clustering.cluster_count(),
        exp.labels.indices(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// A `synth` output directory holds `family_w0.csv`; a `mnist` output holds
/// `weights.csv`.
fn load_dataset(dir: &Path) -> Result<SweepDataset> {
    let clustering = core_io::read_clustering(&dir.join("clustering.csv")).map_err(Error::Core)?;
    let family_base = dir.join("family_w0.csv");
    if family_base.exists() {
        let base = WeightMatrix::new(core_io::read_dense_matrix(&family_base).map_err(Error::Core)?)
            .map_err(Error::Core)?;
        let mut corrections = Vec::new();
        for h in 1.. {
            let path = dir.join(format!("family_w{h}.csv"));
            if !path.exists() {
                break;
            }
            corrections.push(core_io::read_dense_matrix(&path).map_err(Error::Core)?);
        }
        let family = PerturbationFamily::new(base, corrections).map_err(Error::Core)?;
        return Ok(SweepDataset::Perturbation { family, clustering });
    }
    let weights_path = dir.join("weights.csv");
    if weights_path.exists() {
        let weights =
            WeightMatrix::new(core_io::read_dense_matrix(&weights_path).map_err(Error::Core)?)
                .map_err(Error::Core)?;
        return Ok(SweepDataset::InterclusterScaled {
            weights,
            clustering,
        });
    }
    Err(Error::Invalid(format!(
        "{} holds neither family_w0.csv nor weights.csv",
        dir.display()
    )))
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    ensure_dir(&args.out)?;
    let data = match &args.data {
        Some(dir) => load_dataset(dir)?,
        None => {
            let (family, clustering) = generate_synthetic(&SyntheticSpec {
                seed: args.seed,
                ..SyntheticSpec::default()
            })?;
            SweepDataset::Perturbation { family, clustering }
        }
    };
    let spec = SweepSpec {
        eps_log10: parse_decades(&args.eps_decades)?,
        gamma_log10: parse_decades(&args.gamma_decades)?,
        alphas: args.alpha.clone(),
        p: args.p,
        seed: args.seed,
        mc_check: args.mc_check,
        label_seed: args.label_seed,
    };
    let out = run_sweep(&spec, &data)?;

    let meta = if args.no_meta {
        Vec::new()
    } else {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        vec![
            "ssrlab sweep".to_string(),
            format!(
                "seed={} p={} alphas={:?} eps={} gamma={}",
                args.seed, args.p, args.alpha, args.eps_decades, args.gamma_decades
            ),
            format!("labels={:?}", out.labels.indices()),
            format!("created_unix={created}"),
        ]
    };
    write_sweep_csv(&args.out.join("sweep.csv"), &out.rows, &meta)?;
    if !out.mc_rows.is_empty() {
        write_mc_check_csv(&args.out.join("mc_check.csv"), &out.mc_rows)?;
    }
    for s in &out.surfaces {
        emit_surface_pair(&args.out, &s.c_eps, &s.c_gamma, s.alpha, "I", args.svg)?;
    }
    let failed = out.rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "sweep: {} rows ({} failed), {} slope surfaces -> {}",
        out.rows.len(),
        failed,
        2 * out.surfaces.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn alpha_tag(alpha: f64) -> String {
    format!("{alpha}").replace('.', "_")
}

fn emit_surface_pair(
    out: &Path,
    c_eps: &SlopeSurface,
    c_gamma: &SlopeSurface,
    alpha: f64,
    value: &str,
    svg: bool,
) -> Result<()> {
    let tag = alpha_tag(alpha);
    write_slope_csv(&out.join(format!("c_eps_{value}_alpha{tag}.csv")), c_eps)?;
    write_slope_csv(&out.join(format!("c_gamma_{value}_alpha{tag}.csv")), c_gamma)?;
    if svg {
        let vmax = 2f64.max(4.0 * alpha);
        let exponent = 2.0 / alpha.min(1.0);
        write_heatmap_svg(
            &out.join(format!("c_eps_{value}_alpha{tag}.svg")),
            c_eps,
            vmax,
            &format!("c_eps of {value}, alpha = {alpha}"),
            "log10(gamma)",
            "log10(eps)",
            Some(&|cg: f64| exponent * cg),
        )?;
        write_heatmap_svg(
            &out.join(format!("c_gamma_{value}_alpha{tag}.svg")),
            c_gamma,
            vmax,
            &format!("c_gamma of {value}, alpha = {alpha}"),
            "log10(gamma)",
            "log10(eps)",
            Some(&|cg: f64| exponent * cg),
        )?;
    }
    Ok(())
}

fn cmd_slopes(args: SlopesArgs) -> Result<ExitCode> {
    ensure_dir(&args.out)?;
    let rows = read_sweep_csv(&args.input)?;
    let field = match args.value {
        ValueArg::I => ValueField::Total,
        ValueArg::Trace => ValueField::Trace,
        ValueArg::Variance => ValueField::Variance,
        ValueArg::Bias => ValueField::Bias,
    };
    let value_name = match args.value {
        ValueArg::I => "I",
        ValueArg::Trace => "trace",
        ValueArg::Variance => "variance",
        ValueArg::Bias => "bias",
    };
    let mut alphas: Vec<f64> = Vec::new();
    for r in &rows {
        if !alphas.iter().any(|a| (a - r.alpha).abs() < 1e-12) {
            alphas.push(r.alpha);
        }
    }
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut emitted = 0usize;
    for alpha in alphas {
        let tag = alpha_tag(alpha);
        if matches!(args.axis, AxisArg::Tau) {
            let grid = sweep::value_grid_tau(&rows, alpha, field)?;
            let c_tau = slope_surface(&grid, GridAxis::Row).map_err(Error::Core)?;
            write_slope_csv(&args.out.join(format!("c_tau_{value_name}_alpha{tag}.csv")), &c_tau)?;
            if args.svg {
                write_heatmap_svg(
                    &args.out.join(format!("c_tau_{value_name}_alpha{tag}.svg")),
                    &c_tau,
                    2f64.max(4.0 * alpha),
                    &format!("c_tau of {value_name}, alpha = {alpha}"),
                    "log10(gamma)",
                    "log10(tau)",
                    Some(&|cg: f64| cg / alpha),
                )?;
            }
            emitted += 1;
            continue;
        }
        let grid = sweep::value_grid(&rows, alpha, field)?;
        if matches!(args.axis, AxisArg::Eps | AxisArg::Both) {
            let c_eps = slope_surface(&grid, GridAxis::Row).map_err(Error::Core)?;
            write_slope_csv(&args.out.join(format!("c_eps_{value_name}_alpha{tag}.csv")), &c_eps)?;
            if args.svg {
                let exponent = 2.0 / alpha.min(1.0);
                write_heatmap_svg(
                    &args.out.join(format!("c_eps_{value_name}_alpha{tag}.svg")),
                    &c_eps,
                    2f64.max(4.0 * alpha),
                    &format!("c_eps of {value_name}, alpha = {alpha}"),
                    "log10(gamma)",
                    "log10(eps)",
                    Some(&|cg: f64| exponent * cg),
                )?;
            }
            emitted += 1;
        }
        if matches!(args.axis, AxisArg::Gamma | AxisArg::Both) {
            let c_gamma = slope_surface(&grid, GridAxis::Col).map_err(Error::Core)?;
            write_slope_csv(
                &args.out.join(format!("c_gamma_{value_name}_alpha{tag}.csv")),
                &c_gamma,
            )?;
            if args.svg {
                let exponent = 2.0 / alpha.min(1.0);
                write_heatmap_svg(
                    &args.out.join(format!("c_gamma_{value_name}_alpha{tag}.svg")),
                    &c_gamma,
                    2f64.max(4.0 * alpha),
                    &format!("c_gamma of {value_name}, alpha = {alpha}"),
                    "log10(gamma)",
                    "log10(eps)",
                    Some(&|cg: f64| exponent * cg),
                )?;
            }
            emitted += 1;
        }
    }
    println!("slopes: wrote {emitted} surfaces -> {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

struct Verifier {
    failures: usize,
}

impl Verifier {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            println!("PASS {name}: {detail}");
        } else {
            println!("FAIL {name}: {detail}");
            self.failures += 1;
        }
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let mut v = Verifier { failures: 0 };
    let spec = SyntheticSpec {
        cluster_size: args.size,
        seed: args.seed,
        ..SyntheticSpec::default()
    };
    let (family, clustering) = generate_synthetic(&spec)?;

    // Assumption checks on the unperturbed family.
    match graph::check_assumptions(family.base(), &clustering, 0.0) {
        Ok(report) => v.check(
            "assumptions",
            report.theta > 0.0,
            format!("theta = {:.4}, K = {}", report.theta, report.clusters),
        ),
        Err(e) => v.check("assumptions", false, e.to_string()),
    }

    let w0 = graph::assemble_perturbed(&family, 0.0)?;
    v.check(
        "assemble-at-zero",
        w0.as_matrix() == family.base().as_matrix(),
        "W_0 reproduced bit-exactly".into(),
    );

    let w_eps = graph::assemble_perturbed(&family, 1e-3)?;
    let lap = graph::degree_and_laplacian(&w_eps, 0.0)?;
    let spectrum = spectral::eigendecompose(&lap)?;
    let ones = nalgebra::DVector::from_element(lap.size(), 1.0);
    let row_sum_residual = (lap.as_matrix() * ones).amax();
    v.check(
        "laplacian",
        spectrum.eigenvalue(0) > -1e-8 && row_sum_residual < 1e-9 * lap.size() as f64,
        format!(
            "min eigenvalue = {:.2e}, |L 1|_inf = {:.2e}",
            spectrum.eigenvalue(0),
            row_sum_residual
        ),
    );

    let model = spectral::prior_covariance(&spectrum, 0.1, 1.0)?;
    let lam = model.eigenvalues();
    let monotone = (1..lam.len()).all(|j| lam[j] <= lam[j - 1] + 1e-15);
    v.check(
        "prior-eigenvalues",
        monotone && lam.iter().all(|l| *l > 0.0 && *l <= 1.0),
        format!("lambda_max = {}, lambda_min = {:.3e}", lam[0], lam[lam.len() - 1]),
    );

    // Hand-checked two-vertex instance.
    let w2 = WeightMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]))?;
    let l2 = graph::degree_and_laplacian(&w2, 0.0)?;
    let spec2 = spectral::eigendecompose(&l2)?;
    let model2 = spectral::prior_covariance(&spec2, 1.0, 1.0)?;
    let labels2 = LabelSet::new(vec![0], 2)?;
    let s = 0.5_f64.sqrt();
    let truth2 =
        ssr_core::inference::GroundTruth::new(DMatrix::from_row_slice(1, 2, &[s, s]));
    let report = ssr_core::contraction::contraction_exact(&model2, &labels2, &truth2, 1.0)?;
    let worked = (report.trace_term - 1.0).abs() < 1e-10
        && (report.variance_term - 0.2).abs() < 1e-10
        && (report.bias_term - 0.5).abs() < 1e-10;
    v.check(
        "worked-example",
        worked,
        format!(
            "terms = ({:.12}, {:.12}, {:.12})",
            report.trace_term, report.variance_term, report.bias_term
        ),
    );

    // Perturbation diagnostics at small eps.
    let l0 = graph::degree_and_laplacian(family.base(), 0.0)?;
    let spec0 = spectral::eigendecompose(&l0)?;
    let sf = set_functions(family.base().degrees(), &clustering, 0.0)?;
    let norms = graph::laplacian_expansion_norms(&family)?;
    let diag = spectral::perturbation_diagnostics(
        &spec0,
        &spectrum,
        &sf,
        Some(GapBound {
            term_norms: &norms,
            eps: 1e-3,
        }),
    )?;
    let bound = diag.gap_lower_bound.unwrap_or(f64::NEG_INFINITY);
    v.check(
        "perturbation",
        diag.sigma_k_plus_1 >= bound && diag.residuals.iter().all(|r| *r < 1e-2),
        format!(
            "sigma_K+1 = {:.4} >= bound {:.4}, max residual = {:.2e}",
            diag.sigma_k_plus_1,
            bound,
            diag.residuals.iter().cloned().fold(0.0, f64::max)
        ),
    );

    // Mini sweep: term inequality and determinism.
    let sweep_spec = SweepSpec {
        eps_log10: sweep::decade_grid(-1.0, -4.0, 0.5),
        gamma_log10: sweep::decade_grid(-1.0, -3.0, 0.5),
        alphas: vec![1.0],
        p: 0.5,
        seed: args.seed,
        mc_check: None,
        label_seed: None,
    };
    let data = SweepDataset::Perturbation {
        family: family.clone(),
        clustering: clustering.clone(),
    };
    let out_a = run_sweep(&sweep_spec, &data)?;
    let out_b = run_sweep(&sweep_spec, &data)?;
    let slack_ok = out_a
        .rows
        .iter()
        .all(|r| r.error.is_none() && r.trace_term - r.variance_term >= -1e-10);
    v.check(
        "term-inequality",
        slack_ok,
        format!("{} cells, tau = eps^(1/{})", out_a.rows.len(), coupling_exponent(1.0)),
    );
    let csv_a = ssr_exp::csvio::sweep_csv_string(&out_a.rows, &[]);
    let csv_b = ssr_exp::csvio::sweep_csv_string(&out_b.rows, &[]);
    v.check(
        "determinism",
        csv_a == csv_b,
        format!("{} bytes, identical across runs", csv_a.len()),
    );

    if v.failures == 0 {
        println!("verify: all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verify: {} check(s) failed", v.failures);
        Ok(ExitCode::FAILURE)
    }
}
