//! `tubeness` command-line tool.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{pick, Config};
use tubeness::ologit::{
    fit_dataset, generate_synthetic, CountKind, LabelSource, OrderedLogit, RatingScale, SyntheticConfig,
};
use tubeness::optimizer::{
    export_surface, grid_search_with, load_manifest, AxisRange, Case, FusionMode, OptimizationResult, ParamGrid,
    PipelineConfig, SegmentParams,
};
use tubeness::phantom::{generate_phantom, rate_phantom, write_truth_csv, PhantomSpec, TubeLayout};
use tubeness::stats::{spearman, spearman_permutation_p};
use tubeness::vesselness::{vesselness_multiscale, FilterParams, Polarity};
use tubeness::volume::{load_mask, load_volume, reslice_isotropic, reslice_mask, save_mask, save_volume, VolumeFormat};
use tubeness::{Axis, Mask3D, Volume};

#[derive(Parser)]
#[command(name = "tubeness", version, about = "Tubular structure segmentation tuned against ordinal ratings")]
struct Cli {
    /// Worker threads; 0 uses all available cores.
    #[arg(long, global = true, env = "TUBENESS_THREADS")]
    threads: Option<usize>,

    /// TOML file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit an ordered-logit model to a synthetic count/rating cohort.
    Calibrate(CalibrateArgs),
    /// Segment one case and report its counts.
    Segment(SegmentArgs),
    /// Grid-search filter parameters on a rated cohort.
    Optimize(OptimizeArgs),
    /// Spearman correlation of counts and volumes with ratings.
    Evaluate(EvaluateArgs),
    /// Write a synthetic tube phantom with its ground truth.
    Phantom(PhantomArgs),
    /// Write the multiscale vesselness map of one volume.
    Filter(FilterArgs),
}

#[derive(Args)]
struct FilterOpts {
    /// Smallest Gaussian scale in mm.
    #[arg(long)]
    s_min: Option<f64>,
    /// Largest Gaussian scale in mm.
    #[arg(long)]
    s_max: Option<f64>,
    /// Scale step in mm.
    #[arg(long)]
    s_step: Option<f64>,
    /// Plate-vs-line sensitivity.
    #[arg(long)]
    alpha: Option<f64>,
    /// Blob sensitivity.
    #[arg(long)]
    beta_f: Option<f64>,
    /// Structureness sensitivity, in intensity units.
    #[arg(long)]
    c: Option<f64>,
    /// Isotropic voxel size (mm) inputs are resliced to.
    #[arg(long)]
    spacing: Option<f64>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Rating scale: wardlaw or patankar.
    #[arg(long)]
    scale: Option<String>,
    /// Synthetic cohort size.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lognormal_mu: Option<f64>,
    #[arg(long)]
    lognormal_sigma: Option<f64>,
    /// Count the rating is assigned from: pc (clean) or npc (noisy).
    #[arg(long)]
    label_source: Option<String>,
    /// Also write the synthetic cohort as CSV.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("modality").required(true).multiple(true))]
struct SegmentArgs {
    /// T1-weighted volume (structures dark).
    #[arg(long, group = "modality")]
    t1: Option<PathBuf>,
    /// T2-weighted volume (structures bright).
    #[arg(long, group = "modality")]
    t2: Option<PathBuf>,
    /// Region-of-interest mask.
    #[arg(long)]
    roi: PathBuf,
    #[command(flatten)]
    filter: FilterOpts,
    #[arg(long)]
    t1_threshold: Option<f64>,
    #[arg(long)]
    t2_threshold: Option<f64>,
    /// intersection, union, t1_only or t2_only.
    #[arg(long)]
    fusion: Option<String>,
    /// Slice axis for the densest-slice count.
    #[arg(long)]
    axis: Option<String>,
    #[arg(long)]
    min_length_mm: Option<f64>,
    #[arg(long)]
    max_length_mm: Option<f64>,
    /// Output prefix: `<out>_mask.raw`, `<out>_report.txt`.
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct OptimizeArgs {
    /// CSV with `id,t1_path,t2_path,roi_path,rating`.
    #[arg(long)]
    manifest: PathBuf,
    /// Model file from `calibrate`.
    #[arg(long)]
    model: PathBuf,
    /// slice or total; defaults to the model's scale protocol.
    #[arg(long)]
    count_kind: Option<String>,
    /// `lo:hi:step` in mm.
    #[arg(long)]
    s_min_range: Option<String>,
    #[arg(long)]
    s_max_range: Option<String>,
    #[arg(long)]
    t1_range: Option<String>,
    #[arg(long)]
    t2_range: Option<String>,
    #[arg(long)]
    s_step: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta_f: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    fusion: Option<String>,
    #[arg(long)]
    axis: Option<String>,
    /// Recompute vesselness for every scale pair.
    #[arg(long)]
    no_cache: bool,
    /// Output prefix.
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct EvaluateArgs {
    /// CSV with `id,count,volume,rating`.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct PhantomArgs {
    /// `nx,ny,nz`.
    #[arg(long, default_value = "64,64,64")]
    dims: String,
    #[arg(long, default_value_t = 1.0)]
    voxel_mm: f64,
    #[arg(long, default_value_t = 6)]
    tubes: usize,
    #[arg(long, default_value_t = 0.8)]
    radius_min: f64,
    #[arg(long, default_value_t = 1.5)]
    radius_max: f64,
    #[arg(long, default_value_t = 5.0)]
    length_min: f64,
    #[arg(long, default_value_t = 20.0)]
    length_max: f64,
    #[arg(long, default_value_t = 500.0)]
    background: f64,
    #[arg(long, default_value_t = 2000.0)]
    contrast: f64,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    polarity: Option<String>,
    #[arg(long, default_value_t = 4.0)]
    min_separation: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output prefix.
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    filter: FilterOpts,
    /// bright or dark.
    #[arg(long)]
    polarity: Option<String>,
    /// Output raw volume.
    #[arg(long)]
    out: PathBuf,
}

fn parse_range(s: &str) -> Result<AxisRange> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("range `{s}` is not lo:hi:step"))?;
    match nums.as_slice() {
        [v] => Ok(AxisRange::single(*v)),
        [lo, hi, step] => Ok(AxisRange::new(*lo, *hi, *step)?),
        _ => bail!("range `{s}` is not lo:hi:step"),
    }
}

fn parse_dims(s: &str) -> Result<[usize; 3]> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("dims `{s}` are not nx,ny,nz"))?;
    v.try_into().map_err(|_| anyhow::anyhow!("dims `{s}` are not nx,ny,nz"))
}

fn write(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_resliced(path: &Path, spacing: f64) -> Result<Volume<f64>> {
    let v = load_volume(path, VolumeFormat::from_path(path))?;
    Ok(reslice_isotropic(&v, spacing)?)
}

fn load_roi(path: &Path, spacing: f64) -> Result<Mask3D> {
    let m = load_mask(path, VolumeFormat::from_path(path))?;
    Ok(reslice_mask(&m, spacing)?)
}

fn filter_params(o: &FilterOpts, cfg: &Config, polarity: Polarity) -> FilterParams {
    let d = FilterParams::default();
    FilterParams {
        s_min: pick(o.s_min, &cfg.s_min, d.s_min),
        s_max: pick(o.s_max, &cfg.s_max, d.s_max),
        s_step: pick(o.s_step, &cfg.s_step, d.s_step),
        alpha: pick(o.alpha, &cfg.alpha, d.alpha),
        beta_f: pick(o.beta_f, &cfg.beta_f, d.beta_f),
        c: pick(o.c, &cfg.c, d.c),
        polarity,
        threshold: d.threshold,
    }
}

fn cmd_calibrate(a: CalibrateArgs, cfg: &Config) -> Result<()> {
    let scale = RatingScale::by_name(&pick(a.scale, &cfg.scale, "wardlaw".into()))?;
    let d = SyntheticConfig::default();
    let label_source = match pick(a.label_source, &cfg.label_source, "pc".into()).as_str() {
        "pc" => LabelSource::Pc,
        "npc" => LabelSource::Npc,
        other => bail!("unknown label source `{other}` (pc or npc)"),
    };
    let syn = SyntheticConfig {
        n: pick(a.n, &cfg.n, d.n),
        seed: pick(a.seed, &cfg.seed, d.seed),
        lognormal_mu: pick(a.lognormal_mu, &cfg.lognormal_mu, d.lognormal_mu),
        lognormal_sigma: pick(a.lognormal_sigma, &cfg.lognormal_sigma, d.lognormal_sigma),
        label_source,
    };
    let data = generate_synthetic(&scale, &syn)?;
    if let Some(p) = &a.dataset {
        data.write_csv(p)?;
    }
    let r = fit_dataset(&data, &scale)?;
    r.model.save(&a.out)?;
    println!("scale {} (n = {}, seed = {})", scale.name(), syn.n, syn.seed);
    println!("class sizes {:?}", data.class_counts(scale.classes()));
    println!("beta = {:.6}", r.model.beta());
    let mu: Vec<String> = r.model.mu().iter().map(|m| format!("{m:.6}")).collect();
    println!("mu = [{}]", mu.join(", "));
    let ratios: Vec<String> = r.model.boundary_ratios().iter().map(|m| format!("{m:.3}")).collect();
    println!("mu/beta = [{}]", ratios.join(", "));
    println!("log-likelihood = {:.6} after {} iterations", r.log_likelihood, r.iterations);
    if !r.empty_classes.is_empty() {
        println!("warning: empty classes {:?}; their thresholds are weakly determined", r.empty_classes);
    }
    if r.at_bound {
        println!("warning: a parameter ended on its bound{}", if r.separated { " (separated data)" } else { "" });
    }
    Ok(())
}

#[derive(Default)]
struct PipelineFlags {
    s_step: Option<f64>,
    alpha: Option<f64>,
    beta_f: Option<f64>,
    c: Option<f64>,
    fusion: Option<String>,
    axis: Option<String>,
    min_len: Option<f64>,
    max_len: Option<f64>,
}

fn pipeline(cfg: &Config, f: PipelineFlags) -> Result<PipelineConfig> {
    let d = PipelineConfig::default();
    Ok(PipelineConfig {
        s_step: pick(f.s_step, &cfg.s_step, d.s_step),
        alpha: pick(f.alpha, &cfg.alpha, d.alpha),
        beta_f: pick(f.beta_f, &cfg.beta_f, d.beta_f),
        c: pick(f.c, &cfg.c, d.c),
        fusion: pick(f.fusion, &cfg.fusion, d.fusion.to_string()).parse::<FusionMode>()?,
        min_length_mm: pick(f.min_len, &cfg.min_length_mm, d.min_length_mm),
        max_length_mm: pick(f.max_len, &cfg.max_length_mm, d.max_length_mm),
        axis: pick(f.axis, &cfg.axis, d.axis.to_string()).parse::<Axis>()?,
    })
}

fn cmd_segment(a: SegmentArgs, cfg: &Config) -> Result<()> {
    let spacing = pick(a.filter.spacing, &cfg.spacing, 1.0);
    let d = SegmentParams::default();
    let params = SegmentParams {
        s_min: pick(a.filter.s_min, &cfg.s_min, d.s_min),
        s_max: pick(a.filter.s_max, &cfg.s_max, d.s_max),
        t1: pick(a.t1_threshold, &cfg.t1, d.t1),
        t2: pick(a.t2_threshold, &cfg.t2, d.t2),
    };
    let pc = pipeline(
        cfg,
        PipelineFlags {
            s_step: a.filter.s_step,
            alpha: a.filter.alpha,
            beta_f: a.filter.beta_f,
            c: a.filter.c,
            fusion: a.fusion,
            axis: a.axis,
            min_len: a.min_length_mm,
            max_len: a.max_length_mm,
        },
    )?;
    let t1 = a.t1.as_deref().map(|p| load_resliced(p, spacing)).transpose()?;
    let t2 = a.t2.as_deref().map(|p| load_resliced(p, spacing)).transpose()?;
    let roi = load_roi(&a.roi, spacing)?;
    let case = Case::new(a.out.clone(), t1, t2, roi, 0)?;
    let seg = tubeness::optimizer::segment_case(&case, &params, &pc)?;
    save_mask(&seg.mask, format!("{}_mask.raw", a.out))?;
    let c = seg.counts;
    let mut report = String::new();
    let _ = writeln!(report, "s_min = {}", params.s_min);
    let _ = writeln!(report, "s_max = {}", params.s_max);
    let _ = writeln!(report, "t1 = {}", params.t1);
    let _ = writeln!(report, "t2 = {}", params.t2);
    let _ = writeln!(report, "fusion = {}", pc.fusion);
    let _ = writeln!(report, "slice_count = {}", c.slice_count);
    let _ = writeln!(report, "total_count = {}", c.total_count);
    let _ = writeln!(report, "total_volume_mm3 = {}", c.total_volume_mm3);
    let _ = writeln!(report, "selected_slice = {}", c.selected_slice);
    write(format!("{}_report.txt", a.out), &report)?;
    print!("{report}");
    Ok(())
}

fn range_or(flag: Option<String>, cfg: &Option<String>, default: AxisRange) -> Result<AxisRange> {
    match flag.or_else(|| cfg.clone()) {
        Some(s) => parse_range(&s),
        None => Ok(default),
    }
}

fn optimization_report(r: &OptimizationResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "points evaluated = {}", r.points.len());
    let _ = writeln!(s, "count_kind = {}", r.count_kind);
    let _ = writeln!(s, "best_logl = {}", r.best_logl);
    let _ = writeln!(s, "s_min = {}", r.best.s_min);
    let _ = writeln!(s, "s_max = {}", r.best.s_max);
    let _ = writeln!(s, "t1 = {}", r.best.t1);
    let _ = writeln!(s, "t2 = {}", r.best.t2);
    for (id, rating, c) in &r.case_counts {
        let _ = writeln!(
            s,
            "case {id}: rating {rating}, slice_count {}, total_count {}, volume {} mm3",
            c.slice_count, c.total_count, c.total_volume_mm3
        );
    }
    s
}

fn cmd_optimize(a: OptimizeArgs, cfg: &Config) -> Result<()> {
    let model = OrderedLogit::<f64>::load(&a.model)?;
    let kind = match a.count_kind.or_else(|| cfg.count_kind.clone()) {
        Some(k) => k.parse::<CountKind>()?,
        None => RatingScale::by_name(model.scale_name())
            .map(|s| s.count_kind())
            .with_context(|| "model names no known scale; pass --count-kind")?,
    };
    let d = ParamGrid::default();
    let grid = ParamGrid {
        s_min: range_or(a.s_min_range, &cfg.s_min_range, d.s_min)?,
        s_max: range_or(a.s_max_range, &cfg.s_max_range, d.s_max)?,
        t1: range_or(a.t1_range, &cfg.t1_range, d.t1)?,
        t2: range_or(a.t2_range, &cfg.t2_range, d.t2)?,
    };
    let pc = pipeline(
        cfg,
        PipelineFlags {
            s_step: a.s_step,
            alpha: a.alpha,
            beta_f: a.beta_f,
            c: a.c,
            fusion: a.fusion,
            axis: a.axis,
            ..Default::default()
        },
    )?;
    let cases = load_manifest(&a.manifest, pick(a.spacing, &cfg.spacing, 1.0))?;
    let r = grid_search_with(&cases, &model, &grid, kind, &pc, !a.no_cache)?;

    let best = format!(
        "s_min = {}\ns_max = {}\nt1 = {}\nt2 = {}\n",
        r.best.s_min, r.best.s_max, r.best.t1, r.best.t2
    );
    write(format!("{}_best.toml", a.out), &best)?;
    let report = optimization_report(&r);
    write(format!("{}_report.txt", a.out), &report)?;
    let mut pts = String::from("s_min,s_max,t1,t2,logl\n");
    for p in &r.points {
        let _ = writeln!(pts, "{},{},{},{},{}", p.params.s_min, p.params.s_max, p.params.t1, p.params.t2, p.logl);
    }
    write(format!("{}_points.csv", a.out), &pts)?;
    let mut cs = String::from("id,rating,slice_count,total_count,total_volume_mm3,selected_slice\n");
    for (id, rating, c) in &r.case_counts {
        let _ = writeln!(cs, "{id},{rating},{},{},{},{}", c.slice_count, c.total_count, c.total_volume_mm3, c.selected_slice);
    }
    write(format!("{}_cases.csv", a.out), &cs)?;
    export_surface(&r, "s_min", "s_max", format!("{}_surface_s_min_s_max.csv", a.out))?;
    export_surface(&r, "t1", "t2", format!("{}_surface_t1_t2.csv", a.out))?;
    print!("{report}");
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["id", "count", "volume", "rating"] {
        bail!("{}: expected header `id,count,volume,rating`", a.input.display());
    }
    let (mut count, mut volume, mut rating) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", a.input.display(), line + 2))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .with_context(|| format!("{}: row {}: bad number `{}`", a.input.display(), line + 2, &rec[i]))
        };
        count.push(num(1)?);
        volume.push(num(2)?);
        rating.push(num(3)?);
    }
    for (name, x) in [("count", &count), ("volume", &volume)] {
        let c = spearman(x, &rating).with_context(|| format!("{name} vs rating"))?;
        let mut line = format!("{name} vs rating: rho = {:.6}, p = {:.6e}, n = {}", c.rho, c.p_value, c.n);
        if c.n <= 10 {
            let _ = write!(line, ", exact p = {:.6}", spearman_permutation_p(x, &rating)?);
        }
        println!("{line}");
    }
    Ok(())
}

fn cmd_phantom(a: PhantomArgs, cfg: &Config) -> Result<()> {
    let polarity: Polarity = pick(a.polarity, &cfg.polarity, "bright".into()).parse()?;
    let spec = PhantomSpec {
        dims: parse_dims(&a.dims)?,
        spacing: a.voxel_mm,
        layout: TubeLayout::Random {
            n: a.tubes,
            radius_mm: (a.radius_min, a.radius_max),
            length_mm: (a.length_min, a.length_max),
        },
        background: a.background,
        contrast: a.contrast,
        polarity,
        noise_sigma: a.noise,
        min_separation_mm: a.min_separation,
        seed: pick(a.seed, &cfg.seed, 1),
    };
    let p = generate_phantom(&spec)?;
    save_volume(&p.volume, format!("{}_volume.raw", a.out))?;
    save_mask(&p.roi, format!("{}_roi.raw", a.out))?;
    save_mask(&p.truth.to_mask(), format!("{}_truth.raw", a.out))?;
    write_truth_csv(&p.tubes, format!("{}_truth.csv", a.out))?;
    let n = p.true_count as u64;
    println!("tubes = {}", p.true_count);
    println!("wardlaw class = {}", rate_phantom(n, &RatingScale::wardlaw()));
    println!("patankar class = {}", rate_phantom(n, &RatingScale::patankar()));
    Ok(())
}

fn cmd_filter(a: FilterArgs, cfg: &Config) -> Result<()> {
    let polarity: Polarity = pick(a.polarity, &cfg.polarity, "bright".into()).parse()?;
    let fp = filter_params(&a.filter, cfg, polarity);
    let v = load_resliced(&a.input, pick(a.filter.spacing, &cfg.spacing, 1.0))?;
    let r = vesselness_multiscale(&v, &fp)?;
    save_volume(&r, &a.out)?;
    println!("max response = {}", r.max_abs());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let threads = pick(cli.threads, &cfg.threads, 0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| match cli.command {
        Cmd::Calibrate(a) => cmd_calibrate(a, &cfg),
        Cmd::Segment(a) => cmd_segment(a, &cfg),
        Cmd::Optimize(a) => cmd_optimize(a, &cfg),
        Cmd::Evaluate(a) => cmd_evaluate(a),
        Cmd::Phantom(a) => cmd_phantom(a, &cfg),
        Cmd::Filter(a) => cmd_filter(a, &cfg),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn ranges_and_dims() {
        assert_eq!(parse_range("0.2:2.0:0.2").unwrap().values().len(), 10);
        assert_eq!(parse_range("0.35").unwrap().values(), vec![0.35]);
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("2:1:0.1").is_err());
        assert_eq!(parse_dims("4, 5,6").unwrap(), [4, 5, 6]);
        assert!(parse_dims("4,5").is_err());
    }

    fn cli(args: &[&str]) -> Result<()> {
        run(Cli::try_parse_from(std::iter::once("tubeness").chain(args.iter().copied()))?)
    }

    #[test]
    fn segment_needs_a_modality() {
        let e = Cli::try_parse_from(["tubeness", "segment", "--roi", "r.raw", "--out", "x"]);
        assert!(e.is_err());
    }

    #[test]
    fn session_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let at = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
        cli(&["calibrate", "--scale", "patankar", "--n", "300", "--seed", "4", "--out", &at("m.txt")]).unwrap();
        let m = OrderedLogit::<f64>::load(at("m.txt")).unwrap();
        assert_eq!(m.scale_name(), "patankar");
        cli(&[
            "phantom", "--dims", "40,40,40", "--tubes", "3", "--length-min", "8", "--length-max", "12",
            "--seed", "2", "--out", &at("ph"),
        ])
        .unwrap();
        cli(&[
            "segment", "--t2", &at("ph_volume.raw"), "--roi", &at("ph_roi.raw"), "--s-min", "0.6", "--s-max",
            "2.0", "--t2-threshold", "0.2", "--out", &at("seg"),
        ])
        .unwrap();
        let report = fs::read_to_string(at("seg_report.txt")).unwrap();
        assert!(report.contains("total_count = 3"), "{report}");

        fs::write(at("cohort.csv"), "id,count,volume,rating\na,1,10,0\nb,4,30,1\nc,9,70,2\nd,13,80,3\n").unwrap();
        cli(&["evaluate", "--input", &at("cohort.csv")]).unwrap();
    }

    #[test]
    fn errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "id,count,volume,rating\na,x,1,0\n").unwrap();
        let e = cli(&["evaluate", "--input", bad.to_str().unwrap()]).unwrap_err();
        assert!(format!("{e:#}").contains("bad.csv"), "{e:#}");

        let cfg = dir.path().join("c.toml");
        fs::write(&cfg, "s_min = 1.0\nbogus = 2\n").unwrap();
        let e = cli(&["--config", cfg.to_str().unwrap(), "evaluate", "--input", "none.csv"]).unwrap_err();
        assert!(format!("{e:#}").contains("c.toml"), "{e:#}");

        let e = cli(&["segment", "--t2", "missing.raw", "--roi", "r.raw", "--out", "x"]).unwrap_err();
        assert!(format!("{e:#}").contains("missing.raw"), "{e:#}");
    }
}
