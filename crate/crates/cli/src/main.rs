//! `pallor`: segmentation, feature extraction, training, prediction, evaluation and synthetic
//! data from the command line.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use pallor_core::archive::{ArchiveMetadata, ModelArchive};
use pallor_core::evaluation::{
    fit_cascade, make_stratified_folds, per_plane_classification_rates, run_hierarchical_cv, CvConfig,
    HierarchyPlan,
};
use pallor_core::features::{FeatureTable, FeatureVector};
use pallor_core::manifest::{parse_manifest, write_manifest, ManifestRow};
use pallor_core::models::{default_grid, ModelFamily, ModelSpec, RankingMethod};
use pallor_core::pipeline::{
    extract_manifest_features, image_vector, prepare_image, prepare_mask, segment_image, FeatureModel, PipelineConfig,
};
use pallor_core::synth::{generate_synthetic, SyntheticSpec};
use pallor_core::{Error, Grade, Site};

// Offsets from the single --seed.
const FOLD_SEED: u64 = 0;
const MODEL_SEED: u64 = 1;
const CV_SEED: u64 = 2;
const PLANE_SEED: u64 = 3;

#[derive(Parser)]
#[command(name = "pallor", version, about = "Anemia pallor screening from eye and tongue images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes the foreground mask and ROI masks of one image as PNGs.
    Segment {
        #[arg(long)]
        site: Site,
        #[arg(long)]
        input: PathBuf,
        /// Foreground mask overriding detection.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extracts a feature CSV for every image of a manifest.
    Features {
        #[arg(long)]
        model: FeatureModel,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fits the two-step cascade on a whole dataset and saves it.
    Train {
        #[command(flatten)]
        data: DataSource,
        #[arg(long)]
        model: Option<FeatureModel>,
        /// Cascade such as "0/1,2"; defaults to the site's plan.
        #[arg(long)]
        hierarchy: Option<HierarchyPlan>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        selection: SelectionArgs,
    },
    /// Classifies images or feature rows with a saved cascade.
    Predict {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long, conflicts_with_all = ["features", "manifest"])]
        input: Option<PathBuf>,
        #[arg(long, requires = "input")]
        mask: Option<PathBuf>,
        #[arg(long, conflicts_with = "manifest")]
        features: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Double cross-validation of the cascade; writes a text report plus JSON and CSV siblings.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: FeatureModel,
        /// Outer folds; defaults to 5 for eye, 3 for tongue.
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        hierarchy: Option<HierarchyPlan>,
        /// Skips the per-plane rates computed for m2.
        #[arg(long)]
        no_plane_rates: bool,
        #[command(flatten)]
        selection: SelectionArgs,
    },
    /// Generates synthetic images with a manifest.
    Synth {
        #[arg(long)]
        site: Site,
        /// Grade list such as "0,2", or "all".
        #[arg(long, value_parser = parse_grades)]
        grade: GradeList,
        /// Images per grade.
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        contrast: f64,
        /// Also writes ground-truth foreground masks and lists them in the manifest.
        #[arg(long)]
        masks: bool,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct DataSource {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args)]
struct SelectionArgs {
    #[arg(long, default_value = "f_score")]
    ranking: RankingMethod,
    /// Comma-separated families to search; defaults to all.
    #[arg(long, value_delimiter = ',')]
    families: Vec<ModelFamily>,
    /// Replaces a family's grid, e.g. "decision_forest:trees=16/32,depth=4".
    #[arg(long, value_parser = parse_grid)]
    grid: Vec<GridOverride>,
}

#[derive(Clone)]
struct GradeList(Vec<Grade>);

fn parse_grades(s: &str) -> std::result::Result<GradeList, String> {
    if s.trim() == "all" {
        return Ok(GradeList(Grade::ALL.to_vec()));
    }
    let mut grades = s
        .split(',')
        .map(|g| g.parse::<Grade>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    grades.sort();
    grades.dedup();
    Ok(GradeList(grades))
}

#[derive(Clone)]
struct GridOverride {
    family: ModelFamily,
    params: Vec<(String, Vec<f64>)>,
}

fn parse_grid(s: &str) -> std::result::Result<GridOverride, String> {
    let (family, rest) = s.split_once(':').ok_or("expected FAMILY:NAME=V1/V2,...")?;
    let family: ModelFamily = family.trim().parse().map_err(|e: Error| e.to_string())?;
    let mut params = Vec::new();
    for part in rest.split(',') {
        let (name, values) = part.split_once('=').ok_or_else(|| format!("expected NAME=VALUES in {part:?}"))?;
        let name = name.trim();
        if !family.hyperparameters().iter().any(|(n, _)| *n == name) {
            return Err(format!("{family} has no hyperparameter {name:?}"));
        }
        let values = values
            .split('/')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        params.push((name.to_string(), values));
    }
    Ok(GridOverride { family, params })
}

impl SelectionArgs {
    /// Candidate specs: default grids of the chosen families, with overrides applied. Names an
    /// override leaves out keep their default values.
    fn candidates(&self, seed: u64) -> Result<Vec<ModelSpec>> {
        let families: Vec<ModelFamily> = if self.families.is_empty() {
            ModelFamily::ALL.to_vec()
        } else {
            ModelFamily::ALL.into_iter().filter(|f| self.families.contains(f)).collect()
        };
        let mut out = Vec::new();
        for family in families {
            let defaults = default_grid(family, seed);
            let Some(o) = self.grid.iter().rev().find(|o| o.family == family) else {
                out.extend(defaults);
                continue;
            };
            let mut axes: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for &(name, _) in family.hyperparameters() {
                let mut vals: Vec<f64> = defaults.iter().map(|s| s.param(name)).collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                axes.insert(name, vals);
            }
            for (name, vals) in &o.params {
                axes.insert(name.as_str(), vals.clone());
            }
            let mut points: Vec<Vec<(&str, f64)>> = vec![Vec::new()];
            for (name, vals) in &axes {
                points = points
                    .into_iter()
                    .flat_map(|p| {
                        vals.iter().map(move |&v| {
                            let mut q = p.clone();
                            q.push((*name, v));
                            q
                        })
                    })
                    .collect();
            }
            for p in points {
                out.push(ModelSpec::new(family, &p, seed)?);
            }
        }
        if out.is_empty() {
            bail!("no candidate models to search");
        }
        Ok(out)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", message(&e));
            ExitCode::from(1)
        }
    }
}

/// The error chain, leaving out causes already quoted by the error above them.
fn message(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    let mut last = out.clone();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !last.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
        last = text;
    }
    out
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Segment { site, input, mask, out } => segment(site, &input, mask.as_deref(), &out),
        Command::Features { model, manifest, out } => features(model, &manifest, &out),
        Command::Train {
            data,
            model,
            hierarchy,
            seed,
            out,
            selection,
        } => train(&data, model, hierarchy, seed, &out, &selection),
        Command::Predict {
            archive,
            input,
            mask,
            features,
            manifest,
        } => predict(&archive, input.as_deref(), mask.as_deref(), features.as_deref(), manifest.as_deref()),
        Command::Evaluate {
            manifest,
            model,
            folds,
            seed,
            report,
            hierarchy,
            no_plane_rates,
            selection,
        } => evaluate(&manifest, model, folds, seed, &report, hierarchy, !no_plane_rates, &selection),
        Command::Synth {
            site,
            grade,
            count,
            seed,
            out,
            contrast,
            masks,
        } => synth(site, &grade.0, count, seed, &out, contrast, masks),
    }
}

fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn segment(site: Site, input: &Path, mask: Option<&Path>, out: &Path) -> Result<()> {
    let id = image_id(input);
    let config = PipelineConfig::default();
    let img = prepare_image(input).map_err(|e| e.at_stage(&id, "load"))?;
    let mask = mask
        .map(|p| prepare_mask(p).map_err(|e| e.at_stage(&id, "mask load")))
        .transpose()?;
    let (g, rois) = segment_image(&img, site, mask.as_ref(), &config, &id)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    g.save_png(&out.join("g.png"))?;
    for (name, m) in rois.named_masks() {
        m.save_png(&out.join(format!("{name}.png")))?;
        info!("{name}: {} px", m.pixel_count());
    }
    Ok(())
}

fn write_table(table: &FeatureTable, out: &Path) -> Result<()> {
    let f = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    table.write_csv(BufWriter::new(f))?;
    Ok(())
}

fn read_table(path: &Path) -> Result<FeatureTable> {
    let f = File::open(path).map_err(|_| Error::MissingFile(path.to_path_buf()))?;
    Ok(FeatureTable::read_csv(f)?)
}

fn features(model: FeatureModel, manifest: &Path, out: &Path) -> Result<()> {
    let manifest = parse_manifest(manifest)?;
    let batch = extract_manifest_features(&manifest, model, &PipelineConfig::default())?;
    write_table(&batch.table, out)?;
    info!("{} rows written, {} excluded", batch.table.rows.len(), batch.excluded.len());
    Ok(())
}

/// Site of a feature table, which must be uniform.
fn table_site(table: &FeatureTable) -> Result<Site> {
    let site = table.rows.first().map(|r| r.site).context("feature table has no rows")?;
    if table.rows.iter().any(|r| r.site != site) {
        bail!("feature table mixes sites");
    }
    Ok(site)
}

/// Feature model whose schema the table carries.
fn table_model(table: &FeatureTable, site: Site) -> Result<FeatureModel> {
    [FeatureModel::M1, FeatureModel::M2]
        .into_iter()
        .find(|m| m.schema(site) == table.schema)
        .ok_or_else(|| Error::SchemaMismatch("feature CSV matches neither the m1 nor the m2 schema".into()).into())
}

fn histogram(rows: &[FeatureVector]) -> [usize; 3] {
    let mut h = [0; 3];
    for r in rows {
        if let Some(g) = r.grade {
            h[g.index()] += 1;
        }
    }
    h
}

fn train(
    data: &DataSource,
    model: Option<FeatureModel>,
    hierarchy: Option<HierarchyPlan>,
    seed: u64,
    out: &Path,
    selection: &SelectionArgs,
) -> Result<()> {
    let config = PipelineConfig::default();
    let (table, site, model) = match (&data.manifest, &data.features) {
        (Some(m), _) => {
            let manifest = parse_manifest(m)?;
            let model = model.context("--model is required with --manifest")?;
            let batch = extract_manifest_features(&manifest, model, &config)?;
            (batch.table, manifest.site, model)
        }
        (None, Some(f)) => {
            let table = read_table(f)?;
            let site = table_site(&table)?;
            let found = table_model(&table, site)?;
            if model.is_some_and(|m| m != found) {
                return Err(Error::SchemaMismatch(format!("{} holds {found} features", f.display())).into());
            }
            (table, site, found)
        }
        (None, None) => unreachable!("clap requires a data source"),
    };
    if let Some(r) = table.rows.iter().find(|r| r.grade.is_none()) {
        bail!("{} has no grade", r.image_id);
    }
    let plan = hierarchy.unwrap_or_else(|| HierarchyPlan::for_site(site));
    let cv = CvConfig {
        ranking: selection.ranking,
        candidates: selection.candidates(seed.wrapping_add(MODEL_SEED))?,
        seed: seed.wrapping_add(CV_SEED),
    };
    let rows: Vec<usize> = (0..table.rows.len()).collect();
    let inner_k = site.default_folds().saturating_sub(1).max(2);
    let cascade = fit_cascade(&table.schema, &table.rows, &rows, &plan, &cv, inner_k)?;
    for (name, step) in plan.step_names().iter().zip(cascade.steps()) {
        info!("{name}: {} on top {} features", step.model.spec, step.prefix);
    }
    let metadata = ArchiveMetadata {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        ranking: selection.ranking,
        training_samples: table.rows.len(),
        grade_histogram: histogram(&table.rows),
    };
    let archive = ModelArchive::new(site, model, plan, table.schema, config, cascade, metadata);
    archive.save(out)?;
    Ok(())
}

fn predict(
    archive: &Path,
    input: Option<&Path>,
    mask: Option<&Path>,
    features: Option<&Path>,
    manifest: Option<&Path>,
) -> Result<()> {
    let archive = ModelArchive::load(archive)?;
    let table = match (input, features, manifest) {
        (Some(p), _, _) => {
            let id = image_id(p);
            let img = prepare_image(p).map_err(|e| e.at_stage(&id, "load"))?;
            let mask = mask
                .map(|m| prepare_mask(m).map_err(|e| e.at_stage(&id, "mask load")))
                .transpose()?;
            let v = image_vector(&img, archive.site, mask.as_ref(), archive.feature_model, &archive.pipeline, &id)?;
            FeatureTable::new(archive.feature_model.schema(archive.site), vec![v])?
        }
        (None, Some(f), _) => read_table(f)?,
        (None, None, Some(m)) => {
            let manifest = parse_manifest(m)?;
            extract_manifest_features(&manifest, archive.feature_model, &archive.pipeline)?.table
        }
        (None, None, None) => bail!("one of --input, --features or --manifest is required"),
    };
    archive.check_schema(&table.schema)?;
    let [n1, n2] = archive.plan.step_names();
    for row in &table.rows {
        let p = archive.predict_values(&row.values)?;
        let grades: Vec<String> = p.grades.iter().map(|g| g.to_string()).collect();
        let mut line = format!("{}\tgrade {}\t{n1} {:.4}", row.image_id, grades.join(","), p.step1.score);
        match p.step2 {
            Some(s) => line.push_str(&format!("\t{n2} {:.4}", s.score)),
            None => line.push_str(&format!("\t{n2} -")),
        }
        println!("{line}");
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    manifest: &Path,
    model: FeatureModel,
    folds: Option<usize>,
    seed: u64,
    report: &Path,
    hierarchy: Option<HierarchyPlan>,
    plane_rates: bool,
    selection: &SelectionArgs,
) -> Result<()> {
    let manifest = parse_manifest(manifest)?;
    let site = manifest.site;
    let batch = extract_manifest_features(&manifest, model, &PipelineConfig::default())?;
    let table = batch.table;
    let grades: Vec<Grade> = table.rows.iter().filter_map(|r| r.grade).collect();
    let k = folds.unwrap_or_else(|| site.default_folds());
    let fold_plan = make_stratified_folds(&grades, k, seed.wrapping_add(FOLD_SEED))?;
    let plan = hierarchy.unwrap_or_else(|| HierarchyPlan::for_site(site));
    let cv = CvConfig {
        ranking: selection.ranking,
        candidates: selection.candidates(seed.wrapping_add(MODEL_SEED))?,
        seed: seed.wrapping_add(CV_SEED),
    };
    let mut result = run_hierarchical_cv(&table.schema, &table.rows, &plan, &fold_plan, &cv)?;
    result.label = format!("{site} {model}, {} images", table.rows.len());
    for x in &batch.excluded {
        result.warnings.push(format!("excluded {}", x.reason));
    }
    if model == FeatureModel::M2 && plane_rates {
        let plane_cv = CvConfig {
            seed: seed.wrapping_add(PLANE_SEED),
            ..cv.clone()
        };
        result.plane_rates = Some(per_plane_classification_rates(
            &table.schema,
            &table.rows,
            &plan.step1.0,
            &fold_plan,
            &plane_cv,
        )?);
    }
    for w in &result.warnings {
        warn!("{w}");
    }
    if let Some(dir) = report.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(report, result.to_text()).with_context(|| format!("writing {}", report.display()))?;
    fs::write(sibling(report, ".json"), result.to_json()?)?;
    let f = File::create(sibling(report, ".predictions.csv"))?;
    result.write_predictions_csv(BufWriter::new(f))?;
    print!("{}", result.to_text());
    Ok(())
}

fn synth(site: Site, grades: &[Grade], count: usize, seed: u64, out: &Path, contrast: f64, masks: bool) -> Result<()> {
    if count == 0 {
        bail!("--count must be positive");
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut rows = Vec::new();
    for &grade in grades {
        for i in 0..count {
            let spec = SyntheticSpec::sample(site, grade, seed.wrapping_add(i as u64), contrast)?;
            let (img, truth) = generate_synthetic(&spec)?;
            let stem = format!("{site}_g{grade}_{i:04}");
            let image_path = out.join(format!("{stem}.png"));
            img.save_png(&image_path)?;
            let mask_path = if masks {
                let p = out.join(format!("{stem}_mask.png"));
                truth.foreground.save_png(&p)?;
                Some(p)
            } else {
                None
            };
            rows.push(ManifestRow {
                image_path,
                site,
                grade,
                mask_path,
            });
        }
    }
    write_manifest(&out.join("manifest.csv"), &rows)?;
    info!("{} images written to {}", rows.len(), out.display());
    Ok(())
}
