use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use catembed::boost::{grouped_importance, total_gain_importance};
use catembed::embed::EmbeddingTable;
use catembed::eval::{learning_curve_with, CvReport};
use catembed::explain::{export_report, grouped_shap, rank_report, tree_shap};
use catembed::iso::{parse_iso, IsoCodeTable};
use catembed::pipeline::{FittedPipeline, Reduction};
use catembed::reduce::{pca_fit, reconstruction_curve, umap_fit_transform, UmapParams};
use catembed::similarity::{load_label_map, similarity_matrix};
use catembed::synth::{self, SynthParams};
use catembed::tabular::{Dataset, FeatureSchema};
use indexmap::IndexMap;

use crate::config::{EncoderConfig, EvalSettings, LoadedConfig, RunConfig, VariantConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;

/// Files written under one output root, for the manifest.
struct Outputs {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Register `rel` and make sure its directory exists.
    fn file(&mut self, rel: &str) -> CliResult<PathBuf> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        self.files.push(p.clone());
        Ok(p)
    }

    fn json<T: serde::Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let p = self.file(rel)?;
        let text = serde_json::to_string_pretty(value)? + "\n";
        std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }

    fn finish(self, mut manifest: Manifest) -> CliResult<()> {
        manifest.outputs_from(&self.root, &self.files)?;
        manifest.write(&self.root)?;
        Ok(())
    }
}

fn config_manifest(
    command: &str,
    cfg: &LoadedConfig,
    variants: &[&VariantConfig],
) -> CliResult<Manifest> {
    let mut m = Manifest::new(command, cfg.config.seed);
    m.config = Some(serde_json::to_value(&cfg.config)?);
    for (label, given, path) in cfg.input_files(variants) {
        m.input(&label, &given, &path)?;
    }
    Ok(m)
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::Core(e.into()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Core(e.into())
}

fn flush(mut w: csv::Writer<std::fs::File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

// ---- synth ----

pub fn synth(out: &Path, seed: Option<u64>, params_path: Option<&Path>) -> CliResult<()> {
    let mut params = match params_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str::<SynthParams>(&text)?
        }
        None => SynthParams::default(),
    };
    if let Some(s) = seed {
        params.seed = s;
    }
    let generated = synth::generate(&params)?;
    let mut o = Outputs::new(out)?;
    let mut manifest = Manifest::new("synth", params.seed);
    if let Some(p) = params_path {
        manifest.input("params", &p.to_string_lossy(), p)?;
    }

    generated.dataset.write_csv(o.file("dataset.csv")?)?;
    synth::default_schema().save(o.file("schema.json")?)?;
    o.json("catalog.json", &params.insert_catalog)?;
    o.json("recipes.json", &params.recipes)?;
    o.json("params.json", &params)?;
    IsoCodeTable::builtin().save(o.file("iso_code_table.json")?)?;
    o.json("ground_truth.json", &generated.ground_truth)?;

    let descriptions: Vec<&str> = params
        .insert_catalog
        .iter()
        .map(|c| c.description.as_str())
        .collect();
    for (name, dim) in [("minilm_standin", 384), ("mpnet_standin", 768)] {
        let t = synth::standin_table(
            descriptions.iter().copied(),
            dim,
            catembed::seed::derive(params.seed, &[0x7ab1e, dim as u64]),
            &format!("synthetic-standin-{dim}"),
        )?;
        t.save(o.file(&format!("tables/{name}.csv"))?)?;
    }
    o.json("config.json", &default_run_config(params.seed))?;
    o.finish(manifest)
}

const SHAPES: [&str; 3] = ["insert_shape", "insert_shape_above", "insert_shape_below"];

/// The five-way comparison over the synthetic bundle: binary baseline,
/// Doc2Vec on shapes, Doc2Vec on shapes and recipe, and the two stand-in
/// tables reduced by PCA and UMAP.
pub fn default_run_config(seed: u64) -> RunConfig {
    let doc2vec = |space: &str| EncoderConfig::Doc2vec {
        params: Default::default(),
        space: space.into(),
    };
    let shapes_with = |enc: EncoderConfig| -> BTreeMap<String, EncoderConfig> {
        SHAPES
            .iter()
            .map(|s| (s.to_string(), enc.clone()))
            .collect()
    };
    let variant = |name: &str, encoders, reduction| VariantConfig {
        name: name.into(),
        encoders,
        reduction,
        embedding_scope: Default::default(),
    };
    let mut sh_r = shapes_with(doc2vec("shape"));
    sh_r.insert("recipe".into(), doc2vec("recipe"));
    RunConfig {
        dataset: "dataset.csv".into(),
        schema: "schema.json".into(),
        seed,
        output_dir: None,
        gbt: Default::default(),
        impute: Default::default(),
        eval: EvalSettings::default(),
        explain: Default::default(),
        variants: vec![
            variant("original", BTreeMap::new(), Reduction::None),
            variant("doc2vec_sh", shapes_with(doc2vec("shape")), Reduction::None),
            variant("doc2vec_sh_r", sh_r, Reduction::None),
            variant(
                "minilm_sh",
                shapes_with(EncoderConfig::Table {
                    path: "tables/minilm_standin.csv".into(),
                }),
                Reduction::Pca { k: 3 },
            ),
            variant(
                "mpnet_sh",
                shapes_with(EncoderConfig::Table {
                    path: "tables/mpnet_standin.csv".into(),
                }),
                Reduction::Umap(UmapParams::default()),
            ),
        ],
    }
}

// ---- parse-iso ----

pub fn parse_iso_cmd(
    codes: &[String],
    input: Option<&Path>,
    table: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    let mut manifest = Manifest::new("parse-iso", 0);
    let table = match table {
        Some(p) => {
            manifest.input("code_table", &p.to_string_lossy(), p)?;
            IsoCodeTable::load(p)?
        }
        None => IsoCodeTable::builtin(),
    };
    let mut all: Vec<String> = codes.to_vec();
    if let Some(p) = input {
        manifest.input("codes", &p.to_string_lossy(), p)?;
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        all.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from),
        );
    }
    if all.is_empty() {
        return Err(CliError::Config("no insert codes given".into()));
    }
    let mut o = Outputs::new(out)?;
    let path = o.file("iso_features.csv")?;
    let mut w = csv_writer(&path)?;
    w.write_record([
        "code",
        "shape_description",
        "included_angle",
        "clearance_angle",
        "cutting_length_tolerance",
        "thickness_tolerance",
        "characteristic",
        "cutting_length",
        "thickness",
        "unknown_fields",
    ])
    .map_err(csv_err)?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for code in &all {
        let f = parse_iso(code, &table)?;
        w.write_record([
            f.code.clone(),
            f.shape_description.clone().unwrap_or_default(),
            num(f.included_angle),
            num(f.clearance_angle),
            num(f.cutting_length_tolerance),
            num(f.thickness_tolerance),
            f.characteristic.clone().unwrap_or_default(),
            num(f.cutting_length),
            num(f.thickness),
            f.unknown_fields().join(";"),
        ])
        .map_err(csv_err)?;
    }
    flush(w, &path)?;
    o.finish(manifest)
}

// ---- embed ----

pub fn embed(cfg: &LoadedConfig, variant: Option<&str>, out: &Path) -> CliResult<()> {
    let variants = cfg.variants(variant)?;
    let (schema, ds) = cfg.load_data()?;
    let mut o = Outputs::new(out)?;
    for v in &variants {
        let spec = cfg.pipeline_spec(&schema, v)?;
        for (feature, table) in FittedPipeline::embedding_tables(&spec, &ds, &ds)? {
            table.save(o.file(&format!("{}/{}.csv", v.name, feature))?)?;
        }
    }
    o.finish(config_manifest("embed", cfg, &variants)?)
}

// ---- similarity ----

pub fn similarity(table: &Path, labels: Option<&Path>, out: &Path) -> CliResult<()> {
    let mut manifest = Manifest::new("similarity", 0);
    manifest.input("table", &table.to_string_lossy(), table)?;
    let t = EmbeddingTable::load(table)?;
    let mut m = similarity_matrix(&t)?;
    if let Some(l) = labels {
        manifest.input("labels", &l.to_string_lossy(), l)?;
        m = m.relabel(&load_label_map(l)?);
    }
    let mut o = Outputs::new(out)?;
    m.export(o.file("similarity.csv")?)?;
    o.finish(manifest)
}

// ---- reduce ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReduceMethod {
    Pca,
    Umap,
}

pub fn reduce(
    table: &Path,
    method: ReduceMethod,
    k: usize,
    seed: Option<u64>,
    out: &Path,
) -> CliResult<()> {
    let seed = seed.unwrap_or(UmapParams::default().seed);
    let mut manifest = Manifest::new("reduce", seed);
    manifest.input("table", &table.to_string_lossy(), table)?;
    let t = EmbeddingTable::load(table)?;
    let x = t.matrix();
    let mut o = Outputs::new(out)?;
    match method {
        ReduceMethod::Pca => {
            let m = pca_fit(&x, k)?;
            t.with_matrix(format!("{}+pca{k}", t.source()), &m.transform(&x)?)?
                .save(o.file("reduced.csv")?)?;
            let path = o.file("explained_variance.csv")?;
            let mut w = csv_writer(&path)?;
            w.write_record(["component", "variance", "ratio"])
                .map_err(csv_err)?;
            for (i, (v, r)) in m
                .explained_variance
                .iter()
                .zip(m.explained_variance_ratio())
                .enumerate()
            {
                w.write_record([(i + 1).to_string(), v.to_string(), r.to_string()])
                    .map_err(csv_err)?;
            }
            flush(w, &path)?;
            let max_k = (x.nrows() - 1).min(x.ncols());
            let path = o.file("reconstruction_error.csv")?;
            let mut w = csv_writer(&path)?;
            w.write_record(["k", "error"]).map_err(csv_err)?;
            for (kk, e) in reconstruction_curve(&x, max_k)? {
                w.write_record([kk.to_string(), e.to_string()])
                    .map_err(csv_err)?;
            }
            flush(w, &path)?;
        }
        ReduceMethod::Umap => {
            let params = UmapParams {
                target_dim: k,
                seed,
                ..Default::default()
            };
            let z = umap_fit_transform(&x, &params)?;
            t.with_matrix(format!("{}+umap{k}", t.source()), &z)?
                .save(o.file("reduced.csv")?)?;
        }
    }
    o.finish(manifest)
}

// ---- train / evaluate / explain / pipeline ----

struct Trained {
    fitted: FittedPipeline,
    design: catembed::tabular::DesignMatrix,
}

fn train_full(
    cfg: &LoadedConfig,
    schema: &FeatureSchema,
    ds: &Dataset,
    v: &VariantConfig,
) -> CliResult<Trained> {
    let spec = cfg.pipeline_spec(schema, v)?;
    let fitted = FittedPipeline::fit(&spec, ds, ds)?;
    let design = fitted.design(ds)?;
    Ok(Trained { fitted, design })
}

fn write_gain(o: &mut Outputs, rel: &str, t: &Trained) -> CliResult<()> {
    let gain: Vec<f64> = total_gain_importance(&t.fitted.model)
        .values()
        .copied()
        .collect();
    let grouped = grouped_importance(&gain, &t.design.group_of)?;
    let rows = rank_report(&grouped, &t.design.group_tags, grouped.len().max(1))?;
    export_report(&rows, o.file(rel)?)?;
    Ok(())
}

fn write_importance(o: &mut Outputs, rel: &str, cfg: &LoadedConfig, t: &Trained) -> CliResult<()> {
    let shap = tree_shap(&t.fitted.model, &t.design.values)?;
    let grouped = grouped_shap(&shap, &t.design.group_of, cfg.config.explain.aggregation)?;
    let rows = rank_report(&grouped, &t.design.group_tags, cfg.config.explain.top_k)?;
    export_report(&rows, o.file(rel)?)?;
    Ok(())
}

fn write_model(o: &mut Outputs, rel: &str, t: &Trained) -> CliResult<()> {
    let p = o.file(rel)?;
    std::fs::write(&p, t.fitted.fingerprint()?).map_err(|e| CliError::io(&p, e))
}

fn evaluate_variant(
    cfg: &LoadedConfig,
    schema: &FeatureSchema,
    ds: &Dataset,
    v: &VariantConfig,
) -> CliResult<CvReport> {
    let spec = cfg.pipeline_spec(schema, v)?;
    let e = &cfg.config.eval;
    Ok(learning_curve_with(
        &spec,
        ds,
        e.k,
        &e.fractions,
        cfg.eval_seed(v),
        e.band,
    )?)
}

fn write_report(o: &mut Outputs, dir: &str, report: &CvReport) -> CliResult<()> {
    report.export(
        o.file(&format!("{dir}/folds.csv"))?,
        o.file(&format!("{dir}/aggregate.csv"))?,
    )?;
    Ok(())
}

pub fn train(cfg: &LoadedConfig, variant: Option<&str>, out: &Path) -> CliResult<()> {
    let variants = cfg.variants(variant)?;
    let (schema, ds) = cfg.load_data()?;
    let mut o = Outputs::new(out)?;
    for v in &variants {
        let t = train_full(cfg, &schema, &ds, v)?;
        write_model(&mut o, &format!("{}/model.json", v.name), &t)?;
        write_gain(&mut o, &format!("{}/gain.csv", v.name), &t)?;
    }
    o.finish(config_manifest("train", cfg, &variants)?)
}

pub fn evaluate(cfg: &LoadedConfig, variant: Option<&str>, out: &Path) -> CliResult<()> {
    let variants = cfg.variants(variant)?;
    let (schema, ds) = cfg.load_data()?;
    let mut o = Outputs::new(out)?;
    for v in &variants {
        let report = evaluate_variant(cfg, &schema, &ds, v)?;
        write_report(&mut o, &v.name, &report)?;
    }
    o.finish(config_manifest("evaluate", cfg, &variants)?)
}

pub fn explain(cfg: &LoadedConfig, variant: Option<&str>, out: &Path) -> CliResult<()> {
    let variants = cfg.variants(variant)?;
    let (schema, ds) = cfg.load_data()?;
    let mut o = Outputs::new(out)?;
    for v in &variants {
        let t = train_full(cfg, &schema, &ds, v)?;
        write_importance(&mut o, &format!("{}/importance.csv", v.name), cfg, &t)?;
    }
    o.finish(config_manifest("explain", cfg, &variants)?)
}

/// Evaluate, train and explain every selected variant, plus a side-by-side
/// `comparison.csv` of the MSE learning curves.
pub fn pipeline(cfg: &LoadedConfig, variant: Option<&str>, out: &Path) -> CliResult<()> {
    let variants = cfg.variants(variant)?;
    let (schema, ds) = cfg.load_data()?;
    let mut o = Outputs::new(out)?;
    let mut curves: IndexMap<String, CvReport> = IndexMap::new();
    for v in &variants {
        log::info!("variant {}", v.name);
        let report = evaluate_variant(cfg, &schema, &ds, v)?;
        write_report(&mut o, &v.name, &report)?;
        let t = train_full(cfg, &schema, &ds, v)?;
        write_model(&mut o, &format!("{}/model.json", v.name), &t)?;
        write_gain(&mut o, &format!("{}/gain.csv", v.name), &t)?;
        write_importance(&mut o, &format!("{}/importance.csv", v.name), cfg, &t)?;
        curves.insert(v.name.clone(), report);
    }
    let path = o.file("comparison.csv")?;
    let mut w = csv_writer(&path)?;
    w.write_record([
        "variant", "fraction", "metric", "mean", "std", "low", "high",
    ])
    .map_err(csv_err)?;
    for (name, report) in &curves {
        for a in &report.aggregates {
            w.write_record([
                name.clone(),
                a.fraction.to_string(),
                a.metric.clone(),
                a.band.mean.to_string(),
                a.band.std.to_string(),
                a.band.low.to_string(),
                a.band.high.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    flush(w, &path)?;
    o.finish(config_manifest("pipeline", cfg, &variants)?)
}
