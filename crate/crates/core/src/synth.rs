//! Synthetic reactor-run datasets with planted, description-driven effects.
//!
//! Each row is one disk of one run. A disk carries one catalog shape in a
//! randomly drawn size and grade, decoded through the code table, so the
//! geometry columns vary independently of the shape. Neighbouring disks
//! supply the `_above` / `_below` variants, missing at the stack ends.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embed::{preprocess, EmbeddingTable};
use crate::error::{Error, Result};
use crate::iso::{parse_iso, InsertFeatures, IsoCodeTable};
use crate::seed;
use crate::tabular::{tags, Column, Dataset, FeatureKind, FeatureSchema, FeatureSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub code: String,
    pub description: String,
    /// Coated surface of one insert at 12 mm cutting length, mm².
    pub surface_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeEntry {
    pub name: String,
    pub description: String,
    /// Surface area the recipe is tuned for, mm².
    pub nominal_area: f64,
    /// Additive effect on the target before weighting.
    pub effect: f64,
}

pub fn default_catalog() -> Vec<CatalogEntry> {
    let e = |code: &str, description: &str, surface_area: f64| CatalogEntry {
        code: code.into(),
        description: description.into(),
        surface_area,
    };
    vec![
        e("VNMG160404", "rhombus 35 degrees", 380.0),
        e("DNMG150608", "rhombus 55 degrees", 400.0),
        e("CNMG120408", "rhombus 80 degrees", 430.0),
        e("ANMG160408", "rhombus 85 degrees", 450.0),
        e("TNMG160408", "triangular", 360.0),
        e("WNMG080408", "rounded triangular", 370.0),
        e("RNMG120400", "circular round", 420.0),
        e("SNMG120408", "square", 460.0),
        e("LNMX150608", "rectangular", 470.0),
        e("PNMG110408", "pentagonal", 440.0),
        e("FZZZZZZZ", "filling material no insert", 250.0),
        e("QNMG120408", "unknown insert shape", 410.0),
    ]
}

pub fn default_recipes() -> Vec<RecipeEntry> {
    let r = |name: &str, description: &str, nominal_area: f64, effect: f64| RecipeEntry {
        name: name.into(),
        description: description.into(),
        nominal_area,
        effect,
    };
    vec![
        r("R1", "thin alumina multilayer", 148_000.0, -1.0),
        r("R2", "thick alumina multilayer", 152_000.0, 1.0),
        r("R3", "titanium carbonitride base layer", 150_000.0, 0.3),
        r("R4", "titanium nitride top layer", 149_000.0, -0.3),
    ]
}

/// Additive shape effect of each description word; a description's effect
/// is the sum over its words, so related descriptions share components.
pub fn token_effects() -> BTreeMap<String, f64> {
    [
        ("rhombus", 1.0),
        ("35", -0.15),
        ("55", -0.05),
        ("80", 0.05),
        ("85", 0.15),
        ("triangular", -0.7),
        ("rounded", 0.3),
        ("circular", -0.5),
        ("round", -0.4),
        ("square", -0.2),
        ("rectangular", 0.5),
        ("pentagonal", -0.1),
        ("filling", -1.2),
        ("material", -0.3),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

pub fn shape_signal(description: &str, effects: &BTreeMap<String, f64>) -> f64 {
    preprocess(description)
        .iter()
        .filter_map(|t| effects.get(t))
        .sum()
}

pub mod groups {
    pub const SHAPE: &str = "insert_shape";
    pub const SHAPE_ABOVE: &str = "insert_shape_above";
    pub const SHAPE_BELOW: &str = "insert_shape_below";
    pub const RECIPE: &str = "recipe";
    /// Shape signal times standardized disk position.
    pub const INTERACTION: &str = "shape_x_position";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub n_runs: usize,
    pub disks_per_run: usize,
    pub insert_catalog: Vec<CatalogEntry>,
    pub recipes: Vec<RecipeEntry>,
    /// Target units (µm).
    pub noise_std: f64,
    /// Weight per group: a numeric column name, a shape column, `recipe`,
    /// or `shape_x_position`. Absent groups have weight 0.
    pub effect_weights: BTreeMap<String, f64>,
    pub base_thickness: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        let w = [
            (groups::SHAPE, 1.0),
            ("disk_position", 0.6),
            ("total_area", 0.4),
            ("n_inserts", 0.3),
            (groups::RECIPE, 0.25),
            (groups::SHAPE_ABOVE, 0.15),
            (groups::SHAPE_BELOW, 0.15),
            (groups::INTERACTION, 0.2),
        ];
        Self {
            n_runs: 30,
            disks_per_run: 8,
            insert_catalog: default_catalog(),
            recipes: default_recipes(),
            noise_std: 0.1,
            effect_weights: w.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            base_thickness: 10.0,
            seed: 7,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 || self.disks_per_run == 0 {
            return Err(Error::InvalidParameter(
                "n_runs and disks_per_run must be >= 1".into(),
            ));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
        }
        if self.insert_catalog.is_empty() || self.recipes.is_empty() {
            return Err(Error::InvalidParameter(
                "catalog and recipes must be non-empty".into(),
            ));
        }
        let mut codes: Vec<&str> = self
            .insert_catalog
            .iter()
            .map(|c| c.code.as_str())
            .collect();
        codes.sort_unstable();
        if codes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(
                "catalog codes must be unique".into(),
            ));
        }
        if self.insert_catalog.iter().any(|c| !(c.surface_area > 0.0)) {
            return Err(Error::InvalidParameter(
                "surface areas must be positive".into(),
            ));
        }
        let known = numeric_columns();
        for g in self.effect_weights.keys() {
            let ok = known.contains(g)
                || [
                    groups::SHAPE,
                    groups::SHAPE_ABOVE,
                    groups::SHAPE_BELOW,
                    groups::RECIPE,
                    groups::INTERACTION,
                ]
                .contains(&g.as_str());
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "unknown effect group `{g}`"
                )));
            }
        }
        Ok(())
    }

    /// Only `group` active, everything else zero.
    pub fn single_effect(mut self, group: &str, weight: f64) -> Self {
        self.effect_weights = [(group.to_string(), weight)].into_iter().collect();
        self
    }
}

const GEOMETRY: [&str; 5] = [
    "clearance_angle",
    "cutting_length",
    "thickness",
    "cutting_length_tolerance",
    "thickness_tolerance",
];
const POSITIONS: [&str; 3] = ["", "_above", "_below"];

fn numeric_columns() -> Vec<String> {
    let mut out: Vec<String> = [
        "n_inserts",
        "insert_area",
        "disk_position",
        "total_area",
        "area_std",
        "nominal_minus_actual",
    ]
    .map(String::from)
    .to_vec();
    for g in GEOMETRY {
        for p in POSITIONS {
            out.push(format!("{g}{p}"));
        }
    }
    out
}

pub const TARGET: &str = "coating_thickness";
pub const RECIPE_DESCRIPTION: &str = "recipe_description";

/// Schema matching the generated columns; categoricals default to binary encoding.
pub fn default_schema() -> FeatureSchema {
    let mut f: Vec<FeatureSpec> = numeric_columns()
        .into_iter()
        .map(|c| {
            let tag = if GEOMETRY.iter().any(|g| c.starts_with(g)) {
                tags::INSERT_GEOMETRY
            } else {
                tags::NUMERIC
            };
            FeatureSpec::new(c, FeatureKind::Numeric).with_tag(tag)
        })
        .collect();
    f.push(
        FeatureSpec::new(groups::RECIPE, FeatureKind::CategoricalBinary)
            .with_description_source(RECIPE_DESCRIPTION)
            .with_tag(tags::RECIPE),
    );
    for p in POSITIONS {
        let name = format!("insert_shape{p}");
        f.push(
            FeatureSpec::new(&name, FeatureKind::CategoricalBinary)
                .with_description_source(&name)
                .with_tag(tags::INSERT_GEOMETRY),
        );
    }
    for p in POSITIONS {
        f.push(
            FeatureSpec::new(
                format!("insert_characteristic{p}"),
                FeatureKind::CategoricalBinary,
            )
            .with_tag(tags::INSERT_GEOMETRY),
        );
    }
    f.push(FeatureSpec::new(TARGET, FeatureKind::Target));
    FeatureSchema::new(f).expect("default schema is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub effect_weights: BTreeMap<String, f64>,
    /// Groups by descending `|weight| · std(signal)`, zero contributions omitted.
    pub importance_order: Vec<String>,
    pub contributions: BTreeMap<String, f64>,
    pub shape_signal: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub ground_truth: GroundTruth,
}

struct Disk<'a> {
    entry: &'a CatalogEntry,
    features: InsertFeatures,
    insert_area: f64,
    n_inserts: f64,
}

const VARIANT_CLEARANCE: [char; 3] = ['N', 'P', 'C'];
const VARIANT_TOLERANCE: [char; 2] = ['M', 'G'];
const VARIANT_CHARACTERISTIC: [char; 3] = ['G', 'M', 'T'];
const VARIANT_LENGTH: [&str; 5] = ["08", "11", "12", "15", "16"];
const VARIANT_THICKNESS: [&str; 3] = ["03", "04", "06"];

/// Cutting length (mm) at which a catalog surface area applies.
const NOMINAL_LENGTH: f64 = 12.0;

/// Draw a size/grade variant of a catalog shape. Entries without complete
/// geometry (filler, unparseable codes) are used as listed.
fn disk_variant<R: Rng>(
    entry: &CatalogEntry,
    reference: &InsertFeatures,
    table: &IsoCodeTable,
    rng: &mut R,
) -> Result<(InsertFeatures, f64)> {
    if reference.cutting_length.is_none() {
        return Ok((reference.clone(), entry.surface_area));
    }
    let mut pick = |n: usize| rng.random_range(0..n);
    let code = format!(
        "{}{}{}{}{}{}",
        entry.code.chars().next().unwrap_or('?'),
        VARIANT_CLEARANCE[pick(3)],
        VARIANT_TOLERANCE[pick(2)],
        VARIANT_CHARACTERISTIC[pick(3)],
        VARIANT_LENGTH[pick(5)],
        VARIANT_THICKNESS[pick(3)],
    );
    let f = parse_iso(&code, table)?;
    let scale = f.cutting_length.map_or(1.0, |l| l / NOMINAL_LENGTH);
    Ok((f, entry.surface_area * scale * scale))
}

fn zscore(v: &[Option<f64>]) -> Vec<f64> {
    let present: Vec<f64> = v.iter().flatten().copied().collect();
    if present.is_empty() {
        return vec![0.0; v.len()];
    }
    let m = present.iter().sum::<f64>() / present.len() as f64;
    let s = (present.iter().map(|x| (x - m).powi(2)).sum::<f64>() / present.len() as f64).sqrt();
    v.iter()
        .map(|x| match x {
            Some(x) if s > 0.0 => (x - m) / s,
            _ => 0.0,
        })
        .collect()
}

fn std_of(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

pub fn generate(params: &SynthParams) -> Result<SynthOutput> {
    params.validate()?;
    let table = IsoCodeTable::builtin();
    let parsed: Vec<InsertFeatures> = params
        .insert_catalog
        .iter()
        .map(|c| parse_iso(&c.code, &table))
        .collect::<Result<_>>()?;
    let effects = token_effects();
    let mut rng = seed::rng(seed::derive(params.seed, &[0x5e]));

    let mut cols: IndexMap<String, Vec<Option<f64>>> = numeric_columns()
        .into_iter()
        .map(|c| (c, Vec::new()))
        .collect();
    let mut cats: IndexMap<String, Vec<Option<String>>> = IndexMap::new();
    for c in [groups::RECIPE, RECIPE_DESCRIPTION] {
        cats.insert(c.to_string(), Vec::new());
    }
    for p in POSITIONS {
        cats.insert(format!("insert_shape{p}"), Vec::new());
    }
    for p in POSITIONS {
        cats.insert(format!("insert_characteristic{p}"), Vec::new());
    }
    let mut recipe_effect = Vec::new();
    let mut shape_sig: IndexMap<&str, Vec<f64>> = IndexMap::new();

    let d = params.disks_per_run;
    for _ in 0..params.n_runs {
        let recipe = &params.recipes[rng.random_range(0..params.recipes.len())];
        let disks: Vec<Disk> = (0..d)
            .map(|_| {
                let i = rng.random_range(0..params.insert_catalog.len());
                let entry = &params.insert_catalog[i];
                let (features, insert_area) = disk_variant(entry, &parsed[i], &table, &mut rng)?;
                Ok(Disk {
                    entry,
                    features,
                    insert_area,
                    n_inserts: rng.random_range(20..=60) as f64,
                })
            })
            .collect::<Result<_>>()?;
        let areas: Vec<f64> = disks.iter().map(|k| k.n_inserts * k.insert_area).collect();
        let total: f64 = areas.iter().sum();
        let spread = std_of(&areas);
        for (p, disk) in disks.iter().enumerate() {
            let above = (p + 1 < d).then(|| &disks[p + 1]);
            let below = p.checked_sub(1).map(|q| &disks[q]);
            let push = |cols: &mut IndexMap<String, Vec<Option<f64>>>, k: &str, v: Option<f64>| {
                cols.get_mut(k).expect("known column").push(v);
            };
            push(&mut cols, "n_inserts", Some(disk.n_inserts));
            push(&mut cols, "insert_area", Some(areas[p]));
            push(&mut cols, "disk_position", Some((p + 1) as f64));
            push(&mut cols, "total_area", Some(total));
            push(&mut cols, "area_std", Some(spread));
            push(
                &mut cols,
                "nominal_minus_actual",
                Some(recipe.nominal_area - total),
            );
            for (suffix, nb) in POSITIONS.iter().zip([Some(disk), above, below]) {
                let f = nb.map(|k| &k.features);
                push(
                    &mut cols,
                    &format!("clearance_angle{suffix}"),
                    f.and_then(|f| f.clearance_angle),
                );
                push(
                    &mut cols,
                    &format!("cutting_length{suffix}"),
                    f.and_then(|f| f.cutting_length),
                );
                push(
                    &mut cols,
                    &format!("thickness{suffix}"),
                    f.and_then(|f| f.thickness),
                );
                push(
                    &mut cols,
                    &format!("cutting_length_tolerance{suffix}"),
                    f.and_then(|f| f.cutting_length_tolerance),
                );
                push(
                    &mut cols,
                    &format!("thickness_tolerance{suffix}"),
                    f.and_then(|f| f.thickness_tolerance),
                );
                cats[format!("insert_shape{suffix}").as_str()]
                    .push(nb.map(|k| k.entry.description.clone()));
                cats[format!("insert_characteristic{suffix}").as_str()]
                    .push(f.and_then(|f| f.characteristic.clone()));
                shape_sig
                    .entry(match *suffix {
                        "" => groups::SHAPE,
                        "_above" => groups::SHAPE_ABOVE,
                        _ => groups::SHAPE_BELOW,
                    })
                    .or_default()
                    .push(
                        nb.map(|k| shape_signal(&k.entry.description, &effects))
                            .unwrap_or(0.0),
                    );
            }
            cats[groups::RECIPE].push(Some(recipe.name.clone()));
            cats[RECIPE_DESCRIPTION].push(Some(recipe.description.clone()));
            recipe_effect.push(recipe.effect);
        }
    }

    let n = params.n_runs * d;
    let position_z = zscore(&cols["disk_position"]);
    let mut signals: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (g, w) in &params.effect_weights {
        if *w == 0.0 {
            continue;
        }
        let s = match g.as_str() {
            groups::RECIPE => recipe_effect.clone(),
            groups::INTERACTION => shape_sig[groups::SHAPE]
                .iter()
                .zip(&position_z)
                .map(|(a, b)| a * b)
                .collect(),
            g if shape_sig.contains_key(g) => shape_sig[g].clone(),
            g => zscore(&cols[g]),
        };
        signals.insert(g.clone(), s);
    }
    let noise = Normal::new(0.0, params.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let target: Vec<Option<f64>> = (0..n)
        .map(|r| {
            let mut y = params.base_thickness;
            for (g, s) in &signals {
                y += params.effect_weights[g] * s[r];
            }
            if params.noise_std > 0.0 {
                y += noise.sample(&mut rng);
            }
            Some(y)
        })
        .collect();

    let contributions: BTreeMap<String, f64> = signals
        .iter()
        .map(|(g, s)| (g.clone(), params.effect_weights[g].abs() * std_of(s)))
        .filter(|(_, c)| *c > 0.0)
        .collect();
    let mut importance_order: Vec<String> = contributions.keys().cloned().collect();
    importance_order.sort_by(|a, b| contributions[b].total_cmp(&contributions[a]).then(a.cmp(b)));

    let mut columns: IndexMap<String, Column> = IndexMap::new();
    let schema = default_schema();
    for f in &schema.features {
        let col = if f.name == TARGET {
            Column::Numeric(target.clone())
        } else if let Some(v) = cols.get(&f.name) {
            Column::Numeric(v.clone())
        } else {
            Column::Categorical(cats[f.name.as_str()].clone())
        };
        columns.insert(f.name.clone(), col);
    }
    columns.insert(
        RECIPE_DESCRIPTION.to_string(),
        Column::Categorical(cats[RECIPE_DESCRIPTION].clone()),
    );

    Ok(SynthOutput {
        dataset: Dataset::new(columns)?,
        ground_truth: GroundTruth {
            effect_weights: params.effect_weights.clone(),
            importance_order,
            contributions,
            shape_signal: params
                .insert_catalog
                .iter()
                .map(|c| {
                    (
                        c.description.clone(),
                        shape_signal(&c.description, &effects),
                    )
                })
                .collect(),
        },
    })
}

/// Deterministic stand-in for a pretrained sentence-embedding table: each
/// description is the mean of per-word Gaussian vectors (seeded by the word)
/// plus a small per-description perturbation. Shared words give shared
/// directions. Not a substitute for a real model's semantics.
pub fn standin_table<'a>(
    descriptions: impl IntoIterator<Item = &'a str>,
    dimension: usize,
    seed: u64,
    source: &str,
) -> Result<EmbeddingTable> {
    if dimension == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    let word_vec = |w: &str| -> Vec<f64> {
        let h = w.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
        });
        let mut rng = seed::rng(seed::derive(seed, &[h]));
        (0..dimension)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    };
    let mut rows = Vec::new();
    for (i, d) in descriptions.into_iter().enumerate() {
        let tokens = preprocess(d);
        let mut v = vec![0.0; dimension];
        for t in &tokens {
            for (a, b) in v.iter_mut().zip(word_vec(t)) {
                *a += b / tokens.len().max(1) as f64;
            }
        }
        let mut rng = seed::rng(seed::derive(seed, &[0xd0c, i as u64]));
        for a in v.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *a += 0.1 * e;
        }
        rows.push((d.to_string(), v));
    }
    EmbeddingTable::from_rows(source, rows)
}

/// Two disjoint-vocabulary clusters of short descriptions, `per_cluster` each.
pub fn two_cluster_corpus(per_cluster: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    const A: [&str; 8] = [
        "steel", "bolt", "nut", "thread", "hex", "washer", "screw", "torque",
    ];
    const B: [&str; 8] = [
        "apple", "pear", "plum", "ripe", "sweet", "orchard", "juice", "peel",
    ];
    let mut rng = seed::rng(seed::derive(seed, &[0xc1]));
    let mut make = |vocab: &[&str]| -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        while out.len() < per_cluster {
            let len = rng.random_range(3..=5);
            let words: Vec<&str> = (0..len)
                .map(|_| vocab[rng.random_range(0..vocab.len())])
                .collect();
            let s = words.join(" ");
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    };
    let a = make(&A);
    let b = make(&B);
    (a, b)
}
