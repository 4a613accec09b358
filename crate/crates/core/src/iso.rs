//! Decomposition of indexable-insert designation codes.
//!
//! Positions (1-based): 1 shape, 2 clearance angle, 3 tolerance class,
//! 4 characteristic, then numeric fields whose positions and parse rules
//! come from the code table.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_TABLE: &str = include_str!("../data/iso_code_table.json");
const CODE_LENGTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeEntry {
    pub letter: char,
    pub description: String,
    /// Degrees; `None` for shapes without a single included angle.
    pub included_angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearanceEntry {
    pub letter: char,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceEntry {
    pub letter: char,
    /// mm
    pub length_tolerance: f64,
    /// mm
    pub thickness_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicEntry {
    pub letter: char,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum NumericRule {
    /// Digits read as millimetres.
    AsIs,
    Lookup {
        values: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericField {
    /// 1-based first character.
    pub position: usize,
    pub width: usize,
    #[serde(flatten)]
    pub rule: NumericRule,
}

impl NumericField {
    pub fn positions(&self) -> Vec<usize> {
        (self.position..self.position + self.width).collect()
    }

    fn parse(&self, chars: &[char]) -> Option<f64> {
        let start = self.position - 1;
        if chars.len() < start + self.width {
            return None;
        }
        let s: String = chars[start..start + self.width].iter().collect();
        match &self.rule {
            NumericRule::AsIs => {
                if s.chars().all(|c| c.is_ascii_digit()) {
                    s.parse().ok()
                } else {
                    None
                }
            }
            NumericRule::Lookup { values } => values.get(&s).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoCodeTable {
    pub shapes: Vec<ShapeEntry>,
    pub clearances: Vec<ClearanceEntry>,
    pub tolerances: Vec<ToleranceEntry>,
    pub characteristics: Vec<CharacteristicEntry>,
    pub cutting_length: NumericField,
    pub thickness: NumericField,
}

const SECTIONS: [&str; 6] = [
    "shapes",
    "clearances",
    "tolerances",
    "characteristics",
    "cutting_length",
    "thickness",
];

fn unique_letters<'a>(section: &str, letters: impl Iterator<Item = &'a char>) -> Result<()> {
    let mut seen = HashSet::new();
    for l in letters {
        if !l.is_ascii_uppercase() {
            return Err(Error::CodeTable(format!(
                "{section}: `{l}` is not an uppercase letter"
            )));
        }
        if !seen.insert(*l) {
            return Err(Error::CodeTable(format!(
                "{section}: duplicate letter `{l}`"
            )));
        }
    }
    Ok(())
}

fn check_angle(section: &str, letter: char, a: f64) -> Result<()> {
    if !(0.0..=90.0).contains(&a) {
        return Err(Error::CodeTable(format!(
            "{section} `{letter}`: angle {a} outside [0, 90]"
        )));
    }
    Ok(())
}

impl IsoCodeTable {
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_TABLE).expect("shipped code table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::CodeTable("top level must be an object".into()))?;
        for s in SECTIONS {
            if !obj.contains_key(s) {
                return Err(Error::CodeTable(format!("missing section `{s}`")));
            }
        }
        let table: Self = serde_json::from_value(value)?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        unique_letters("shapes", self.shapes.iter().map(|e| &e.letter))?;
        unique_letters("clearances", self.clearances.iter().map(|e| &e.letter))?;
        unique_letters("tolerances", self.tolerances.iter().map(|e| &e.letter))?;
        unique_letters(
            "characteristics",
            self.characteristics.iter().map(|e| &e.letter),
        )?;
        for s in &self.shapes {
            if s.description.trim().is_empty() {
                return Err(Error::CodeTable(format!(
                    "shape `{}` has no description",
                    s.letter
                )));
            }
            if let Some(a) = s.included_angle {
                check_angle("shapes", s.letter, a)?;
            }
        }
        for c in &self.clearances {
            check_angle("clearances", c.letter, c.angle)?;
        }
        for t in &self.tolerances {
            if !(t.length_tolerance > 0.0 && t.thickness_tolerance > 0.0) {
                return Err(Error::CodeTable(format!(
                    "tolerance `{}` must be positive",
                    t.letter
                )));
            }
        }
        for (name, f) in [
            ("cutting_length", &self.cutting_length),
            ("thickness", &self.thickness),
        ] {
            if f.width == 0 || f.position < 5 || f.position + f.width - 1 > CODE_LENGTH {
                return Err(Error::CodeTable(format!(
                    "{name}: positions must lie within 5..=8"
                )));
            }
            if let NumericRule::Lookup { values } = &f.rule {
                if values.values().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::CodeTable(format!(
                        "{name}: lookup values must be >= 0"
                    )));
                }
            }
        }
        let (a, b) = (&self.cutting_length, &self.thickness);
        if a.position < b.position + b.width && b.position < a.position + a.width {
            return Err(Error::CodeTable("numeric fields overlap".into()));
        }
        Ok(())
    }

    pub fn shape(&self, letter: char) -> Option<&ShapeEntry> {
        self.shapes.iter().find(|e| e.letter == letter)
    }
}

/// Structured fields of one code. `None` marks a position that was absent
/// or not covered by the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertFeatures {
    pub code: String,
    pub shape_description: Option<String>,
    pub included_angle: Option<f64>,
    pub clearance_angle: Option<f64>,
    pub cutting_length_tolerance: Option<f64>,
    pub thickness_tolerance: Option<f64>,
    pub characteristic: Option<String>,
    pub cutting_length: Option<f64>,
    pub thickness: Option<f64>,
}

impl InsertFeatures {
    pub fn unknown_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let flags = [
            ("shape_description", self.shape_description.is_none()),
            ("clearance_angle", self.clearance_angle.is_none()),
            (
                "cutting_length_tolerance",
                self.cutting_length_tolerance.is_none(),
            ),
            ("thickness_tolerance", self.thickness_tolerance.is_none()),
            ("characteristic", self.characteristic.is_none()),
            ("cutting_length", self.cutting_length.is_none()),
            ("thickness", self.thickness.is_none()),
        ];
        for (name, unknown) in flags {
            if unknown {
                out.push(name);
            }
        }
        out
    }
}

/// Code positions (1-based) read by each output field.
pub fn field_positions(table: &IsoCodeTable) -> Vec<(&'static str, Vec<usize>)> {
    vec![
        ("shape_description", vec![1]),
        ("included_angle", vec![1]),
        ("clearance_angle", vec![2]),
        ("cutting_length_tolerance", vec![3]),
        ("thickness_tolerance", vec![3]),
        ("characteristic", vec![4]),
        ("cutting_length", table.cutting_length.positions()),
        ("thickness", table.thickness.positions()),
    ]
}

pub fn parse_iso(code: &str, table: &IsoCodeTable) -> Result<InsertFeatures> {
    let code: String = code.trim().to_ascii_uppercase();
    if code.is_empty() {
        return Err(Error::InsertCode("empty code".into()));
    }
    let chars: Vec<char> = code.chars().collect();
    if chars.len() < CODE_LENGTH {
        log::debug!(
            "code `{code}` has {} characters; missing positions are unknown",
            chars.len()
        );
    }
    let at = |i: usize| chars.get(i).copied();
    let shape = at(0).and_then(|c| table.shape(c));
    let clearance = at(1).and_then(|c| table.clearances.iter().find(|e| e.letter == c));
    let tolerance = at(2).and_then(|c| table.tolerances.iter().find(|e| e.letter == c));
    let characteristic = at(3).and_then(|c| table.characteristics.iter().find(|e| e.letter == c));
    Ok(InsertFeatures {
        shape_description: shape.map(|s| s.description.clone()),
        included_angle: shape.and_then(|s| s.included_angle),
        clearance_angle: clearance.map(|c| c.angle),
        cutting_length_tolerance: tolerance.map(|t| t.length_tolerance),
        thickness_tolerance: tolerance.map(|t| t.thickness_tolerance),
        characteristic: characteristic.map(|c| c.description.clone()),
        cutting_length: table.cutting_length.parse(&chars),
        thickness: table.thickness.parse(&chars),
        code,
    })
}
