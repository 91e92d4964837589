//! Scenario files: JSON description of a model, regions and an experiment.
//!
//! Code index vectors are written as arrays of 0-based code indices, one per
//! user. Decoder subsets `D` list 1-based user numbers. Rates are in the unit
//! named by `rate_unit` (`"nats"` by default, or `"bits"`).
//!
//! ```json
//! {
//!   "rate_unit": "bits",
//!   "channel": {"type": "bsc_compound", "crossovers": [0.05, 0.3],
//!               "input_pmf": [0.5, 0.5], "rate": 0.29},
//!   "N": 12,
//!   "region": [[0, 0]],
//!   "trials": 10000,
//!   "seed": 1
//! }
//! ```
//!
//! A `"table"` channel lists `input_sizes`, `output_size` and `rows` (one
//! row per joint input, user 1 the most significant digit) and needs a
//! `users` array of `{"role": "regular" | "interfering", "codes": [{"rate",
//! "input_pmf"}]}` with the regular users first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::channel::{make_compound_bsc, make_dmc, CodeSpec, EntropyUnit, SystemModel};
use crate::exponents::{
    gep_bound_d, gep_bound_margin, gep_bound_partitioned, BoundReport, WeightFunction,
};
use crate::montecarlo::{DecoderKind, ErrorModel, Experiment, GSampling};
use crate::space::{validate_cover, CodeIndexVector, Region, RegionPartition, UserSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioErrorKind {
    Parse,
    Schema,
    Integrity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub kind: ScenarioErrorKind,
    /// Key path such as `region[2]` or `channel.rows`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ScenarioErrorKind::Parse => "parse error",
            ScenarioErrorKind::Schema => "schema error",
            ScenarioErrorKind::Integrity => "integrity error",
        };
        if self.path.is_empty() {
            write!(f, "{kind}: {}", self.message)
        } else {
            write!(f, "{kind} at `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ScenarioError {}

type Res<T> = std::result::Result<T, ScenarioError>;

fn schema(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError {
        kind: ScenarioErrorKind::Schema,
        path: path.into(),
        message: message.into(),
    }
}

fn integrity(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError {
        kind: ScenarioErrorKind::Integrity,
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub regular: bool,
    pub codes: Vec<CodeSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    BscCompound {
        crossovers: Vec<f64>,
        input_pmf: Vec<f64>,
        /// Nats per symbol.
        rate: f64,
    },
    Table {
        input_sizes: Vec<usize>,
        output_size: usize,
        rows: Vec<Vec<f64>>,
        users: Vec<UserSpec>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub channel: ChannelSpec,
    pub model: SystemModel,
    pub n: usize,
    pub alpha: WeightFunction,
    pub region: Region,
    pub margin: Option<Region>,
    /// Explicit `(D, R_D)` cells; `None` assigns all of `R` to the full
    /// regular set when simulating.
    pub partition: Option<RegionPartition>,
    pub partition_cap: u64,
    pub detection: Option<Vec<Region>>,
    pub error_model: ErrorModel,
    pub decoder: DecoderKind,
    pub g_sampling: GSampling,
    pub trials: u64,
    pub seed: u64,
}

const TOP_KEYS: &[&str] = &[
    "name",
    "rate_unit",
    "channel",
    "users",
    "N",
    "alpha",
    "region",
    "margin",
    "partition",
    "partition_cap",
    "detection",
    "error_model",
    "decoder",
    "g_sampling",
    "trials",
    "seed",
];

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn idx(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

fn as_object<'a>(v: &'a Value, path: &str) -> Res<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| schema(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Res<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| schema(path, "expected an array"))
}

fn as_f64(v: &Value, path: &str) -> Res<f64> {
    v.as_f64().ok_or_else(|| schema(path, "expected a number"))
}

fn as_u64(v: &Value, path: &str) -> Res<u64> {
    v.as_u64()
        .ok_or_else(|| schema(path, "expected a nonnegative integer"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Res<&'a str> {
    v.as_str().ok_or_else(|| schema(path, "expected a string"))
}

fn f64_list(v: &Value, path: &str) -> Res<Vec<f64>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &idx(path, i)))
        .collect()
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Res<&'a Value> {
    obj.get(key)
        .ok_or_else(|| schema(&join(path, key), "missing required key"))
}

fn only_keys(obj: &Map<String, Value>, allowed: &[&str], path: &str) -> Res<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(schema(&join(path, k), "unknown key")),
        None => Ok(()),
    }
}

fn vector(v: &Value, path: &str, model: &SystemModel) -> Res<CodeIndexVector> {
    let items = as_array(v, path)?;
    let g = CodeIndexVector(
        items
            .iter()
            .enumerate()
            .map(|(i, x)| as_u64(x, &idx(path, i)).map(|u| u as usize))
            .collect::<Res<_>>()?,
    );
    if !model.code_space().contains(&g) {
        return Err(integrity(
            path,
            format!("{g} is not in the code index space"),
        ));
    }
    Ok(g)
}

fn region(v: &Value, path: &str, model: &SystemModel) -> Res<Region> {
    let items = as_array(v, path)?;
    let mut r = Region::empty();
    for (i, x) in items.iter().enumerate() {
        let p = idx(path, i);
        let g = vector(x, &p, model)?;
        if !r.insert(g.clone()) {
            return Err(integrity(&p, format!("duplicate member {g}")));
        }
    }
    Ok(r)
}

fn enum_value<T: Copy>(
    obj: &Map<String, Value>,
    key: &str,
    table: &[(&str, T)],
    default: T,
) -> Res<T> {
    match obj.get(key) {
        None => Ok(default),
        Some(v) => {
            let s = as_str(v, key)?;
            table
                .iter()
                .find(|(name, _)| *name == s)
                .map(|(_, t)| *t)
                .ok_or_else(|| {
                    let names: Vec<_> = table.iter().map(|(n, _)| *n).collect();
                    schema(key, format!("`{s}` is not one of {}", names.join(", ")))
                })
        }
    }
}

fn code_specs(v: &Value, path: &str, unit: f64) -> Res<Vec<CodeSpec>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let p = idx(path, i);
            let o = as_object(c, &p)?;
            only_keys(o, &["rate", "input_pmf"], &p)?;
            let rate = as_f64(required(o, "rate", &p)?, &join(&p, "rate"))? * unit;
            let pmf = f64_list(required(o, "input_pmf", &p)?, &join(&p, "input_pmf"))?;
            Ok(CodeSpec::new(rate, pmf))
        })
        .collect()
}

fn parse_channel(root: &Map<String, Value>, unit: f64) -> Res<(ChannelSpec, SystemModel)> {
    let ch = as_object(required(root, "channel", "")?, "channel")?;
    let kind = as_str(required(ch, "type", "channel")?, "channel.type")?;
    match kind {
        "bsc_compound" => {
            only_keys(ch, &["type", "crossovers", "input_pmf", "rate"], "channel")?;
            if root.contains_key("users") {
                return Err(schema("users", "not allowed with a bsc_compound channel"));
            }
            let crossovers =
                f64_list(required(ch, "crossovers", "channel")?, "channel.crossovers")?;
            let input_pmf = match ch.get("input_pmf") {
                Some(v) => f64_list(v, "channel.input_pmf")?,
                None => vec![0.5, 0.5],
            };
            let rate = as_f64(required(ch, "rate", "channel")?, "channel.rate")? * unit;
            let model = make_compound_bsc(&crossovers, &input_pmf, rate)
                .map_err(|e| integrity("channel", e.to_string()))?;
            // keep the normalized input pmf so emitted files reload identically
            let input_pmf = model.input_pmf(0, 0).to_vec();
            Ok((
                ChannelSpec::BscCompound {
                    crossovers,
                    input_pmf,
                    rate,
                },
                model,
            ))
        }
        "table" => {
            only_keys(
                ch,
                &["type", "input_sizes", "output_size", "rows"],
                "channel",
            )?;
            let input_sizes: Vec<usize> = as_array(
                required(ch, "input_sizes", "channel")?,
                "channel.input_sizes",
            )?
            .iter()
            .enumerate()
            .map(|(i, x)| as_u64(x, &idx("channel.input_sizes", i)).map(|u| u as usize))
            .collect::<Res<_>>()?;
            let output_size = as_u64(
                required(ch, "output_size", "channel")?,
                "channel.output_size",
            )? as usize;
            let rows: Vec<Vec<f64>> = as_array(required(ch, "rows", "channel")?, "channel.rows")?
                .iter()
                .enumerate()
                .map(|(i, r)| f64_list(r, &idx("channel.rows", i)))
                .collect::<Res<_>>()?;
            let users_v = as_array(required(root, "users", "")?, "users")?;
            let mut users = Vec::with_capacity(users_v.len());
            for (i, u) in users_v.iter().enumerate() {
                let p = idx("users", i);
                let o = as_object(u, &p)?;
                only_keys(o, &["role", "codes"], &p)?;
                let role = as_str(required(o, "role", &p)?, &join(&p, "role"))?;
                let regular = match role {
                    "regular" => true,
                    "interfering" => false,
                    other => {
                        return Err(schema(&join(&p, "role"), format!("unknown role `{other}`")))
                    }
                };
                if regular && users.iter().any(|u: &UserSpec| !u.regular) {
                    return Err(integrity(
                        &p,
                        "regular users must come before interfering users",
                    ));
                }
                let codes = code_specs(required(o, "codes", &p)?, &join(&p, "codes"), unit)?;
                users.push(UserSpec { regular, codes });
            }
            let dmc = make_dmc(&input_sizes, output_size, &rows)
                .map_err(|e| integrity("channel.rows", e.to_string()))?;
            let num_regular = users.iter().filter(|u| u.regular).count();
            let model = SystemModel::new(
                dmc.clone(),
                num_regular,
                users.iter().map(|u| u.codes.clone()).collect(),
            )
            .map_err(|e| integrity("users", e.to_string()))?;
            let users = users
                .iter()
                .enumerate()
                .map(|(k, u)| UserSpec {
                    regular: u.regular,
                    codes: model.library(k).to_vec(),
                })
                .collect();
            Ok((
                ChannelSpec::Table {
                    input_sizes,
                    output_size,
                    rows: dmc.rows(),
                    users,
                },
                model,
            ))
        }
        other => Err(schema(
            "channel.type",
            format!("`{other}` is not one of table, bsc_compound"),
        )),
    }
}

fn parse_alpha(v: Option<&Value>, model: &SystemModel) -> Res<WeightFunction> {
    let Some(v) = v else {
        return Ok(WeightFunction::zero());
    };
    let o = as_object(v, "alpha")?;
    only_keys(o, &["default", "values"], "alpha")?;
    let default = match o.get("default") {
        Some(d) => as_f64(d, "alpha.default")?,
        None => 0.0,
    };
    let mut values = BTreeMap::new();
    if let Some(list) = o.get("values") {
        for (i, e) in as_array(list, "alpha.values")?.iter().enumerate() {
            let p = idx("alpha.values", i);
            let eo = as_object(e, &p)?;
            only_keys(eo, &["g", "alpha"], &p)?;
            let g = vector(required(eo, "g", &p)?, &join(&p, "g"), model)?;
            let a = as_f64(required(eo, "alpha", &p)?, &join(&p, "alpha"))?;
            if values.insert(g.clone(), a).is_some() {
                return Err(integrity(&p, format!("alpha given twice for {g}")));
            }
        }
    }
    WeightFunction::new(default, values).map_err(|e| schema("alpha", e.to_string()))
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Res<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| ScenarioError {
            kind: ScenarioErrorKind::Parse,
            path: String::new(),
            message: e.to_string(),
        })?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Res<Self> {
        let root = as_object(value, "")?;
        only_keys(root, TOP_KEYS, "")?;
        let name = root
            .get("name")
            .map(|v| as_str(v, "name").map(String::from))
            .transpose()?;
        let unit = enum_value(
            root,
            "rate_unit",
            &[("nats", EntropyUnit::Nats), ("bits", EntropyUnit::Bits)],
            EntropyUnit::Nats,
        )?
        .to_nats();
        let (channel, model) = parse_channel(root, unit)?;

        let n = as_u64(required(root, "N", "")?, "N")? as usize;
        if n == 0 {
            return Err(schema("N", "blocklength must be at least 1"));
        }
        let alpha = parse_alpha(root.get("alpha"), &model)?;
        let region = region(required(root, "region", "")?, "region", &model)?;
        let margin = root
            .get("margin")
            .map(|v| self::region(v, "margin", &model))
            .transpose()?;
        if let Some(m) = &margin {
            if let Some(g) = m.iter().find(|g| region.contains(g)) {
                return Err(integrity(
                    "margin",
                    format!("{g} is also in the operation region"),
                ));
            }
        }

        let partition = match root.get("partition") {
            None => None,
            Some(v) => {
                let mut cells = BTreeMap::new();
                for (i, c) in as_array(v, "partition")?.iter().enumerate() {
                    let p = idx("partition", i);
                    let o = as_object(c, &p)?;
                    only_keys(o, &["D", "region"], &p)?;
                    let dp = join(&p, "D");
                    let mut d = UserSet::EMPTY;
                    for (j, u) in as_array(required(o, "D", &p)?, &dp)?.iter().enumerate() {
                        let u = as_u64(u, &idx(&dp, j))? as usize;
                        if u == 0 || u > model.num_regular() {
                            return Err(integrity(
                                &idx(&dp, j),
                                format!("user {u} is not a regular user"),
                            ));
                        }
                        d = d.with(u - 1);
                    }
                    if !d.contains(0) {
                        return Err(integrity(&dp, "every decoding subset must contain user 1"));
                    }
                    let r = self::region(required(o, "region", &p)?, &join(&p, "region"), &model)?;
                    if cells.insert(d, r).is_some() {
                        return Err(integrity(&dp, format!("subset {d} listed twice")));
                    }
                }
                let part = RegionPartition::new(cells)
                    .map_err(|e| integrity("partition", e.to_string()))?;
                if part.union() != region {
                    return Err(integrity(
                        "partition",
                        "cells must partition the operation region",
                    ));
                }
                Some(part)
            }
        };
        let partition_cap = match root.get("partition_cap") {
            None => 4096,
            Some(v) => {
                let c = as_u64(v, "partition_cap")?;
                if c == 0 {
                    return Err(schema("partition_cap", "must be at least 1"));
                }
                c
            }
        };

        let detection = match root.get("detection") {
            None => None,
            Some(v) => {
                let cells = as_array(v, "detection")?
                    .iter()
                    .enumerate()
                    .map(|(i, c)| self::region(c, &idx("detection", i), &model))
                    .collect::<Res<Vec<_>>>()?;
                validate_cover(&model.code_space(), &cells)
                    .map_err(|e| integrity("detection", e.to_string()))?;
                Some(cells)
            }
        };

        let error_model = enum_value(
            root,
            "error_model",
            &[
                ("relaxed", ErrorModel::Relaxed),
                ("strict", ErrorModel::Strict),
                ("margin", ErrorModel::Margin),
            ],
            ErrorModel::Relaxed,
        )?;
        let decoder = enum_value(
            root,
            "decoder",
            &[
                ("plain", DecoderKind::Plain),
                ("margin", DecoderKind::Margin),
                ("detect", DecoderKind::Detect),
            ],
            DecoderKind::Plain,
        )?;
        if (error_model == ErrorModel::Margin || decoder == DecoderKind::Margin) && margin.is_none()
        {
            return Err(integrity(
                "margin",
                "the margin error model and decoder need an operation margin",
            ));
        }
        if decoder == DecoderKind::Detect && detection.is_none() {
            return Err(integrity(
                "detection",
                "the detect decoder needs a detection partition",
            ));
        }

        let g_sampling = match root.get("g_sampling") {
            None => GSampling::Cycle(model.code_space().iter().collect()),
            Some(v) => {
                let o = as_object(v, "g_sampling")?;
                only_keys(o, &["mode", "set"], "g_sampling")?;
                let mode = as_str(required(o, "mode", "g_sampling")?, "g_sampling.mode")?;
                let set = || -> Res<Vec<CodeIndexVector>> {
                    match o.get("set") {
                        None => Ok(model.code_space().iter().collect()),
                        Some(s) => {
                            let r = as_array(s, "g_sampling.set")?;
                            if r.is_empty() {
                                return Err(schema("g_sampling.set", "must not be empty"));
                            }
                            r.iter()
                                .enumerate()
                                .map(|(i, g)| vector(g, &idx("g_sampling.set", i), &model))
                                .collect()
                        }
                    }
                };
                match mode {
                    "uniform" => GSampling::Uniform(set()?),
                    "cycle" => GSampling::Cycle(set()?),
                    "prior" => {
                        if o.contains_key("set") {
                            return Err(schema(
                                "g_sampling.set",
                                "the prior mode samples the whole space",
                            ));
                        }
                        GSampling::Prior
                    }
                    other => {
                        return Err(schema(
                            "g_sampling.mode",
                            format!("`{other}` is not one of uniform, prior, cycle"),
                        ))
                    }
                }
            }
        };

        let trials = match root.get("trials") {
            None => 1000,
            Some(v) => as_u64(v, "trials")?,
        };
        if trials == 0 {
            return Err(schema("trials", "must be at least 1"));
        }
        let seed = match root.get("seed") {
            None => 0,
            Some(v) => as_u64(v, "seed")?,
        };

        Ok(Scenario {
            name,
            channel,
            model,
            n,
            alpha,
            region,
            margin,
            partition,
            partition_cap,
            detection,
            error_model,
            decoder,
            g_sampling,
            trials,
            seed,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Res<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError {
            kind: ScenarioErrorKind::Parse,
            path: String::new(),
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_json_str(&text)
    }

    /// The normalized scenario: rates in nats, every default spelled out.
    pub fn to_value(&self) -> Value {
        let vecs = |r: &Region| Value::Array(r.iter().map(|g| json!(g.0)).collect());
        let channel = match &self.channel {
            ChannelSpec::BscCompound {
                crossovers,
                input_pmf,
                rate,
            } => {
                json!({"type": "bsc_compound", "crossovers": crossovers, "input_pmf": input_pmf, "rate": rate})
            }
            ChannelSpec::Table {
                input_sizes,
                output_size,
                rows,
                ..
            } => {
                json!({"type": "table", "input_sizes": input_sizes, "output_size": output_size, "rows": rows})
            }
        };
        let mut root = Map::new();
        if let Some(n) = &self.name {
            root.insert("name".into(), json!(n));
        }
        root.insert("rate_unit".into(), json!("nats"));
        root.insert("channel".into(), channel);
        if let ChannelSpec::Table { users, .. } = &self.channel {
            let users: Vec<Value> = users
                .iter()
                .map(|u| {
                    json!({
                        "role": if u.regular { "regular" } else { "interfering" },
                        "codes": u.codes.iter().map(|c| json!({"rate": c.rate, "input_pmf": c.input_pmf})).collect::<Vec<_>>(),
                    })
                })
                .collect();
            root.insert("users".into(), Value::Array(users));
        }
        root.insert("N".into(), json!(self.n));
        root.insert(
            "alpha".into(),
            json!({
                "default": self.alpha.default_value(),
                "values": self.alpha.overrides().iter().map(|(g, a)| json!({"g": g.0, "alpha": a})).collect::<Vec<_>>(),
            }),
        );
        root.insert("region".into(), vecs(&self.region));
        if let Some(m) = &self.margin {
            root.insert("margin".into(), vecs(m));
        }
        if let Some(p) = &self.partition {
            let cells: Vec<Value> = p
                .cells()
                .map(|(d, r)| json!({"D": d.iter().map(|u| u + 1).collect::<Vec<_>>(), "region": vecs(r)}))
                .collect();
            root.insert("partition".into(), Value::Array(cells));
        }
        root.insert("partition_cap".into(), json!(self.partition_cap));
        if let Some(cells) = &self.detection {
            root.insert(
                "detection".into(),
                Value::Array(cells.iter().map(vecs).collect()),
            );
        }
        let em = match self.error_model {
            ErrorModel::Relaxed => "relaxed",
            ErrorModel::Strict => "strict",
            ErrorModel::Margin => "margin",
        };
        let dec = match self.decoder {
            DecoderKind::Plain => "plain",
            DecoderKind::Margin => "margin",
            DecoderKind::Detect => "detect",
        };
        root.insert("error_model".into(), json!(em));
        root.insert("decoder".into(), json!(dec));
        let gs = match &self.g_sampling {
            GSampling::Uniform(s) => {
                json!({"mode": "uniform", "set": s.iter().map(|g| &g.0).collect::<Vec<_>>()})
            }
            GSampling::Cycle(s) => {
                json!({"mode": "cycle", "set": s.iter().map(|g| &g.0).collect::<Vec<_>>()})
            }
            GSampling::Prior => json!({"mode": "prior"}),
        };
        root.insert("g_sampling".into(), gs);
        root.insert("trials".into(), json!(self.trials));
        root.insert("seed".into(), json!(self.seed));
        Value::Object(root)
    }

    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("scenario values serialize")
    }

    /// The decoder partition used for simulation.
    pub fn effective_partition(&self) -> RegionPartition {
        self.partition.clone().unwrap_or_else(|| {
            RegionPartition::single(self.model.regular_users(), self.region.clone())
                .expect("the full regular set contains user 1")
        })
    }

    /// The bound a simulation is checked against and the decoder partition
    /// it assumes. `None` for the detect-then-decode receiver.
    ///
    /// Without an explicit partition the plain decoder uses the best
    /// partition found by [`gep_bound_partitioned`].
    pub fn bound(&self) -> crate::Result<Option<(BoundReport, RegionPartition)>> {
        let (m, a, n) = (&self.model, &self.alpha, self.n);
        match (self.decoder, self.error_model) {
            (DecoderKind::Detect, _) => Ok(None),
            (_, ErrorModel::Margin) => {
                let part = self.effective_partition();
                let margin = self.margin.clone().unwrap_or_default();
                let parts = part
                    .cells()
                    .map(|(d, r)| gep_bound_margin(m, d, r, &margin, a, n))
                    .collect::<crate::Result<Vec<_>>>()?;
                Ok(Some((BoundReport::sum("margin", parts)?, part)))
            }
            _ => match &self.partition {
                Some(part) => {
                    let parts = part
                        .cells()
                        .map(|(d, r)| gep_bound_d(m, d, r, a, n))
                        .collect::<crate::Result<Vec<_>>>()?;
                    Ok(Some((
                        BoundReport::sum("partitioned", parts)?,
                        part.clone(),
                    )))
                }
                None => gep_bound_partitioned(m, &self.region, a, n, self.partition_cap).map(Some),
            },
        }
    }

    pub fn experiment(&self) -> Experiment {
        Experiment {
            model: self.model.clone(),
            n: self.n,
            alpha: self.alpha.clone(),
            region: self.region.clone(),
            margin: self.margin.clone().unwrap_or_default(),
            partition: self.effective_partition(),
            detection: self.detection.clone(),
            error_model: self.error_model,
            decoder: self.decoder,
            g_sampling: self.g_sampling.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEC4: &str = r#"{
        "rate_unit": "bits",
        "channel": {"type": "bsc_compound", "crossovers": [0.18, 0.185, 0.185, 0.19], "rate": 0.31},
        "N": 16,
        "region": [[0, 0]],
        "margin": [[0, 1], [0, 2]],
        "error_model": "margin",
        "decoder": "margin"
    }"#;

    fn err(text: &str) -> ScenarioError {
        Scenario::from_json_str(text).unwrap_err()
    }

    #[test]
    fn bits_are_converted() {
        let s = Scenario::from_json_str(SEC4).unwrap();
        assert_eq!(s.model.rate(0, 0), 0.31 * std::f64::consts::LN_2);
        assert_eq!(s.trials, 1000);
    }

    #[test]
    fn round_trip() {
        let s = Scenario::from_json_str(SEC4).unwrap();
        let again = Scenario::from_json_str(&s.emit()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.emit(), again.emit());
    }

    #[test]
    fn table_round_trip() {
        let text = r#"{
            "channel": {"type": "table", "input_sizes": [2, 2], "output_size": 3,
                        "rows": [[1,0,0],[0,1,0],[0,1,0],[0,0,1]]},
            "users": [{"role": "regular", "codes": [{"rate": 0.1, "input_pmf": [0.5, 0.5]}]},
                      {"role": "regular", "codes": [{"rate": 0.1, "input_pmf": [0.5, 0.5]},
                                                    {"rate": 0.0, "input_pmf": [1, 0]}]}],
            "N": 4,
            "alpha": {"default": 0.1, "values": [{"g": [0, 1], "alpha": 0.5}]},
            "region": [[0, 0], [0, 1]],
            "partition": [{"D": [1], "region": [[0, 1]]}, {"D": [1, 2], "region": [[0, 0]]}],
            "detection": [[[0, 0]], [[0, 1]]],
            "g_sampling": {"mode": "prior"},
            "trials": 5, "seed": 9
        }"#;
        let s = Scenario::from_json_str(text).unwrap();
        assert_eq!(s, Scenario::from_json_str(&s.emit()).unwrap());
    }

    #[test]
    fn error_kinds_and_paths() {
        let e = err("{not json");
        assert_eq!(e.kind, ScenarioErrorKind::Parse);

        let e = err(&SEC4.replace("[[0, 0]]", "[[0, 7]]"));
        assert_eq!(
            (e.kind, e.path.as_str()),
            (ScenarioErrorKind::Integrity, "region[0]")
        );

        let e = err(&SEC4.replace("[[0, 1], [0, 2]]", "[[0, 0]]"));
        assert_eq!(
            (e.kind, e.path.as_str()),
            (ScenarioErrorKind::Integrity, "margin")
        );

        let e = err(&SEC4.replace("\"N\": 16,", "\"N\": 16, \"trials\": 0,"));
        assert_eq!(
            (e.kind, e.path.as_str()),
            (ScenarioErrorKind::Schema, "trials")
        );

        let e = err(&SEC4.replace("\"N\": 16", "\"N\": \"16\""));
        assert_eq!((e.kind, e.path.as_str()), (ScenarioErrorKind::Schema, "N"));

        let e = err(&SEC4.replace("\"rate\": 0.31", "\"rate\": 0.31, \"extra\": 1"));
        assert_eq!(
            (e.kind, e.path.as_str()),
            (ScenarioErrorKind::Schema, "channel.extra")
        );

        let e = err(&SEC4.replace("\"region\"", "\"regoin\""));
        assert_eq!(e.kind, ScenarioErrorKind::Schema);
    }
}
