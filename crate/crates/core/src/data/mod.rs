//! Dataset ingestion, leave-one-out splitting and candidate provisioning.

mod provider;
mod split;
mod synthetic;
mod table;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::AttributeExtractor;
use crate::types::{FeatureMap, Item, ItemCatalog, ItemId, TypeError, User, UserId};

pub use provider::{CandidateProvider, Provider, PRECOMPUTED_SEPARATOR};
pub use split::{leave_one_out, Split};
pub use synthetic::{synthetic_dataset, SyntheticSpec, MARKER_FIELD};
pub use table::{read_table, Table};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: String, column: String },
    #[error("{path}:{line}: {message}")]
    Row { path: String, line: usize, message: String },
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("user {user} has {count} interactions, at least 3 are needed for a split")]
    TooFewInteractions { user: UserId, count: usize },
    #[error("user {user}: {wanted} candidates requested, only {available} available")]
    NotEnoughCandidates { user: UserId, wanted: usize, available: usize },
    #[error("invalid dataset config: {0}")]
    Config(String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

fn tab() -> String {
    "\t".into()
}

fn default_min_interactions() -> usize {
    5
}

/// A delimited file. `columns` names the fields of a headerless file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileSpec {
    pub path: PathBuf,
    #[serde(default = "tab")]
    pub delimiter: String,
    #[serde(default)]
    pub columns: Option<Vec<String>>,
}

impl FileSpec {
    fn read(&self, base: &Path) -> Result<(PathBuf, Table), DataError> {
        let path = base.join(&self.path);
        let table = read_table(&path, &self.delimiter, self.columns.as_deref())?;
        Ok((path, table))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub file: FileSpec,
    pub user_col: String,
    pub item_col: String,
    pub time_col: String,
    #[serde(default)]
    pub label_col: Option<String>,
    /// Drops interactions whose label is below this value.
    #[serde(default)]
    pub min_label: Option<f64>,
}

/// An entity file plus the whitelist of semantic fields kept from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub file: FileSpec,
    pub id_col: String,
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Relative file paths resolve against this directory.
    #[serde(default)]
    pub root: PathBuf,
    pub interactions: InteractionSpec,
    pub items: FeatureSpec,
    #[serde(default)]
    pub users: Option<FeatureSpec>,
    /// Whitelisted `year` is taken from a trailing "(1995)" in this field
    /// when the file has no year column.
    #[serde(default)]
    pub derive_year_from: Option<String>,
    #[serde(default = "default_min_interactions")]
    pub min_interactions: usize,
    pub attributes: AttributeExtractor,
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

impl DatasetConfig {
    /// The ML-1M `.dat` files: `::`-delimited, headerless.
    pub fn movielens_1m(root: impl Into<PathBuf>) -> Self {
        let dat = |name: &str, cols: &[&str]| FileSpec {
            path: name.into(),
            delimiter: "::".into(),
            columns: Some(strings(cols)),
        };
        Self {
            root: root.into(),
            interactions: InteractionSpec {
                file: dat("ratings.dat", &["user_id", "item_id", "rating", "timestamp"]),
                user_col: "user_id".into(),
                item_col: "item_id".into(),
                time_col: "timestamp".into(),
                label_col: Some("rating".into()),
                min_label: None,
            },
            items: FeatureSpec {
                file: dat("movies.dat", &["item_id", "title", "genre"]),
                id_col: "item_id".into(),
                fields: strings(&["title", "genre", "year"]),
            },
            users: Some(FeatureSpec {
                file: dat("users.dat", &["user_id", "gender", "age", "occupation", "zip"]),
                id_col: "user_id".into(),
                fields: strings(&["gender", "age", "occupation", "zip"]),
            }),
            derive_year_from: Some("title".into()),
            min_interactions: default_min_interactions(),
            attributes: AttributeExtractor::movielens(),
        }
    }

    /// KuaiRand-1K CSV exports; clicks only.
    pub fn kuairand(root: impl Into<PathBuf>) -> Self {
        let csv = |name: &str| FileSpec {
            path: name.into(),
            delimiter: ",".into(),
            columns: None,
        };
        Self {
            root: root.into(),
            interactions: InteractionSpec {
                file: csv("log_standard_4_08_to_4_21_1k.csv"),
                user_col: "user_id".into(),
                item_col: "video_id".into(),
                time_col: "time_ms".into(),
                label_col: Some("is_click".into()),
                min_label: Some(1.0),
            },
            items: FeatureSpec {
                file: csv("video_features_basic_1k.csv"),
                id_col: "video_id".into(),
                fields: strings(&[
                    "video_type",
                    "upload_type",
                    "visible_status",
                    "server_width",
                    "server_height",
                    "music_type",
                    "author_id",
                    "music_id",
                    "video_duration",
                ]),
            },
            users: Some(FeatureSpec {
                file: csv("user_features_1k.csv"),
                id_col: "user_id".into(),
                fields: strings(&[
                    "user_active_degree",
                    "is_lowactive_period",
                    "is_live_streamer",
                    "is_video_author",
                    "follow_user_num_range",
                    "fans_user_num_range",
                    "friend_user_num_range",
                    "register_days_range",
                ]),
            }),
            derive_year_from: None,
            min_interactions: default_min_interactions(),
            attributes: AttributeExtractor::kuairand(),
        }
    }

    /// Douban-Movie as tab-separated files with headers.
    pub fn douban(root: impl Into<PathBuf>) -> Self {
        let tsv = |name: &str| FileSpec {
            path: name.into(),
            delimiter: tab(),
            columns: None,
        };
        Self {
            root: root.into(),
            interactions: InteractionSpec {
                file: tsv("ratings.tsv"),
                user_col: "user_id".into(),
                item_col: "item_id".into(),
                time_col: "time".into(),
                label_col: None,
                min_label: None,
            },
            items: FeatureSpec {
                file: tsv("movies.tsv"),
                id_col: "item_id".into(),
                fields: strings(&["director", "country", "language", "CategoryID"]),
            },
            users: Some(FeatureSpec {
                file: tsv("users.tsv"),
                id_col: "user_id".into(),
                fields: strings(&["living_place"]),
            }),
            derive_year_from: None,
            min_interactions: default_min_interactions(),
            attributes: AttributeExtractor::douban(),
        }
    }

    pub fn preset(name: &str, root: impl Into<PathBuf>) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "ml-1m" | "ml1m" | "movielens" => Some(Self::movielens_1m(root)),
            "kuairand" => Some(Self::kuairand(root)),
            "douban" | "douban-movie" => Some(Self::douban(root)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.min_interactions < 3 {
            return Err(DataError::Config(format!(
                "min_interactions = {} leaves users too short for a leave-one-out split",
                self.min_interactions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: UserId,
    pub item: ItemId,
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionLog {
    pub records: Vec<Interaction>,
}

impl InteractionLog {
    pub fn by_user(&self) -> BTreeMap<&UserId, Vec<&Interaction>> {
        let mut map: BTreeMap<&UserId, Vec<&Interaction>> = BTreeMap::new();
        for r in &self.records {
            map.entry(&r.user).or_default().push(r);
        }
        map
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub users: BTreeMap<UserId, User>,
    pub items: ItemCatalog,
    pub log: InteractionLog,
}

/// Orders ids numerically when both are integers, lexically otherwise.
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u128>(), b.parse::<u128>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

/// Integer timestamps pass through; decimal ones are truncated; date-time
/// strings ("2010-05-01 12:30:00") map to their digit sequence, which keeps
/// their order for fixed-width formats.
fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<i64>() {
        return Some(v);
    }
    if let Ok(v) = raw.parse::<f64>() {
        return v.is_finite().then_some(v as i64);
    }
    if raw.chars().all(|c| c.is_ascii_digit() || "-:/ T".contains(c)) {
        let digits: String = raw.chars().filter(char::is_ascii_digit).collect();
        return digits.parse().ok();
    }
    None
}

/// The year in a trailing "(1995)", as in "Toy Story (1995)".
pub fn year_from_title(title: &str) -> Option<&str> {
    let t = title.trim_end();
    let inner = t.strip_suffix(')')?;
    let open = inner.rfind('(')?;
    let year = &inner[open + 1..];
    (year.len() == 4 && year.chars().all(|c| c.is_ascii_digit())).then_some(year)
}

fn parse_id<T: std::str::FromStr<Err = TypeError>>(raw: &str, path: &Path, line: usize) -> Result<T, DataError> {
    raw.trim().parse().map_err(|e: TypeError| DataError::Row {
        path: path.display().to_string(),
        line,
        message: e.to_string(),
    })
}

fn load_features(
    spec: &FeatureSpec,
    root: &Path,
    derive_year_from: Option<&str>,
) -> Result<Vec<(usize, String, FeatureMap)>, DataError> {
    let (path, table) = spec.file.read(root)?;
    let id_col = table.column(&spec.id_col, &path)?;
    let mut derived_year = None;
    let mut fields = Vec::with_capacity(spec.fields.len());
    for name in &spec.fields {
        match table.column(name, &path) {
            Ok(col) => fields.push((name.as_str(), col)),
            Err(e) => match derive_year_from {
                Some(source) if name == "year" => derived_year = Some(table.column(source, &path)?),
                _ => return Err(e),
            },
        }
    }
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let mut features = FeatureMap::new();
        for (name, col) in &fields {
            let value = row[*col].trim();
            if !value.is_empty() {
                features.insert(*name, value)?;
            }
        }
        if let Some(col) = derived_year {
            if let Some(year) = year_from_title(&row[col]) {
                features.insert("year", year)?;
            }
        }
        out.push((*line, row[id_col].clone(), features));
    }
    Ok(out)
}

/// Loads catalogs and the interaction log, keeps only whitelisted fields,
/// drops interactions on unknown items, then removes users below the
/// interaction floor.
pub fn load_dataset(config: &DatasetConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    let root = config.root.as_path();
    let item_path = root.join(&config.items.file.path);
    let mut items = ItemCatalog::new();
    for (line, id, features) in load_features(&config.items, root, config.derive_year_from.as_deref())? {
        let id: ItemId = parse_id(&id, &item_path, line)?;
        items.insert(Item::new(id, features));
    }

    let mut user_features: HashMap<UserId, FeatureMap> = HashMap::new();
    if let Some(spec) = &config.users {
        let path = root.join(&spec.file.path);
        for (line, id, features) in load_features(spec, root, None)? {
            user_features.insert(parse_id(&id, &path, line)?, features);
        }
    }

    let spec = &config.interactions;
    let (path, table) = spec.file.read(root)?;
    let user_col = table.column(&spec.user_col, &path)?;
    let item_col = table.column(&spec.item_col, &path)?;
    let time_col = table.column(&spec.time_col, &path)?;
    let label_col = spec.label_col.as_deref().map(|c| table.column(c, &path)).transpose()?;
    let mut records = Vec::with_capacity(table.rows.len());
    let mut unknown_items = 0usize;
    for (line, row) in &table.rows {
        let row_error = |message: String| DataError::Row {
            path: path.display().to_string(),
            line: *line,
            message,
        };
        let timestamp = parse_timestamp(&row[time_col])
            .ok_or_else(|| row_error(format!("unparseable timestamp {:?}", row[time_col])))?;
        let label = match label_col {
            Some(col) => Some(
                row[col]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| row_error(format!("unparseable label {:?}", row[col])))?,
            ),
            None => None,
        };
        if let (Some(min), Some(l)) = (spec.min_label, label) {
            if l < min {
                continue;
            }
        }
        let item: ItemId = parse_id(&row[item_col], &path, *line)?;
        if !items.contains(&item) {
            unknown_items += 1;
            continue;
        }
        records.push(Interaction {
            user: parse_id(&row[user_col], &path, *line)?,
            item,
            timestamp,
            label,
        });
    }
    if unknown_items > 0 {
        log::warn!("{}: dropped {unknown_items} interactions on items missing from the catalog", path.display());
    }

    let mut counts: HashMap<&UserId, usize> = HashMap::new();
    for r in &records {
        *counts.entry(&r.user).or_default() += 1;
    }
    let keep: std::collections::HashSet<UserId> = counts
        .into_iter()
        .filter(|(_, c)| *c >= config.min_interactions)
        .map(|(u, _)| u.clone())
        .collect();
    records.retain(|r| keep.contains(&r.user));

    let users = keep
        .into_iter()
        .map(|id| {
            let features = user_features.remove(&id).unwrap_or_default();
            (id.clone(), User::new(id, features))
        })
        .collect();
    Ok(Dataset {
        users,
        items,
        log: InteractionLog { records },
    })
}
