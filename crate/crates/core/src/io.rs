//! Line-delimited, tab-separated record formats.
//!
//! ```text
//! item    <id>    <tag1,tag2,...>
//! user    <user>
//! like    <user>  <item>
//! dislike <user>  <item>
//! pair    <user>  <rec>   <other> <+1|-1>
//! pair    <user>  <rec>   <other> <label> <explicit|propagated>
//! sim     <item>  <item>  <cos>
//! pref    <user>  <f1,...,fd>     <objective>
//! relearn <user>
//! ```
//!
//! Vector files hold one `<id>\t<f1,...,fd>` line per item. Floats are written
//! in Rust's shortest round-trip form, so write → read is bit-exact. Blank
//! lines and lines starting with `#` are ignored.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Catalog, Dataset, FeedbackMatrix, ItemId, ItemVector, ItemVectors, LabelSource, UserId};
use crate::prefopt::PreferenceVector;
use crate::recwalk::{InteractionGraph, SimilarityMatrix};

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Item {
        id: ItemId,
        tags: Vec<String>,
    },
    User {
        user: UserId,
    },
    Like {
        user: UserId,
        item: ItemId,
    },
    Dislike {
        user: UserId,
        item: ItemId,
    },
    /// `source == None` is the explicit ±1 form written by raters.
    Pair {
        user: UserId,
        rec: ItemId,
        other: ItemId,
        label: f64,
        source: Option<LabelSource>,
    },
    Sim {
        a: ItemId,
        b: ItemId,
        cos: f64,
    },
    Pref {
        user: UserId,
        w: Vec<f64>,
        objective: f64,
    },
    Relearn {
        user: UserId,
    },
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Record::Item { id, tags } => write!(f, "item\t{id}\t{}", tags.join(",")),
            Record::User { user } => write!(f, "user\t{user}"),
            Record::Like { user, item } => write!(f, "like\t{user}\t{item}"),
            Record::Dislike { user, item } => write!(f, "dislike\t{user}\t{item}"),
            Record::Pair {
                user,
                rec,
                other,
                label,
                source: None,
            } => write!(
                f,
                "pair\t{user}\t{rec}\t{other}\t{}",
                if *label > 0.0 { "+1" } else { "-1" }
            ),
            Record::Pair {
                user,
                rec,
                other,
                label,
                source: Some(src),
            } => write!(f, "pair\t{user}\t{rec}\t{other}\t{label}\t{}", src.as_str()),
            Record::Sim { a, b, cos } => write!(f, "sim\t{a}\t{b}\t{cos}"),
            Record::Pref { user, w, objective } => {
                write!(f, "pref\t{user}\t{}\t{objective}", join_floats(w))
            }
            Record::Relearn { user } => write!(f, "relearn\t{user}"),
        }
    }
}

fn parse_float(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("invalid number `{s}`"))?;
    if !x.is_finite() {
        return Err(format!("non-finite number `{s}`"));
    }
    Ok(x)
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(parse_float).collect()
}

fn explicit_label(s: &str) -> std::result::Result<f64, String> {
    match s.trim() {
        "+1" | "1" => Ok(1.0),
        "-1" => Ok(-1.0),
        other => Err(format!("pair label must be +1 or -1, got `{other}`")),
    }
}

impl Record {
    /// Parses one non-empty, non-comment line.
    pub fn parse(line: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        let want = |n: usize| -> std::result::Result<(), String> {
            if fields.len() == n {
                Ok(())
            } else {
                Err(format!(
                    "`{}` record needs {} fields, found {}",
                    fields[0],
                    n,
                    fields.len()
                ))
            }
        };
        let item = |s: &str| ItemId::new(s.trim());
        let user = |s: &str| UserId::new(s.trim());
        match fields[0].trim() {
            "item" => {
                if fields.len() != 2 && fields.len() != 3 {
                    want(3)?;
                }
                let tags = fields
                    .get(2)
                    .map(|t| {
                        t.split(',')
                            .map(str::trim)
                            .filter(|t| !t.is_empty())
                            .map(String::from)
                            .collect()
                    })
                    .unwrap_or_default();
                Ok(Record::Item {
                    id: item(fields[1]),
                    tags,
                })
            }
            "user" => {
                want(2)?;
                Ok(Record::User { user: user(fields[1]) })
            }
            "like" => {
                want(3)?;
                Ok(Record::Like {
                    user: user(fields[1]),
                    item: item(fields[2]),
                })
            }
            "dislike" => {
                want(3)?;
                Ok(Record::Dislike {
                    user: user(fields[1]),
                    item: item(fields[2]),
                })
            }
            "pair" if fields.len() == 5 => Ok(Record::Pair {
                user: user(fields[1]),
                rec: item(fields[2]),
                other: item(fields[3]),
                label: explicit_label(fields[4])?,
                source: None,
            }),
            "pair" => {
                want(6)?;
                let label = parse_float(fields[4])?;
                if !(-1.0..=1.0).contains(&label) {
                    return Err(format!("pair label {label} outside [-1, 1]"));
                }
                let source = match fields[5].trim() {
                    "explicit" => LabelSource::Explicit,
                    "propagated" => LabelSource::Propagated,
                    other => return Err(format!("unknown label source `{other}`")),
                };
                Ok(Record::Pair {
                    user: user(fields[1]),
                    rec: item(fields[2]),
                    other: item(fields[3]),
                    label,
                    source: Some(source),
                })
            }
            "sim" => {
                want(4)?;
                Ok(Record::Sim {
                    a: item(fields[1]),
                    b: item(fields[2]),
                    cos: parse_float(fields[3])?,
                })
            }
            "pref" => {
                want(4)?;
                Ok(Record::Pref {
                    user: user(fields[1]),
                    w: parse_floats(fields[2])?,
                    objective: parse_float(fields[3])?,
                })
            }
            "relearn" => {
                want(2)?;
                Ok(Record::Relearn { user: user(fields[1]) })
            }
            other => Err(format!("unknown record type `{other}`")),
        }
    }
}

fn content_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((i + 1, trimmed.to_string()));
    }
    Ok(out)
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    content_lines(path)?
        .into_iter()
        .map(|(n, line)| Record::parse(&line).map_err(|m| parse_error(path, n, m)))
        .collect()
}

pub fn write_records<'a>(path: &Path, records: impl IntoIterator<Item = &'a Record>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for r in records {
        writeln!(out, "{r}")?;
    }
    out.flush()?;
    Ok(())
}

/// Appends records and flushes to disk before returning.
pub fn append_records<'a>(path: &Path, records: impl IntoIterator<Item = &'a Record>) -> Result<()> {
    let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = String::new();
    for r in records {
        buf.push_str(&r.to_string());
        buf.push('\n');
    }
    file.write_all(buf.as_bytes())?;
    file.sync_data()?;
    Ok(())
}

pub fn read_catalog(path: &Path) -> Result<Catalog> {
    let mut items = Vec::new();
    for (n, line) in content_lines(path)? {
        match Record::parse(&line).map_err(|m| parse_error(path, n, m))? {
            Record::Item { id, tags } => items.push((id, tags)),
            _ => return Err(parse_error(path, n, "catalog files hold only `item` records")),
        }
    }
    Catalog::register(items)
}

pub fn catalog_records(catalog: &Catalog) -> Vec<Record> {
    (0..catalog.len())
        .map(|ix| Record::Item {
            id: catalog.id(ix).clone(),
            tags: catalog.tag_names(ix).into_iter().map(String::from).collect(),
        })
        .collect()
}

/// Applies user/like/dislike/pair records. Users named by any record are
/// registered on first sight; other record types are ignored.
pub fn apply_records(dataset: &mut Dataset, records: &[Record]) -> Result<()> {
    for r in records {
        match r {
            Record::User { user } => {
                dataset.register_user(user.clone());
            }
            Record::Like { user, item } => {
                dataset.register_user(user.clone());
                dataset.record_item_feedback(user, item, true)?;
            }
            Record::Dislike { user, item } => {
                dataset.register_user(user.clone());
                dataset.record_item_feedback(user, item, false)?;
            }
            Record::Pair {
                user,
                rec,
                other,
                label,
                source: None | Some(LabelSource::Explicit),
            } => {
                dataset.register_user(user.clone());
                dataset.record_pair_feedback(user, rec, other, *label)?;
            }
            _ => {}
        }
    }
    Ok(())
}

/// Records that rebuild `dataset`'s users, histories, dislikes and pair ratings.
pub fn dataset_records(dataset: &Dataset) -> Vec<Record> {
    let mut out = Vec::new();
    for (u, user) in dataset.users().iter().enumerate() {
        out.push(Record::User { user: user.clone() });
        let profile = dataset.profile(u);
        for &v in profile.history() {
            out.push(Record::Like {
                user: user.clone(),
                item: dataset.catalog.id(v).clone(),
            });
        }
        for &v in profile.dislikes() {
            out.push(Record::Dislike {
                user: user.clone(),
                item: dataset.catalog.id(v).clone(),
            });
        }
        out.extend(feedback_records(&dataset.catalog, user, dataset.feedback(u), false));
    }
    out
}

/// `pair` records for a matrix; `with_source` selects the densified format.
pub fn feedback_records(catalog: &Catalog, user: &UserId, matrix: &FeedbackMatrix, with_source: bool) -> Vec<Record> {
    matrix
        .iter()
        .map(|e| Record::Pair {
            user: user.clone(),
            rec: catalog.id(e.rec).clone(),
            other: catalog.id(e.other).clone(),
            label: e.label,
            source: with_source.then_some(e.source),
        })
        .collect()
}

/// Reads a densified dump back into a matrix, keeping records of `user` only.
pub fn feedback_from_records(catalog: &Catalog, user: &UserId, records: &[Record]) -> Result<FeedbackMatrix> {
    let mut m = FeedbackMatrix::new();
    for r in records {
        if let Record::Pair {
            user: u,
            rec,
            other,
            label,
            source,
        } = r
        {
            if u != user {
                continue;
            }
            let (a, b) = (catalog.lookup(rec)?, catalog.lookup(other)?);
            match source.unwrap_or(LabelSource::Explicit) {
                LabelSource::Explicit => m.insert_explicit(a, b, *label)?,
                LabelSource::Propagated => m.insert_propagated(a, b, *label)?,
            }
        }
    }
    Ok(m)
}

pub fn save_vectors(path: &Path, catalog: &Catalog, vectors: &ItemVectors) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for (ix, row) in vectors.rows().iter().enumerate() {
        writeln!(out, "{}\t{}", catalog.id(ix), join_floats(row.as_slice()))?;
    }
    out.flush()?;
    Ok(())
}

/// Loads vectors and orders them by catalog index. Every catalog item needs
/// exactly one row; `expected_dim` (when given) must match the file.
pub fn load_vectors(path: &Path, catalog: &Catalog, expected_dim: Option<usize>) -> Result<ItemVectors> {
    let mut rows: Vec<Option<ItemVector>> = vec![None; catalog.len()];
    let mut dim = expected_dim;
    for (n, line) in content_lines(path)? {
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| parse_error(path, n, "expected `<id>\\t<f1,...,fd>`"))?;
        let values = parse_floats(values).map_err(|m| parse_error(path, n, m))?;
        match dim {
            Some(d) if d != values.len() => {
                return Err(parse_error(
                    path,
                    n,
                    format!("row has {} values, expected {d}", values.len()),
                ));
            }
            None => dim = Some(values.len()),
            _ => {}
        }
        let ix = catalog
            .lookup(&ItemId::new(id.trim()))
            .map_err(|e| parse_error(path, n, e.to_string()))?;
        if rows[ix].is_some() {
            return Err(parse_error(path, n, format!("duplicate vector for `{id}`")));
        }
        rows[ix] = Some(ItemVector(values));
    }
    let dim = dim.ok_or(Error::Empty("vector file"))?;
    let rows: Vec<ItemVector> = rows
        .into_iter()
        .enumerate()
        .map(|(ix, r)| r.ok_or_else(|| Error::UnknownItem(format!("{} has no vector", catalog.id(ix)))))
        .collect::<Result<_>>()?;
    let vectors = ItemVectors::new(dim, rows)?;
    if !vectors.is_non_negative() {
        log::warn!(
            "{}: vectors contain negative entries (not an NMF embedding)",
            path.display()
        );
    }
    Ok(vectors)
}

pub fn pref_record(user: &UserId, pref: &PreferenceVector) -> Record {
    Record::Pref {
        user: user.clone(),
        w: pref.w.clone(),
        objective: pref.objective,
    }
}

/// Like edges of every user plus every similarity edge.
pub fn graph_records(graph: &InteractionGraph, dataset: &Dataset) -> Vec<Record> {
    let catalog = &dataset.catalog;
    let mut out = Vec::new();
    for u in 0..graph.users() {
        for &v in graph.likes(u) {
            out.push(Record::Like {
                user: dataset.user_id(u).clone(),
                item: catalog.id(v).clone(),
            });
        }
    }
    for (i, j, cos) in graph.similarity().edges() {
        out.push(Record::Sim {
            a: catalog.id(i).clone(),
            b: catalog.id(j).clone(),
            cos,
        });
    }
    out
}

/// Similarity matrix from the `sim` records of a graph dump.
pub fn similarity_from_records(catalog: &Catalog, records: &[Record]) -> Result<SimilarityMatrix> {
    let mut edges = Vec::new();
    for r in records {
        if let Record::Sim { a, b, cos } = r {
            edges.push((catalog.lookup(a)?, catalog.lookup(b)?, *cos));
        }
    }
    SimilarityMatrix::from_edges(catalog.len(), edges)
}
