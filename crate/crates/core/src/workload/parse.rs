//! Parser for the declarative workload format (grammar in docs/WORKLOAD.md).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::storage::{ColumnRef, Schema, TableId, ValueRange};
use crate::workload::query::{Batch, DimSet, Predicate, Query, Workload};

#[derive(Clone, Debug)]
struct RandomFilter {
    column: ColumnRef,
    width: i64,
    within: (i64, i64),
    step: i64,
}

#[derive(Clone, Debug, Default)]
struct Template {
    joins: DimSet,
    random: Vec<RandomFilter>,
    fixed: Vec<Predicate>,
    sum: Option<usize>,
    group: Option<usize>,
}

#[derive(PartialEq)]
enum Section {
    None,
    Schema,
    Template(String),
    Batch(usize, bool),
}

pub fn parse_workload(text: &str) -> Result<Workload> {
    parse_workload_with(text, 512)
}

/// Parses a workload file; batches larger than `width` queries are rejected.
pub fn parse_workload_with(text: &str, width: usize) -> Result<Workload> {
    let mut schema: Option<Schema> = None;
    let mut templates: HashMap<String, Template> = HashMap::new();
    let mut tuning = Vec::new();
    let mut runtime = Vec::new();
    let mut batch_rng: Option<ChaCha8Rng> = None;
    let mut batch_lines: Vec<usize> = Vec::new();
    let mut section = Section::None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let err = |m: String| Error::parse(line_no, m);
        let head = toks[0];

        if head == "end" {
            if section == Section::None {
                return Err(err("`end` outside a section".into()));
            }
            if let Section::Batch(idx, tune) = section {
                let batch: &Batch = if tune { &tuning[idx] } else { &runtime[idx] };
                if batch.queries.len() > width {
                    return Err(err(format!(
                        "batch `{}` has {} queries, more than the query-set width {width}",
                        batch.name,
                        batch.queries.len()
                    )));
                }
            }
            section = Section::None;
            continue;
        }

        match &section {
            Section::None => match head {
                "schema" => {
                    if schema.is_some() {
                        return Err(err("duplicate schema section".into()));
                    }
                    section = Section::Schema;
                }
                "template" => {
                    schema_ref(&schema, line_no)?;
                    let name = toks.get(1).ok_or_else(|| err("template needs a name".into()))?;
                    if templates.contains_key(*name) {
                        return Err(err(format!("duplicate template `{name}`")));
                    }
                    templates.insert(name.to_string(), Template::default());
                    section = Section::Template(name.to_string());
                }
                "batch" => {
                    schema_ref(&schema, line_no)?;
                    let name = toks.get(1).ok_or_else(|| err("batch needs a name".into()))?;
                    let kind = toks.get(2).copied().unwrap_or("");
                    let tune = match kind {
                        "tune" => true,
                        "run" => false,
                        other => {
                            return Err(err(format!(
                                "batch kind must be `tune` or `run`, got `{other}`"
                            )))
                        }
                    };
                    let kv = key_values(&toks[3..], line_no)?;
                    let seed = match kv.get("seed") {
                        Some(s) => parse_num::<u64>(s, "seed", line_no)?,
                        None => 0,
                    };
                    batch_rng = Some(ChaCha8Rng::seed_from_u64(seed));
                    let target = if tune { &mut tuning } else { &mut runtime };
                    target.push(Batch::new(name, Vec::new()));
                    batch_lines.push(line_no);
                    section = Section::Batch(target.len() - 1, tune);
                }
                other => return Err(err(format!("unexpected `{other}` at top level"))),
            },
            Section::Schema => {
                schema_line(&mut schema, &toks, line_no)?;
            }
            Section::Template(name) => {
                let s = schema_ref(&schema, line_no)?;
                let t = templates.get_mut(name).expect("template registered");
                template_line(s, t, &toks, line_no)?;
            }
            Section::Batch(idx, tune) => {
                let s = schema_ref(&schema, line_no)?;
                let rng = batch_rng.as_mut().expect("batch rng");
                let batch = if *tune { &mut tuning[*idx] } else { &mut runtime[*idx] };
                batch_line(s, &templates, batch, rng, &toks, line_no)?;
            }
        }
    }
    if section != Section::None {
        return Err(Error::parse(text.lines().count(), "missing `end`"));
    }
    let schema = schema.ok_or_else(|| Error::parse(1, "workload has no schema section"))?;
    schema
        .validate()
        .map_err(|e| Error::parse(1, format!("invalid schema: {e}")))?;
    Ok(Workload {
        schema,
        tuning,
        runtime,
    })
}

fn schema_ref(schema: &Option<Schema>, line: usize) -> Result<&Schema> {
    schema
        .as_ref()
        .ok_or_else(|| Error::parse(line, "schema section must come first"))
}

fn key_values<'a>(toks: &[&'a str], line: usize) -> Result<HashMap<&'a str, &'a str>> {
    let mut out = HashMap::new();
    for t in toks {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("expected key=value, got `{t}`")))?;
        if out.insert(k, v).is_some() {
            return Err(Error::parse(line, format!("duplicate field `{k}`")));
        }
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(s: &str, field: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(line, format!("field `{field}`: bad number `{s}`")))
}

fn parse_span(s: &str, field: &str, line: usize) -> Result<(i64, i64)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::parse(line, format!("field `{field}`: expected lo..hi, got `{s}`")))?;
    let lo = parse_num::<i64>(a, field, line)?;
    let hi = parse_num::<i64>(b, field, line)?;
    if lo >= hi {
        return Err(Error::parse(line, format!("field `{field}`: empty range {lo}..{hi}")));
    }
    Ok((lo, hi))
}

fn require<'a>(kv: &HashMap<&str, &'a str>, key: &str, line: usize) -> Result<&'a str> {
    kv.get(key)
        .copied()
        .ok_or_else(|| Error::parse(line, format!("missing field `{key}`")))
}

fn schema_line(schema: &mut Option<Schema>, toks: &[&str], line: usize) -> Result<()> {
    let wrap = |e: Error| Error::parse(line, e.to_string());
    match toks[0] {
        "fact" => {
            if schema.is_some() {
                return Err(Error::parse(line, "fact table declared twice"));
            }
            let name = toks.get(1).ok_or_else(|| Error::parse(line, "fact needs a name"))?;
            let kv = key_values(&toks[2..], line)?;
            let rows = parse_num::<usize>(require(&kv, "rows", line)?, "rows", line)?;
            *schema = Some(Schema::new(name, rows));
        }
        "dimension" => {
            let s = schema
                .as_mut()
                .ok_or_else(|| Error::parse(line, "declare the fact table first"))?;
            let name = toks.get(1).ok_or_else(|| Error::parse(line, "dimension needs a name"))?;
            let kv = key_values(&toks[2..], line)?;
            let rows = parse_num::<usize>(require(&kv, "rows", line)?, "rows", line)?;
            let key = require(&kv, "key", line)?;
            s.add_dimension(name, rows, key).map_err(wrap)?;
        }
        "column" => {
            let s = schema
                .as_mut()
                .ok_or_else(|| Error::parse(line, "declare the fact table first"))?;
            let qualified = toks.get(1).ok_or_else(|| Error::parse(line, "column needs table.name"))?;
            let (t, c) = qualified
                .split_once('.')
                .ok_or_else(|| Error::parse(line, format!("expected table.column, got `{qualified}`")))?;
            let kv = key_values(&toks[2..], line)?;
            let (lo, hi) = parse_span(require(&kv, "domain", line)?, "domain", line)?;
            let (lo, hi) = (to_i32(lo, line)?, to_i32(hi, line)?);
            match s.resolve_table(t) {
                Some(TableId::Fact) => {
                    s.add_fact_column(c, lo, hi).map_err(wrap)?;
                }
                Some(TableId::Dim(d)) => {
                    s.add_dim_column(d, c, lo, hi).map_err(wrap)?;
                }
                None => return Err(Error::parse(line, format!("unknown table `{t}`"))),
            }
        }
        other => return Err(Error::parse(line, format!("unexpected `{other}` in schema"))),
    }
    Ok(())
}

fn to_i32(v: i64, line: usize) -> Result<i32> {
    i32::try_from(v).map_err(|_| Error::parse(line, format!("value {v} does not fit 32 bits")))
}

fn parse_joins(schema: &Schema, list: &str, line: usize) -> Result<DimSet> {
    let mut set = DimSet::EMPTY;
    for name in list.split(',').filter(|s| !s.is_empty()) {
        match schema.resolve_table(name) {
            Some(TableId::Dim(d)) => set = set.with(d),
            _ => return Err(Error::parse(line, format!("unknown dimension `{name}`"))),
        }
    }
    Ok(set)
}

fn resolve(schema: &Schema, qualified: &str, line: usize) -> Result<ColumnRef> {
    schema
        .resolve_column(qualified)
        .map_err(|e| Error::parse(line, e.to_string().replace("configuration error: ", "")))
}

fn fact_column(schema: &Schema, qualified: &str, line: usize) -> Result<usize> {
    let c = resolve(schema, qualified, line)?;
    if c.table != TableId::Fact {
        return Err(Error::parse(line, format!("`{qualified}` is not a fact column")));
    }
    Ok(c.column)
}

fn template_line(schema: &Schema, t: &mut Template, toks: &[&str], line: usize) -> Result<()> {
    let arg = |i: usize| {
        toks.get(i)
            .copied()
            .ok_or_else(|| Error::parse(line, format!("`{}` needs an argument", toks[0])))
    };
    match toks[0] {
        "join" => t.joins = parse_joins(schema, arg(1)?, line)?,
        "filter" => {
            let column = resolve(schema, arg(1)?, line)?;
            let kv = key_values(&toks[2..], line)?;
            let width = parse_num::<i64>(require(&kv, "width", line)?, "width", line)?;
            let def = schema.column(column);
            let within = match kv.get("within") {
                Some(s) => parse_span(s, "within", line)?,
                None => (def.lo as i64, def.hi as i64),
            };
            let step = match kv.get("step") {
                Some(s) => parse_num::<i64>(s, "step", line)?,
                None => 1,
            };
            if width <= 0 || step <= 0 || within.1 - within.0 < width {
                return Err(Error::parse(line, "filter needs 0 < width <= window and step > 0"));
            }
            t.random.push(RandomFilter {
                column,
                width,
                within,
                step,
            });
        }
        "range" => {
            let column = resolve(schema, arg(1)?, line)?;
            let (lo, hi) = parse_span(arg(2)?, "range", line)?;
            t.fixed.push(Predicate {
                column,
                range: ValueRange::new(lo, hi),
            });
        }
        "sum" => t.sum = Some(fact_column(schema, arg(1)?, line)?),
        "group" => t.group = Some(fact_column(schema, arg(1)?, line)?),
        other => return Err(Error::parse(line, format!("unexpected `{other}` in template"))),
    }
    Ok(())
}

fn batch_line(
    schema: &Schema,
    templates: &HashMap<String, Template>,
    batch: &mut Batch,
    rng: &mut ChaCha8Rng,
    toks: &[&str],
    line: usize,
) -> Result<()> {
    match toks[0] {
        "use" => {
            let name = toks.get(1).ok_or_else(|| Error::parse(line, "use needs a template"))?;
            let t = templates
                .get(*name)
                .ok_or_else(|| Error::parse(line, format!("unknown template `{name}`")))?;
            let kv = key_values(&toks[2..], line)?;
            let count = match kv.get("count") {
                Some(s) => parse_num::<usize>(s, "count", line)?,
                None => 1,
            };
            let shift = match kv.get("shift") {
                Some(s) => parse_num::<i64>(s, "shift", line)?,
                None => 0,
            };
            let sum = t
                .sum
                .ok_or_else(|| Error::parse(line, format!("template `{name}` has no sum")))?;
            for f in &t.random {
                let def = schema.column(f.column);
                let (lo, hi) = (f.within.0 + shift, f.within.1 + shift);
                if lo < def.lo as i64 || hi > def.hi as i64 {
                    return Err(Error::parse(
                        line,
                        format!("shift {shift} moves `{}` outside its domain", schema.column_name(f.column)),
                    ));
                }
            }
            for i in 0..count {
                let mut filters = t.fixed.clone();
                for f in &t.random {
                    let slots = (f.within.1 - f.within.0 - f.width) / f.step;
                    let lo = f.within.0 + shift + f.step * rng.random_range(0..=slots);
                    filters.push(Predicate {
                        column: f.column,
                        range: ValueRange::new(lo, lo + f.width),
                    });
                }
                let q = Query {
                    name: format!("{name}#{i}"),
                    joins: t.joins,
                    filters,
                    sum,
                    group_by: t.group,
                };
                q.validate(schema).map_err(|e| Error::parse(line, e.to_string()))?;
                batch.queries.push(q);
            }
        }
        "query" => {
            let mut joins = DimSet::EMPTY;
            let mut filters = Vec::new();
            let mut sum = None;
            let mut group = None;
            let mut name = None;
            for tok in &toks[1..] {
                let (k, v) = tok
                    .split_once('=')
                    .ok_or_else(|| Error::parse(line, format!("expected key=value, got `{tok}`")))?;
                match k {
                    "join" => joins = parse_joins(schema, v, line)?,
                    "filter" => {
                        let (col, span) = v.rsplit_once(':').ok_or_else(|| {
                            Error::parse(line, format!("filter must be table.col:lo..hi, got `{v}`"))
                        })?;
                        let column = resolve(schema, col, line)?;
                        let (lo, hi) = parse_span(span, "filter", line)?;
                        filters.push(Predicate {
                            column,
                            range: ValueRange::new(lo, hi),
                        });
                    }
                    "sum" => sum = Some(fact_column(schema, v, line)?),
                    "group" => group = Some(fact_column(schema, v, line)?),
                    "name" => name = Some(v.to_string()),
                    other => return Err(Error::parse(line, format!("unknown field `{other}`"))),
                }
            }
            let q = Query {
                name: name.unwrap_or_else(|| format!("q{}", batch.queries.len())),
                joins,
                filters,
                sum: sum.ok_or_else(|| Error::parse(line, "missing field `sum`"))?,
                group_by: group,
            };
            q.validate(schema).map_err(|e| Error::parse(line, e.to_string()))?;
            batch.queries.push(q);
        }
        other => return Err(Error::parse(line, format!("unexpected `{other}` in batch"))),
    }
    Ok(())
}
