//! JSON-Lines persistence for problem instances.
//!
//! One instance per line:
//!
//! ```text
//! {"kind":"cvrp","id":"...","capacity":20,"depot":[x,y],"customers":[{"xy":[x,y],"demand":3},...]}
//! {"kind":"tsp","id":"...","customers":[{"xy":[x,y]},...]}
//! ```
//!
//! Serialization goes through `serde_json`'s shortest-round-trip float
//! encoding, so a write/read cycle is lossless. Parse errors carry the
//! 1-based line number; a bad line aborts the whole read rather than
//! returning a partial list.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde_json::{json, Value};

use super::{Coord, CustomerSpec, Kind, ProblemInstance};
use crate::error::{Error, Result};

fn instance_to_json(inst: &ProblemInstance) -> Value {
    let customers: Vec<Value> = inst
        .customers
        .iter()
        .map(|c| match inst.kind {
            Kind::Cvrp => json!({"xy": [c.location.x, c.location.y], "demand": c.demand}),
            Kind::Tsp => json!({"xy": [c.location.x, c.location.y]}),
        })
        .collect();
    match inst.kind {
        Kind::Cvrp => {
            let depot = inst.depot.expect("cvrp instance has a depot");
            json!({
                "kind": "cvrp",
                "id": inst.id,
                "capacity": inst.capacity.expect("cvrp instance has a capacity"),
                "depot": [depot.x, depot.y],
                "customers": customers,
            })
        }
        Kind::Tsp => json!({
            "kind": "tsp",
            "id": inst.id,
            "customers": customers,
        }),
    }
}

fn field<'v>(v: &'v Value, line: usize, name: &str) -> Result<&'v Value> {
    v.get(name).ok_or_else(|| Error::Schema { line, field: name.into() })
}

fn coord_from(v: &Value, line: usize, name: &str) -> Result<Coord> {
    let arr = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| Error::Schema {
        line,
        field: name.into(),
    })?;
    let x = arr[0].as_f64().ok_or_else(|| Error::Schema { line, field: name.into() })?;
    let y = arr[1].as_f64().ok_or_else(|| Error::Schema { line, field: name.into() })?;
    Ok(Coord::new(x, y))
}

fn instance_from_json(v: &Value, line: usize) -> Result<ProblemInstance> {
    let kind = match field(v, line, "kind")?.as_str() {
        Some("cvrp") => Kind::Cvrp,
        Some("tsp") => Kind::Tsp,
        _ => return Err(Error::Schema { line, field: "kind".into() }),
    };
    let id = field(v, line, "id")?
        .as_str()
        .ok_or_else(|| Error::Schema { line, field: "id".into() })?
        .to_string();
    let raw_customers = field(v, line, "customers")?
        .as_array()
        .ok_or_else(|| Error::Schema { line, field: "customers".into() })?;
    let mut customers = Vec::with_capacity(raw_customers.len());
    for c in raw_customers {
        let location = coord_from(field(c, line, "xy")?, line, "xy")?;
        let demand = match kind {
            Kind::Cvrp => field(c, line, "demand")?
                .as_u64()
                .ok_or_else(|| Error::Schema { line, field: "demand".into() })?
                as u32,
            Kind::Tsp => 0,
        };
        customers.push(CustomerSpec { location, demand });
    }
    let (capacity, depot) = match kind {
        Kind::Cvrp => {
            let capacity = field(v, line, "capacity")?
                .as_u64()
                .ok_or_else(|| Error::Schema { line, field: "capacity".into() })?
                as u32;
            let depot = coord_from(field(v, line, "depot")?, line, "depot")?;
            (Some(capacity), Some(depot))
        }
        Kind::Tsp => (None, None),
    };
    ProblemInstance { kind, id, capacity, depot, customers }
        .validated()
        .map_err(|e| Error::Parse { line, detail: e.to_string() })
}

/// Writes instances as JSON Lines, one per line.
pub fn write_instances<P: AsRef<Path>>(path: P, instances: &[ProblemInstance]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for inst in instances {
        serde_json::to_writer(&mut w, &instance_to_json(inst))
            .map_err(|e| Error::Parse { line: 0, detail: e.to_string() })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a JSON-Lines instance file. Blank lines are skipped; any
/// malformed line fails the whole read with its line number.
pub fn read_instances<P: AsRef<Path>>(path: P) -> Result<Vec<ProblemInstance>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: lineno, detail: e.to_string() })?;
        out.push(instance_from_json(&value, lineno)?);
    }
    Ok(out)
}
