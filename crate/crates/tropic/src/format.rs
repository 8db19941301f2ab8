//! JSON documents for spaces, configurations, Markov chains and couplings.
//!
//! Rationals are always written as `"num/den"` strings. Atoms are JSON
//! integers, strings, or arrays of atoms; inside map objects they are keyed
//! by their display form.
use std::collections::BTreeMap;

use serde_json::{json, Map, Value};
use tropic_core::config::Configuration;
use tropic_core::metric::CouplingWitness;
use tropic_core::rational::{self, Rational};
use tropic_core::shape::DiagramShape;
use tropic_core::space::{Label, ProbabilitySpace};
use tropic_core::tropical::MarkovChain;

use crate::error::CliError;

fn bad(what: impl Into<String>) -> CliError {
    CliError::Format(what.into())
}

pub fn parse_document(text: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse(format!("invalid JSON: {e}")))
}

pub fn label_to_json(l: &Label) -> Value {
    match l {
        Label::Int(i) => json!(i),
        Label::Str(s) => json!(s),
        Label::Tuple(items) => Value::Array(items.iter().map(label_to_json).collect()),
    }
}

pub fn label_from_json(v: &Value) -> Result<Label, CliError> {
    match v {
        Value::Number(n) => n.as_i64().map(Label::Int).ok_or_else(|| bad(format!("atom {n} is not an integer"))),
        Value::String(s) => Ok(Label::Str(s.clone())),
        Value::Array(items) => Ok(Label::Tuple(items.iter().map(label_from_json).collect::<Result<_, _>>()?)),
        other => Err(bad(format!("atom {other} must be an integer, string or array"))),
    }
}

pub fn rational_from_json(v: &Value) -> Result<Rational, CliError> {
    let s = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => return Err(bad(format!("weight {other} must be a \"num/den\" string"))),
    };
    rational::parse(&s).map_err(|e| CliError::Parse(e.to_string()))
}

fn field<'a>(v: &'a Value, key: &str, owner: &str) -> Result<&'a Value, CliError> {
    v.get(key).ok_or_else(|| bad(format!("{owner} has no \"{key}\"")))
}

fn array<'a>(v: &'a Value, owner: &str) -> Result<&'a Vec<Value>, CliError> {
    v.as_array().ok_or_else(|| bad(format!("{owner} must be an array")))
}

pub fn space_to_json(p: &ProbabilitySpace) -> Value {
    json!({
        "atoms": p.atoms().iter().map(label_to_json).collect::<Vec<_>>(),
        "weights": p.atoms().iter().zip(p.weights())
            .map(|(a, w)| json!([label_to_json(a), rational::format(w)]))
            .collect::<Vec<_>>(),
    })
}

pub fn space_from_json(v: &Value, name: &str) -> Result<ProbabilitySpace, CliError> {
    let atoms: Vec<Label> =
        array(field(v, "atoms", name)?, name)?.iter().map(label_from_json).collect::<Result<_, _>>()?;
    let mut weights: BTreeMap<Label, Rational> = BTreeMap::new();
    for entry in array(field(v, "weights", name)?, name)? {
        let pair = entry.as_array().filter(|p| p.len() == 2).ok_or_else(|| bad(format!("{name}: weight entries are [atom, \"num/den\"]")))?;
        let atom = label_from_json(&pair[0])?;
        if weights.insert(atom.clone(), rational_from_json(&pair[1])?).is_some() {
            return Err(bad(format!("{name}: atom {atom} weighted twice")));
        }
    }
    let mut ordered = Vec::with_capacity(atoms.len());
    for a in &atoms {
        ordered.push(weights.remove(a).ok_or_else(|| bad(format!("{name}: atom {a} has no weight")))?);
    }
    if let Some(a) = weights.keys().next() {
        return Err(bad(format!("{name}: weight given for unknown atom {a}")));
    }
    ProbabilitySpace::new(atoms, ordered).map_err(|e| bad(format!("{name}: {e}")))
}

fn keyed_atoms(p: &ProbabilitySpace, name: &str) -> Result<BTreeMap<String, usize>, CliError> {
    let mut out = BTreeMap::new();
    for (k, a) in p.atoms().iter().enumerate() {
        if out.insert(a.to_string(), k).is_some() {
            return Err(bad(format!("{name}: two atoms display as {a}")));
        }
    }
    Ok(out)
}

pub fn configuration_to_json(c: &Configuration) -> Value {
    let shape = c.shape();
    let names = shape.names();
    let mut spaces = Map::new();
    for (i, n) in names.iter().enumerate() {
        spaces.insert(n.clone(), space_to_json(c.space(i)));
    }
    let mut maps = Map::new();
    for &(i, j) in shape.generators() {
        let m = c.map(i, j).expect("generating arrows carry maps");
        let (si, sj) = (c.space(i), c.space(j));
        let table: Map<String, Value> =
            si.atoms().iter().zip(m).map(|(a, &b)| (a.to_string(), json!(sj.atoms()[b].to_string()))).collect();
        maps.insert(format!("{i}->{j}"), Value::Object(table));
    }
    json!({
        "shape": { "objects": names, "arrows": shape.generators().iter().map(|&(i, j)| json!([i, j])).collect::<Vec<_>>() },
        "spaces": spaces,
        "maps": maps,
    })
}

pub fn configuration_from_json(v: &Value) -> Result<Configuration, CliError> {
    if v.get("atoms").is_some() {
        return Ok(Configuration::single(space_from_json(v, "space")?));
    }
    let shape_v = field(v, "shape", "configuration")?;
    let names: Vec<String> = array(field(shape_v, "objects", "shape")?, "shape objects")?
        .iter()
        .map(|o| o.as_str().map(str::to_string).ok_or_else(|| bad("object names must be strings")))
        .collect::<Result<_, _>>()?;
    let mut arrows = Vec::new();
    for a in array(field(shape_v, "arrows", "shape")?, "shape arrows")? {
        let pair = a
            .as_array()
            .filter(|p| p.len() == 2)
            .and_then(|p| Some((p[0].as_u64()? as usize, p[1].as_u64()? as usize)))
            .ok_or_else(|| bad(format!("arrow {a} must be [i, j]")))?;
        arrows.push(pair);
    }
    let shape = DiagramShape::new(names.clone(), arrows.clone()).map_err(|e| bad(e.to_string()))?;
    let spaces_v = field(v, "spaces", "configuration")?;
    let spaces: Vec<ProbabilitySpace> = names
        .iter()
        .map(|n| space_from_json(spaces_v.get(n).ok_or_else(|| bad(format!("no space for object {n}")))?, n))
        .collect::<Result<_, _>>()?;
    let maps_v = field(v, "maps", "configuration")?.as_object().ok_or_else(|| bad("maps must be an object"))?;
    let mut maps = BTreeMap::new();
    for (key, table) in maps_v {
        let (i, j) = key
            .split_once("->")
            .and_then(|(a, b)| Some((resolve(a, &names)?, resolve(b, &names)?)))
            .ok_or_else(|| bad(format!("map key {key} must be \"i->j\"")))?;
        let arrow = format!("{}->{}", names[i], names[j]);
        let (src, tgt) = (keyed_atoms(&spaces[i], &names[i])?, keyed_atoms(&spaces[j], &names[j])?);
        let table = table.as_object().ok_or_else(|| bad(format!("map {arrow} must be an object")))?;
        let mut m = vec![usize::MAX; spaces[i].len()];
        for (a, b) in table {
            let ai = *src.get(a).ok_or_else(|| bad(format!("map {arrow}: unknown source atom {a}")))?;
            let b = b.as_str().map(str::to_string).unwrap_or_else(|| b.to_string());
            m[ai] = *tgt.get(&b).ok_or_else(|| bad(format!("map {arrow}: unknown target atom {b}")))?;
        }
        if let Some(k) = m.iter().position(|&t| t == usize::MAX) {
            return Err(bad(format!("map {arrow} undefined on atom {}", spaces[i].atoms()[k])));
        }
        maps.insert((i, j), m);
    }
    Configuration::new(shape, spaces, maps).map_err(|e| bad(e.to_string()))
}

fn resolve(token: &str, names: &[String]) -> Option<usize> {
    let t = token.trim();
    t.parse::<usize>().ok().filter(|&i| i < names.len()).or_else(|| names.iter().position(|n| n == t))
}

pub fn markov_from_json(v: &Value) -> Result<MarkovChain, CliError> {
    let states: Vec<Label> =
        array(field(v, "states", "chain")?, "states")?.iter().map(label_from_json).collect::<Result<_, _>>()?;
    let rows = array(field(v, "transition", "chain")?, "transition")?
        .iter()
        .map(|r| array(r, "transition row")?.iter().map(rational_from_json).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let initial = match v.get("initial") {
        None | Some(Value::Null) => None,
        Some(r) => Some(array(r, "initial")?.iter().map(rational_from_json).collect::<Result<Vec<_>, _>>()?),
    };
    MarkovChain::new(states, rows, initial).map_err(|e| bad(format!("chain: {e}")))
}

pub fn markov_to_json(c: &MarkovChain) -> Value {
    let row = |r: &[Rational]| r.iter().map(rational::format).collect::<Vec<_>>();
    json!({
        "states": c.states.iter().map(label_to_json).collect::<Vec<_>>(),
        "transition": c.transition.iter().map(|r| row(r)).collect::<Vec<_>>(),
        "initial": row(&c.initial),
    })
}

/// A coupling of the initial spaces of `x` and `y`, with its kd value.
pub fn witness_to_json(x: &Configuration, y: &Configuration, w: &CouplingWitness) -> Value {
    let (x0, y0) = (x.initial_space().expect("complete"), y.initial_space().expect("complete"));
    json!({
        "rows": x0.atoms().iter().map(label_to_json).collect::<Vec<_>>(),
        "cols": y0.atoms().iter().map(label_to_json).collect::<Vec<_>>(),
        "cells": w.coupling.cells.iter()
            .map(|(a, b, v)| json!([label_to_json(&x0.atoms()[*a]), label_to_json(&y0.atoms()[*b]), rational::format(v)]))
            .collect::<Vec<_>>(),
        "kd": w.kd_value,
        "method": w.optimality.tag(),
    })
}

/// Reads a coupling document back as a dense `|X_0| x |Y_0|` matrix.
pub fn coupling_from_json(v: &Value, x: &Configuration, y: &Configuration) -> Result<Vec<Rational>, CliError> {
    let (x0, y0) = (x.initial_space().map_err(|e| bad(e.to_string()))?, y.initial_space().map_err(|e| bad(e.to_string()))?);
    let (rx, ry) = (x0.index(), y0.index());
    let mut m = vec![Rational::from_integer(0.into()); x0.len() * y0.len()];
    for cell in array(field(v, "cells", "coupling")?, "cells")? {
        let c = cell.as_array().filter(|c| c.len() == 3).ok_or_else(|| bad("coupling cells are [x, y, \"num/den\"]"))?;
        let (a, b) = (label_from_json(&c[0])?, label_from_json(&c[1])?);
        let i = *rx.get(&a).ok_or_else(|| bad(format!("coupling: unknown atom {a}")))?;
        let j = *ry.get(&b).ok_or_else(|| bad(format!("coupling: unknown atom {b}")))?;
        m[i * y0.len() + j] += rational_from_json(&c[2])?;
    }
    Ok(m)
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use tropic_core::infoopt::{cell_fan, example1_cells};
    use tropic_core::rational::rat;

    #[test]
    fn spaces_round_trip() {
        let p = ProbabilitySpace::new(
            vec![Label::Int(3), Label::str("b"), Label::pair(Label::Int(1), Label::str("z"))],
            vec![rat(1, 3), rat(1, 6), rat(1, 2)],
        )
        .unwrap();
        let text = to_pretty(&space_to_json(&p));
        assert_eq!(space_from_json(&parse_document(&text).unwrap(), "p").unwrap(), p);
    }

    #[test]
    fn configurations_round_trip() {
        let c = cell_fan(&example1_cells()).unwrap();
        let back = configuration_from_json(&configuration_to_json(&c)).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn violations_are_format_errors() {
        let missing = json!({"atoms": [0, 1], "weights": [[0, "1/2"]]});
        assert!(matches!(space_from_json(&missing, "p"), Err(CliError::Format(_))));
        let short = json!({"atoms": [0, 1], "weights": [[0, "1/2"], [1, "1/3"]]});
        assert!(matches!(space_from_json(&short, "p"), Err(CliError::Format(_))));
        let garbled = json!({"atoms": [0], "weights": [[0, "one"]]});
        assert!(matches!(space_from_json(&garbled, "p"), Err(CliError::Parse(_))));
        let mut doc = configuration_to_json(&cell_fan(&example1_cells()).unwrap());
        doc["maps"]["0->1"]["(0,0)"] = json!("5");
        let err = configuration_from_json(&doc).unwrap_err().to_string();
        assert!(err.contains("12->1"), "{err}");
    }

    #[test]
    fn chains_round_trip() {
        let c = MarkovChain::flip(rat(1, 4)).unwrap();
        assert_eq!(markov_from_json(&markov_to_json(&c)).unwrap(), c);
        let no_initial = json!({"states": [0, 1], "transition": [["3/4", "1/4"], ["1/4", "3/4"]]});
        assert_eq!(markov_from_json(&no_initial).unwrap(), c);
    }
}
