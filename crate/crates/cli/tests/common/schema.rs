//! A small draft-07 validator covering the keywords used by the files in
//! `schemas/`: `type`, `enum`, `properties`, `required`,
//! `additionalProperties` (boolean or schema), `items`, `minItems`,
//! `minimum`/`maximum`, `exclusiveMinimum`/`exclusiveMaximum`, `oneOf`,
//! `anyOf` and local `$ref`s into `#/definitions`. Any other keyword fails
//! loudly so a schema edit cannot silently weaken the tests.

use serde_json::{Map, Value};

const ANNOTATIONS: [&str; 5] = ["$schema", "$id", "title", "description", "definitions"];

pub fn validate(schema: &Value, doc: &Value) -> Vec<String> {
    let mut errors = Vec::new();
    check(schema, schema, doc, "", &mut errors);
    errors
}

fn resolve<'a>(root: &'a Value, reference: &str) -> &'a Value {
    let name = reference
        .strip_prefix("#/definitions/")
        .unwrap_or_else(|| panic!("unsupported $ref {reference}"));
    root.get("definitions")
        .and_then(|d| d.get(name))
        .unwrap_or_else(|| panic!("unresolved $ref {reference}"))
}

fn type_matches(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.as_i64().is_some() || v.as_u64().is_some() || v.as_f64().is_some_and(|x| x.fract() == 0.0),
        other => panic!("unsupported type {other}"),
    }
}

fn check(root: &Value, schema: &Value, doc: &Value, path: &str, errors: &mut Vec<String>) {
    let Some(obj) = schema.as_object() else {
        match schema {
            Value::Bool(true) => {}
            Value::Bool(false) => errors.push(format!("{path}: not allowed")),
            _ => panic!("malformed schema at {path}"),
        }
        return;
    };
    for (key, rule) in obj {
        match key.as_str() {
            k if ANNOTATIONS.contains(&k) => {}
            "$ref" => check(root, resolve(root, rule.as_str().unwrap()), doc, path, errors),
            "type" => {
                let ok = match rule {
                    Value::String(t) => type_matches(t, doc),
                    Value::Array(ts) => ts.iter().any(|t| type_matches(t.as_str().unwrap(), doc)),
                    _ => panic!("malformed type at {path}"),
                };
                if !ok {
                    errors.push(format!("{path}: expected type {rule}, got {doc}"));
                }
            }
            "enum" => {
                if !rule.as_array().unwrap().contains(doc) {
                    errors.push(format!("{path}: {doc} not in {rule}"));
                }
            }
            "minimum" | "maximum" | "exclusiveMinimum" | "exclusiveMaximum" => {
                let (Some(x), Some(bound)) = (doc.as_f64(), rule.as_f64()) else { continue };
                let ok = match key.as_str() {
                    "minimum" => x >= bound,
                    "maximum" => x <= bound,
                    "exclusiveMinimum" => x > bound,
                    _ => x < bound,
                };
                if !ok {
                    errors.push(format!("{path}: {x} violates {key} {bound}"));
                }
            }
            "minItems" => {
                if let Some(items) = doc.as_array() {
                    if (items.len() as u64) < rule.as_u64().unwrap() {
                        errors.push(format!("{path}: fewer than {rule} items"));
                    }
                }
            }
            "items" => {
                if let Some(items) = doc.as_array() {
                    for (i, item) in items.iter().enumerate() {
                        check(root, rule, item, &format!("{path}/{i}"), errors);
                    }
                }
            }
            "required" => {
                if let Some(map) = doc.as_object() {
                    for name in rule.as_array().unwrap() {
                        let name = name.as_str().unwrap();
                        if !map.contains_key(name) {
                            errors.push(format!("{path}: missing {name}"));
                        }
                    }
                }
            }
            "properties" => {
                if let Some(map) = doc.as_object() {
                    for (name, sub) in rule.as_object().unwrap() {
                        if let Some(v) = map.get(name) {
                            check(root, sub, v, &format!("{path}/{name}"), errors);
                        }
                    }
                }
            }
            "additionalProperties" => {
                if let Some(map) = doc.as_object() {
                    let empty = Map::new();
                    let known = obj.get("properties").and_then(Value::as_object).unwrap_or(&empty);
                    for (name, v) in map.iter().filter(|(n, _)| !known.contains_key(*n)) {
                        check(root, rule, v, &format!("{path}/{name}"), errors);
                    }
                }
            }
            "oneOf" | "anyOf" => {
                let passing = rule
                    .as_array()
                    .unwrap()
                    .iter()
                    .filter(|sub| {
                        let mut inner = Vec::new();
                        check(root, sub, doc, path, &mut inner);
                        inner.is_empty()
                    })
                    .count();
                let ok = if key == "oneOf" { passing == 1 } else { passing >= 1 };
                if !ok {
                    errors.push(format!("{path}: {passing} branches of {key} match"));
                }
            }
            other => panic!("unsupported schema keyword {other} at {path}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::validate;
    use serde_json::json;

    #[test]
    fn catches_each_keyword() {
        let schema = json!({
            "definitions": { "p": { "type": "number", "exclusiveMinimum": 0, "maximum": 1 } },
            "type": "object",
            "properties": {
                "p": { "$ref": "#/definitions/p" },
                "tag": { "enum": ["a", "b"] },
                "xs": { "type": "array", "minItems": 2, "items": { "type": "integer" } },
                "r": { "oneOf": [{ "type": "string" }, { "type": "integer", "minimum": 3 }] }
            },
            "required": ["p"],
            "additionalProperties": false
        });
        assert!(validate(&schema, &json!({ "p": 0.5, "tag": "a", "xs": [1, 2], "r": 4 })).is_empty());
        for bad in [
            json!({}),
            json!({ "p": 0.0 }),
            json!({ "p": 1.5 }),
            json!({ "p": 0.5, "tag": "c" }),
            json!({ "p": 0.5, "xs": [1] }),
            json!({ "p": 0.5, "xs": [1, 2.5] }),
            json!({ "p": 0.5, "r": 2 }),
            json!({ "p": 0.5, "extra": 1 }),
        ] {
            assert!(!validate(&schema, &bad).is_empty(), "{bad} accepted");
        }
    }
}
