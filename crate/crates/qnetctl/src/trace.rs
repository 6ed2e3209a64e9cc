use serde_json::Value;

/// Lines `path = value` for every leaf of a JSON tree, in document order.
pub fn flatten(v: &Value) -> Vec<String> {
    let mut out = Vec::new();
    walk("", v, &mut out);
    out
}

fn walk(prefix: &str, v: &Value, out: &mut Vec<String>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                walk(&join(k), x, out);
            }
        }
        Value::Array(a) if a.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let items: Vec<String> = a.iter().map(leaf).collect();
            out.push(format!("{prefix} = [{}]", items.join(", ")));
        }
        Value::Array(a) => {
            for (k, x) in a.iter().enumerate() {
                walk(&join(&k.to_string()), x, out);
            }
        }
        _ => out.push(format!("{prefix} = {}", leaf(v))),
    }
}

fn leaf(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format!("{x:.6e}"),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
