use serde::Serialize;
use serde_json::Value;

/// Sorted keys, no insignificant whitespace, UTF-8. Object keys sort because
/// `serde_json::Map` is a `BTreeMap` unless `preserve_order` is enabled, which
/// this crate never does.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let value: Value = serde_json::to_value(value).expect("value serializes to JSON");
    serde_json::to_string(&value).expect("JSON value serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_recursively() {
        let v = json!({ "b": 1, "a": { "z": [3, { "y": 1, "x": 2 }], "c": null } });
        assert_eq!(canonical_json(&v), r#"{"a":{"c":null,"z":[3,{"x":2,"y":1}]},"b":1}"#);
    }

    #[test]
    fn non_ascii_is_emitted_as_utf8() {
        assert_eq!(canonical_json(&json!({ "k": "café" })), "{\"k\":\"café\"}");
    }

    #[test]
    fn floats_round_trip() {
        let value = json!({ "p": 0.1 + 0.2 });
        let text = canonical_json(&value);
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(canonical_json(&back), text);
    }
}
