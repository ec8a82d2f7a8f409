//! Machine-readable JSON reports.
//!
//! Every report is an object with `schema` and `kind` fields followed by the
//! body's own fields. Map-valued fields are sorted, so identical inputs give
//! byte-identical reports.

use serde::Serialize;

pub const REPORT_SCHEMA: &str = "hugbot-report/1";

#[derive(Serialize)]
struct Envelope<'a, T> {
    schema: &'static str,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

pub fn to_json<T: Serialize>(kind: &str, body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope { schema: REPORT_SCHEMA, kind, body })
        .expect("report bodies always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Body {
        accuracy: f64,
    }

    #[test]
    fn envelope_fields_come_first() {
        let v: serde_json::Value = serde_json::from_str(&to_json("train", &Body { accuracy: 0.5 })).unwrap();
        assert_eq!(v["schema"], REPORT_SCHEMA);
        assert_eq!(v["kind"], "train");
        assert_eq!(v["accuracy"], 0.5);
    }
}
