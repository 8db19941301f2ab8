use std::fmt::Write;

/// Output of one command: `key=value` rows for machines and free text for people.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub rows: Vec<(String, String)>,
    pub human: String,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Self { command: command.to_string(), seed, ..Self::default() }
    }

    pub fn row(&mut self, key: impl Into<String>, value: impl ToString) {
        self.rows.push((key.into(), value.to_string()));
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.row(key, fmt_f64(value));
    }

    pub fn say(&mut self, line: impl AsRef<str>) {
        self.human.push_str(line.as_ref());
        self.human.push('\n');
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.rows.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn machine(&self) -> String {
        let mut s = format!("command={}\nseed={}\n", self.command, self.seed);
        for (k, v) in &self.rows {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// Fixed nine-digit rendering; negative zero prints as zero.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.9}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}
