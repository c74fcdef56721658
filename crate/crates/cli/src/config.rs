//! Resolved run configuration, echoed into every output so results are
//! self-describing and reruns are verifiable.

/// Ordered `key = value` lines describing one resolved run.
#[derive(Debug, Default, Clone)]
pub struct ConfigEcho {
    lines: Vec<(String, String)>,
}

impl ConfigEcho {
    pub fn new(command: &str) -> Self {
        let mut echo = ConfigEcho::default();
        echo.push("tool", format!("stifprep {}", env!("CARGO_PKG_VERSION")));
        echo.push("command", command);
        echo
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    pub fn push_path(&mut self, key: &str, value: &std::path::Path) {
        self.push(key, value.display());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}
