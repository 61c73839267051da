use qmem_core::{MemorySpec, Routing};

/// A memory in one of its two routings, named as on the command line.
pub struct Preset {
    pub spec: MemorySpec,
    pub routing: Routing,
}

impl Preset {
    /// Accepts `qubit1`, `qubit2`, `quditN-1`, `quditN-2` (module count from
    /// `n`) and `qudit<count>-<routing>`.
    pub fn parse(name: &str, n: usize, gamma: f64) -> Result<Self, String> {
        let bad = || format!("unknown preset '{name}' (expected qubit1, qubit2, quditN-1 or quditN-2)");
        let (modules, which) = if let Some(rest) = name.strip_prefix("qubit") {
            (1, rest)
        } else if let Some(rest) = name.strip_prefix("qudit") {
            let (count, which) = rest.split_once('-').ok_or_else(bad)?;
            let modules = if count == "N" { n } else { count.parse().map_err(|_| bad())? };
            (modules, which)
        } else {
            return Err(bad());
        };
        let routing = match which {
            "1" => Routing::WriteRead,
            "2" => Routing::Storage,
            _ => return Err(bad()),
        };
        let spec = MemorySpec::new(modules, gamma);
        spec.validate().map_err(|e| e.to_string())?;
        Ok(Preset { spec, routing })
    }

    pub fn name(&self) -> String {
        let r = self.routing.index();
        if self.spec.n_qubits == 1 {
            format!("qubit{r}")
        } else {
            format!("qudit{}-{r}", self.spec.n_qubits)
        }
    }
}
