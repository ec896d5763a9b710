//! JSON run configuration.
//!
//! ```json
//! {
//!   "schema": "odlab/1",
//!   "algebra": {"generators": [{"name": "x", "degree": 0}], "truncation": 6},
//!   "operator": {"degree": -1, "terms": [{"coefficient": "1", "partials": {"x": 1}}]},
//!   "operad": {
//!     "generators": [{"name": "b", "arity": 2, "symmetry": "antisymmetric"}],
//!     "relations": ["jacobiator(b)"],
//!     "max_arity": 3
//!   },
//!   "bracket": {"degrees": [0, 0], "truncation": 6, "h_truncation": 3},
//!   "output": {"format": "json"}
//! }
//! ```
//!
//! Every section is optional; a command fails with a configuration error when
//! the section it needs is missing. Relations are either tree expressions
//! such as `b(b(1,2),3) - b(1,b(2,3))` or one of the macros `jacobiator(g)`,
//! `associator(g)`, `lie_admissible(g)` and `fundamental_identity(g)`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::brackets::{PairedContext, PairingStyle};
use crate::diffop::{LinearOperator, OperatorSpec};
use crate::graded_poly::{AlgebraContext, AlgebraSpec};
use crate::operad::{self, FreeOperad, OperadElement, Presentation, SigmaGenerator, Signature};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(default)]
    pub algebra: Option<AlgebraSpec>,
    #[serde(default)]
    pub operator: Option<OperatorSpec>,
    #[serde(default)]
    pub operad: Option<OperadSpec>,
    #[serde(default)]
    pub bracket: Option<BracketSpec>,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperadSpec {
    pub generators: Vec<SigmaGenerator>,
    #[serde(default)]
    pub relations: Vec<String>,
    #[serde(default = "default_max_arity")]
    pub max_arity: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketSpec {
    /// Degrees of the basis of `V`.
    #[serde(default = "default_degrees")]
    pub degrees: Vec<i64>,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default = "default_h_truncation")]
    pub h_truncation: usize,
    /// Optional inputs for a single evaluation.
    #[serde(default)]
    pub f: Option<String>,
    #[serde(default)]
    pub g: Option<String>,
    /// Word-length bound of each argument in identity sweeps.
    #[serde(default = "default_sweep")]
    pub sweep_max_len: usize,
    /// Total word length of the frozen arguments in slot-order certificates.
    #[serde(default = "default_frozen")]
    pub frozen_max_len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Option<OutputFormat>,
}

fn default_schema() -> String {
    crate::SCHEMA.to_string()
}

fn default_max_arity() -> usize {
    crate::DEFAULT_MAX_ARITY
}

fn default_truncation() -> usize {
    crate::DEFAULT_TRUNCATION
}

fn default_h_truncation() -> usize {
    crate::DEFAULT_H_TRUNCATION
}

fn default_degrees() -> Vec<i64> {
    vec![0, 0]
}

fn default_sweep() -> usize {
    3
}

fn default_frozen() -> usize {
    2
}

impl Default for BracketSpec {
    fn default() -> Self {
        BracketSpec {
            degrees: default_degrees(),
            truncation: default_truncation(),
            h_truncation: default_h_truncation(),
            f: None,
            g: None,
            sweep_max_len: default_sweep(),
            frozen_max_len: default_frozen(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != crate::SCHEMA {
            return Err(Error::Config(format!(
                "schema `{}` is not supported, expected `{}`",
                self.schema,
                crate::SCHEMA
            )));
        }
        if let Some(a) = &self.algebra {
            if a.truncation == 0 {
                return Err(Error::Config("algebra.truncation must be at least 1".into()));
            }
        }
        if let Some(o) = &self.operad {
            if o.generators.is_empty() {
                return Err(Error::Config("operad.generators is empty".into()));
            }
        }
        if let Some(b) = &self.bracket {
            if b.degrees.is_empty() {
                return Err(Error::Config("bracket.degrees is empty".into()));
            }
        }
        Ok(())
    }

    pub fn algebra_context(&self) -> Result<Arc<AlgebraContext>> {
        let spec = self
            .algebra
            .as_ref()
            .ok_or_else(|| Error::Config("missing `algebra` section".into()))?;
        AlgebraContext::from_spec(spec)
    }

    pub fn operator(&self, ctx: &Arc<AlgebraContext>) -> Result<LinearOperator> {
        self.operator
            .as_ref()
            .ok_or_else(|| Error::Config("missing `operator` section".into()))?
            .build(ctx)
    }

    fn operad_spec(&self) -> Result<&OperadSpec> {
        self.operad
            .as_ref()
            .ok_or_else(|| Error::Config("missing `operad` section".into()))
    }

    /// Free operad on the configured generators, large enough for `arity`
    /// and every relation.
    pub fn free_operad(&self, arity: Option<usize>) -> Result<Arc<FreeOperad>> {
        let spec = self.operad_spec()?;
        let sig = Signature::new(spec.generators.clone())?;
        let mut top = arity.unwrap_or(spec.max_arity);
        for r in &spec.relations {
            top = top.max(parse_relation(&sig, r)?.arity());
        }
        FreeOperad::new(spec.generators.clone(), top.max(1))
    }

    pub fn presentation(&self, arity: Option<usize>) -> Result<Presentation> {
        let op = self.free_operad(arity)?;
        let relations = self
            .operad_spec()?
            .relations
            .iter()
            .map(|r| parse_relation(op.signature(), r))
            .collect::<Result<Vec<_>>>()?;
        Presentation::new(op, relations)
    }

    pub fn bracket_spec(&self) -> BracketSpec {
        self.bracket.clone().unwrap_or_default()
    }

    pub fn paired_context(&self, style: PairingStyle) -> Result<PairedContext> {
        let b = self.bracket_spec();
        PairedContext::new(style, &b.degrees, b.truncation, b.h_truncation)
    }

    pub fn output_format(&self) -> OutputFormat {
        self.output.as_ref().and_then(|o| o.format).unwrap_or_default()
    }
}

/// Expands the relation macros, otherwise parses a tree expression.
pub fn parse_relation(sig: &Signature, text: &str) -> Result<OperadElement> {
    let t = text.trim();
    let call = t
        .strip_suffix(')')
        .and_then(|body| body.split_once('('))
        .filter(|(name, arg)| !arg.contains(['(', ')', ',']) && !name.contains([' ', '-', '+']));
    if let Some((name, arg)) = call {
        let g = arg.trim();
        match name.trim() {
            "jacobiator" => return operad::jacobiator(sig, g),
            "associator" => return operad::associator(sig, g),
            "lie_admissible" => return operad::lie_admissible(sig, g),
            "fundamental_identity" => return operad::fundamental_identity(sig, g),
            _ => {}
        }
    }
    operad::relation_from_text(sig, t)
}
