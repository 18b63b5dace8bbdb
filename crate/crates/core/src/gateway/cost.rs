//! Per-model token prices and exact cost arithmetic.

use std::collections::BTreeMap;
use std::path::Path;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::Usage;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum CostError {
    #[error("no price configured for model `{0}`")]
    UnknownModel(String),
    #[error("negative price for model `{0}`")]
    NegativePrice(String),
    #[error("price table: {0}")]
    Parse(String),
}

/// Prices in USD per single token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelPrice {
    pub input_price_per_token: Decimal,
    pub output_price_per_token: Decimal,
}

impl ModelPrice {
    /// Builds a price from the per-million figures providers publish.
    pub fn per_million(input: Decimal, output: Decimal) -> Self {
        let m = Decimal::from(1_000_000u32);
        Self {
            input_price_per_token: input / m,
            output_price_per_token: output / m,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceTable {
    models: BTreeMap<String, ModelPrice>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PriceFileEntry {
    input_per_million: Decimal,
    output_per_million: Decimal,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PriceFile {
    models: BTreeMap<String, PriceFileEntry>,
}

impl PriceTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// List prices for the models the pipeline is usually pointed at, plus
    /// the scripted mock.
    pub fn builtin() -> Self {
        let d = |s: &str| s.parse::<Decimal>().expect("static decimal");
        let mut t = Self::new();
        for (id, i, o) in [
            ("gpt-4o", "2.50", "10.00"),
            ("gpt-4o-mini", "0.15", "0.60"),
            ("o1-mini", "3.00", "12.00"),
            ("o1-preview", "15.00", "60.00"),
            ("claude-3-5-sonnet-latest", "3.00", "15.00"),
            ("mock", "1.00", "2.00"),
        ] {
            t.insert(id, ModelPrice::per_million(d(i), d(o)));
        }
        t
    }

    pub fn insert(&mut self, model_id: impl Into<String>, price: ModelPrice) {
        self.models.insert(model_id.into(), price);
    }

    pub fn get(&self, model_id: &str) -> Option<&ModelPrice> {
        self.models.get(model_id)
    }

    /// Parses a TOML price file:
    ///
    /// ```toml
    /// [models."gpt-4o"]
    /// input_per_million = "2.50"
    /// output_per_million = "10.00"
    /// ```
    pub fn from_toml_str(s: &str) -> Result<Self, CostError> {
        let file: PriceFile = toml::from_str(s).map_err(|e| CostError::Parse(e.to_string()))?;
        let mut t = Self::new();
        for (id, e) in file.models {
            if e.input_per_million.is_sign_negative() || e.output_per_million.is_sign_negative() {
                return Err(CostError::NegativePrice(id));
            }
            t.insert(id, ModelPrice::per_million(e.input_per_million, e.output_per_million));
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, CostError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| CostError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }
}

pub fn account_cost(usage: Usage, model_id: &str, prices: &PriceTable) -> Result<Decimal, CostError> {
    let p = prices
        .get(model_id)
        .ok_or_else(|| CostError::UnknownModel(model_id.to_string()))?;
    Ok(Decimal::from(usage.prompt_tokens) * p.input_price_per_token
        + Decimal::from(usage.completion_tokens) * p.output_price_per_token)
}
