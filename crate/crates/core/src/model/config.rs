use serde::{Deserialize, Serialize};

use crate::autodiff::Activation;
use crate::error::{Error, Result};
use crate::market::{DAILY_FEATURES, INDICATOR_COUNT};

/// One level of the hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    /// The stock's own state `e`.
    Node,
    /// Industry-aggregated state `a`.
    Relation,
    /// Attention-pooled market state `g`.
    Market,
}

/// Which vectors the market attention pools.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketAggregand {
    /// Industry states `a_s` (the vectors the attention scores are computed from).
    #[default]
    Relation,
    /// Own states `e_s`.
    Node,
}

/// Named view subsets used by the ablation grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    NodeOnly,
    NodeRelation,
    /// `{node, market}`; reported as "HGNN M".
    NodeMarket,
    /// `{node, relation, market}`; reported as "HGNN I".
    Full,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::NodeOnly,
        Preset::NodeRelation,
        Preset::NodeMarket,
        Preset::Full,
    ];

    pub fn views(self) -> Vec<View> {
        match self {
            Preset::NodeOnly => vec![View::Node],
            Preset::NodeRelation => vec![View::Node, View::Relation],
            Preset::NodeMarket => vec![View::Node, View::Market],
            Preset::Full => vec![View::Node, View::Relation, View::Market],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::NodeOnly => "node_only",
            Preset::NodeRelation => "node_relation",
            Preset::NodeMarket => "node_market",
            Preset::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HgnnConfig {
    /// Lookback length `T`.
    pub lookback: usize,
    /// Daily feature width `F` (also the LSTM input width).
    pub features: usize,
    /// LSTM memory cells `U`; also the width of every view.
    pub hidden: usize,
    /// Attention hidden width `V`.
    pub attention_dim: usize,
    pub indicators: usize,
    pub mlp_hidden: Vec<usize>,
    pub fusion_activation: Activation,
    pub attention_activation: Activation,
    pub views: Vec<View>,
    /// When false, curb nodes keep `e = h` and the curb MLP is not built.
    pub use_curb_features: bool,
    pub market_aggregand: MarketAggregand,
}

impl Default for HgnnConfig {
    fn default() -> Self {
        HgnnConfig {
            lookback: 10,
            features: DAILY_FEATURES,
            hidden: 8,
            attention_dim: 8,
            indicators: INDICATOR_COUNT,
            mlp_hidden: vec![16],
            fusion_activation: Activation::Tanh,
            attention_activation: Activation::Tanh,
            views: Preset::Full.views(),
            use_curb_features: true,
            market_aggregand: MarketAggregand::Relation,
        }
    }
}

impl HgnnConfig {
    pub fn with_preset(mut self, preset: Preset) -> Self {
        self.views = preset.views();
        self
    }

    pub fn has(&self, view: View) -> bool {
        self.views.contains(&view)
    }

    /// Views in fixed (node, relation, market) order, deduplicated.
    pub fn ordered_views(&self) -> Vec<View> {
        let mut v = self.views.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn preset(&self) -> Option<Preset> {
        let views = self.ordered_views();
        Preset::ALL.into_iter().find(|p| p.views() == views)
    }

    /// Graph convolution runs when either graph-level view is on, since the
    /// attention scores are computed from the industry states.
    pub fn needs_graph(&self) -> bool {
        self.has(View::Relation) || self.has(View::Market)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.lookback == 0 || self.features == 0 || self.indicators == 0 {
            return fail("lookback, features and indicators must be positive");
        }
        if self.hidden == 0 || self.attention_dim == 0 {
            return fail("hidden width U and attention width V must be at least 1");
        }
        if self.mlp_hidden.contains(&0) {
            return fail("MLP hidden widths must be positive");
        }
        if !self.has(View::Node) {
            return fail("enabled views must include `node`");
        }
        Ok(())
    }
}
