//! Rule engine for choosing a data augmentation technique from what is known
//! about the scenario.
//!
//! The tree is walked through a single function, [`walk`], that asks one
//! question per node; [`select`] answers from a feature record and
//! [`replay`] answers from a recorded path, so the two can never disagree.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Dimensionality {
    #[default]
    Low,
    High,
}

/// Facts asserted by the user. Missing keys default to `false` / `Low`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFeatures {
    pub new_unseen_scenario: bool,
    pub representative: bool,
    pub dimensionality: Dimensionality,
    pub correlated: bool,
    pub env_params_known: bool,
    pub tx_power_known: bool,
    pub snr_known: bool,
    pub antenna_info_known: bool,
    pub network_geometry_known: bool,
    pub tx_locations_known: bool,
    pub low_rank_matrix: bool,
    pub smooth_surface: bool,
    pub extrapolation_needed: bool,
    pub targets_inside_hull: bool,
    pub many_latent_features: bool,
    pub latent_prior_known: bool,
    /// Prior knowledge about the distribution of the data itself.
    pub data_prior_known: bool,
    pub similar_domain_data_available: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    SnrMethod,
    Stm,
    Aoa,
    Rssd,
    Rss,
    Triangle,
    ArcCluster,
    MatrixCompletion,
    Kriging,
    Gids,
    Msm,
    Splines,
    Idw,
    Nearest,
    NaturalNeighbor,
    Vae,
    Gan,
    TransferLearning,
    FewShot,
    Simulator,
    Testbed,
    MobileApp,
}

impl Label {
    pub const ALL: [Label; 22] = [
        Label::SnrMethod,
        Label::Stm,
        Label::Aoa,
        Label::Rssd,
        Label::Rss,
        Label::Triangle,
        Label::ArcCluster,
        Label::MatrixCompletion,
        Label::Kriging,
        Label::Gids,
        Label::Msm,
        Label::Splines,
        Label::Idw,
        Label::Nearest,
        Label::NaturalNeighbor,
        Label::Vae,
        Label::Gan,
        Label::TransferLearning,
        Label::FewShot,
        Label::Simulator,
        Label::Testbed,
        Label::MobileApp,
    ];

    /// Labels with no implementation in this crate.
    pub fn is_advisory(self) -> bool {
        matches!(
            self,
            Label::Triangle
                | Label::ArcCluster
                | Label::Vae
                | Label::Gan
                | Label::TransferLearning
                | Label::FewShot
                | Label::Simulator
                | Label::Testbed
                | Label::MobileApp
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::SnrMethod => "SNR_METHOD",
            Label::Stm => "STM",
            Label::Aoa => "AOA",
            Label::Rssd => "RSSD",
            Label::Rss => "RSS",
            Label::Triangle => "TRIANGLE",
            Label::ArcCluster => "ARC_CLUSTER",
            Label::MatrixCompletion => "MATRIX_COMPLETION",
            Label::Kriging => "KRIGING",
            Label::Gids => "GIDS",
            Label::Msm => "MSM",
            Label::Splines => "SPLINES",
            Label::Idw => "IDW",
            Label::Nearest => "NEAREST",
            Label::NaturalNeighbor => "NATURAL_NEIGHBOR",
            Label::Vae => "VAE",
            Label::Gan => "GAN",
            Label::TransferLearning => "TRANSFER_LEARNING",
            Label::FewShot => "FEW_SHOT",
            Label::Simulator => "SIMULATOR",
            Label::Testbed => "TESTBED",
            Label::MobileApp => "MOBILE_APP",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A question in the tree. Names match the feature fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    NewUnseenScenario,
    Representative,
    Dimensionality,
    Correlated,
    ManyLatentFeatures,
    LatentPriorKnown,
    DataPriorKnown,
    SimilarDomainDataAvailable,
    EnvParamsKnown,
    TxPowerKnown,
    SnrKnown,
    AntennaInfoKnown,
    NetworkGeometryKnown,
    TxLocationsKnown,
    LowRankMatrix,
    SmoothSurface,
    ExtrapolationNeeded,
    TargetsInsideHull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    Low,
    High,
}

impl From<bool> for Answer {
    fn from(b: bool) -> Self {
        if b {
            Answer::Yes
        } else {
            Answer::No
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub node: Node,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub methods: Vec<Label>,
    pub path: Vec<Step>,
    /// The subset of `methods` that has no implementation here.
    pub advisory: Vec<Label>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("path ended before reaching a leaf (next question: {0:?})")]
    Truncated(Node),
    #[error("step {index}: expected a {expected:?} answer, path has {found:?}")]
    WrongNode {
        index: usize,
        expected: Node,
        found: Node,
    },
    #[error("step {index}: answer {answer:?} does not fit {node:?}")]
    BadAnswer {
        index: usize,
        node: Node,
        answer: Answer,
    },
    #[error("path has {0} steps beyond the leaf")]
    TrailingSteps(usize),
}

const GEOSTAT_SMOOTH_EXTRAP: [Label; 4] = [Label::Kriging, Label::Gids, Label::Msm, Label::Splines];

/// Walks the tree, asking `ask` at each node. For [`Node::Dimensionality`]
/// `Yes` means low-dimensional.
pub fn walk<E>(mut ask: impl FnMut(Node) -> Result<Answer, E>) -> Result<Vec<Label>, E> {
    use Label::*;
    let mut yes = |n: Node| -> Result<bool, E> { Ok(ask(n)? == Answer::Yes) };
    if yes(Node::NewUnseenScenario)? {
        return Ok(vec![Simulator, Testbed]);
    }
    if !yes(Node::Representative)? {
        return Ok(vec![Simulator, Testbed, MobileApp]);
    }
    // callers answer Low as Yes
    let low = yes(Node::Dimensionality)?;
    if !low || !yes(Node::Correlated)? {
        if yes(Node::ManyLatentFeatures)? {
            return Ok(if yes(Node::LatentPriorKnown)? {
                vec![Vae]
            } else {
                vec![Gan]
            });
        }
        if !yes(Node::DataPriorKnown)? {
            return Ok(vec![Simulator, Testbed, MobileApp]);
        }
        return Ok(if yes(Node::SimilarDomainDataAvailable)? {
            vec![TransferLearning]
        } else {
            vec![FewShot]
        });
    }
    if yes(Node::EnvParamsKnown)? && yes(Node::TxPowerKnown)? {
        if yes(Node::SnrKnown)? {
            return Ok(vec![SnrMethod]);
        }
        if yes(Node::AntennaInfoKnown)? {
            return Ok(vec![Stm]);
        }
        return Ok(vec![Aoa, Rssd, Rss]);
    }
    if yes(Node::NetworkGeometryKnown)? {
        return Ok(if yes(Node::TxLocationsKnown)? {
            vec![Triangle]
        } else {
            vec![ArcCluster]
        });
    }
    if yes(Node::LowRankMatrix)? {
        return Ok(vec![MatrixCompletion]);
    }
    let smooth = yes(Node::SmoothSurface)?;
    let extrapolate = yes(Node::ExtrapolationNeeded)?;
    let mut out = match (smooth, extrapolate) {
        (true, true) => return Ok(GEOSTAT_SMOOTH_EXTRAP.to_vec()),
        (false, true) => return Ok(vec![Kriging, Gids, Msm]),
        (true, false) => vec![Kriging, Gids, Msm, Splines, Idw, Nearest],
        (false, false) => vec![Kriging, Gids, Msm, Nearest],
    };
    if yes(Node::TargetsInsideHull)? {
        out.push(NaturalNeighbor);
    }
    Ok(out)
}

fn finish(methods: Vec<Label>, path: Vec<Step>) -> Recommendation {
    let advisory = methods
        .iter()
        .copied()
        .filter(|l| l.is_advisory())
        .collect();
    Recommendation {
        methods,
        path,
        advisory,
    }
}

fn feature_answer(f: &ScenarioFeatures, n: Node) -> Answer {
    match n {
        Node::NewUnseenScenario => f.new_unseen_scenario.into(),
        Node::Representative => f.representative.into(),
        Node::Dimensionality => match f.dimensionality {
            Dimensionality::Low => Answer::Low,
            Dimensionality::High => Answer::High,
        },
        Node::Correlated => f.correlated.into(),
        Node::ManyLatentFeatures => f.many_latent_features.into(),
        Node::LatentPriorKnown => f.latent_prior_known.into(),
        Node::DataPriorKnown => f.data_prior_known.into(),
        Node::SimilarDomainDataAvailable => f.similar_domain_data_available.into(),
        Node::EnvParamsKnown => f.env_params_known.into(),
        Node::TxPowerKnown => f.tx_power_known.into(),
        Node::SnrKnown => f.snr_known.into(),
        Node::AntennaInfoKnown => f.antenna_info_known.into(),
        Node::NetworkGeometryKnown => f.network_geometry_known.into(),
        Node::TxLocationsKnown => f.tx_locations_known.into(),
        Node::LowRankMatrix => f.low_rank_matrix.into(),
        Node::SmoothSurface => f.smooth_surface.into(),
        Node::ExtrapolationNeeded => f.extrapolation_needed.into(),
        Node::TargetsInsideHull => f.targets_inside_hull.into(),
    }
}

/// Recommended techniques for `f`, with the traversal that produced them.
pub fn select(f: &ScenarioFeatures) -> Recommendation {
    let mut path = Vec::new();
    let methods = walk::<std::convert::Infallible>(|n| {
        let a = feature_answer(f, n);
        path.push(Step { node: n, answer: a });
        // the walker compares against Yes; map Low onto it
        Ok(if a == Answer::Low { Answer::Yes } else { a })
    })
    .unwrap_or_else(|e| match e {});
    finish(methods, path)
}

/// Re-walks the tree with the answers in `path`.
pub fn replay(path: &[Step]) -> Result<Vec<Label>, ReplayError> {
    let mut i = 0;
    let methods = walk(|n| {
        let step = path.get(i).ok_or(ReplayError::Truncated(n))?;
        if step.node != n {
            return Err(ReplayError::WrongNode {
                index: i,
                expected: n,
                found: step.node,
            });
        }
        let ok = match n {
            Node::Dimensionality => matches!(step.answer, Answer::Low | Answer::High),
            _ => matches!(step.answer, Answer::Yes | Answer::No),
        };
        if !ok {
            return Err(ReplayError::BadAnswer {
                index: i,
                node: n,
                answer: step.answer,
            });
        }
        i += 1;
        Ok(if step.answer == Answer::Low {
            Answer::Yes
        } else {
            step.answer
        })
    })?;
    if i < path.len() {
        return Err(ReplayError::TrailingSteps(path.len() - i));
    }
    Ok(methods)
}
