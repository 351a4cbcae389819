//! Writes the symbolic expansions of the model as canonical JSON.

use serde_json::json;

use ngbv_core::lagrangian::NgModel;

use crate::config::{ConfigError, RunConfig};
use crate::format::to_json;
use crate::suites::{free_lagrangian_check, Artifact};

#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub artifacts: Vec<Artifact>,
    pub equal_mod_d: bool,
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

pub fn expand(cfg: &RunConfig) -> Result<Expansion, ConfigError> {
    cfg.validate()?;
    let model = NgModel::new(cfg.symbolic_background()?, cfg.jet_order, cfg.order);
    let k = cfg.order;
    let me = model.metric_expansion(k);
    let mat = |m: &Vec<Vec<ngbv_core::jet::Polynomial>>| {
        m.iter().map(|r| r.iter().map(to_json).collect::<Vec<_>>()).collect::<Vec<_>>()
    };
    let mut artifacts = vec![
        Artifact {
            file: "induced_metric.json".into(),
            contents: pretty(&json!({ "order": k, "metric": mat(&me.metric), "inverse": mat(&me.inverse) })),
        },
        Artifact { file: "volume_ratio.json".into(), contents: pretty(&json!(to_json(&model.volume_ratio(k)))) },
        Artifact {
            file: "extended_lagrangian.json".into(),
            contents: pretty(&json!(to_json(&model.extended_lagrangian()))),
        },
        Artifact {
            file: "gauge_fixed_lagrangian.json".into(),
            contents: pretty(&json!(to_json(&model.gauge_fixed_lagrangian()))),
        },
        Artifact { file: "free_lagrangian.json".into(), contents: pretty(&json!(to_json(&model.free_lagrangian()))) },
    ];
    let check = free_lagrangian_check(&model);
    let l0 = NgModel::antifield_free(&model.gauge_fixed_lagrangian().lambda_part(0));
    let printed = model.alg.equals_mod_d(&l0, &model.free_lagrangian_as_printed());
    let diff = format!(
        "equal mod d: {}\nraw difference terms: {}\nequal mod d with transversal sign +1/2: {}\n",
        check.passed, check.detail["raw_difference_terms"], printed
    );
    artifacts.push(Artifact { file: "free_lagrangian_diff.txt".into(), contents: diff });
    Ok(Expansion { artifacts, equal_mod_d: check.passed })
}
