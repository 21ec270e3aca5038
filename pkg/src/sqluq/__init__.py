"""Node-level error labeling and uncertainty estimation for generated SQL."""

from sqluq.ast_core import (
    AliasMap,
    NodeKind,
    ParseError,
    SqlNode,
    UnsupportedConstruct,
    build_alias_map,
    build_index,
    parse_sql,
    preorder,
)
from sqluq.featurizer import MANIFEST, NodeRecord, featurize_node, featurize_tree
from sqluq.gbdt import (
    GbdtConfig,
    GbdtModel,
    eval_by_kind,
    predict_proba,
    roc_auc,
    train,
)
from sqluq.labeler import (
    EquivalenceContext,
    LabelMap,
    align_and_label,
    label_with_ablation,
    recursively_equivalent,
    shallow_equivalent,
)
from sqluq.pipeline import (
    CrossDatabase,
    DatasetRecord,
    WithinDatabase,
    load_dataset,
    make_split,
    run_experiment,
)
from sqluq.schema import Schema, load_schema, resolve_scope

__all__ = [
    "AliasMap",
    "CrossDatabase",
    "DatasetRecord",
    "EquivalenceContext",
    "GbdtConfig",
    "GbdtModel",
    "LabelMap",
    "MANIFEST",
    "NodeKind",
    "NodeRecord",
    "ParseError",
    "Schema",
    "SqlNode",
    "UnsupportedConstruct",
    "WithinDatabase",
    "align_and_label",
    "build_alias_map",
    "build_index",
    "eval_by_kind",
    "featurize_node",
    "featurize_tree",
    "label_with_ablation",
    "load_dataset",
    "load_schema",
    "make_split",
    "parse_sql",
    "predict_proba",
    "preorder",
    "recursively_equivalent",
    "resolve_scope",
    "roc_auc",
    "run_experiment",
    "shallow_equivalent",
    "train",
]

__version__ = "0.1.0"
