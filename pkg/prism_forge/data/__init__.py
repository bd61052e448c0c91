"""インタラクションデータモジュール"""

from .interactions import (
    Batch,
    EpochSampler,
    IdMaps,
    InteractionSet,
    PopularityIndex,
    SplitData,
    StrataAssignment,
    batch_inclusion_probability,
    generate_synthetic,
    item_popularity,
    load_id_maps,
    load_interactions,
    negsample_inclusion_probability,
    prepare_splits,
    sample_batch,
    save_id_maps,
    split,
    stratify,
    write_interactions,
)

__all__ = [
    "Batch",
    "EpochSampler",
    "IdMaps",
    "InteractionSet",
    "PopularityIndex",
    "SplitData",
    "StrataAssignment",
    "batch_inclusion_probability",
    "generate_synthetic",
    "item_popularity",
    "load_id_maps",
    "load_interactions",
    "negsample_inclusion_probability",
    "prepare_splits",
    "sample_batch",
    "save_id_maps",
    "split",
    "stratify",
    "write_interactions",
]
