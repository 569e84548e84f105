"""BEV-CV cross-view geo-localisation: imaging, retrieval, losses and formats."""

from ._bevcv import (
    EmbeddingIndex,
    Pipeline,
    __version__,
    brute_force_topk,
    complexity_report,
    crop_width,
    default_config_json,
    evaluate,
    fov_crop,
    init_weights,
    load_image,
    ntxent_loss,
    read_embeddings,
    read_weights,
    recall_at_k,
    resize_bilinear,
    run_cli,
    top_percent_k,
    triplet_loss,
    write_embeddings,
    write_weights,
)

__all__ = [
    "EmbeddingIndex",
    "Pipeline",
    "__version__",
    "brute_force_topk",
    "complexity_report",
    "crop_width",
    "default_config_json",
    "evaluate",
    "fov_crop",
    "init_weights",
    "load_image",
    "ntxent_loss",
    "read_embeddings",
    "read_weights",
    "recall_at_k",
    "resize_bilinear",
    "run_cli",
    "top_percent_k",
    "triplet_loss",
    "write_embeddings",
    "write_weights",
]
