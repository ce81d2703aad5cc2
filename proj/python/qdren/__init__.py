"""Recurrent entity networks with question-dependent gates."""

from ._core import (
    GRADCHECK_TOLERANCE,
    Model,
    QdrenError,
    Story,
    gen_entity_cloze,
    gen_single_fact,
    gradcheck,
    init_model,
    load_checkpoint,
    parse_babi,
    parse_babi_file,
    resolve_config,
    run_cli,
    train,
    write_babi,
)

__all__ = [
    "GRADCHECK_TOLERANCE",
    "Model",
    "QdrenError",
    "Story",
    "gen_entity_cloze",
    "gen_single_fact",
    "gradcheck",
    "init_model",
    "load_checkpoint",
    "parse_babi",
    "parse_babi_file",
    "resolve_config",
    "run_cli",
    "train",
    "write_babi",
]
