"""Generative image model, variational objective, and exact derivatives."""

from .types import (
    BAND_NAMES,
    GALAXY,
    N_BANDS,
    REF_BAND,
    STAR,
    GalaxyShape,
    ImageMeta,
    ImagePatch,
    Objective,
    Priors,
    SourceModel,
)
from .params import NUM_PARAMS, decode, encode

__all__ = [
    "BAND_NAMES",
    "GALAXY",
    "N_BANDS",
    "NUM_PARAMS",
    "REF_BAND",
    "STAR",
    "GalaxyShape",
    "ImageMeta",
    "ImagePatch",
    "Objective",
    "Priors",
    "SourceModel",
    "decode",
    "encode",
]
