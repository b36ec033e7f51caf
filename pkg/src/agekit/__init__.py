"""agekit: finite structures, ages, amalgamation search, and limit prefixes."""

from .structures import (
    FinStructure,
    Pointed,
    Signature,
    closure,
    cl_sim,
    induced_substructure,
    tuple_sim,
    validate,
)
from .embeddings import (
    EmbedInfoTable,
    PotentialEmbedding,
    compose,
    enumerate_embeddings,
    is_embedding,
)
from .ages import Age, StructureGenerator, WitnessPack, canonical_age
from .amalgamation import (
    AmalgDiagram,
    NonAmalgCertificate,
    Span,
    amalgamate,
    certify_non_amalgamable,
    is_amalgamation_base,
)
from .limits import LimitPrefix, back_and_forth, build_limit, chain_union

__all__ = [
    "Age",
    "AmalgDiagram",
    "EmbedInfoTable",
    "FinStructure",
    "LimitPrefix",
    "NonAmalgCertificate",
    "Pointed",
    "PotentialEmbedding",
    "Signature",
    "Span",
    "StructureGenerator",
    "WitnessPack",
    "amalgamate",
    "back_and_forth",
    "build_limit",
    "canonical_age",
    "certify_non_amalgamable",
    "chain_union",
    "closure",
    "cl_sim",
    "compose",
    "enumerate_embeddings",
    "induced_substructure",
    "is_amalgamation_base",
    "is_embedding",
    "tuple_sim",
    "validate",
]
