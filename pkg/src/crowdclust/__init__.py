"""Consensus clustering by crowd agreement weighting and multi-granularity link analysis."""

from .agreement import AgreementProfile, cai, ncai, nmi, nmi_table
from .core import ClusterRegistry, Ensemble, Partition, build_registry, partition_from_labels
from .generators import (
    RPCL,
    Dataset,
    Pool,
    PoolGenerator,
    build_pool,
    ill_clustering,
    kmeans,
    rpcl,
    sample_ensemble,
)
from .gpmgla import GPMGLA, ConsensusGraph, TcutResult, build_graph, gpmgla, tcut
from .links import SactMatrix, jaccard, neighbor_lists, sact
from .weac import (
    WEAC,
    CoAssociationMatrix,
    LinkageTree,
    agglomerate,
    eac,
    linkage_tree,
    member_similarity,
    weac,
    weighted_coassociation,
)

__version__ = "0.1.0"
