"""Spatial-spectral federated graph learning: a desk-scale simulator and numerical library."""

from .autodiff import Parameter, Tape, Tensor, backward, sgd_step
from .federation import TrainConfig, fedavg_aggregate, run_round, run_training
from .graph import Graph, SplitMasks, induced_subgraph, load_graph, sbm_generate, stratified_split
from .losses import (
    LossWeights,
    PrototypeRepository,
    aggregate_global_repository,
    fgma_loss,
    fkd_loss,
    local_prototypes,
    total_loss,
)
from .partition import PartitionPlan, louvain_partition
from .ppr import ppr, ppr_iterative, salc, select_top_k, sis, sis_partitioned
from .spectral import extreme_eigenpairs, jacobi_eigh, laplacian, project, sparse_self_similarity

__version__ = "0.1.0"
