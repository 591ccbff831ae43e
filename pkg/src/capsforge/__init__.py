"""capsforge: capsule computational-graph framework.

A library, document format, CLI, and HTTP service for building, validating,
deriving, and training capsule networks — tensor-valued generalizations of
plain scalar neural networks over connected directed acyclic graphs.
"""

from . import errors
from .backprop import (BackwardResult, GradientSet, TrainConfig, backward,
                       capsule_vjp, connection_vjp, evaluate,
                       finite_diff_check, loss, loss_grad, seeded_init, train,
                       train_iteration)
from .capsule import (CapsuleFn, CapsuleNetwork, CapsuleSpec, ConnectionSpec,
                      ForwardResult, Parameters, ShapeReport, WeightingOp,
                      build_lenet_path, build_mlp_path, expand_to_plain,
                      forward, validate_shapes)
from .generation import (GenerationStep, PlainConnection, PlainNetwork,
                         PlainNeuron, apply_step, convergence,
                         count_distinct_growth_descendants,
                         count_growth_descendants, derive_generation_sequence,
                         eval_plain, grow_children, growth, neuron,
                         one_one_network, replay, two_one_network, variable)
from .graph import (Dag, Layering, RolePartition, build_dag, classify_layering,
                    connected_components, is_connected, roles, subgraph,
                    topo_order, verify_layering)
from .model_io import (Checkpoint, DatasetSpec, GraphDocument, document_hash,
                       export_dot, load_checkpoint, load_dataset,
                       parse_document, parse_graph_document, read_idx,
                       save_checkpoint, serialize)
from .symbols import (CapsuleSymbol, ConnectionSymbol, PlacedCapsule,
                      PlacedConnection, catalog, check_connection_compat,
                      infer_front_attrs, lower_symbols)
from .tensor import (DType, Tensor, conv_connection_apply, convolve2d,
                     elementwise_apply, matmul, max_downsample,
                     reshape_flatten, softmax, squash, zeros)
from . import tensor  # the submodule, not the constructor: tensor.tensor(...)

__version__ = "0.1.0"
