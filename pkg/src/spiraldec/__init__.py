"""Spiral-convolution mesh decoder toolkit.

Mesh-graph operators (spiral enumeration, dynamic kernel mixing, region
refinement, 2D-to-3D lifting), training losses, Procrustes-aligned
metrics, and a self-contained numeric substrate for training the decoder
on desk-scale synthetic mesh-deformation tasks.
"""

from .adjacency import AdjacencyIndex, build_adjacency, n_ring
from .autograd import Param, Tensor, l1_loss, l2_norm, linear, relu, softmax
from .config import PipelineConfig
from .decoder import Decoder, build_decoder
from .gradcheck import finite_diff_check
from .layers import (DscParams, LiftMatrix, SpiralConvParams, dynamic_spiral_conv,
                     grid_sample, kernel_attention, lift, roi_conv, spiral_conv,
                     upsample_features)
from .losses import (MeshPrediction, consistency_losses, edge_loss, mesh_loss,
                     normal_loss, pose2d_loss, total_loss)
from .mesh import TriMesh, icosahedron, load_obj, save_obj, subdivide_midpoint, template_chain
from .metrics import f_score, pa_mpjpe, pa_mpvpe
from .optim import AdamState, adam_step
from .procrustes import SimilarityTransform, procrustes_align
from .regions import REGION_NAMES, RegionPartition, two_region_partition, validate_partition, wedge_partition
from .spirals import SpiralTable, build_spiral_table, spiral_sequence
from .synth import SyntheticSample, synth_dataset
from .training import evaluate, run_ablation, train
from .upsampling import UpsampleMap, build_upsample_map

__version__ = "0.1.0"
