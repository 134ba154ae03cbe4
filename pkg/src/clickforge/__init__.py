"""One-click weak labelling toolkit.

Turns a single click per object into instance-level pseudo-labels, with
two families of predictors: the N-pass per-object baseline (4- or
5-channel input) and the single-pass variant that resolves all objects at
once from semantic scores plus center offsets.
"""

from ._kernels import BACKEND, NUMBA_ENABLED
from .clicks import Click, EncodingConfig, binary_erode, derive_click, full_click_map, gaussian_click_map, jitter_click
from .errors import ClickforgeError, ConfigurationError, SchemaError, ValidationError
from .fusion import CenterSet, FusionConfig, PanopticPrediction, assign_instances, extract_centers, fuse
from .losses import ClassAreaStats, LossBreakdown, center_loss, class_weights, offset_loss, weighted_cross_entropy
from .metrics import ObjectIoUReport, PanopticScores, combine_panoptic, mean_fg_iou, mean_object_iou, object_iou, panoptic_quality
from .net import NetConfig, Parameters, backward, forward, init_params, load_checkpoint, save_checkpoint, sgd_step
from .raster import InstanceAnnotation, Scene, instance_masks, read_instance_map, read_scene, rle_decode, rle_encode, write_instance_map, write_scene

__version__ = "0.1.0"
