"""mipgan: conditional DCGAN toolkit for coronal MIP PET-style images."""

from .core import CANVAS, CLASS_NAMES, NUM_CLASSES, SUV_MAX, TARGET_SPACING_MM, ClassLabel, MipImage, Volume3D
from .phantoms import (
    CorpusItem,
    PhantomSpec,
    RegionEnergyClassifier,
    anatomy_masks,
    make_corpus,
    make_phantom_volume,
    region_energy_label,
    save_corpus,
)
from .preprocessing import (
    MipPreprocessor,
    PipelineConfig,
    fit_to_canvas,
    mip_project,
    normalize_suv,
    preprocess,
    resample_nearest,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .estimator import MipGan
from .network import ModelConfig, ModelParams, generate_images, init_params, pixel_scale, pixel_unscale
from .training import TrainConfig, TrainHistory, TrainingDiverged, bce_loss, train
from .walk import (
    PixelBlendGenerator,
    WalkReport,
    WalkSpec,
    blend_deviation,
    first_coord_seeds,
    lerp_seeds,
    nn_memorization_score,
    walk,
)

__version__ = "0.1.0"

__all__ = [
    "CANVAS",
    "CLASS_NAMES",
    "NUM_CLASSES",
    "SUV_MAX",
    "TARGET_SPACING_MM",
    "ClassLabel",
    "MipImage",
    "Volume3D",
    "CorpusItem",
    "PhantomSpec",
    "RegionEnergyClassifier",
    "anatomy_masks",
    "make_corpus",
    "make_phantom_volume",
    "region_energy_label",
    "save_corpus",
    "MipPreprocessor",
    "PipelineConfig",
    "fit_to_canvas",
    "mip_project",
    "normalize_suv",
    "preprocess",
    "resample_nearest",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "MipGan",
    "ModelConfig",
    "ModelParams",
    "generate_images",
    "init_params",
    "pixel_scale",
    "pixel_unscale",
    "TrainConfig",
    "TrainHistory",
    "TrainingDiverged",
    "bce_loss",
    "train",
    "PixelBlendGenerator",
    "WalkReport",
    "WalkSpec",
    "blend_deviation",
    "first_coord_seeds",
    "lerp_seeds",
    "nn_memorization_score",
    "walk",
]
