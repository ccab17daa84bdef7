"""Fixed-point iterative denoising and RFN-based speckle suppression."""
from .errors import BtbError, ConfigError, DomainError, FormatError, ShapeError
from .image import Image, Kernel2D, Padding, color_transform, convolve2d, load_image, save_image
from .noise import (
    NoiseSpec,
    SceneConfig,
    add_awgn,
    add_poisson,
    add_speckle,
    default_scene,
    sample_speckle_intensity,
    synth_tomogram,
    uniform_scene,
)
from .engines import (
    AffineEngine,
    DenoiserEngine,
    GaussianEngine,
    IdentityEngine,
    MedianEngine,
    NlmEngine,
    NlmParams,
    parse_engine,
)
from .iteration import IterationConfig, IterationTrace, btb_run, check_epsilon_fixed
from .rfn import (
    RfnConfig,
    RfnKernel,
    make_gaussian_rfn_kernel,
    make_rect_rfn_kernel,
    rfn_local_energy,
    rfn_normalize,
    rfn_operator,
    validate_rfn_kernel,
)
from .vortice import VorticeConfig, speckle_focused_run, speckle_level, vortice_run
from .metrics import ContractionReport, SsimParams, contraction_report, psnr, ssim

__version__ = "0.1.0"
