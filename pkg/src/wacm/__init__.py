"""Wavelet-domain score-based generative colorization.

Library layout:

* imaging   -- image arrays, gray forward models, PGM/PPM/PNG I/O
* wavelet   -- single-level Haar 2D-DWT/IDWT and the 12-channel stack
* score     -- Parzen score oracle and a DSM-trained MLP score model
* sampler   -- annealed Langevin dynamics with data/structure consistency
* metrics   -- PSNR and SSIM
* datasets  -- small synthetic fixture generators
* cli       -- the `wacm` command-line tool
"""

from .imaging import GrayOp, MEAN, LUMA, LUMA_CORRECTED, to_gray, clamp, load_raster, save_raster
from .wavelet import WaveletBands, dwt2_haar, idwt2_haar, stack, unstack, gray_wavelet
from .score import ParzenScore, MlpScore, GaussianScore, DsmConfig, dsm_loss, train_mlp, save_model, load_model
from .sampler import (
    SamplerConfig,
    DcContext,
    make_schedule,
    step_size,
    dc_residual,
    sc_apply,
    langevin_step,
    anneal_sample,
    colorize,
)
from .metrics import psnr, ssim

__version__ = "0.1.0"
