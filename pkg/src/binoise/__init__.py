"""Bi-noising diffusion: sampling and training engine with baseline samplers.

At each reverse step the conditional model's implicit clean prediction is
re-noised and refined by an unconditional model, pulling intermediate
iterates back toward the natural-image distribution. Includes plain DDPM
ancestral sampling, direct conditional sampling, low-pass projection
guidance, and the weight-sharing null-token variant, plus everything needed
to verify them at desk scale: analytic oracle denoisers, tiny trainable
networks with hand-written backprop, procedural restoration tasks, and
reference metrics.
"""

from .schedule import VarianceSchedule, build_linear_schedule, default_schedule
from .diffusion import forward_sample, forward_step, predict_x0, reverse_step
from .denoiser import Denoiser, GaussianOracleDenoiser, as_conditional
from .nets import TinyNet, make_mlp, make_conv, with_null_token, sinusoidal_embedding
from .guidance import (
    SamplerSpec,
    TraceRecord,
    lowpass_project,
    sample_plain,
    sample_conditional,
    sample_cdp,
    sample_binoising,
    sample_binoising_null,
)
from .training import (
    TrainConfig,
    WeightVector,
    AdamState,
    adam_step,
    ema_fuse,
    loss_simple,
    loss_corr,
    loss_final,
    train,
)
from .tasks import DegradationOp, ToyDatasetSpec, PairedDataset, degrade, gen_dataset, gen_images, split_dataset, op_for_task
from .metrics import mse, psnr, ssim, PSNR_CAP_DB
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint, schedule_params

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
