from .denoiser import (
    LAYERS,
    Denoiser,
    DenoiserConfig,
    TrainBatch,
    make_batch,
    make_inputs,
    mlp_forward,
    objective_bundle,
    region_losses,
    timestep_embedding,
)
from .losses import masked_mse, mse
from .scene import (
    RegionMasks,
    SceneSpec,
    SyntheticSet,
    Texture,
    box_mask,
    downscale_mask,
    random_scene,
    region_masks,
    render_image,
    sample_seed,
    synth_dataset,
    synth_sample,
)
from .schedule import NoiseSchedule, make_schedule, noise_latent, q_sample
from .oracle import fd_region_gradients, stacked_region_losses
