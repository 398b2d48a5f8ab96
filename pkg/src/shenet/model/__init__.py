"""SHENet networks."""
from .calibrate import lsuv_calibrate
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ArchConfig, ConfigError
from .networks import (
    cab_forward,
    dec_block_forward,
    decoder_forward,
    discriminator_forward,
    enc_block_forward,
    encoder_forward,
    gat_attention,
    gat_layer_forward,
    gcn_propagate,
    gem_apply,
    gem_forward,
    generator_predict,
    generator_reconstruct,
    normalized_adjacency,
    projection_head,
)
from .params import DISCRIMINATOR_GROUPS, GENERATOR_GROUPS, ModelParams, init_params

__all__ = [
    "ArchConfig", "ConfigError", "CheckpointError", "load_checkpoint", "save_checkpoint",
    "cab_forward", "dec_block_forward", "decoder_forward", "discriminator_forward",
    "enc_block_forward", "encoder_forward", "gat_attention", "gat_layer_forward",
    "gcn_propagate", "gem_apply", "gem_forward", "generator_predict", "generator_reconstruct",
    "normalized_adjacency", "projection_head", "DISCRIMINATOR_GROUPS", "GENERATOR_GROUPS",
    "ModelParams", "init_params", "lsuv_calibrate",
]
