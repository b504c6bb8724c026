from .spvd import SpvdConfig, gen_spvd_dataset, gen_spvd_image
from .swed import SwedConfig, gen_swed_dataset, gen_swed_grid, render_swed, SWED_PALETTE

__all__ = [
    "SpvdConfig",
    "SwedConfig",
    "SWED_PALETTE",
    "gen_spvd_image",
    "gen_spvd_dataset",
    "gen_swed_grid",
    "render_swed",
    "gen_swed_dataset",
]
