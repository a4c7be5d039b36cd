"""Spherical Radon transform toolkit with variable-radius geometries."""

from .experiment import (ExperimentConfig, add_noise, downsample_area,
                         lsq_error, preset_config, run_experiment)
from .fileio import export_png, read_raster, write_raster
from .geometry import (RadiusModel, artifact_point, constant_r,
                       counter_example, custom_model, linear_cst,
                       preimage_centers, rotational_cst,
                       weak_stability_audit)
from .grids import Image, Sinogram, bilinear_sample, world_to_pixel
from .harmonic import (forward_abel, invert_constant_r, palamodov_map,
                       solve_abel)
from .phantoms import PhantomSpec, make_phantom
from .projector import (CutoffProfile, assemble_forward, backproject_generic,
                        backproject_linear_cst, forward_project)
from .recon import (ReconConfig, fbp_constant_r, fbp_linear_cst, landweber,
                    tv_reconstruct)

__all__ = [
    "Image", "Sinogram", "bilinear_sample", "world_to_pixel",
    "RadiusModel", "linear_cst", "rotational_cst", "constant_r",
    "counter_example", "custom_model", "artifact_point", "preimage_centers",
    "weak_stability_audit",
    "CutoffProfile", "assemble_forward", "forward_project",
    "backproject_linear_cst", "backproject_generic",
    "ReconConfig", "landweber", "tv_reconstruct", "fbp_linear_cst",
    "fbp_constant_r",
    "forward_abel", "solve_abel", "invert_constant_r", "palamodov_map",
    "PhantomSpec", "make_phantom",
    "ExperimentConfig", "preset_config", "run_experiment", "add_noise",
    "lsq_error", "downsample_area",
    "write_raster", "read_raster", "export_png",
]
__version__ = "0.1.0"
