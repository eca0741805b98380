"""Cone-exterior complex distortion: geometry, field and distorted operators."""
from .cone import (ConeParams, cone_depth, rho_for_clearance, signed_distance, smoothed_cone_distance,
                   smoothed_cone_distance_gradient)
from .field import (DistortionField, FieldSample, build_field, default_field, default_tau, dump_field_csv,
                    lipschitz_estimate)
from .mollifier import MollifierParams, bump
from .operator import DistortedFactory, Theta, assemble_distorted, many_body_phi_map, phi_map

__all__ = [
    "ConeParams", "cone_depth", "rho_for_clearance", "signed_distance", "smoothed_cone_distance",
    "smoothed_cone_distance_gradient", "DistortionField", "FieldSample", "build_field", "default_field", "default_tau", "dump_field_csv",
    "lipschitz_estimate", "MollifierParams", "bump", "DistortedFactory", "Theta", "assemble_distorted",
    "many_body_phi_map", "phi_map",
]
