"""Levy-driven linear transport SPDEs solved by stochastic characteristics."""

from ._core import (
    ConfigError,
    DiffeomorphismError,
    DivergenceError,
    InputError,
    MarcusError,
    RangeError,
    exp_map,
    exp_map_inverse_check,
    h_transform_solution,
    presets,
    round_trip,
    sample_driver,
    sampler_study,
    solve,
)

__all__ = [
    "ConfigError",
    "DiffeomorphismError",
    "DivergenceError",
    "InputError",
    "MarcusError",
    "RangeError",
    "exp_map",
    "exp_map_inverse_check",
    "h_transform_solution",
    "presets",
    "round_trip",
    "sample_driver",
    "sampler_study",
    "solve",
]
