"""Certification of transcritical bifurcations without parameters in memristive circuits."""

from .dae import (
    EquilibriumPoint,
    SemiexplicitDAE,
    assemble_dae,
    find_equilibrium,
    normal_form_dae,
    pencil_spectrum,
)
from .graph import (
    check_configurations,
    enumerate_trees,
    fundamental_matrices,
    mr_product_sum,
)
from .netlist import Circuit, load_netlist, parse_netlist
from .numerics import DEFAULT_TOLERANCES, Tolerances
from .sim import stability_exchange_experiment, trace_equilibrium_line
from .tbwp import (
    check_circuit_tbwp,
    check_dae_tbwp,
    check_nonpassive_zero_multiplicity,
    check_ode_tbwp,
    classify_equilibrium_branch,
)

__version__ = "0.1.0"

__all__ = [
    "Circuit",
    "DEFAULT_TOLERANCES",
    "EquilibriumPoint",
    "SemiexplicitDAE",
    "Tolerances",
    "assemble_dae",
    "check_circuit_tbwp",
    "check_configurations",
    "check_dae_tbwp",
    "check_nonpassive_zero_multiplicity",
    "check_ode_tbwp",
    "classify_equilibrium_branch",
    "enumerate_trees",
    "find_equilibrium",
    "fundamental_matrices",
    "load_netlist",
    "mr_product_sum",
    "normal_form_dae",
    "parse_netlist",
    "pencil_spectrum",
    "stability_exchange_experiment",
    "trace_equilibrium_line",
]
