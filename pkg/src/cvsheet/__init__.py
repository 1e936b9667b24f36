"""Simulator and analysis toolkit for the 2D ideal incompressible MHD
current-vortex sheet between two rigid walls, under a horizontal background
magnetic field.

Layout:
    spectral     1D Fourier kit: fractional derivatives, weights, ghost factors
    geometry     interface state, strip maps, metric terms, tangential lift
    fields       Elsasser containers, mapped div/curl, div-curl reconstruction
    elliptic     mapped Poisson solvers, two-layer pressure problem, DN operator
    surface      interface wave equation RHS, kinematics, amplitude bound
    vorticity    transport RHS for the scalar vorticity/current variables
    evolution    RK4 and fixed-point (Picard) time steppers, checkpointing
    diagnostics  weighted and ghost energies, budgets, report rows
    linstab      planar two-layer dispersion relation and thresholds
    cli          config parsing, presets, run orchestration, validation suite
"""

__version__ = "0.1.0"
