"""Reduced-order modelling of boundary optimal control for unsteady
Navier-Stokes flow in branching vessels.

Modules
-------
linalg      dense and sparse solvers, SVD, Gram-Schmidt
geometry    channel and bifurcation meshes, centerlines, mesh files
fem         Taylor-Hood spaces and operator assembly
scenarios   configuration, inlet and target profiles, training sets
fom         full-order one-shot solver and checkpoints
supremizer  pressure supremizers
pod         single-stage and nested POD
rom         projected operators and the reduced solver
post        cost, wall shear stress, error norms, CSV output
cli         command line (``python -m ocprom``)
"""

__version__ = "0.1.0"
