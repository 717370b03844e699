"""Mixed displacement-pressure finite elements for finite-strain hyperelasticity."""

from .assembly import (
    DirichletBC,
    DofMap,
    LoadProgram,
    NeumannBC,
    NewtonSolver,
    Problem,
    Tolerances,
    assemble,
    linear_solve,
    newton_solve,
)
from .elements import BasisFamily, QuadratureRule, mixed_element, quadrature_rule, shape_eval
from .formulations import FormulationKind, condense, constraint_eval, update_history
from .materials import DeviatoricModel, Material, VolumetricModel, dev_eval, vol_eval
from .mesh import Mesh, generate_block_mesh, hex_to_tet, read_mesh, write_mesh

__version__ = "0.1.0"
