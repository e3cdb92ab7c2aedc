"""Entanglement tanglemeters, invariants and canonic forms of multi-element quantum states."""

from .errors import TanglemeterError
from .nilring import NilPoly, MulRule, exp_nil, log_unit
from .states import (StateVector, to_poly, from_poly, nilpotential, is_unentangled, reduced_density,
                     entropies, schmidt_values, merge, random_state, product_state, load_state,
                     save_state)
from .localops import LocalOp, GateOp, su_op, sl_op, apply_local, apply_matrix
from .dynamics import HamiltonianSpec, Family, IntegratorCfg, evolve_nilpotential, evolve_state
from .canon import (Tanglemeter, ClassLabel, su_canonicalize, sl_canonicalize, classify3, classify4,
                    class_representative, class_state, stabilizer_dimension, orbit_coset_dimension)
from .invariants import (invariants2, invariants3, invariants4, three_tangle, concurrence,
                         reconstruct4, measures4, sample_figpoly, zeta_filter, peres_relations,
                         graph_export)
from .qudit import (CartanWeyl, RestrictedAlgebra, spin1_algebra, qudit_su_canonicalize,
                    generating_function, spin1_canonicalize)

__version__ = "0.1.0"
