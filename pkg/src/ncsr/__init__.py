"""Noncommutative surfaces of rotation: algebras, lattices and calculus."""
from .kernels import BACKEND
from .profile import ProfileCurve, ProfileError, enumerate_rep_intervals, polynomial_profile, topology_intervals, validate_profile
from .algebra import NormalForm, commutator, dagger, mu, normalize
from .representation import StandardRep, TrivialLattice, represent, standard_rep, trivial_lattice, verify_relations
from .multitop import apply_compromise, build_G0, is_AN_representation, reflects_topology, topo_change_maps, violations
from .calculus import GradedFunction, d_nc, derivation_to_inner, laplacian, metric_pair, poisson

__version__ = "0.1.0"
