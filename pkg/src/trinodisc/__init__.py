"""Verification tools for trinomial discriminants.

Exact quadratic-form arithmetic, certified singular moduli, the margin
screen for small discriminants, the residue/character sieve and the
p-adic check for class number 3.
"""

from .ntheory import factor, is_prime, kronecker, valuation
from .quadforms import (
    InvalidDiscriminant,
    ReducedForm,
    class_number,
    enumerate_forms,
    recipe_suitable,
    suitable_integers,
)
from .singular_moduli import (
    delta_stats,
    eval_j,
    hilbert_class_poly,
)

__version__ = "0.1.0"

# ``singular_moduli`` the function lives in the module of the same name and
# is not re-exported, so ``trinodisc.singular_moduli`` stays the module.

__all__ = [
    "InvalidDiscriminant",
    "ReducedForm",
    "class_number",
    "delta_stats",
    "enumerate_forms",
    "eval_j",
    "factor",
    "hilbert_class_poly",
    "is_prime",
    "kronecker",
    "recipe_suitable",
    "suitable_integers",
    "valuation",
]
