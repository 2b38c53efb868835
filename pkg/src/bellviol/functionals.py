"""Named Bell functionals: CHSH, Mermin family and seeded Gaussian ones."""

from __future__ import annotations

import itertools
import re

import numpy as np

from .tensor_core import BellFunctional, ValidationError


def chsh() -> BellFunctional:
    return BellFunctional(np.array([[1.0, 1.0], [1.0, -1.0]]))


def mermin(parties: int) -> BellFunctional:
    """Imaginary part of ``prod_k (a^k_0 + i a^k_1)`` expanded as a 2 x ... x 2 tensor."""
    if parties < 2:
        raise ValidationError("Mermin functional needs at least 2 parties")
    coeffs = np.zeros((2,) * parties)
    for idx in itertools.product((0, 1), repeat=parties):
        coeffs[idx] = (1j ** sum(idx)).imag
    return BellFunctional(coeffs)


def random_functional(parties: int, settings: int, seed: int) -> BellFunctional:
    """Standard Gaussian coefficients."""
    rng = np.random.default_rng(seed)
    return BellFunctional(rng.standard_normal((settings,) * parties))


def pad_settings(T: BellFunctional, settings: int) -> BellFunctional:
    """Embed ``T`` into ``settings`` settings per party with zero coefficients."""
    if any(m > settings for m in T.settings):
        raise ValidationError(f"cannot pad settings {T.settings} down to {settings}")
    coeffs = np.zeros((settings,) * T.num_parties)
    coeffs[tuple(slice(0, m) for m in T.settings)] = T.coeffs
    return BellFunctional(coeffs)


def add_trivial_party(T: BellFunctional) -> BellFunctional:
    """Append a party with a single setting (measuring the identity on C^1)."""
    return BellFunctional(T.coeffs[..., None])


_RANDOM = re.compile(r"random\(\s*(\d+)\s*,\s*(\d+)\s*(?:,\s*(?:seed\s*=\s*)?(-?\d+)\s*)?\)")


def builtin_functional(name: str) -> BellFunctional:
    """Look up ``chsh``, ``mermin3``, ``mermin4`` or ``random(N,M,seed)``."""
    key = name.strip().lower()
    if key == "chsh":
        return chsh()
    if key == "mermin3":
        return mermin(3)
    if key == "mermin4":
        return mermin(4)
    m = _RANDOM.fullmatch(key)
    if m:
        seed = int(m.group(3)) if m.group(3) is not None else 0
        return random_functional(int(m.group(1)), int(m.group(2)), seed)
    raise ValidationError(f"unknown builtin functional {name!r} (chsh, mermin3, mermin4, random(N,M,seed))")
