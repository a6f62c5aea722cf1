"""Named benchmark datasets.

``concrete`` is the UCI Concrete Compressive Strength table (1030 rows, 8
features), bundled as CSV. The UCI Energy Efficiency, Airfoil Self-Noise and
Geographical Origin of Music tables are not bundled; ``energy``, ``airfoil``
and ``music`` are seeded synthetic stand-ins with the same row counts, feature
counts and rough feature semantics. Point ``load_csv`` at the real files to
use them instead.
"""

from __future__ import annotations

from importlib import resources
from itertools import product

import numpy as np

from .data import Dataset, load_csv

SYNTHETIC_SEED = 20170101


def concrete() -> Dataset:
    with resources.as_file(resources.files(__package__) / "resources" / "concrete.csv") as path:
        return load_csv(path, name="concrete")


def energy(seed: int = SYNTHETIC_SEED) -> Dataset:
    """768-row full-factorial building design grid with a synthetic heating load."""
    shapes = [  # relative compactness, surface, wall, roof area, overall height
        (0.98, 514.5, 294.0, 110.25, 7.0), (0.90, 563.5, 318.5, 122.50, 7.0),
        (0.86, 588.0, 294.0, 147.00, 7.0), (0.82, 612.5, 318.5, 147.00, 7.0),
        (0.79, 637.0, 343.0, 147.00, 7.0), (0.76, 661.5, 416.5, 122.50, 7.0),
        (0.74, 686.0, 245.0, 220.50, 3.5), (0.71, 710.5, 269.5, 220.50, 3.5),
        (0.69, 735.0, 294.0, 220.50, 3.5), (0.66, 759.5, 318.5, 220.50, 3.5),
        (0.64, 784.0, 343.0, 220.50, 3.5), (0.62, 808.5, 367.5, 220.50, 3.5),
    ]
    glazing = [(0.0, 0)] + [(a, g) for a in (0.10, 0.25, 0.40) for g in range(1, 6)]
    rows = [(*s, o, a, g) for s, o, (a, g) in product(shapes, range(2, 6), glazing)]
    X = np.array(rows, dtype=np.float64)
    rng = np.random.default_rng(seed)
    rc, sa, wa, ra, oh, orient, ga, gd = X.T
    y = (2.0 + 3.9 * oh + 20.0 * (rc - 0.62) + 0.012 * (wa - 245.0) + 24.0 * ga
         + 0.9 * (gd > 0) * (gd - 3.0) * ga + 0.15 * (orient - 3.5) + rng.normal(0.0, 0.6, len(X)))
    return Dataset(X, y, "energy")


def airfoil(seed: int = SYNTHETIC_SEED) -> Dataset:
    """1503 rows: frequency, angle, chord, velocity, displacement thickness -> sound level (dB)."""
    rng = np.random.default_rng(seed)
    n = 1503
    freq = np.array([200, 250, 315, 400, 500, 630, 800, 1000, 1250, 1600, 2000, 2500,
                     3150, 4000, 5000, 6300, 8000, 10000, 12500, 16000, 20000], dtype=float)
    f = rng.choice(freq, n)
    angle = rng.choice(np.round(np.linspace(0.0, 22.2, 27), 1), n)
    chord = rng.choice([0.0254, 0.0508, 0.1016, 0.1524, 0.2286, 0.3048], n)
    velocity = rng.choice([31.7, 39.6, 55.5, 71.3], n)
    thickness = chord * (0.004 + 0.0065 * angle) * np.exp(rng.normal(0.0, 0.25, n)) \
        * (velocity / 50.0) ** -0.2
    logf = np.log10(f)
    y = (126.0 + 12.0 * np.log10(velocity / 31.7) - 5.5 * (logf - 3.1 + 0.8 * chord) ** 2
         - 30.0 * chord - 120.0 * thickness + 0.1 * angle + rng.normal(0.0, 1.5, n))
    X = np.column_stack([f, angle, chord, velocity, thickness])
    return Dataset(X, y, "airfoil")


def music(seed: int = SYNTHETIC_SEED) -> Dataset:
    """1059 rows of 68 correlated audio-like descriptors -> latitude-like target."""
    rng = np.random.default_rng(seed)
    n, d, k = 1059, 68, 6
    region = rng.normal(size=(n, k))
    loadings = rng.normal(scale=0.8, size=(k, d))
    X = region @ loadings + rng.normal(scale=0.7, size=(n, d))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    y = (28.0 + 9.0 * np.tanh(region[:, 0]) + 5.0 * np.tanh(region[:, 1] - 0.5 * region[:, 2])
         + 3.0 * region[:, 3] * (region[:, 0] > 0) + rng.normal(0.0, 3.0, n))
    return Dataset(X, y, "music")


REGISTRY = {"concrete": concrete, "energy": energy, "airfoil": airfoil, "music": music}
SYNTHETIC = frozenset({"energy", "airfoil", "music"})


def load(name_or_path: str, target_column=None) -> Dataset:
    """A registry name, or a CSV path."""
    if name_or_path in REGISTRY:
        return REGISTRY[name_or_path]()
    return load_csv(name_or_path, target_column)
