import json
import os
import subprocess
import sys

import numpy as np

from ntalab import backend
from ntalab.geometry import hong_cone
from ntalab.potential import _riesz_sum
from ntalab.wos import WalkConfig, run_walks

CHILD = r"""
import json
import numpy as np
from ntalab import backend
from ntalab.geometry import hong_cone
from ntalab.potential import _riesz_sum
from ntalab.wos import WalkConfig, run_walks

b = run_walks(hong_cone(), [1.0, 0, 0, 0], WalkConfig(walks=300, seed=9))
atoms = np.random.default_rng(0).normal(size=(5000, 3))
r = _riesz_sum(atoms, np.ones(5000), np.array([4.0, 0, 0]), np.array([0, 4.0, 0]))
print(json.dumps({"backend": backend(), "hits": b.hits.tolist(), "steps": b.steps.tolist(), "riesz": r.tolist()}))
"""


def run_child(disable):
    env = dict(os.environ)
    env.pop("NTALAB_DISABLE_NUMBA", None)
    if disable:
        env["NTALAB_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", CHILD], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_numpy_fallback_matches_numba():
    slow = run_child(True)
    assert slow["backend"] == "numpy"
    b = run_walks(hong_cone(), [1.0, 0, 0, 0], WalkConfig(walks=300, seed=9))
    assert np.allclose(slow["hits"], b.hits, rtol=1e-10, atol=1e-10)
    assert slow["steps"] == b.steps.tolist()
    atoms = np.random.default_rng(0).normal(size=(5000, 3))
    r = _riesz_sum(atoms, np.ones(5000), np.array([4.0, 0, 0]), np.array([0, 4.0, 0]))
    assert np.allclose(slow["riesz"], r, rtol=1e-12)


def test_default_backend_is_numba():
    fast = run_child(False)
    assert fast["backend"] == backend() == "numba"
