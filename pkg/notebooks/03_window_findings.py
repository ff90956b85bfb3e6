# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Where the energy of an assembled chain lives
#
# Window energies are split into tail, center, right-center and junction
# classes. Tails vanish by construction; the rest is measured.

# %%
import json

import numpy as np

from mpshl.bqp import BqpInstance
from mpshl.mps import energy, window_profile
from mpshl.oracles import windows_decomposition_check
from mpshl.reduction import assemble_instance, shortcut_energy

inst = assemble_instance(BqpInstance(np.array([[-0.5, 0.3], [0.3, 0.2]])))
rng = np.random.default_rng(0)
c, d = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
psi = inst.with_variables(c, d)

prof = window_profile(psi, inst.hamiltonian)
nonzero = [(s, v) for s, v in prof if v != 0.0]
print(len(prof), "windows,", len(nonzero), "nonzero")
print("sum =", sum(v for _, v in prof), " energy() =", energy(psi, inst.hamiltonian))

# %%
x, y = np.abs(c) ** 2, np.abs(d) ** 2
print("shortcut  :", shortcut_energy(x, y, inst))
print("x Y y / N :", x @ inst.Y @ y / inst.N)

# %% [markdown]
# The full characterization over several random assignments.

# %%
rep = windows_decomposition_check(inst, samples=20, seed=1)
print(rep.passed)
print(json.dumps(rep.payload["findings"], indent=2))
