"""Abstract memory: a fixed set of synopsis tokens updated by distance-softmax
attention with running-mean accumulation.

Each absorbed input distributes exactly one unit of attention mass across the
tokens, so total mass grows by one per input and every token stays a convex
combination of its seed and the inputs it has attended to. All inputs of one
update attend to the pre-update tokens, which makes the update permutation
invariant within a call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import pairwise_sq_dists


@dataclass(frozen=True)
class AbstractMemory:
    tokens: np.ndarray       # (n_abs, dim) float64
    mass: np.ndarray         # (n_abs,) float64, non-decreasing over time
    temperature: float       # softmax temperature, frozen at init
    # Kahan compensation for mass: keeps total mass drift bounded instead of
    # growing with the number of absorbed inputs.
    mass_comp: np.ndarray = None

    def __post_init__(self):
        if self.mass_comp is None:
            object.__setattr__(self, "mass_comp", np.zeros_like(self.mass))

    @property
    def n_abs(self) -> int:
        return len(self.mass)

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())


def sa_init(n_abs: int, first_inputs: list[np.ndarray]) -> AbstractMemory:
    """Seed the synopsis from the earliest inputs, cycling if there are fewer
    than n_abs. Temperature is the mean pairwise squared distance among the
    seeded tokens (1.0 when degenerate) and never changes afterwards.
    """
    if n_abs < 1:
        raise ValueError("n_abs must be >= 1")
    if not first_inputs:
        raise ValueError("sa_init requires at least one input vector")
    inputs = [np.asarray(v, dtype=np.float64) for v in first_inputs]
    dim = inputs[0].size
    if any(v.size != dim for v in inputs):
        raise ValueError("all seed vectors must share one dimensionality")
    tokens = np.stack([inputs[i % len(inputs)] for i in range(n_abs)])
    tau = 1.0
    if n_abs > 1:
        d2 = pairwise_sq_dists(tokens, tokens)
        mean = d2[np.triu_indices(n_abs, 1)].mean()
        if mean > 0:
            tau = float(mean)
    return AbstractMemory(
        tokens=tokens, mass=np.ones(n_abs, dtype=np.float64), temperature=tau
    )


def sa_update(mem: AbstractMemory, new_tokens: list[np.ndarray]) -> AbstractMemory:
    """Fold a batch of inputs into the synopsis.

    For input x_j, attention over tokens i is softmax_i(-d(token_i, x_j)/tau);
    each token then takes the mass-weighted running mean of itself and its
    attended share of the inputs. Empty input is the identity.
    """
    if not new_tokens:
        return mem
    x = np.stack([np.asarray(v, dtype=np.float64) for v in new_tokens])
    if x.shape[1] != mem.tokens.shape[1]:
        raise ValueError(
            f"input dim {x.shape[1]} != token dim {mem.tokens.shape[1]}"
        )
    logits = -pairwise_sq_dists(mem.tokens, x) / mem.temperature
    logits -= logits.max(axis=0, keepdims=True)
    a = np.exp(logits)
    a /= a.sum(axis=0, keepdims=True)          # (n_abs, m); columns sum to 1
    gained = a.sum(axis=1)
    # compensated accumulation of mass
    y = gained - mem.mass_comp
    new_mass = mem.mass + y
    comp = (new_mass - mem.mass) - y
    tokens = (mem.mass[:, None] * mem.tokens + a @ x) / new_mass[:, None]
    return AbstractMemory(
        tokens=tokens, mass=new_mass, temperature=mem.temperature, mass_comp=comp
    )
