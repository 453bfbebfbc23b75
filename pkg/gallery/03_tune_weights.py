"""Bayesian optimisation of the three reconstruction weights.

First on a quadratic whose minimum is known, then on the real validation
loss of a small graph with a short inner training run.
"""

import numpy as np

from vgaeplus import TrainConfig, induced_subgraph, planted_partition, split_nodes
from vgaeplus.tuning import mock_objective, tune_weights, validation_objective

best, state = tune_weights(mock_objective, budget=25, seed=0)
print("quadratic: best", np.round(best, 3), "true minimum (0.3, 0.7, 0.5)")
print("iter  alpha  beta   gamma  objective  best so far")
for i, a, b, g, obj, run in state.trace():
    print(f"{i:4d}  {a:.3f}  {b:.3f}  {g:.3f}  {obj:9.5f}  {run:9.5f}")

graph = planted_partition(n_nodes=100, seed=1)
split = split_nodes(graph, 1)
tr, va = induced_subgraph(graph, split.train), induced_subgraph(graph, split.validation)
inner = TrainConfig(epochs=60, embedding_dim=16, hidden_dim=32, seed=1)
objective = lambda w: validation_objective(w, tr, va, inner)  # noqa: E731

best, state = tune_weights(objective, budget=12, seed=1)
print("\nvalidation loss: best weights", np.round(best, 3), f"loss {state.best[1]:.4f}")
print(f"all weights zero: loss {objective((0.0, 0.0, 0.0)):.4f}")
