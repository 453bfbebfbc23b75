"""Train on a two-block planted-partition graph and score the query families.

Nodes of the same block link with probability 0.3 and across blocks with
0.02.  Features and labels follow the block, so labels are easy while a
single held-out link can only be guessed from block membership.
"""

import time

from vgaeplus import TrainConfig, evaluate, generate, induced_subgraph, planted_partition, split_nodes, train
from vgaeplus.queries import FAMILIES

seed = 0
graph = planted_partition(n_nodes=200, seed=seed)
split = split_nodes(graph, seed)
print(f"{graph.n_nodes} nodes, {graph.n_links} links; split {len(split.train)}/{len(split.validation)}/{len(split.test)}")

# Only the training nodes and the links among them are visible during training.
t0 = time.perf_counter()
model = train(induced_subgraph(graph, split.train), TrainConfig(seed=seed))
print(f"trained in {time.perf_counter() - t0:.1f}s, final loss {model.trace[-1]['total_loss']:.4f}")

print(f"\n{'family':16s} {'mode':15s} {'link':>6s} {'label':>6s} {'joint':>6s} {'HR@20':>6s} {'F1':>6s}")
fmt = lambda v: "     -" if v is None else f"{v:6.3f}"  # noqa: E731
for family in FAMILIES:
    for mode in ("semi_inductive", "inductive"):
        suite = generate(graph, split, family, mode, seed)
        if len(suite) == 0:
            continue
        r = evaluate(model, suite)
        hr = "     -" if r.hr20 is None else f"{r.hr20:6.1f}"
        print(f"{family:16s} {mode:15s} {fmt(r.link_auc)} {fmt(r.label_auc)} {fmt(r.joint_auc)} {hr} {fmt(r.f1_macro)}")
