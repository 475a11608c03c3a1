"""Steal a served model through black-box queries.

Trains a victim, exposes it behind a predict-only service, queries it with
a mixed pool of unrelated datasets, and trains clones from Top-1 labels
versus full Top-k probability vectors.
"""

import numpy as np

from qsteal import (
    AttackSpec,
    PQCTemplate,
    TrainConfig,
    default_registry,
    init_model,
    make_blobs,
    make_npd_sources,
    no_defense,
    train,
    train_test_split,
)
from qsteal.attack import run_attack

TASK_SEED = 7
task = make_blobs(k=4, d=8, n_per_class=150, separation=8.0, seed=TASK_SEED)
train_ds, test_ds = train_test_split(task, seed=TASK_SEED, train_size=400)
registry = default_registry()
ideal = registry.get("ideal")

cfg = TrainConfig(epochs=12, learning_rate=0.01, batch_size=32, loss="nll_top1", spsa_draws=8)
victim = init_model(PQCTemplate("PQC19", 4), k=4, seed=1)
victim, hist = train(victim, train_ds.features, train_ds.labels, cfg, ideal, 1,
                     test_ds.features, test_ds.labels)
victim_acc = hist.final.test_accuracy
print(f"victim test accuracy: {victim_acc:.3f}")

# the attacker only sees this endpoint
service = no_defense(victim, ideal, seed=1)
sources = make_npd_sources(4, 8, 150, 8.0, TASK_SEED)
print(f"query pool: {[s.name for s in sources]}")

shared = dict(query_sources=sources, d=8, train_cfg=cfg, clone_profile=ideal,
              eval_data=test_ds, victim_accuracy=victim_acc)

for mode in ("top1", "topk"):
    spec = AttackSpec(mode=mode, da_size=700, query_kind="mixed", seed=1)
    clone, report = run_attack(service, spec, **shared)
    print(f"{mode:>5} clone: accuracy {report.clone_accuracy:.3f}  "
          f"ratio {report.ratio:.3f}x of the victim")

spec = AttackSpec(mode="topk", da_size=700, query_kind="random", seed=1)
_, report = run_attack(service, spec, **shared)
print(f"topk clone from random queries: accuracy {report.clone_accuracy:.3f}  "
      f"ratio {report.ratio:.3f}x")
