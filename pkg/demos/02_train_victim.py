"""Train a hybrid classifier with SPSA + Adam on the reference blobs task.

Uses a reduced epoch budget so the demo finishes in well under a minute;
configs/reference.yaml holds the full 25-epoch setup.
"""

import numpy as np

from qsteal import (
    PQCTemplate,
    TrainConfig,
    accuracy,
    default_registry,
    init_model,
    make_blobs,
    train,
    train_test_split,
)

task = make_blobs(k=4, d=8, n_per_class=150, separation=8.0, seed=7)
train_ds, test_ds = train_test_split(task, seed=7, train_size=400)
print(f"task: {task.name}, {train_ds.n} train / {test_ds.n} test, d={task.d}")

registry = default_registry()
template = PQCTemplate("PQC19", 4)
cfg = TrainConfig(epochs=10, learning_rate=0.01, batch_size=32, loss="nll_top1", spsa_draws=8)

model = init_model(template, k=4, seed=1)
print(f"model: {template.id} x {template.n_qubits} qubits, "
      f"{model.n_params} trainable parameters (circuit {template.param_count} + head)")

trained, history = train(
    model, train_ds.features, train_ds.labels, cfg,
    registry.get("ideal"), seed=1, eval_features=test_ds.features, eval_labels=test_ds.labels,
)
for i, e in enumerate(history.epochs):
    print(f"epoch {i + 1:>2}: train loss {e.train_loss:.3f}  "
          f"test acc {e.test_accuracy:.3f}  test loss {e.test_loss:.3f}")

print("\naccuracy under noise (same trained parameters):")
for name in ("ideal", "devA", "devB"):
    acc = accuracy(trained, test_ds, registry.get(name))
    print(f"  {name}: {acc:.3f}")
