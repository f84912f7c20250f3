"""Binary smoke detection with a sigmoid head and ROC analysis.

Trains the binary variant (shared conv backbone, 256-relu / 1-sigmoid
head, binary cross-entropy) on the smoke-vs-clear synthetic pair and
prints the validation ROC curve and its AUC.
"""

import tempfile
from pathlib import Path

from specklecut.imaging import ChannelMode
from specklecut.metrics import roc_auc
from specklecut.synth import SynthDatasetSpec, generate_dataset, smoke_detection_classes
from specklecut.training import TrainConfig, evaluate, fit
from specklecut.zoo import smoke_binary

SEED = 21


def main():
    root = Path(tempfile.mkdtemp(prefix="specklecut_smoke_")) / "data"
    spec = SynthDatasetSpec(classes=smoke_detection_classes(),
                            images_per_class=24, image_size=64,
                            laser_wavelength_nm=650, seed=SEED)
    index = generate_dataset(spec, root)
    print(f"dataset: {len(index)} images, classes {index.classes} "
          f"(label 1 = {index.classes[1]})")

    net = smoke_binary(input_side=64, seed=SEED)
    cfg = TrainConfig(learning_rate=0.001, batch_size=16, epochs=10,
                      early_stop_patience=10, seed=SEED, loss="binary_ce")
    mode = ChannelMode.by_wavelength(650)
    net, history = fit(net, index.split("train"), index.split("val"),
                       cfg, mode)
    for i, e in enumerate(history.epochs):
        print(f"epoch {i:>2}: train_acc={e.train_acc:.3f} "
              f"val_acc={e.val_acc:.3f} val_loss={e.val_loss:.4f}")

    val = index.split("val")
    _, acc, probs = evaluate(net, val, mode)
    curve = roc_auc(probs[:, 0], val.labels())
    print(f"\nvalidation accuracy {acc:.3f}, ROC AUC {curve.auc:.4f}")
    print("fpr -> tpr points:")
    for fpr, tpr in zip(curve.fpr, curve.tpr):
        print(f"  {fpr:.3f} -> {tpr:.3f}")


if __name__ == "__main__":
    main()
