"""Semi-supervised vs supervised-only training with scarce labels.

Pretrains unsupervised on all expert features, fine-tunes on 10% of the
labels, and compares against training from scratch on the same 10%.
"""

from expclr import (EncoderConfig, MarginSpec, SimilaritySpec, TrainConfig,
                    encode, fine_tune, fit_linear_probe, probe_accuracy,
                    reference_dataset, split, train)

LABEL_FRACTION = 0.1

dataset = reference_dataset()
train_ds, val_ds = split(dataset, 0.8, seed=0)

encoder_cfg = EncoderConfig(in_channels=dataset.channels, length=dataset.length,
                            blocks=4, hidden_channels=16, kernel_size=3,
                            head_hidden=32, embedding_dim=16, seed=0)


def base_config(**overrides):
    cfg = dict(mode="U", loss_kind="expclr", similarity=SimilaritySpec(kind="quadratic"),
               margin=MarginSpec(delta=1.0, tau=1.0), epochs=15, batch_size=64,
               learning_rate=1e-2, decay=0.99, seed=0)
    cfg.update(overrides)
    return TrainConfig(**cfg)


def probe_score(params):
    e_train = encode(params, train_ds.x)
    e_val = encode(params, val_ds.x)
    probe = fit_linear_probe(e_train, train_ds.labels, seed=0)
    return probe_accuracy(probe, e_val, val_ds.labels)


print(f"labelled subset: {LABEL_FRACTION:.0%} of {train_ds.n} training samples\n")

# supervised only: contrastive loss on one-hot labels of the subset
sup_params, _ = train(base_config(mode="S", label_fraction=LABEL_FRACTION),
                      train_ds, encoder_cfg)
sup_acc = probe_score(sup_params)
print(f"supervised only (S)      : linear probe {sup_acc:.3f}")

# semi-supervised: unsupervised pretrain on everything, then fine-tune
pre_params, _ = train(base_config(mode="U"), train_ds, encoder_cfg)
pre_acc = probe_score(pre_params)
print(f"unsupervised pretrain (U): linear probe {pre_acc:.3f}")

ss_params, _ = fine_tune(pre_params,
                         base_config(mode="SS", label_fraction=LABEL_FRACTION),
                         train_ds)
ss_acc = probe_score(ss_params)
print(f"pretrain + fine-tune (SS): linear probe {ss_acc:.3f}")

print(f"\nSS - S gap: {100 * (ss_acc - sup_acc):+.1f} points "
      f"(pretraining pays off when labels are scarce)")
