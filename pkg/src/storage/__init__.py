"""On-disk formats: run configs, checkpoints, images, manifests and predictions."""
