"""blastokit: CNN-LSTM blastocyst grading with a from-scratch LIME engine.

Subpackages
-----------
imgcore   image I/O, geometric augmentation, dataset assembly and splits
nn        layer kernels with hand-derived gradients, Adam, checkpoints
model     the 13-conv CNN-LSTM topology, training and cross-validation
lime      superpixel surrogate explanations (segmentation through overlays)
metrics   confusion-matrix metrics and ROC/AUC
cli       the `blastokit` command-line entry point
"""

__version__ = "0.1.0"
