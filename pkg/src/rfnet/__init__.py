"""One-shot RF human activity recognition with a trainable metric head.

Subpackages and modules:

* ``rfnet.numerics``: numpy tensors with reverse-mode gradients, layers, Adam.
* ``rfnet.signal_sim``: synthetic Wi-Fi CSI, FMCW and impulse-radio signal matrices.
* ``rfnet.base_network``: the dual-path (spatial CNN + attentive LSTM) network.
* ``rfnet.meta``: metric head, residual classification and episodic training.
* ``rfnet.baselines``: fine-tuning, prototypical network and frozen-metric ablation.
* ``rfnet.harness``: file formats, cross-validation, reports, selftest and the CLI.
"""
__version__ = "0.1.0"
