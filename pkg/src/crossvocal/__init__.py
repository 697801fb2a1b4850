"""Cross-domain speaker verification toolkit for stage speech and singing.

Pipeline pieces: utterance manifests and dataset splits, a log-Mel frontend,
a ResNet34 embedding extractor with statistics pooling, domain-adversarial
feature disentanglement, contrastive Siamese training over cross-domain
same-speaker pairs, trial construction, and EER / minimum-DCF scoring.
"""

__version__ = "0.1.0"
