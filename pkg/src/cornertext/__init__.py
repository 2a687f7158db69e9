"""Corner-guided transformer for artistic text recognition.

Classic corner detection produces a sparse keypoint map that steers a
cross-attention text recognizer; training couples cross-entropy with a
character-level contrastive objective. Everything runs on a small float64
autodiff engine so gradients stay finite-difference checkable.
"""

__version__ = "0.1.0"
