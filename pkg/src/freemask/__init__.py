"""Attention-map masks, co-occurrence matching, placement losses, occlusion-aware
composition and iterative sample curation for synthetic segmentation data."""

__version__ = "0.1.0"
