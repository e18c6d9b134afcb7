"""sof: a desk-scale smart-home face recognition system.

Edge camera nodes recognize faces against a cached model snapshot, a cloud
hub collects escalations and owner labels, a trainer incrementally
fine-tunes the embedder with triplet loss, and versioned snapshots flow
back to the nodes.
"""

__version__ = "0.1.0"
