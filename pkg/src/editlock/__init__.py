"""editlock: selective suppression of prompt-conditioned image edits.

Fine-tunes a toy prompt-conditioned diffusion manipulator so that edits on a
forbid set collapse to vague (low-pass) targets while edits on a permit set
are preserved, and evaluates the trade-off with FID / IS / feature-similarity
aggregates.
"""

__version__ = "0.1.0"
