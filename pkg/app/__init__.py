"""revcache: revision-keyed cache invalidation for subspace queries"""

__version__ = "1.0.0"
