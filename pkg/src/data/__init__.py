from .store import ArtifactStore, file_digest

__all__ = [
    "ArtifactStore",
    "file_digest",
]
