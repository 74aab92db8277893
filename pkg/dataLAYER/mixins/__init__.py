from .file_io_mixin import FileIOMixin

__all__ = [
    "FileIOMixin",
]


